#ifndef SPECMINE_TRACE_HPP
#define SPECMINE_TRACE_HPP

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "specmine/error.hpp"

namespace specmine {

// Scalar values carried by events: integers and account-id strings.
using Scalar = std::variant<std::int64_t, std::string>;

inline std::string scalar_to_string(const Scalar& s) {
    if (std::holds_alternative<std::int64_t>(s)) return std::to_string(std::get<std::int64_t>(s));
    return std::get<std::string>(s);
}

enum class LocationKind { Storage, BlockAttribute, Balance };

// A named piece of persistent state. Account balances are modeled but
// excluded from effect computation downstream.
struct Location {
    LocationKind kind = LocationKind::Storage;
    std::string name;

    friend bool operator==(const Location&, const Location&) = default;
    friend auto operator<=>(const Location&, const Location&) = default;
};

enum class AccessMode { Read, Write };

struct AccessRecord {
    AccessMode mode = AccessMode::Read;
    Location location;
    std::uint32_t ordinal = 0; // position within the transaction's execution

    friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

enum class EventStatus { Ok, Error };

struct EventRecord {
    std::string caller;
    std::string callee;
    std::string signature; // function name or "contract creation"
    std::vector<Scalar> inputs;
    std::optional<Scalar> output; // absent on Error
    std::int64_t value = 0;       // transferred currency units, non-negative
    EventStatus status = EventStatus::Ok;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct TransactionRecord {
    std::string id;
    std::uint64_t block_number = 0;
    bool ghost = false;
    std::vector<AccessRecord> accesses;
    std::vector<EventRecord> events; // empty iff ghost

    // The top-level invocation decides whether the transaction reverted.
    bool reverted() const {
        return !ghost && !events.empty() && events.front().status == EventStatus::Error;
    }

    friend bool operator==(const TransactionRecord&, const TransactionRecord&) = default;
};

struct TraceLedger {
    std::vector<TransactionRecord> transactions; // blockchain order
    std::optional<std::string> seed_id;

    bool has_ghosts() const {
        return std::any_of(transactions.begin(), transactions.end(),
                           [](const TransactionRecord& t) { return t.ghost; });
    }

    const TransactionRecord* find(const std::string& id) const {
        for (const auto& t : transactions)
            if (t.id == id) return &t;
        return nullptr;
    }

    friend bool operator==(const TraceLedger&, const TraceLedger&) = default;
};

namespace detail {

inline Scalar scalar_from_json(const nlohmann::json& j, std::size_t line) {
    if (j.is_number_integer()) return Scalar(j.get<std::int64_t>());
    if (j.is_string()) return Scalar(j.get<std::string>());
    throw Error(Errc::MalformedRecord, "line " + std::to_string(line) + ": scalar must be integer or string");
}

inline nlohmann::ordered_json scalar_to_json(const Scalar& s) {
    if (std::holds_alternative<std::int64_t>(s)) return std::get<std::int64_t>(s);
    return std::get<std::string>(s);
}

inline LocationKind location_kind_from_string(const std::string& k, std::size_t line) {
    if (k == "storage") return LocationKind::Storage;
    if (k == "block") return LocationKind::BlockAttribute;
    if (k == "balance") return LocationKind::Balance;
    throw Error(Errc::MalformedRecord, "line " + std::to_string(line) + ": unknown access kind '" + k + "'");
}

inline std::string location_kind_to_string(LocationKind k) {
    switch (k) {
        case LocationKind::Storage: return "storage";
        case LocationKind::BlockAttribute: return "block";
        case LocationKind::Balance: return "balance";
    }
    return "storage";
}

inline EventRecord event_from_json(const nlohmann::json& j, std::size_t line) {
    auto fail = [line](const std::string& msg) -> Error {
        return Error(Errc::MalformedRecord, "line " + std::to_string(line) + ": " + msg);
    };
    if (!j.is_object()) throw fail("event must be an object");
    EventRecord ev;
    if (!j.contains("caller") || !j["caller"].is_string()) throw fail("event missing caller");
    if (!j.contains("callee") || !j["callee"].is_string()) throw fail("event missing callee");
    if (!j.contains("sig") || !j["sig"].is_string()) throw fail("event missing sig");
    ev.caller = j["caller"].get<std::string>();
    ev.callee = j["callee"].get<std::string>();
    ev.signature = j["sig"].get<std::string>();
    if (ev.signature.empty()) throw fail("event signature empty");
    if (j.contains("in")) {
        if (!j["in"].is_array()) throw fail("event 'in' must be an array");
        for (const auto& x : j["in"]) ev.inputs.push_back(scalar_from_json(x, line));
    }
    if (j.contains("out") && !j["out"].is_null()) ev.output = scalar_from_json(j["out"], line);
    if (j.contains("value")) {
        if (!j["value"].is_number_integer() || j["value"].get<std::int64_t>() < 0)
            throw fail("event 'value' must be a non-negative integer");
        ev.value = j["value"].get<std::int64_t>();
    }
    std::string status = j.value("status", "ok");
    if (status == "ok") ev.status = EventStatus::Ok;
    else if (status == "error") ev.status = EventStatus::Error;
    else throw fail("unknown event status '" + status + "'");
    if (ev.status == EventStatus::Error && ev.output.has_value())
        throw fail("error event carries an output");
    return ev;
}

inline nlohmann::ordered_json event_to_json(const EventRecord& ev) {
    nlohmann::ordered_json j;
    j["caller"] = ev.caller;
    j["callee"] = ev.callee;
    j["sig"] = ev.signature;
    j["in"] = nlohmann::ordered_json::array();
    for (const auto& x : ev.inputs) j["in"].push_back(scalar_to_json(x));
    j["out"] = ev.output ? scalar_to_json(*ev.output) : nlohmann::ordered_json(nullptr);
    j["value"] = ev.value;
    j["status"] = ev.status == EventStatus::Ok ? "ok" : "error";
    return j;
}

} // namespace detail

// Parses a line-delimited trace file. Rejects invalid input rather than
// repairing it; ghosts are never present in input files.
inline TraceLedger parse_trace(std::istream& in) {
    TraceLedger ledger;
    std::set<std::string> seen_ids;
    bool seen_seed = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::MalformedRecord, "line " + std::to_string(lineno) + ": invalid JSON");
        }
        auto fail = [lineno](const std::string& msg) -> Error {
            return Error(Errc::MalformedRecord, "line " + std::to_string(lineno) + ": " + msg);
        };
        if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw fail("record missing type");
        const std::string type = j["type"].get<std::string>();
        if (type == "meta") {
            if (!j.contains("seed") || !j["seed"].is_string()) throw fail("meta record missing seed");
            if (seen_seed) throw fail("duplicate meta record");
            ledger.seed_id = j["seed"].get<std::string>();
            seen_seed = true;
            continue;
        }
        if (type != "tx") throw fail("unknown record type '" + type + "'");
        TransactionRecord tx;
        if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
            throw fail("tx missing id");
        tx.id = j["id"].get<std::string>();
        if (!seen_ids.insert(tx.id).second)
            throw Error(Errc::DuplicateTransactionId, "transaction '" + tx.id + "'");
        if (!j.contains("block") || !j["block"].is_number_unsigned())
            throw fail("tx missing block number");
        tx.block_number = j["block"].get<std::uint64_t>();
        if (!ledger.transactions.empty() && tx.block_number < ledger.transactions.back().block_number)
            throw Error(Errc::NonMonotonicBlockNumber,
                        "transaction '" + tx.id + "' in block " + std::to_string(tx.block_number) +
                            " after block " + std::to_string(ledger.transactions.back().block_number));
        if (j.contains("accesses")) {
            if (!j["accesses"].is_array()) throw fail("tx 'accesses' must be an array");
            std::uint32_t ord = 0;
            for (const auto& a : j["accesses"]) {
                if (!a.is_object() || !a.contains("m") || !a.contains("k") || !a.contains("loc"))
                    throw fail("access record needs m/k/loc");
                AccessRecord rec;
                const std::string m = a["m"].get<std::string>();
                if (m == "r") rec.mode = AccessMode::Read;
                else if (m == "w") rec.mode = AccessMode::Write;
                else throw fail("unknown access mode '" + m + "'");
                rec.location.kind = detail::location_kind_from_string(a["k"].get<std::string>(), lineno);
                rec.location.name = a["loc"].get<std::string>();
                if (rec.location.name.empty()) throw fail("empty location name");
                rec.ordinal = ord++;
                tx.accesses.push_back(std::move(rec));
            }
        }
        if (!j.contains("events") || !j["events"].is_array() || j["events"].empty())
            throw fail("tx must carry at least one event");
        for (const auto& e : j["events"]) tx.events.push_back(detail::event_from_json(e, lineno));
        ledger.transactions.push_back(std::move(tx));
    }
    return ledger;
}

inline TraceLedger parse_trace(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

// Writes the line-delimited form. Ghosted ledgers are not serializable;
// ghosts are an analysis artifact, never part of a trace file.
inline void serialize_trace(const TraceLedger& ledger, std::ostream& out) {
    if (ledger.has_ghosts())
        throw Error(Errc::AlreadyGhosted, "ghosted ledgers cannot be serialized");
    for (const auto& tx : ledger.transactions) {
        nlohmann::ordered_json j;
        j["type"] = "tx";
        j["id"] = tx.id;
        j["block"] = tx.block_number;
        j["accesses"] = nlohmann::ordered_json::array();
        for (const auto& a : tx.accesses) {
            nlohmann::ordered_json ja;
            ja["m"] = a.mode == AccessMode::Read ? "r" : "w";
            ja["k"] = detail::location_kind_to_string(a.location.kind);
            ja["loc"] = a.location.name;
            j["accesses"].push_back(std::move(ja));
        }
        j["events"] = nlohmann::ordered_json::array();
        for (const auto& e : tx.events) j["events"].push_back(detail::event_to_json(e));
        out << j.dump() << "\n";
    }
    if (ledger.seed_id) {
        nlohmann::ordered_json j;
        j["type"] = "meta";
        j["seed"] = *ledger.seed_id;
        out << j.dump() << "\n";
    }
}

inline std::string serialize_trace(const TraceLedger& ledger) {
    std::ostringstream out;
    serialize_trace(ledger, out);
    return out.str();
}

inline std::string ghost_id(std::uint64_t block) { return "B" + std::to_string(block); }

// Inserts one ghost transaction per populated block, immediately before the
// block's first transaction. The ghost writes every block attribute, so
// later reads of e.g. block.number find an in-trace writer.
inline TraceLedger insert_ghosts(const TraceLedger& ledger) {
    if (ledger.has_ghosts()) throw Error(Errc::AlreadyGhosted, "ledger already contains ghosts");

    std::set<std::string> attrs = {"block.number", "block.timestamp"};
    std::set<std::string> ids;
    for (const auto& tx : ledger.transactions) {
        ids.insert(tx.id);
        for (const auto& a : tx.accesses)
            if (a.location.kind == LocationKind::BlockAttribute) attrs.insert(a.location.name);
    }

    TraceLedger out;
    out.seed_id = ledger.seed_id;
    std::optional<std::uint64_t> current_block;
    for (const auto& tx : ledger.transactions) {
        if (!current_block || *current_block != tx.block_number) {
            current_block = tx.block_number;
            TransactionRecord ghost;
            ghost.id = ghost_id(tx.block_number);
            if (ids.count(ghost.id))
                throw Error(Errc::DuplicateTransactionId, "ghost id '" + ghost.id + "' collides with a transaction");
            ghost.block_number = tx.block_number;
            ghost.ghost = true;
            std::uint32_t ord = 0;
            for (const auto& name : attrs)
                ghost.accesses.push_back({AccessMode::Write, {LocationKind::BlockAttribute, name}, ord++});
            out.transactions.push_back(std::move(ghost));
        }
        out.transactions.push_back(tx);
    }
    return out;
}

// Suffix of a ghosted ledger starting at the ghost of the seed's block, so
// the seed's own block attributes stay modeled.
inline TraceLedger slice_from_seed(const TraceLedger& ledger, const std::string& seed_id) {
    const TransactionRecord* seed = ledger.find(seed_id);
    if (!seed || seed->ghost) throw Error(Errc::UnknownSeed, "no non-ghost transaction '" + seed_id + "'");
    if (!ledger.has_ghosts()) throw Error(Errc::NotGhosted, "slice requires a ghosted ledger");

    const std::string gid = ghost_id(seed->block_number);
    TraceLedger out;
    out.seed_id = seed_id;
    bool copying = false;
    for (const auto& tx : ledger.transactions) {
        if (!copying && tx.id == gid) copying = true;
        if (copying) out.transactions.push_back(tx);
    }
    if (!copying) throw Error(Errc::NotGhosted, "missing ghost for block " + std::to_string(seed->block_number));
    return out;
}

} // namespace specmine

#endif // SPECMINE_TRACE_HPP
