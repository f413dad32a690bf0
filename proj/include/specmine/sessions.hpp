#ifndef SPECMINE_SESSIONS_HPP
#define SPECMINE_SESSIONS_HPP

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specmine/dependency.hpp"
#include "specmine/error.hpp"
#include "specmine/trace.hpp"

namespace specmine {

// One admissible ordering of the transactions that strongly reach `final`.
struct Session {
    std::string final;
    std::vector<std::string> members; // topological order, ghosts included

    friend bool operator==(const Session&, const Session&) = default;
};

struct History {
    std::vector<EventRecord> events;
    std::string origin_final;
    std::size_t origin_ordering = 0;

    friend bool operator==(const History&, const History&) = default;
};

// Sinks of the filtered graph w.r.t. strong edges.
inline std::set<std::string> final_transactions(const DependencyGraph& g) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.strong_out(i).empty()) out.insert(g.node(i).id);
    return out;
}

struct SessionsResult {
    std::vector<Session> sessions;
    bool truncated = false;
};

// Sessions of one final transaction: the member set is the strong-ancestor
// closure of the final; the sequences are all topological orderings of the
// members. Two members are ordered whenever one reaches the other in the
// filtered graph (strong or weak edges, paths may pass through
// non-members); orderings are enumerated smallest-blockchain-position-first,
// so the first emitted ordering is the blockchain order itself.
inline SessionsResult sessions_for(const DependencyGraph& g, const std::string& final_id,
                                   std::size_t cap) {
    const std::size_t final_idx = g.index_of(final_id);

    // strong ancestors via reverse search
    std::vector<std::vector<std::size_t>> strong_in(g.size());
    for (const auto& [e, k] : g.edges())
        if (k == EdgeKind::Strong) strong_in[e.second].push_back(e.first);
    std::set<std::size_t> members;
    std::vector<std::size_t> todo{final_idx};
    while (!todo.empty()) {
        std::size_t n = todo.back();
        todo.pop_back();
        if (!members.insert(n).second) continue;
        for (std::size_t m : strong_in[n]) todo.push_back(m);
    }

    std::vector<std::size_t> order(members.begin(), members.end()); // ascending = blockchain order

    // Precedence between members: reachability over all edges.
    std::map<std::size_t, std::set<std::size_t>> reach;
    for (std::size_t m : order) {
        std::set<std::size_t>& r = reach[m];
        std::vector<std::size_t> stack(g.all_out(m).begin(), g.all_out(m).end());
        std::set<std::size_t> seen;
        while (!stack.empty()) {
            std::size_t n = stack.back();
            stack.pop_back();
            if (!seen.insert(n).second) continue;
            if (members.count(n)) r.insert(n);
            for (std::size_t x : g.all_out(n)) stack.push_back(x);
        }
    }

    const std::size_t n = order.size();
    std::vector<std::vector<bool>> prec(n, std::vector<bool>(n, false)); // prec[i][j]: i before j
    std::map<std::size_t, std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i) pos[order[i]] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t : reach[order[i]])
            prec[i][pos[t]] = true;

    SessionsResult result;
    std::vector<bool> placed(n, false);
    std::vector<std::size_t> seq;
    seq.reserve(n);

    // Backtracking enumeration in candidate-index order.
    std::vector<std::size_t> frame; // candidate cursor per depth
    auto next_candidate = [&](std::size_t start) -> std::size_t {
        for (std::size_t c = start; c < n; ++c) {
            if (placed[c]) continue;
            bool ready = true;
            for (std::size_t p = 0; p < n && ready; ++p)
                if (!placed[p] && p != c && prec[p][c]) ready = false;
            if (ready) return c;
        }
        return n;
    };

    frame.push_back(next_candidate(0));
    while (!frame.empty()) {
        std::size_t c = frame.back();
        if (c >= n) {
            // exhausted this depth
            frame.pop_back();
            if (!frame.empty()) {
                std::size_t prev = frame.back();
                placed[prev] = false;
                seq.pop_back();
                frame.back() = next_candidate(prev + 1);
            }
            continue;
        }
        placed[c] = true;
        seq.push_back(c);
        if (seq.size() == n) {
            if (result.sessions.size() == cap) {
                result.truncated = true;
                placed[c] = false;
                seq.pop_back();
                break;
            }
            Session s;
            s.final = final_id;
            for (std::size_t i : seq) s.members.push_back(g.node(order[i]).id);
            result.sessions.push_back(std::move(s));
            placed[c] = false;
            seq.pop_back();
            frame.back() = next_candidate(c + 1);
        } else {
            frame.push_back(next_candidate(0));
        }
    }

    if (result.sessions.empty() && n > 0)
        throw Error(Errc::CycleDetected, "no topological ordering for final '" + final_id + "'");
    return result;
}

// Replaces each member transaction with its invocation events; ghosts
// contribute nothing. Histories with identical event sequences are
// deduplicated.
inline std::vector<History> histories(const TraceLedger& ledger, const std::vector<Session>& sessions) {
    std::map<std::string, const TransactionRecord*> by_id;
    for (const auto& tx : ledger.transactions) by_id[tx.id] = &tx;

    std::vector<History> out;
    std::map<std::string, std::size_t> ordering_index; // per final
    std::set<std::string> seen_keys;
    for (const auto& s : sessions) {
        History h;
        h.origin_final = s.final;
        h.origin_ordering = ordering_index[s.final]++;
        for (const auto& id : s.members) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw Error(Errc::UnknownTransaction, "'" + id + "'");
            for (const auto& ev : it->second->events) h.events.push_back(ev);
        }
        std::ostringstream key;
        for (const auto& ev : h.events) {
            key << ev.caller << '\x1f' << ev.callee << '\x1f' << ev.signature << '\x1f';
            for (const auto& in : ev.inputs) key << scalar_to_string(in) << '\x1e';
            key << '\x1f' << (ev.output ? scalar_to_string(*ev.output) : "\x1d") << '\x1f' << ev.value
                << '\x1f' << (ev.status == EventStatus::Ok ? "ok" : "error") << '\x1c';
        }
        if (seen_keys.insert(key.str()).second) out.push_back(std::move(h));
    }
    return out;
}

// Line-delimited history file: the hand-off between mining and tuning.
inline void serialize_histories(const std::vector<History>& hs, std::ostream& out) {
    for (const auto& h : hs) {
        nlohmann::ordered_json j;
        j["type"] = "history";
        j["final"] = h.origin_final;
        j["ordering"] = h.origin_ordering;
        j["events"] = nlohmann::ordered_json::array();
        for (const auto& ev : h.events) j["events"].push_back(detail::event_to_json(ev));
        out << j.dump() << "\n";
    }
}

inline std::string serialize_histories(const std::vector<History>& hs) {
    std::ostringstream out;
    serialize_histories(hs, out);
    return out.str();
}

inline std::vector<History> parse_histories(std::istream& in) {
    std::vector<History> out;
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
        if (!j.is_object() || j.value("type", "") != "history" || !j.contains("events") ||
            !j["events"].is_array())
            throw Error(Errc::MalformedRecord, "line " + std::to_string(lineno) + ": expected a history record");
        History h;
        h.origin_final = j.value("final", "");
        h.origin_ordering = j.value("ordering", std::size_t(0));
        for (const auto& e : j["events"]) h.events.push_back(detail::event_from_json(e, lineno));
        out.push_back(std::move(h));
    }
    return out;
}

inline std::vector<History> parse_histories(const std::string& text) {
    std::istringstream in(text);
    return parse_histories(in);
}

} // namespace specmine

#endif // SPECMINE_SESSIONS_HPP
