#ifndef SPECMINE_SIM_HPP
#define SPECMINE_SIM_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specmine/error.hpp"
#include "specmine/trace.hpp"

namespace specmine {

struct ScriptStep {
    std::uint64_t block = 0;
    std::string caller;
    std::string callee; // empty: scenario default
    std::string signature;
    std::vector<Scalar> inputs;
    std::int64_t value = 0;
};

struct Script {
    std::vector<ScriptStep> steps;
};

namespace sim {

// Thrown by handlers on a failed require; turns into an Error event.
struct Revert {};

// Key-value store over locations plus a per-transaction journal. Every read
// and write is logged in execution order; on revert the writes are rolled
// back but stay in the log.
class Vm {
  public:
    Vm(std::map<Location, Scalar>& committed, std::uint64_t block, std::string contract_prefix,
       std::string contract_account)
        : m_committed(committed), m_block(block), m_prefix(std::move(contract_prefix)),
          m_account(std::move(contract_account)) {}

    Scalar read_storage(const std::string& name) { return read({LocationKind::Storage, m_prefix + "." + name}); }

    std::int64_t read_storage_int(const std::string& name) {
        Scalar s = read_storage(name);
        if (std::holds_alternative<std::int64_t>(s)) return std::get<std::int64_t>(s);
        return 0;
    }

    void write_storage(const std::string& name, Scalar v) {
        write({LocationKind::Storage, m_prefix + "." + name}, std::move(v));
    }

    std::int64_t block_number() {
        log(AccessMode::Read, {LocationKind::BlockAttribute, "block.number"});
        return static_cast<std::int64_t>(m_block);
    }

    static void require(bool cond) {
        if (!cond) throw Revert{};
    }

    // Value entering with the call: caller pays, contract account receives.
    void deposit(const std::string& caller, std::int64_t amount) {
        if (amount <= 0) return;
        read({LocationKind::Balance, balance_loc(caller)});
        write({LocationKind::Balance, balance_loc(caller)}, Scalar(std::int64_t(0)));
        write({LocationKind::Balance, balance_loc(m_account)}, Scalar(amount));
    }

    // Outgoing transfer from the contract account.
    void transfer(const std::string& to, std::int64_t amount) {
        read({LocationKind::Balance, balance_loc(m_account)});
        write({LocationKind::Balance, balance_loc(m_account)}, Scalar(std::int64_t(0)));
        write({LocationKind::Balance, balance_loc(to)}, Scalar(amount));
    }

    const std::vector<AccessRecord>& access_log() const { return m_log; }

    void commit() {
        for (auto& [loc, v] : m_journal) m_committed[loc] = v;
    }

  private:
    static std::string balance_loc(const std::string& account) { return "balance[" + account + "]"; }

    Scalar read(const Location& loc) {
        log(AccessMode::Read, loc);
        if (auto it = m_journal.find(loc); it != m_journal.end()) return it->second;
        if (auto it = m_committed.find(loc); it != m_committed.end()) return it->second;
        return Scalar(std::int64_t(0));
    }

    void write(const Location& loc, Scalar v) {
        log(AccessMode::Write, loc);
        m_journal[loc] = std::move(v);
    }

    void log(AccessMode mode, const Location& loc) {
        m_log.push_back({mode, loc, static_cast<std::uint32_t>(m_log.size())});
    }

    std::map<Location, Scalar>& m_committed;
    std::map<Location, Scalar> m_journal;
    std::vector<AccessRecord> m_log;
    std::uint64_t m_block;
    std::string m_prefix;
    std::string m_account;
};

struct CallContext {
    std::string caller;
    std::string callee;
    std::vector<Scalar> inputs;
    std::int64_t value = 0;
};

inline std::int64_t input_int(const CallContext& ctx, std::size_t i) {
    if (i >= ctx.inputs.size()) throw Revert{};
    if (!std::holds_alternative<std::int64_t>(ctx.inputs[i])) throw Revert{};
    return std::get<std::int64_t>(ctx.inputs[i]);
}

inline std::string input_str(const CallContext& ctx, std::size_t i) {
    if (i >= ctx.inputs.size()) throw Revert{};
    return scalar_to_string(ctx.inputs[i]);
}

} // namespace sim

// Hand-coded contract behaviors: per-signature state-transition functions
// over the location store. Deterministic by construction.
struct Scenario {
    using Handler = std::function<std::optional<Scalar>(sim::Vm&, const sim::CallContext&)>;

    std::string name;
    std::string default_callee;
    std::map<std::string, Handler> handlers;
};

inline std::string contract_prefix(const std::string& account) {
    if (account.rfind("0x", 0) == 0) return account.substr(2);
    return account;
}

// Executes the script against the scenario and records one transaction per
// step. Accesses made before a failed require stay in the log; the write
// effects of a reverted step are discarded from the store.
inline TraceLedger run_scenario(const Scenario& scenario, const Script& script) {
    TraceLedger ledger;
    std::map<Location, Scalar> store;
    std::uint64_t step_no = 0;
    for (const auto& step : script.steps) {
        ++step_no;
        auto handler = scenario.handlers.find(step.signature);
        if (handler == scenario.handlers.end())
            throw Error(Errc::UnknownSignature, "'" + step.signature + "' in scenario " + scenario.name);

        const std::string callee = step.callee.empty() ? scenario.default_callee : step.callee;
        sim::Vm vm(store, step.block, contract_prefix(callee), callee);
        sim::CallContext ctx{step.caller, callee, step.inputs, step.value};

        EventRecord ev;
        ev.caller = step.caller;
        ev.callee = callee;
        ev.signature = step.signature;
        ev.inputs = step.inputs;
        ev.value = step.value;
        try {
            vm.deposit(step.caller, step.value);
            ev.output = handler->second(vm, ctx);
            ev.status = EventStatus::Ok;
            vm.commit();
        } catch (const sim::Revert&) {
            ev.status = EventStatus::Error;
            ev.output.reset();
        }

        TransactionRecord tx;
        tx.id = std::to_string(step_no);
        tx.block_number = step.block;
        tx.accesses = vm.access_log();
        tx.events.push_back(std::move(ev));
        ledger.transactions.push_back(std::move(tx));
    }
    if (!script.steps.empty()) ledger.seed_id = "1";
    return ledger;
}

// Multi-game rock-paper-scissors: StartGame / Bet / Claim with a 4-block
// betting window and a 4-block claiming window.
inline Scenario rps_scenario() {
    constexpr std::int64_t kDuration = 4;
    constexpr std::int64_t kAmount = 42;

    auto game_loc = [](std::int64_t gid, const char* field) {
        std::string base = "games[" + std::to_string(gid) + "]";
        return field[0] == '\0' ? base : base + "." + field;
    };

    auto winning_hand = [](std::int64_t a, std::int64_t b) -> std::int64_t {
        // 1 rock, 2 paper, 3 scissors
        if ((a == 1 && b == 2) || (a == 2 && b == 1)) return 2;
        if ((a == 2 && b == 3) || (a == 3 && b == 2)) return 3;
        if ((a == 3 && b == 1) || (a == 1 && b == 3)) return 1;
        return 0;
    };

    Scenario s;
    s.name = "rps";
    s.default_callee = "0xA";

    s.handlers["contract creation"] = [](sim::Vm& vm, const sim::CallContext&) -> std::optional<Scalar> {
        vm.write_storage("gC", std::int64_t(0));
        return std::nullopt;
    };

    s.handlers["StartGame"] = [=](sim::Vm& vm, const sim::CallContext&) -> std::optional<Scalar> {
        std::int64_t g = vm.read_storage_int("gC") + 1;
        vm.write_storage("gC", g);
        std::int64_t claim_start = vm.block_number() + kDuration;
        vm.read_storage_int("gC"); // index of games[gC]
        vm.write_storage(game_loc(g, ""), g);
        vm.write_storage(game_loc(g, "pA"), std::int64_t(0));
        vm.write_storage(game_loc(g, "pB"), std::int64_t(0));
        vm.write_storage(game_loc(g, "hA"), std::int64_t(0));
        vm.write_storage(game_loc(g, "hB"), std::int64_t(0));
        vm.write_storage(game_loc(g, "cS"), claim_start);
        vm.read_storage_int("gC"); // return gC
        return Scalar(g);
    };

    s.handlers["Bet"] = [=](sim::Vm& vm, const sim::CallContext& ctx) -> std::optional<Scalar> {
        std::int64_t gid = sim::input_int(ctx, 0);
        std::int64_t p = sim::input_int(ctx, 1);
        std::int64_t h = sim::input_int(ctx, 2);
        sim::Vm::require(0 < h && h < 4 && p < 2 && p >= 0);
        sim::Vm::require(ctx.value == kAmount);
        vm.read_storage(game_loc(gid, ""));
        std::int64_t claim_start = vm.read_storage_int(game_loc(gid, "cS").c_str());
        sim::Vm::require(0 < claim_start);
        sim::Vm::require(vm.block_number() < claim_start);
        std::int64_t hand_a = vm.read_storage_int(game_loc(gid, "hA").c_str());
        if (hand_a == 0 && p == 0) {
            vm.write_storage(game_loc(gid, "pA"), ctx.caller);
            vm.write_storage(game_loc(gid, "hA"), h);
        } else {
            std::int64_t hand_b = vm.read_storage_int(game_loc(gid, "hB").c_str());
            if (hand_b == 0 && p == 1) {
                vm.write_storage(game_loc(gid, "pB"), ctx.caller);
                vm.write_storage(game_loc(gid, "hB"), h);
            } else {
                sim::Vm::require(false);
            }
        }
        return std::nullopt;
    };

    // Locals sequence the storage reads explicitly so the access log keeps
    // the source-level left-to-right evaluation order.
    s.handlers["Claim"] = [=](sim::Vm& vm, const sim::CallContext& ctx) -> std::optional<Scalar> {
        std::int64_t gid = sim::input_int(ctx, 0);
        vm.read_storage(game_loc(gid, ""));
        std::int64_t claim_start = vm.read_storage_int(game_loc(gid, "cS").c_str());
        sim::Vm::require(0 < claim_start);
        claim_start = vm.read_storage_int(game_loc(gid, "cS").c_str());
        std::int64_t bn = vm.block_number();
        sim::Vm::require(claim_start <= bn);
        bn = vm.block_number();
        claim_start = vm.read_storage_int(game_loc(gid, "cS").c_str());
        sim::Vm::require(bn < claim_start + kDuration);
        vm.write_storage(game_loc(gid, "cS"), std::int64_t(0)); // disallows multiple claims
        std::int64_t hand_a = vm.read_storage_int(game_loc(gid, "hA").c_str());
        if (hand_a == 0) {
            std::int64_t hand_b = vm.read_storage_int(game_loc(gid, "hB").c_str());
            if (hand_b != 0) { // no player A
                std::string player_b = scalar_to_string(vm.read_storage(game_loc(gid, "pB").c_str()));
                vm.transfer(player_b, kAmount);
                return std::nullopt;
            }
        }
        std::int64_t hand_b = vm.read_storage_int(game_loc(gid, "hB").c_str());
        if (hand_b == 0) {
            hand_a = vm.read_storage_int(game_loc(gid, "hA").c_str());
            if (hand_a != 0) { // no player B
                std::string player_a = scalar_to_string(vm.read_storage(game_loc(gid, "pA").c_str()));
                vm.transfer(player_a, kAmount);
                return std::nullopt;
            }
        }
        hand_a = vm.read_storage_int(game_loc(gid, "hA").c_str());
        hand_b = vm.read_storage_int(game_loc(gid, "hB").c_str());
        if (hand_a == hand_b) { // draw
            std::string player_a = scalar_to_string(vm.read_storage(game_loc(gid, "pA").c_str()));
            vm.transfer(player_a, kAmount);
            std::string player_b = scalar_to_string(vm.read_storage(game_loc(gid, "pB").c_str()));
            vm.transfer(player_b, kAmount);
            return std::nullopt;
        }
        hand_a = vm.read_storage_int(game_loc(gid, "hA").c_str());
        hand_b = vm.read_storage_int(game_loc(gid, "hB").c_str());
        if (winning_hand(hand_a, hand_b) == vm.read_storage_int(game_loc(gid, "hB").c_str())) {
            std::string player_b = scalar_to_string(vm.read_storage(game_loc(gid, "pB").c_str()));
            vm.transfer(player_b, 2 * kAmount);
            return std::nullopt;
        }
        hand_a = vm.read_storage_int(game_loc(gid, "hA").c_str());
        hand_b = vm.read_storage_int(game_loc(gid, "hB").c_str());
        if (winning_hand(hand_a, hand_b) == vm.read_storage_int(game_loc(gid, "hA").c_str())) {
            std::string player_a = scalar_to_string(vm.read_storage(game_loc(gid, "pA").c_str()));
            vm.transfer(player_a, 2 * kAmount);
            return std::nullopt;
        }
        return std::nullopt;
    };

    return s;
}

// The 16-transaction workload over four overlapping games (blocks 7-20).
inline std::pair<Scenario, Script> builtin_rps_script() {
    Script script;
    auto step = [&script](std::uint64_t block, std::string caller, std::string sig,
                          std::vector<Scalar> in, std::int64_t value) {
        script.steps.push_back({block, std::move(caller), "", std::move(sig), std::move(in), value});
    };
    using I = std::int64_t;
    step(7, "0xU0", "contract creation", {}, 0);
    step(9, "0xA1", "StartGame", {}, 0);                  // g1
    step(10, "0xA2", "StartGame", {}, 0);                 // g2
    step(10, "0xB2", "Bet", {I(2), I(1), I(3)}, 42);
    step(11, "0xA1", "Bet", {I(1), I(0), I(1)}, 42);
    step(12, "0xB1", "Bet", {I(1), I(1), I(2)}, 42);
    step(13, "0xA1", "Claim", {I(1)}, 0);
    step(14, "0xA3", "StartGame", {}, 0);                 // g3
    step(14, "0xB2", "Claim", {I(2)}, 0);
    step(15, "0xA3", "Bet", {I(3), I(0), I(3)}, 42);
    step(15, "0xB3", "Bet", {I(3), I(1), I(1)}, 42);
    step(16, "0xA4", "StartGame", {}, 0);                 // g4
    step(17, "0xB4", "Bet", {I(4), I(1), I(1)}, 42);
    step(17, "0xA4", "Bet", {I(4), I(0), I(1)}, 42);
    step(20, "0xA4", "Claim", {I(4)}, 0);
    step(20, "0xB4", "Claim", {I(4)}, 0);                 // double claim, fails
    return {rps_scenario(), std::move(script)};
}

// Minimal allowance token: approve grants, transferFrom spends. approve
// checks the caller's balance, which is what chains consecutive rounds of
// different user pairs into one session.
inline Scenario token_scenario() {
    auto bal_loc = [](const std::string& who) { return "bal[" + who + "]"; };
    auto alw_loc = [](const std::string& from, const std::string& spender) {
        return "allowance[" + from + "][" + spender + "]";
    };

    Scenario s;
    s.name = "token";
    s.default_callee = "0xT";

    s.handlers["contract creation"] = [=](sim::Vm& vm, const sim::CallContext& ctx) -> std::optional<Scalar> {
        std::int64_t minted = 0;
        for (const auto& holder : ctx.inputs) {
            vm.write_storage(bal_loc(scalar_to_string(holder)), std::int64_t(100));
            minted += 100;
        }
        vm.write_storage("totalSupply", minted);
        return std::nullopt;
    };

    s.handlers["approve"] = [=](sim::Vm& vm, const sim::CallContext& ctx) -> std::optional<Scalar> {
        std::string spender = sim::input_str(ctx, 0);
        std::int64_t amount = sim::input_int(ctx, 1);
        sim::Vm::require(vm.read_storage_int(bal_loc(ctx.caller).c_str()) >= amount);
        vm.write_storage(alw_loc(ctx.caller, spender), amount);
        return std::nullopt;
    };

    s.handlers["transferFrom"] = [=](sim::Vm& vm, const sim::CallContext& ctx) -> std::optional<Scalar> {
        std::string from = sim::input_str(ctx, 0);
        std::string to = sim::input_str(ctx, 1);
        std::int64_t amount = sim::input_int(ctx, 2);
        std::int64_t allowed = vm.read_storage_int(alw_loc(from, ctx.caller).c_str());
        sim::Vm::require(allowed >= amount);
        std::int64_t from_bal = vm.read_storage_int(bal_loc(from).c_str());
        sim::Vm::require(from_bal >= amount);
        vm.read_storage_int(alw_loc(from, ctx.caller).c_str());
        vm.write_storage(alw_loc(from, ctx.caller), allowed - amount);
        vm.read_storage_int(bal_loc(from).c_str());
        vm.write_storage(bal_loc(from), from_bal - amount);
        std::int64_t to_bal = vm.read_storage_int(bal_loc(to).c_str());
        vm.write_storage(bal_loc(to), to_bal + amount);
        return std::nullopt;
    };

    return s;
}

// Two chained approve/transferFrom rounds by different pairs plus an
// independent third pair.
inline std::pair<Scenario, Script> builtin_token_script() {
    Script script;
    auto step = [&script](std::uint64_t block, std::string caller, std::string sig,
                          std::vector<Scalar> in, std::int64_t value) {
        script.steps.push_back({block, std::move(caller), "", std::move(sig), std::move(in), value});
    };
    using I = std::int64_t;
    step(3, "0xM", "contract creation", {std::string("0xU1"), std::string("0xU2")}, 0);
    step(4, "0xU1", "approve", {std::string("0xV1"), I(50)}, 0);
    step(5, "0xV1", "transferFrom", {std::string("0xU1"), std::string("0xV1"), I(25)}, 0);
    step(6, "0xV1", "approve", {std::string("0xV2"), I(10)}, 0);
    step(7, "0xV2", "transferFrom", {std::string("0xV1"), std::string("0xV2"), I(10)}, 0);
    step(8, "0xU2", "approve", {std::string("0xV3"), I(30)}, 0);
    step(9, "0xV3", "transferFrom", {std::string("0xU2"), std::string("0xV3"), I(30)}, 0);
    return {token_scenario(), std::move(script)};
}

// Loads "type":"step" records from the line-delimited format.
inline Script parse_script(std::istream& in) {
    Script script;
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
        if (!j.is_object() || j.value("type", "") != "step") throw fail("expected a step record");
        ScriptStep step;
        if (!j.contains("block") || !j["block"].is_number_unsigned()) throw fail("step missing block");
        step.block = j["block"].get<std::uint64_t>();
        if (!script.steps.empty() && step.block < script.steps.back().block)
            throw Error(Errc::NonMonotonicBlockNumber, "step in block " + std::to_string(step.block));
        if (!j.contains("caller") || !j["caller"].is_string()) throw fail("step missing caller");
        step.caller = j["caller"].get<std::string>();
        step.callee = j.value("callee", "");
        if (!j.contains("sig") || !j["sig"].is_string()) throw fail("step missing sig");
        step.signature = j["sig"].get<std::string>();
        if (j.contains("in")) {
            if (!j["in"].is_array()) throw fail("step 'in' must be an array");
            for (const auto& x : j["in"]) step.inputs.push_back(detail::scalar_from_json(x, lineno));
        }
        step.value = j.value("value", std::int64_t(0));
        script.steps.push_back(std::move(step));
    }
    return script;
}

} // namespace specmine

#endif // SPECMINE_SIM_HPP
