// Command-line front end: simulate traces, mine histories, tune automata.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "specmine/abstraction.hpp"
#include "specmine/automaton.hpp"
#include "specmine/dependency.hpp"
#include "specmine/error.hpp"
#include "specmine/sessions.hpp"
#include "specmine/sim.hpp"
#include "specmine/trace.hpp"
#include "specmine/tuner.hpp"

namespace fs = std::filesystem;
using namespace specmine;

namespace {

constexpr int kExitError = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw Error(Errc::InvalidArgument, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw Error(Errc::InvalidArgument, "cannot create directory '" + p.parent_path().string() + "'");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw Error(Errc::InvalidArgument, "cannot write '" + path + "'");
    out << content;
    if (!out.good()) throw Error(Errc::InvalidArgument, "write failed for '" + path + "'");
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw Error(Errc::InvalidArgument, "invalid output directory '" + dir + "'");
    return p;
}

struct MineOutput {
    TraceLedger sliced;
    DependencyGraph filtered;
    std::vector<History> mined;
    std::size_t finals = 0;
    bool truncated = false;
};

MineOutput mine_pipeline(const TraceLedger& raw, const std::string& seed, std::size_t cap) {
    MineOutput out;
    TraceLedger ghosted = insert_ghosts(raw);
    out.sliced = slice_from_seed(ghosted, seed);
    DependencyGraph graph = build_graph(out.sliced);
    out.filtered = filter_graph(graph, seed);

    std::set<std::string> finals = final_transactions(out.filtered);
    out.finals = finals.size();
    std::vector<Session> sessions;
    for (std::size_t i = 0; i < out.filtered.size(); ++i) {
        const auto& node = out.filtered.node(i);
        if (!finals.count(node.id)) continue;
        SessionsResult r = sessions_for(out.filtered, node.id, cap);
        out.truncated = out.truncated || r.truncated;
        for (auto& s : r.sessions) sessions.push_back(std::move(s));
    }
    out.mined = histories(out.sliced, sessions);
    return out;
}

void print_mine_summary(const MineOutput& m, std::size_t cap) {
    std::size_t non_ghost = 0;
    for (const auto& tx : m.sliced.transactions)
        if (!tx.ghost) ++non_ghost;
    double avg = 0.0;
    for (const auto& h : m.mined) avg += static_cast<double>(h.events.size());
    if (!m.mined.empty()) avg /= static_cast<double>(m.mined.size());

    std::cout << "transactions total    " << non_ghost << "\n";
    std::cout << "transactions final    " << m.finals << "\n";
    std::cout << "histories total       " << m.mined.size() << "\n";
    std::cout << "histories avg length  " << detail::format_double(avg) << "\n";
    if (m.truncated)
        std::cout << "note: orderings truncated at cap " << cap << "; raise --ordering-cap to see more\n";
}

struct TuneOutputs {
    std::string dot_path;
    std::string recipe_path;
    std::string trace_path;
};

void run_tune(const std::vector<History>& corpus, CostConfig cfg, const std::string& load_recipe,
              const TuneOutputs& paths) {
    if (corpus.empty()) throw Error(Errc::EmptyCorpus, "no histories in input");

    Recipe recipe;
    Automaton automaton;
    TunerTrace trace;
    double initial_cost = 0.0, best_cost = 0.0;
    std::size_t accepted = 0, evaluated = 0;
    std::vector<std::string> warnings;

    if (!load_recipe.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(load_recipe));
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::MalformedRecord, "recipe file '" + load_recipe + "' is not valid JSON");
        }
        recipe = recipe_from_json(j);
        Recipe identity = identity_recipe();
        initial_cost = compute_cost(build_from_recipe(corpus, identity), corpus, identity, cfg);
        automaton = build_from_recipe(corpus, recipe, &warnings);
        best_cost = compute_cost(automaton, corpus, recipe, cfg);
    } else {
        TuneResult result = tune(corpus, cfg);
        recipe = std::move(result.recipe);
        automaton = std::move(result.automaton);
        trace = std::move(result.trace);
        initial_cost = result.initial_cost;
        best_cost = result.best_cost;
        accepted = result.accepted;
        evaluated = result.evaluated;
        warnings = std::move(result.warnings);
    }

    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    Automaton identity_tree = build_from_recipe(corpus, identity_recipe());
    write_file(paths.dot_path, to_dot(automaton));
    write_file(paths.recipe_path, recipe_to_json(recipe).dump(2) + "\n");
    if (!paths.trace_path.empty()) write_file(paths.trace_path, trace_to_csv(trace));

    std::cout << "transitions initial   " << identity_tree.transitions.size() << "\n";
    std::cout << "transitions best      " << automaton.transitions.size() << "\n";
    std::cout << "cost initial          " << detail::format_double(initial_cost) << "\n";
    std::cout << "cost best             " << detail::format_double(best_cost) << "\n";
    if (evaluated > 0) {
        double accepted_pct = 100.0 * static_cast<double>(accepted) / static_cast<double>(evaluated);
        std::cout << "accepted recipes      " << detail::format_double(accepted_pct) << "%\n";
    }
    double reduction = 0.0;
    if (initial_cost > 0.0 && std::isfinite(initial_cost))
        reduction = 100.0 * (initial_cost - best_cost) / initial_cost;
    std::cout << "cost reduction        " << detail::format_double(reduction) << "%\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mines finite-automaton specifications from transaction traces"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value config file");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a built-in contract scenario and write a trace");
    std::string sim_scenario, sim_script, sim_out;
    simulate->add_option("--scenario", sim_scenario, "Scenario name: rps or token")->required();
    simulate->add_option("--script", sim_script, "Optional script file (step records) replacing the builtin");
    simulate->add_option("--out", sim_out, "Output trace file")->required();

    // mine
    auto* mine = app.add_subcommand("mine", "Extract histories from a trace via dependency analysis");
    std::string mine_trace, mine_seed, mine_out, mine_depgraph;
    std::size_t mine_cap = 16;
    mine->add_option("--trace", mine_trace, "Input trace file")->required();
    mine->add_option("--seed-tx", mine_seed, "Seed transaction id (default: trace metadata)");
    mine->add_option("--ordering-cap", mine_cap, "Max orderings per final transaction")->capture_default_str();
    mine->add_option("--out", mine_out, "Output histories file")->required();
    mine->add_option("--emit-depgraph", mine_depgraph, "Also write the filtered dependency graph as DOT");

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Search for a low-cost automaton over mined histories");
    std::string tune_histories, tune_preset = "default", tune_out, tune_dump, tune_load;
    std::size_t tune_bound = 10000;
    std::uint64_t tune_seed = 42;
    tune_cmd->add_option("--histories", tune_histories, "Input histories file")->required();
    tune_cmd->add_option("--preset", tune_preset, "Cost preset: default, general, precise")
        ->capture_default_str();
    tune_cmd->add_option("--bound", tune_bound, "Exploration bound (recipes evaluated)")->capture_default_str();
    tune_cmd->add_option("--rng-seed", tune_seed, "Random seed")->capture_default_str();
    tune_cmd->add_option("--out", tune_out, "Output directory")->required();
    tune_cmd->add_option("--dump-recipe", tune_dump, "Recipe output path (default <out>/recipe.json)");
    tune_cmd->add_option("--load-recipe", tune_load, "Apply this recipe instead of searching");

    // run
    auto* run = app.add_subcommand("run", "mine + tune in one go");
    std::string run_trace, run_seed, run_preset = "default", run_out;
    std::size_t run_cap = 16, run_bound = 10000;
    std::uint64_t run_rng = 42;
    bool run_depgraph = false;
    run->add_option("--trace", run_trace, "Input trace file")->required();
    run->add_option("--seed-tx", run_seed, "Seed transaction id (default: trace metadata)");
    run->add_option("--ordering-cap", run_cap, "Max orderings per final transaction")->capture_default_str();
    run->add_option("--preset", run_preset, "Cost preset: default, general, precise")->capture_default_str();
    run->add_option("--bound", run_bound, "Exploration bound")->capture_default_str();
    run->add_option("--rng-seed", run_rng, "Random seed")->capture_default_str();
    run->add_option("--out", run_out, "Output directory")->required();
    run->add_flag("--emit-depgraph", run_depgraph, "Also write <out>/depgraph.dot");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            Scenario scenario;
            Script script;
            if (sim_scenario == "rps") {
                std::tie(scenario, script) = builtin_rps_script();
            } else if (sim_scenario == "token") {
                std::tie(scenario, script) = builtin_token_script();
            } else {
                std::cerr << "error: unknown scenario '" << sim_scenario << "' (expected rps or token)\n";
                return kExitError;
            }
            if (!sim_script.empty()) {
                std::istringstream in(read_file(sim_script));
                script = parse_script(in);
            }
            TraceLedger ledger = run_scenario(scenario, script);
            write_file(sim_out, serialize_trace(ledger));
            std::cout << "transactions written  " << ledger.transactions.size() << "\n";
            return 0;
        }

        if (mine->parsed()) {
            TraceLedger raw = parse_trace(read_file(mine_trace));
            std::string seed = !mine_seed.empty() ? mine_seed : raw.seed_id.value_or("");
            if (seed.empty()) throw Error(Errc::UnknownSeed, "no --seed-tx given and trace has no seed metadata");
            MineOutput m = mine_pipeline(raw, seed, mine_cap);
            write_file(mine_out, serialize_histories(m.mined));
            if (!mine_depgraph.empty()) write_file(mine_depgraph, depgraph_to_dot(m.filtered));
            print_mine_summary(m, mine_cap);
            return 0;
        }

        if (tune_cmd->parsed()) {
            auto cfg = cost_config_preset(tune_preset);
            if (!cfg) throw Error(Errc::InvalidArgument, "unknown preset '" + tune_preset + "'");
            cfg->bound = tune_bound;
            cfg->rng_seed = tune_seed;
            std::vector<History> corpus = parse_histories(read_file(tune_histories));
            fs::path dir = ensure_dir(tune_out);
            TuneOutputs paths;
            paths.dot_path = (dir / "automaton.dot").string();
            paths.recipe_path = tune_dump.empty() ? (dir / "recipe.json").string() : tune_dump;
            paths.trace_path = (dir / "cost_trace.csv").string();
            run_tune(corpus, *cfg, tune_load, paths);
            return 0;
        }

        if (run->parsed()) {
            auto cfg = cost_config_preset(run_preset);
            if (!cfg) throw Error(Errc::InvalidArgument, "unknown preset '" + run_preset + "'");
            cfg->bound = run_bound;
            cfg->rng_seed = run_rng;
            TraceLedger raw = parse_trace(read_file(run_trace));
            std::string seed = !run_seed.empty() ? run_seed : raw.seed_id.value_or("");
            if (seed.empty()) throw Error(Errc::UnknownSeed, "no --seed-tx given and trace has no seed metadata");
            fs::path dir = ensure_dir(run_out);
            MineOutput m = mine_pipeline(raw, seed, run_cap);
            write_file((dir / "histories.jsonl").string(), serialize_histories(m.mined));
            if (run_depgraph) write_file((dir / "depgraph.dot").string(), depgraph_to_dot(m.filtered));
            print_mine_summary(m, run_cap);
            TuneOutputs paths;
            paths.dot_path = (dir / "automaton.dot").string();
            paths.recipe_path = (dir / "recipe.json").string();
            paths.trace_path = (dir / "cost_trace.csv").string();
            run_tune(m.mined, *cfg, "", paths);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return 0;
}
