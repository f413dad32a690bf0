#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace specmine;

namespace {

CostConfig quick(double ws, double wp, double wg) {
    CostConfig cfg;
    cfg.w_size = ws;
    cfg.w_precision = wp;
    cfg.w_generality = wg;
    return cfg;
}

} // namespace

TEST_CASE("cost of the degenerate cases") {
    SECTION("single state, no transitions, empty corpus") {
        Automaton a;
        CostConfig cfg = quick(3.0, 5.0, 1.0);
        CHECK(compute_cost(a, {}, identity_recipe(), cfg) == 3.0); // w_size * 1
    }
    SECTION("identity tree has zero novelty") {
        testutil::Mined m = testutil::mine_rps();
        Automaton tree = build_from_recipe(m.hist, identity_recipe());
        CostConfig cfg = quick(0.0, 100.0, 0.0);
        CHECK(compute_cost(tree, m.hist, identity_recipe(), cfg) == 0.0);
        CostConfig size_only = quick(1.0, 0.0, 0.0);
        CHECK(compute_cost(tree, m.hist, identity_recipe(), size_only) ==
              static_cast<double>(tree.num_states + tree.transitions.size()));
    }
    SECTION("a fully collapsed automaton accepts unobserved behavior") {
        testutil::Mined m = testutil::mine_rps();
        Recipe r = identity_recipe();
        r.moves.push_back({Move::Kind::MergeSameFuture, 0, "", ""});
        Automaton one = build_from_recipe(m.hist, r);
        REQUIRE(one.num_states == 1);
        CostConfig cfg = quick(0.0, 1.0, 0.0);
        CHECK(compute_cost(one, m.hist, r, cfg) > 0.0); // novelty strictly positive
    }
    SECTION("an automaton missing a history is infinitely expensive") {
        testutil::Mined m = testutil::mine_rps();
        std::vector<History> one = {m.hist[0]};
        Automaton a = build_from_recipe(one, identity_recipe());
        CHECK(std::isinf(compute_cost(a, m.hist, identity_recipe(), quick(1, 1, 1))));
    }
    SECTION("with zero precision and generality weights, cost ordering is size ordering") {
        testutil::Mined m = testutil::mine_rps();
        Recipe merged = identity_recipe();
        merged.moves.push_back({Move::Kind::MergeSameFuture, 1, "", ""});
        Automaton tree = build_from_recipe(m.hist, identity_recipe());
        Automaton small = build_from_recipe(m.hist, merged);
        CostConfig cfg = quick(1.0, 0.0, 0.0);
        double c_tree = compute_cost(tree, m.hist, identity_recipe(), cfg);
        double c_small = compute_cost(small, m.hist, merged, cfg);
        CHECK(c_tree == static_cast<double>(tree.num_states + tree.transitions.size()));
        CHECK(c_small == static_cast<double>(small.num_states + small.transitions.size()));
        CHECK((c_small < c_tree) ==
              (small.num_states + small.transitions.size() < tree.num_states + tree.transitions.size()));
    }
}

TEST_CASE("presets exist with the documented emphasis") {
    auto def = cost_config_preset("default");
    auto gen = cost_config_preset("general");
    auto pre = cost_config_preset("precise");
    REQUIRE(def);
    REQUIRE(gen);
    REQUIRE(pre);
    CHECK(gen->w_generality > def->w_generality);
    CHECK(pre->w_precision > def->w_precision);
    CHECK(pre->w_generality == 0.0);
    CHECK_FALSE(cost_config_preset("nope"));
}

TEST_CASE("modify_recipe applies exactly one variation") {
    testutil::Mined m = testutil::mine_rps();
    CorpusProfile profile(m.hist);
    Rng rng(1);

    Recipe base = identity_recipe();
    for (int trial = 0; trial < 300; ++trial) {
        Recipe next = modify_recipe(base, profile, rng);
        bool abstraction_changed = next.abstractions != base.abstractions;
        bool moves_changed = next.moves != base.moves;
        CHECK(abstraction_changed != moves_changed); // exactly one aspect differs
        if (abstraction_changed) {
            // exactly one key differs from the base's effective view
            std::size_t diffs = 0;
            for (const auto& [key, abs] : next.abstractions)
                if (base.abstraction_for(key) != abs) ++diffs;
            CHECK(diffs == 1);
            CHECK(next.moves == base.moves);
        } else {
            long delta = static_cast<long>(next.moves.size()) - static_cast<long>(base.moves.size());
            CHECK((delta == 1 || delta == -1));
            if (delta == 1) {
                CHECK(std::vector<Move>(next.moves.begin(), next.moves.end() - 1) == base.moves);
                const Move& appended = next.moves.back();
                if (appended.kind != Move::Kind::MergeVars) CHECK(appended.k <= 8);
                else CHECK(appended.v1 != appended.v2);
            }
        }
        base = next; // walk the recipe space
    }
}

TEST_CASE("delete is re-drawn when there is nothing to delete") {
    testutil::Mined m = testutil::mine_rps();
    CorpusProfile profile(m.hist);
    // a seed whose first draw selects option 4 (delete)
    std::optional<std::uint64_t> seed;
    for (std::uint64_t s = 0; s < 64 && !seed; ++s)
        if (Rng(s).below(5) == 4) seed = s;
    REQUIRE(seed.has_value());

    Recipe no_moves = identity_recipe();
    Rng rng(*seed);
    Recipe next = modify_recipe(no_moves, profile, rng);
    CHECK_FALSE(next == no_moves); // re-drawn into some applicable option
}

TEST_CASE("merge-vars mutations draw from the variables the recipe produces") {
    testutil::Mined m = testutil::mine_rps();
    CorpusProfile profile(m.hist);

    Recipe with_vars = identity_recipe();
    with_vars.abstractions[{"StartGame", field_output()}] = FieldAbstraction::Variable;
    std::vector<std::string> vars = profile.vars_for(with_vars);
    CHECK(vars.size() == 10);

    Rng rng(5);
    int seen = 0;
    for (int trial = 0; trial < 200; ++trial) {
        Recipe next = modify_recipe(with_vars, profile, rng);
        if (next.moves.size() == 1 && next.moves[0].kind == Move::Kind::MergeVars) {
            ++seen;
            CHECK(std::find(vars.begin(), vars.end(), next.moves[0].v1) != vars.end());
            CHECK(std::find(vars.begin(), vars.end(), next.moves[0].v2) != vars.end());
            CHECK(next.moves[0].v1 != next.moves[0].v2);
        }
    }
    CHECK(seen > 0);

    // identity recipe produces no variables: option 4 must never appear
    Rng rng2(6);
    for (int trial = 0; trial < 200; ++trial) {
        Recipe next = modify_recipe(identity_recipe(), profile, rng2);
        for (const auto& mv : next.moves) CHECK(mv.kind != Move::Kind::MergeVars);
    }
}

TEST_CASE("acceptance rule") {
    CostConfig cfg;
    SECTION("strictly better candidates always win") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            Rng rng(s);
            CHECK(accept_candidate(1.0, 2.0, 100, cfg, rng));
            CHECK(accept_candidate(1.0, std::numeric_limits<double>::infinity(), 0, cfg, rng));
        }
    }
    SECTION("equal cost is always accepted") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            Rng rng(s);
            CHECK(accept_candidate(3.0, 3.0, 5000, cfg, rng));
        }
    }
    SECTION("a fixed increase dies off as the temperature cools") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            Rng rng(s);
            CHECK_FALSE(accept_candidate(13.0, 3.0, 100000, cfg, rng));
        }
        // while early on it is frequently tolerated
        int early = 0;
        Rng rng(9);
        for (int i = 0; i < 200; ++i) early += accept_candidate(4.0, 3.0, 0, cfg, rng) ? 1 : 0;
        CHECK(early > 120); // exp(-0.1) ~ 0.9
    }
}

TEST_CASE("tune with bound 1 returns the identity tree") {
    testutil::Mined m = testutil::mine_rps();
    CostConfig cfg = *cost_config_preset("default");
    cfg.bound = 1;
    TuneResult r = tune(m.hist, cfg);
    CHECK(r.recipe == identity_recipe());
    CHECK(to_dot(r.automaton) == to_dot(build_from_recipe(m.hist, identity_recipe())));
    REQUIRE(r.trace.steps.size() == 1);
    CHECK(r.trace.steps[0].cost == r.initial_cost);
    CHECK(r.best_cost == r.initial_cost);
}

TEST_CASE("tune contract on a small bound") {
    testutil::Mined m = testutil::mine_rps();
    CostConfig cfg = *cost_config_preset("default");
    cfg.bound = 250;
    cfg.rng_seed = 7;

    TuneResult r1 = tune(m.hist, cfg);
    TuneResult r2 = tune(m.hist, cfg);

    SECTION("deterministic in the seed") {
        CHECK(recipe_to_json(r1.recipe).dump() == recipe_to_json(r2.recipe).dump());
        CHECK(to_dot(r1.automaton) == to_dot(r2.automaton));
        CHECK(trace_to_csv(r1.trace) == trace_to_csv(r2.trace));
    }
    SECTION("best-so-far never increases and ends at the best cost") {
        double prev = std::numeric_limits<double>::infinity();
        double min_cand = std::numeric_limits<double>::infinity();
        for (const auto& s : r1.trace.steps) {
            CHECK(s.best <= prev);
            prev = s.best;
            min_cand = std::min(min_cand, s.cost);
        }
        CHECK(r1.best_cost == min_cand);
        CHECK(r1.best_cost <= r1.initial_cost);
    }
    SECTION("every step's candidate accepted all histories") {
        // cost is finite everywhere since over-approximation holds throughout
        for (const auto& s : r1.trace.steps) CHECK(std::isfinite(s.cost));
    }
    SECTION("the returned automaton accepts the corpus") {
        for (const auto& h : m.hist) CHECK(accepts(r1.automaton, h));
    }
}

TEST_CASE("tune rejects an empty corpus") {
    CostConfig cfg;
    cfg.bound = 1;
    CHECK_THROWS_AS(tune({}, cfg), Error);
}

TEST_CASE("trace CSV format") {
    TunerTrace t;
    t.steps.push_back({0, 42.0, true, 42.0});
    t.steps.push_back({1, 50.5, false, 42.0});
    CHECK(trace_to_csv(t) == "Step,Cost,Accepted,Best\n0,42,1,42\n1,50.5,0,42\n");
}
