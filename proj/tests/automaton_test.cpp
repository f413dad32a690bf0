#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace specmine;

namespace {

EventRecord ev(const std::string& sig, std::vector<Scalar> in = {},
               std::optional<Scalar> out = std::nullopt, EventStatus status = EventStatus::Ok) {
    EventRecord e;
    e.caller = "0xa";
    e.callee = "0xC";
    e.signature = sig;
    e.inputs = std::move(in);
    e.output = status == EventStatus::Ok ? out : std::nullopt;
    e.status = status;
    return e;
}

History hist(std::vector<EventRecord> events) {
    History h;
    h.events = std::move(events);
    return h;
}

AbstractionResult identity_abs(const std::vector<History>& corpus) {
    return abstract_histories(corpus, identity_recipe());
}

std::size_t leaf_count(const Automaton& a) {
    std::set<StateId> with_out;
    for (const auto& t : a.transitions) with_out.insert(t.from);
    std::size_t leaves = 0;
    for (StateId s = 0; s < a.num_states; ++s)
        if (!with_out.count(s)) ++leaves;
    return leaves;
}

bool deterministic_labels(const Automaton& a) {
    std::set<std::pair<StateId, std::string>> seen;
    for (const auto& t : a.transitions)
        if (!seen.insert({t.from, label_key(t.label)}).second) return false;
    return true;
}

} // namespace

TEST_CASE("build_automaton constructs the prefix tree") {
    SECTION("one history of five events gives a chain of six states") {
        std::vector<History> corpus = {hist({ev("a"), ev("b"), ev("c"), ev("d"), ev("e")})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        CHECK(a.num_states == 6);
        CHECK(a.transitions.size() == 5);
    }
    SECTION("shared first events share the initial transition") {
        std::vector<History> corpus = {hist({ev("a"), ev("b")}), hist({ev("a"), ev("c")})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        std::size_t from_initial = 0;
        for (const auto& t : a.transitions)
            if (t.from == a.initial) ++from_initial;
        CHECK(from_initial == 1);
        CHECK(a.num_states == 4);
    }
    SECTION("the rps corpus under the identity recipe is a tree with four leaves") {
        testutil::Mined m = testutil::mine_rps();
        Automaton a = build_automaton(identity_abs(m.hist).histories);
        CHECK(leaf_count(a) == 4);
        CHECK(a.num_states == a.transitions.size() + 1); // tree shape
        CHECK(deterministic_labels(a));
    }
    SECTION("provenance accumulates on shared prefixes") {
        std::vector<History> corpus = {hist({ev("a")}), hist({ev("a")})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        REQUIRE(a.transitions.size() == 1);
        CHECK(a.transitions[0].label.provenance == Provenance{{0, 0}, {1, 0}});
    }
}

TEST_CASE("tree precision: the identity tree accepts exactly the observed prefixes") {
    testutil::Mined m = testutil::mine_rps();
    AbstractionResult abs = identity_abs(m.hist);
    Automaton a = build_automaton(abs.histories);

    std::size_t longest = 0;
    std::set<std::vector<std::string>> observed;
    for (const auto& h : abs.histories) {
        longest = std::max(longest, h.size());
        std::vector<std::string> prefix;
        observed.insert(prefix);
        for (const auto& e : h) {
            prefix.push_back(label_key(e));
            observed.insert(prefix);
        }
    }
    CHECK(bounded_language(a, a.initial, static_cast<unsigned>(longest) + 2) == observed);
}

TEST_CASE("bounded_language") {
    std::vector<History> corpus = {hist({ev("a"), ev("b")})};
    AbstractionResult abs = identity_abs(corpus);
    Automaton a = build_automaton(abs.histories);
    const std::string ka = label_key(abs.histories[0][0]);
    const std::string kb = label_key(abs.histories[0][1]);

    CHECK(bounded_language(a, a.initial, 0) == std::set<std::vector<std::string>>{{}});
    CHECK(bounded_language(a, a.initial, 1) == std::set<std::vector<std::string>>{{}, {ka}});
    CHECK(bounded_language(a, a.initial, 5) ==
          std::set<std::vector<std::string>>{{}, {ka}, {ka, kb}});
    CHECK_THROWS_AS(bounded_language(a, 99, 1), Error);
}

TEST_CASE("merge_same_future") {
    SECTION("k = 0 collapses everything into one state with self-loops") {
        testutil::Mined m = testutil::mine_rps();
        AbstractionResult abs = identity_abs(m.hist);
        Automaton a = build_automaton(abs.histories);
        Automaton merged = merge_same_future(a, 0);
        CHECK(merged.num_states == 1);
        std::set<std::string> labels;
        for (const auto& t : merged.transitions) {
            CHECK(t.from == merged.initial);
            CHECK(t.to == merged.initial);
            labels.insert(label_key(t.label));
        }
        std::set<std::string> distinct;
        for (const auto& h : abs.histories)
            for (const auto& e : h) distinct.insert(label_key(e));
        CHECK(labels == distinct);
        CHECK(deterministic_labels(merged));
    }
    SECTION("an automaton with pairwise distinct futures is unchanged") {
        std::vector<History> corpus = {hist({ev("a"), ev("b"), ev("c")})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        for (unsigned k : {1u, 2u, 3u, 8u}) CHECK(to_dot(merge_same_future(a, k)) == to_dot(a));
    }
    SECTION("identical suffixes of distinct branches merge at large k") {
        std::vector<History> corpus = {hist({ev("x"), ev("a"), ev("b")}),
                                       hist({ev("y"), ev("a"), ev("b")})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        REQUIRE(a.num_states == 7);
        Automaton merged = merge_same_future(a, 8);
        CHECK(merged.num_states == 4); // root, joined mid, joined tail, joined leaf
        CHECK(merged.transitions.size() == 4);
        CHECK(deterministic_labels(merged));
    }
}

TEST_CASE("merge_similar_future") {
    SECTION("an epsilon-future state merges into any other") {
        // chain a -> b: the leaf's language {eps} is a strict subset of the root's
        std::vector<History> corpus = {hist({ev("a")})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        Automaton merged = merge_similar_future(a, 1);
        CHECK(merged.num_states == 1);
        REQUIRE(merged.transitions.size() == 1);
        CHECK(merged.transitions[0].from == merged.transitions[0].to); // became a self-loop
    }
    SECTION("incomparable languages stay apart") {
        // r -p-> a(self x), r -q-> b(self y): all bounded languages incomparable
        std::vector<History> corpus = {hist({ev("p"), ev("x"), ev("x")}),
                                       hist({ev("q"), ev("y"), ev("y")})};
        Automaton tree = build_automaton(identity_abs(corpus).histories);
        // collapses the tails into a loop state; root and loop state have
        // incomparable bounded languages, so similar-future finds nothing
        Automaton looped = merge_same_future(tree, 1);
        Automaton merged = merge_similar_future(looped, 2);
        CHECK(to_dot(merged) == to_dot(looped));
    }
    SECTION("k = 0 never merges (no strict subsets among equal languages)") {
        std::vector<History> corpus = {hist({ev("a"), ev("b")})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        CHECK(to_dot(merge_similar_future(a, 0)) == to_dot(a));
    }
}

TEST_CASE("merge_vars") {
    SECTION("token corpus: rebinding approve callers get the fresh mark") {
        testutil::Mined m = testutil::mine_token();
        REQUIRE(m.hist.size() == 2);
        Recipe r = identity_recipe();
        r.abstractions[{"approve", field_caller()}] = FieldAbstraction::Variable;
        r.abstractions[{"transferFrom", field_input(0)}] = FieldAbstraction::Variable;

        AbstractionResult abs = abstract_histories(m.hist, r);
        std::vector<std::string> vars;
        for (const auto& [name, origin] : abs.side.vars) vars.push_back(name);
        REQUIRE(vars.size() == 6); // 3 approves + 3 transferFroms

        Automaton a = build_automaton(abs.histories);
        for (std::size_t i = 1; i < vars.size(); ++i) a = merge_vars(a, vars[0], vars[i], abs.side);

        // the only fresh occurrence is the second approve of the chained history,
        // whose caller differs from the binding established by the first approve
        std::size_t fresh_approves = 0, plain_approves = 0, fresh_tf = 0;
        for (const auto& t : a.transitions) {
            if (t.label.signature.kind != AbstractValue::Kind::Concrete) continue;
            const std::string sig = scalar_to_string(t.label.signature.value);
            if (sig == "approve") {
                REQUIRE(t.label.caller.kind == AbstractValue::Kind::Var);
                if (t.label.caller.fresh) {
                    ++fresh_approves;
                    CHECK(t.label.provenance == Provenance{{0, 3}});
                } else {
                    ++plain_approves;
                }
            }
            if (sig == "transferFrom") {
                REQUIRE(t.label.inputs.at(0).kind == AbstractValue::Kind::Var);
                if (t.label.inputs.at(0).fresh) ++fresh_tf;
            }
        }
        CHECK(fresh_approves == 1);
        CHECK(plain_approves == 2);
        CHECK(fresh_tf == 0);
    }
    SECTION("merging variables with everywhere-equal values leaves no fresh marks") {
        std::vector<History> corpus = {hist({ev("f", {Scalar(std::int64_t(1))}),
                                             ev("g", {Scalar(std::int64_t(1)), Scalar(std::int64_t(0))})})};
        Recipe r = identity_recipe();
        r.abstractions[{"f", field_input(0)}] = FieldAbstraction::Variable;
        r.abstractions[{"g", field_input(0)}] = FieldAbstraction::Variable;
        AbstractionResult abs = abstract_histories(corpus, r);
        REQUIRE(abs.side.vars.size() == 2);
        Automaton a = build_automaton(abs.histories);
        a = merge_vars(a, "v0", "v1", abs.side);
        for (const auto& t : a.transitions)
            t.label.for_each_field([](const FieldRef&, const AbstractValue& av) {
                if (av.kind == AbstractValue::Kind::Var) CHECK_FALSE(av.fresh);
            });
    }
    SECTION("rps game ids: a single variable with fresh marks on non-first StartGames") {
        testutil::Mined m = testutil::mine_rps();
        Recipe r = identity_recipe();
        r.abstractions[{"StartGame", field_output()}] = FieldAbstraction::Variable;
        r.abstractions[{"Bet", field_input(0)}] = FieldAbstraction::Variable;
        r.abstractions[{"Claim", field_input(0)}] = FieldAbstraction::Variable;
        r.abstractions[{"StartGame", field_caller()}] = FieldAbstraction::Top;
        r.abstractions[{"Bet", field_caller()}] = FieldAbstraction::Top;
        r.abstractions[{"Claim", field_caller()}] = FieldAbstraction::Top;
        r.abstractions[{"Bet", field_input(1)}] = FieldAbstraction::Top;
        r.abstractions[{"Bet", field_input(2)}] = FieldAbstraction::Top;

        AbstractionResult abs = abstract_histories(m.hist, r);
        std::vector<std::string> vars;
        for (const auto& [name, origin] : abs.side.vars) vars.push_back(name);
        std::sort(vars.begin(), vars.end(), [](const std::string& x, const std::string& y) {
            return std::stoul(x.substr(1)) < std::stoul(y.substr(1));
        });
        Automaton a = build_automaton(abs.histories);
        for (std::size_t i = 1; i < vars.size(); ++i) a = merge_vars(a, vars[0], vars[i], abs.side);

        for (const auto& t : a.transitions) {
            if (t.label.signature.kind != AbstractValue::Kind::Concrete) continue;
            const std::string sig = scalar_to_string(t.label.signature.value);
            if (sig == "StartGame") {
                REQUIRE(t.label.output.kind == AbstractValue::Kind::Var);
                CHECK(t.label.output.var == "v0");
                bool covers_first = false;
                for (const auto& [h, p] : t.label.provenance) covers_first = covers_first || p == 1;
                CHECK(t.label.output.fresh == !covers_first);
            }
            if (sig == "Bet" || sig == "Claim") {
                REQUIRE(t.label.inputs.at(0).kind == AbstractValue::Kind::Var);
                CHECK_FALSE(t.label.inputs.at(0).fresh);
            }
        }
        // every mined history is still characterized by its path
        for (const auto& h : m.hist) CHECK(accepts(a, h));
    }
    SECTION("unknown variables are rejected") {
        std::vector<History> corpus = {hist({ev("f", {Scalar(std::int64_t(1))})})};
        Recipe r = identity_recipe();
        r.abstractions[{"f", field_input(0)}] = FieldAbstraction::Variable;
        AbstractionResult abs = abstract_histories(corpus, r);
        Automaton a = build_automaton(abs.histories);
        CHECK_THROWS_AS(merge_vars(a, "v0", "nope", abs.side), Error);
        CHECK_THROWS_AS(merge_vars(a, "nope", "v0", abs.side), Error);
    }
}

TEST_CASE("accepts") {
    testutil::Mined m = testutil::mine_rps();
    AbstractionResult abs = identity_abs(m.hist);
    Automaton a = build_automaton(abs.histories);

    SECTION("every mined history is accepted by its own automaton") {
        for (const auto& h : m.hist) CHECK(accepts(a, h));
    }
    SECTION("the empty history is accepted") {
        CHECK(accepts(a, std::vector<EventRecord>{}));
    }
    SECTION("an unknown signature is rejected") {
        std::vector<EventRecord> h = {ev("NoSuchCall")};
        CHECK_FALSE(accepts(a, h));
    }
    SECTION("prefixes are accepted, extensions of leaves are not") {
        std::vector<EventRecord> prefix(m.hist[0].events.begin(), m.hist[0].events.begin() + 2);
        CHECK(accepts(a, prefix));
        std::vector<EventRecord> extended = m.hist[0].events;
        extended.push_back(extended.back());
        CHECK_FALSE(accepts(a, extended));
    }
    SECTION("bound variables must match, fresh ones rebind") {
        std::vector<History> corpus = {hist({ev("f", {}, Scalar(std::int64_t(1))),
                                             ev("g", {Scalar(std::int64_t(1))})})};
        Recipe r = identity_recipe();
        r.abstractions[{"f", field_output()}] = FieldAbstraction::Variable;
        r.abstractions[{"g", field_input(0)}] = FieldAbstraction::Variable;
        AbstractionResult abs2 = abstract_histories(corpus, r);
        Automaton b = build_automaton(abs2.histories);
        b = merge_vars(b, "v0", "v1", abs2.side);

        // same shape, consistent binding: accepted regardless of the concrete id
        std::vector<EventRecord> ok = {ev("f", {}, Scalar(std::int64_t(7))),
                                       ev("g", {Scalar(std::int64_t(7))})};
        CHECK(accepts(b, ok));
        std::vector<EventRecord> mismatch = {ev("f", {}, Scalar(std::int64_t(7))),
                                             ev("g", {Scalar(std::int64_t(8))})};
        CHECK_FALSE(accepts(b, mismatch));
    }
}

TEST_CASE("apply_moves") {
    testutil::Mined m = testutil::mine_rps();
    AbstractionResult abs = identity_abs(m.hist);
    Automaton a = build_automaton(abs.histories);

    SECTION("no moves, no change") {
        CHECK(to_dot(apply_moves(a, {}, abs.side)) == to_dot(a));
    }
    SECTION("a single k=0 same-future merge yields one state") {
        Automaton merged = apply_moves(a, {{Move::Kind::MergeSameFuture, 0, "", ""}}, abs.side);
        CHECK(merged.num_states == 1);
    }
    SECTION("stale variable merges are skipped with a warning") {
        std::vector<std::string> warnings;
        Automaton merged =
            apply_moves(a, {{Move::Kind::MergeVars, 0, "v0", "v1"}}, abs.side, &warnings);
        CHECK(to_dot(merged) == to_dot(a));
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("v0") != std::string::npos);
    }
}

TEST_CASE("moves never shrink the accepted corpus") {
    Rng rng(123);
    int merges_seen = 0;
    for (int trial = 0; trial < 120; ++trial) {
        std::vector<History> corpus = testutil::random_corpus(rng);
        CorpusProfile profile(corpus);
        Recipe recipe = testutil::random_recipe(profile, rng, rng.below(6));

        AbstractionResult abs = abstract_histories(corpus, recipe);
        Automaton a = build_automaton(abs.histories);
        std::vector<std::string> warnings;
        a = apply_moves(a, recipe.moves, abs.side, &warnings);

        Recipe next = modify_recipe(recipe, profile, rng);
        if (next.moves.size() <= recipe.moves.size()) continue; // only appended moves apply here
        Move extra = next.moves.back();
        Automaton b = apply_moves(a, {extra}, abs.side);
        ++merges_seen;

        for (const auto& h : corpus) {
            if (!accepts(a, h)) continue;
            CHECK(accepts(b, h));
        }
        CHECK(deterministic_labels(b));
    }
    CHECK(merges_seen > 30);
}

TEST_CASE("label determinism holds after every operation") {
    Rng rng(321);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<History> corpus = testutil::random_corpus(rng);
        CorpusProfile profile(corpus);
        Recipe recipe = testutil::random_recipe(profile, rng, 2 + rng.below(8));
        Automaton a = build_from_recipe(corpus, recipe);
        CHECK(deterministic_labels(a));
    }
}

TEST_CASE("DOT export") {
    SECTION("single state, no edges") {
        Automaton a;
        std::string dot = to_dot(a);
        CHECK(dot.find("0 [label=\"0\"]") != std::string::npos);
        CHECK(dot.find("->") != std::string::npos);       // only the start marker
        CHECK(dot.find("0 -> ") == std::string::npos);    // no real edges
    }
    SECTION("a chain of two states renders the field table") {
        std::vector<History> corpus = {hist({ev("Bet", {Scalar(std::int64_t(1))}, std::nullopt)})};
        Automaton a = build_automaton(identity_abs(corpus).histories);
        std::string dot = to_dot(a);
        CHECK(dot.find("Caller: 0xa") != std::string::npos);
        CHECK(dot.find("Signature: Bet") != std::string::npos);
        CHECK(dot.find("Input(0): 1") != std::string::npos);
        CHECK(dot.find("Status: ok") != std::string::npos);
        CHECK(dot.find("Output") == std::string::npos); // absent field omitted
    }
    SECTION("fresh variables render with a star") {
        testutil::Mined m = testutil::mine_token();
        Recipe r = identity_recipe();
        r.abstractions[{"approve", field_caller()}] = FieldAbstraction::Variable;
        r.abstractions[{"transferFrom", field_input(0)}] = FieldAbstraction::Variable;
        AbstractionResult abs = abstract_histories(m.hist, r);
        std::vector<std::string> vars;
        for (const auto& [name, origin] : abs.side.vars) vars.push_back(name);
        Automaton a = build_automaton(abs.histories);
        for (std::size_t i = 1; i < vars.size(); ++i) a = merge_vars(a, vars[0], vars[i], abs.side);
        std::string dot = to_dot(a);
        CHECK(dot.find("Caller: *v") != std::string::npos);
    }
    SECTION("identical automata render byte-identically") {
        testutil::Mined m = testutil::mine_rps();
        AbstractionResult abs = identity_abs(m.hist);
        Automaton a = build_automaton(abs.histories);
        Automaton b = build_automaton(abs.histories);
        CHECK(to_dot(a) == to_dot(b));
        CHECK(to_dot(merge_same_future(a, 2)) == to_dot(merge_same_future(b, 2)));
    }
}
