#ifndef SPECMINE_TUNER_HPP
#define SPECMINE_TUNER_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "specmine/abstraction.hpp"
#include "specmine/automaton.hpp"
#include "specmine/error.hpp"
#include "specmine/rng.hpp"
#include "specmine/sessions.hpp"

namespace specmine {

// Weights of the cost terms plus the annealing schedule. Cost is
//   w_size * (|states| + |transitions|)
//   + w_precision * novelty          (bounded-language mass not observed)
//   - w_generality * coverage_gain   (reward, floored so cost stays >= 0)
struct CostConfig {
    double w_size = 1.0;
    double w_precision = 5.0;
    double w_generality = 1.0;
    unsigned k_eval = 4;     // horizon for the bounded-language comparison
    double t0 = 10.0;        // initial temperature
    double cooling = 0.999;  // geometric factor per step
    std::size_t bound = 10000;
    std::uint64_t rng_seed = 42;
};

inline std::optional<CostConfig> cost_config_preset(const std::string& name) {
    CostConfig cfg;
    if (name == "default") {
        cfg.w_size = 1.0;
        cfg.w_precision = 5.0;
        cfg.w_generality = 1.0;
    } else if (name == "general") {
        cfg.w_size = 1.0;
        cfg.w_precision = 1.0;
        cfg.w_generality = 5.0;
    } else if (name == "precise") {
        cfg.w_size = 0.2;
        cfg.w_precision = 10.0;
        cfg.w_generality = 0.0;
    } else {
        return std::nullopt;
    }
    return cfg;
}

struct TunerTrace {
    struct Step {
        std::size_t step = 0;
        double cost = 0.0;
        bool accepted = false;
        double best = 0.0; // best-so-far, non-increasing
    };
    std::vector<Step> steps;
};

namespace detail {

inline std::string format_double(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Counts of the structurally-determinized bounded language (variable names
// and freshness ignored) against the observed abstract-history prefixes.
struct LanguageStats {
    double total = 0.0;   // |L^k(a)|, empty sequence included
    double matched = 0.0; // |L^k(a) intersect ObservedPrefixes|
    double observed = 0.0;
};

inline LanguageStats bounded_language_stats(const Automaton& a,
                                            const std::vector<std::vector<AbstractEvent>>& observed,
                                            unsigned k) {
    std::map<std::string, std::size_t> slabel_ids;
    auto intern = [&](const AbstractEvent& e) {
        return slabel_ids.try_emplace(structural_key(e), slabel_ids.size()).first->second;
    };

    // trie over observed prefixes of length <= k
    struct TrieNode {
        std::map<std::size_t, std::size_t> next;
    };
    std::vector<TrieNode> trie(1);
    for (const auto& h : observed) {
        std::size_t node = 0;
        for (std::size_t p = 0; p < h.size() && p < k; ++p) {
            std::size_t lbl = intern(h[p]);
            auto it = trie[node].next.find(lbl);
            if (it == trie[node].next.end()) {
                trie.push_back({});
                it = trie[node].next.emplace(lbl, trie.size() - 1).first;
            }
            node = it->second;
        }
    }

    // structural subset construction, expanded to depth k
    auto out = out_index(a);
    std::map<std::vector<StateId>, std::size_t> subset_ids;
    std::vector<std::vector<StateId>> subsets;
    std::vector<std::map<std::size_t, std::size_t>> succ; // subset -> label -> subset
    auto subset_of = [&](std::vector<StateId> states) {
        std::sort(states.begin(), states.end());
        states.erase(std::unique(states.begin(), states.end()), states.end());
        auto [it, inserted] = subset_ids.try_emplace(states, subsets.size());
        if (inserted) {
            subsets.push_back(it->first);
            succ.emplace_back();
        }
        return it->second;
    };
    std::size_t start = subset_of({a.initial});
    std::vector<bool> expanded;
    std::function<void(std::size_t)> expand = [&](std::size_t id) {
        if (id < expanded.size() && expanded[id]) return;
        if (expanded.size() <= id) expanded.resize(id + 1, false);
        expanded[id] = true;
        std::map<std::size_t, std::vector<StateId>> targets;
        for (StateId s : subsets[id])
            for (std::size_t e : out[s]) targets[intern(a.transitions[e].label)].push_back(a.transitions[e].to);
        for (auto& [lbl, to] : targets) succ[id][lbl] = subset_of(std::move(to));
    };

    // total sequences: memoized path counting over the determinized graph
    std::map<std::pair<std::size_t, unsigned>, double> cnt;
    std::function<double(std::size_t, unsigned)> count = [&](std::size_t id, unsigned d) -> double {
        if (d == 0) return 1.0;
        auto it = cnt.find({id, d});
        if (it != cnt.end()) return it->second;
        expand(id);
        double total = 1.0;
        for (const auto& [lbl, nx] : succ[id]) total += count(nx, d - 1);
        cnt[{id, d}] = total;
        return total;
    };

    LanguageStats stats;
    stats.total = count(start, k);

    // observed prefixes traceable in the automaton: co-walk trie x subsets
    std::function<double(std::size_t, std::size_t, unsigned)> walk =
        [&](std::size_t tnode, std::size_t id, unsigned d) -> double {
        double m = 1.0; // this prefix itself
        if (d == 0) return m;
        expand(id);
        for (const auto& [lbl, tchild] : trie[tnode].next) {
            auto it = succ[id].find(lbl);
            if (it != succ[id].end()) m += walk(tchild, it->second, d - 1);
        }
        return m;
    };
    stats.matched = walk(0, start, k);
    stats.observed = static_cast<double>(trie.size()); // every trie node is a prefix (incl. empty)
    return stats;
}

} // namespace detail

// Cost of a candidate automaton over the corpus it was built from. An
// automaton that fails to accept one of the mined histories is priced at
// +infinity (the construction never produces one, but a guard is cheap).
inline double compute_cost(const Automaton& a, const std::vector<History>& histories,
                           const Recipe& recipe, const CostConfig& cfg) {
    for (const auto& h : histories)
        if (!accepts(a, h)) return std::numeric_limits<double>::infinity();

    AbstractionResult abs = abstract_histories(histories, recipe);
    detail::LanguageStats stats = detail::bounded_language_stats(a, abs.histories, cfg.k_eval);

    double novelty_count = stats.total - stats.matched;
    double novelty = novelty_count / std::max(1.0, stats.total);
    double coverage_gain = std::min(1.0, novelty_count / std::max(1.0, stats.observed));
    double size = static_cast<double>(a.num_states + a.transitions.size());
    double cost = cfg.w_size * size + cfg.w_precision * novelty - cfg.w_generality * coverage_gain;
    return std::max(0.0, cost);
}

// Field keys and variable inventory of a corpus; the mutation domain.
class CorpusProfile {
  public:
    explicit CorpusProfile(const std::vector<History>& histories) : m_histories(&histories) {
        std::map<std::string, std::uint32_t> arity;
        std::map<std::string, bool> has_output;
        for (const auto& h : histories) {
            for (const auto& ev : h.events) {
                auto& a = arity[ev.signature];
                a = std::max(a, static_cast<std::uint32_t>(ev.inputs.size()));
                has_output[ev.signature] = has_output[ev.signature] || ev.output.has_value();
            }
        }
        for (const auto& [sig, n] : arity) {
            m_keys.push_back({sig, field_caller()});
            m_keys.push_back({sig, field_callee()});
            m_keys.push_back({sig, field_signature()});
            for (std::uint32_t i = 0; i < n; ++i) m_keys.push_back({sig, field_input(i)});
            if (has_output[sig]) m_keys.push_back({sig, field_output()});
            m_keys.push_back({sig, field_value()});
            // Status is exempt from abstraction and never a mutation target.
        }
        std::sort(m_keys.begin(), m_keys.end());
    }

    const std::vector<FieldKey>& field_keys() const { return m_keys; }

    // Variable names the recipe currently produces, in corpus order. The
    // counter replays abstract_histories' numbering exactly.
    std::vector<std::string> vars_for(const Recipe& recipe) const {
        std::vector<std::string> names;
        std::size_t counter = 0;
        for (const auto& h : *m_histories)
            for (const auto& ev : h.events) counter = replay_counter(recipe, ev, counter, &names);
        return names;
    }

  private:
    static std::size_t replay_counter(const Recipe& recipe, const EventRecord& ev, std::size_t counter,
                                      std::vector<std::string>* names) {
        auto visit = [&](const FieldRef& f) {
            if (f.tag == FieldRef::Tag::Status) return;
            if (!field_value_of(ev, f)) return;
            if (recipe.abstraction_for({ev.signature, f}) == FieldAbstraction::Variable) {
                if (names) names->push_back("v" + std::to_string(counter));
                ++counter;
            }
        };
        visit(field_caller());
        visit(field_callee());
        visit(field_signature());
        for (std::uint32_t i = 0; i < ev.inputs.size(); ++i) visit(field_input(i));
        visit(field_output());
        visit(field_value());
        return counter;
    }

    const std::vector<History>* m_histories;
    std::vector<FieldKey> m_keys;
};

// One random variation: change one field abstraction, append a move, or
// delete a move. Inapplicable options are re-drawn. Never mutates in place.
inline Recipe modify_recipe(const Recipe& r, const CorpusProfile& profile, Rng& rng) {
    Recipe out = r;
    for (;;) {
        switch (rng.below(5)) {
            case 0: { // re-abstract one field
                const auto& keys = profile.field_keys();
                if (keys.empty()) continue;
                const FieldKey& key = keys[rng.below(keys.size())];
                FieldAbstraction current = r.abstraction_for(key);
                FieldAbstraction variants[] = {FieldAbstraction::Identity, FieldAbstraction::Variable,
                                               FieldAbstraction::Top};
                std::vector<FieldAbstraction> others;
                for (FieldAbstraction v : variants)
                    if (v != current) others.push_back(v);
                out.abstractions[key] = others[rng.below(others.size())];
                return out;
            }
            case 1: {
                Move m;
                m.kind = Move::Kind::MergeSameFuture;
                m.k = static_cast<unsigned>(rng.below(9));
                out.moves.push_back(m);
                return out;
            }
            case 2: {
                Move m;
                m.kind = Move::Kind::MergeSimilarFuture;
                m.k = static_cast<unsigned>(rng.below(9));
                out.moves.push_back(m);
                return out;
            }
            case 3: { // merge two variables the recipe currently produces
                std::vector<std::string> vars = profile.vars_for(r);
                if (vars.size() < 2) continue;
                std::size_t i = rng.below(vars.size());
                std::size_t j = rng.below(vars.size() - 1);
                if (j >= i) ++j;
                Move m;
                m.kind = Move::Kind::MergeVars;
                m.v1 = vars[i];
                m.v2 = vars[j];
                out.moves.push_back(std::move(m));
                return out;
            }
            case 4: { // delete a move
                if (r.moves.empty()) continue;
                out.moves.erase(out.moves.begin() + static_cast<std::ptrdiff_t>(rng.below(r.moves.size())));
                return out;
            }
        }
    }
}

// Metropolis acceptance with geometric cooling: a strictly better candidate
// always wins; a worse one wins with probability exp(-dC / (t0 * cooling^step)).
inline bool accept_candidate(double c_cand, double c_lst, std::size_t step, const CostConfig& cfg,
                             Rng& rng) {
    if (c_cand < c_lst) return true;
    double delta = c_cand - c_lst;
    if (std::isnan(delta) || delta <= 0.0) return true; // equal cost (incl. inf == inf)
    double temperature = cfg.t0 * std::pow(cfg.cooling, static_cast<double>(step));
    return rng.real() < std::exp(-delta / temperature);
}

struct TuneResult {
    Automaton automaton;
    Recipe recipe;
    TunerTrace trace;
    double initial_cost = 0.0;
    double best_cost = 0.0;
    std::size_t accepted = 0;
    std::size_t evaluated = 0;
    std::vector<std::string> warnings;
};

inline Automaton build_from_recipe(const std::vector<History>& histories, const Recipe& recipe,
                                   std::vector<std::string>* warnings = nullptr) {
    AbstractionResult abs = abstract_histories(histories, recipe);
    Automaton a = build_automaton(abs.histories);
    return apply_moves(a, recipe.moves, abs.side, warnings);
}

// The search loop: candidates are built from scratch each iteration, the
// best recipe is tracked separately from the one being varied, and the
// variation base only advances on acceptance. Deterministic given the seed.
inline TuneResult tune(const std::vector<History>& histories, const CostConfig& cfg) {
    if (histories.empty()) throw Error(Errc::EmptyCorpus, "no histories to tune over");

    CorpusProfile profile(histories);
    Rng rng(cfg.rng_seed);

    Recipe r_cand = identity_recipe();
    Recipe r_opt = r_cand;
    Recipe r_lst = r_cand;
    double c_opt = std::numeric_limits<double>::infinity();
    double c_lst = std::numeric_limits<double>::infinity();

    TuneResult result;
    for (std::size_t step = 0; step < cfg.bound; ++step) {
        Automaton a_cand = build_from_recipe(histories, r_cand);
        double c_cand = compute_cost(a_cand, histories, r_cand, cfg);
        if (step == 0) result.initial_cost = c_cand;
        if (c_cand < c_opt) {
            c_opt = c_cand;
            r_opt = r_cand;
        }
        bool acc = accept_candidate(c_cand, c_lst, step, cfg, rng);
        if (acc) {
            c_lst = c_cand;
            r_lst = r_cand;
            ++result.accepted;
        }
        result.trace.steps.push_back({step, c_cand, acc, c_opt});
        r_cand = modify_recipe(r_lst, profile, rng);
    }
    result.evaluated = cfg.bound;
    result.best_cost = c_opt;
    result.recipe = r_opt;
    result.automaton = build_from_recipe(histories, r_opt, &result.warnings);
    return result;
}

// CSV with the cost-per-step series (columns usable as x=Step, y=Cost).
inline std::string trace_to_csv(const TunerTrace& trace) {
    std::ostringstream out;
    out << "Step,Cost,Accepted,Best\n";
    for (const auto& s : trace.steps)
        out << s.step << ',' << detail::format_double(s.cost) << ',' << (s.accepted ? 1 : 0) << ','
            << detail::format_double(s.best) << "\n";
    return out.str();
}

} // namespace specmine

#endif // SPECMINE_TUNER_HPP
