#ifndef SPECMINE_AUTOMATON_HPP
#define SPECMINE_AUTOMATON_HPP

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "specmine/abstraction.hpp"
#include "specmine/error.hpp"
#include "specmine/trace.hpp"

namespace specmine {

using StateId = std::size_t;

struct Transition {
    StateId from = 0;
    AbstractEvent label;
    StateId to = 0;
};

// Label-deterministic acceptor; every state is accepting, so the language is
// prefix-closed by construction.
struct Automaton {
    std::size_t num_states = 1;
    StateId initial = 0;
    std::vector<Transition> transitions;
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }

    bool merge(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b); // keep the smaller id as root
        parent[b] = a;
        return true;
    }
};

inline std::vector<std::vector<std::size_t>> out_index(const Automaton& a) {
    std::vector<std::vector<std::size_t>> out(a.num_states);
    for (std::size_t i = 0; i < a.transitions.size(); ++i) out[a.transitions[i].from].push_back(i);
    return out;
}

// Collapses states per `cls` (any labeling); duplicate transitions merge
// their provenance.
inline Automaton quotient(const Automaton& a, const std::vector<std::size_t>& cls) {
    std::map<std::size_t, StateId> renumber;
    auto state_of = [&](std::size_t c) {
        auto [it, inserted] = renumber.try_emplace(c, renumber.size());
        return it->second;
    };
    Automaton out;
    out.initial = state_of(cls[a.initial]);
    for (StateId s = 0; s < a.num_states; ++s) state_of(cls[s]);
    out.num_states = renumber.size();

    std::map<std::tuple<StateId, std::string, StateId>, std::size_t> seen;
    for (const auto& t : a.transitions) {
        StateId from = state_of(cls[t.from]);
        StateId to = state_of(cls[t.to]);
        auto key = std::make_tuple(from, label_key(t.label), to);
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(key, out.transitions.size());
            out.transitions.push_back({from, t.label, to});
        } else {
            auto& prov = out.transitions[it->second].label.provenance;
            prov.insert(t.label.provenance.begin(), t.label.provenance.end());
        }
    }
    return out;
}

// Re-establishes label determinism by merging the targets of equal-labeled
// edges until a fixpoint (the usual prefix-tree-acceptor fold).
inline Automaton restore_determinism(const Automaton& a) {
    UnionFind uf(a.num_states);
    std::vector<std::string> keys;
    keys.reserve(a.transitions.size());
    for (const auto& t : a.transitions) keys.push_back(label_key(t.label));

    bool changed = true;
    while (changed) {
        changed = false;
        std::map<std::pair<std::size_t, std::string_view>, std::size_t> seen;
        for (std::size_t i = 0; i < a.transitions.size(); ++i) {
            std::size_t from = uf.find(a.transitions[i].from);
            std::size_t to = uf.find(a.transitions[i].to);
            auto [it, inserted] = seen.try_emplace({from, std::string_view(keys[i])}, to);
            if (!inserted && uf.find(it->second) != to) {
                uf.merge(it->second, to);
                changed = true;
            }
        }
    }
    std::vector<std::size_t> cls(a.num_states);
    for (std::size_t s = 0; s < a.num_states; ++s) cls[s] = uf.find(s);
    return quotient(a, cls);
}

} // namespace detail

// BFS renumbering from the initial state with edges visited in label-key
// order; unreachable states are dropped. Gives every automaton value a
// unique representative, independent of how it was produced.
inline Automaton canonicalize(const Automaton& a) {
    auto out = detail::out_index(a);
    std::vector<std::string> keys;
    keys.reserve(a.transitions.size());
    for (const auto& t : a.transitions) keys.push_back(label_key(t.label));
    for (auto& edges : out)
        std::sort(edges.begin(), edges.end(), [&](std::size_t x, std::size_t y) {
            if (keys[x] != keys[y]) return keys[x] < keys[y];
            return a.transitions[x].to < a.transitions[y].to;
        });

    std::vector<std::size_t> renumber(a.num_states, SIZE_MAX);
    std::deque<StateId> todo;
    renumber[a.initial] = 0;
    std::size_t next = 1;
    todo.push_back(a.initial);
    while (!todo.empty()) {
        StateId s = todo.front();
        todo.pop_front();
        for (std::size_t e : out[s]) {
            StateId t = a.transitions[e].to;
            if (renumber[t] == SIZE_MAX) {
                renumber[t] = next++;
                todo.push_back(t);
            }
        }
    }

    Automaton result;
    result.initial = 0;
    result.num_states = next;
    for (std::size_t i = 0; i < a.transitions.size(); ++i) {
        const auto& t = a.transitions[i];
        if (renumber[t.from] == SIZE_MAX || renumber[t.to] == SIZE_MAX) continue;
        result.transitions.push_back({renumber[t.from], t.label, renumber[t.to]});
    }
    std::sort(result.transitions.begin(), result.transitions.end(),
              [](const Transition& x, const Transition& y) {
                  if (x.from != y.from) return x.from < y.from;
                  std::string kx = label_key(x.label), ky = label_key(y.label);
                  if (kx != ky) return kx < ky;
                  return x.to < y.to;
              });
    return result;
}

// Prefix-tree acceptor over the abstract histories: shared prefixes share
// states, transition provenance accumulates the contributing occurrences.
inline Automaton build_automaton(const std::vector<std::vector<AbstractEvent>>& histories) {
    Automaton a;
    std::vector<std::map<std::string, std::size_t>> by_key(1); // state -> label key -> transition
    for (std::size_t h = 0; h < histories.size(); ++h) {
        StateId state = 0;
        for (std::size_t p = 0; p < histories[h].size(); ++p) {
            const AbstractEvent& ev = histories[h][p];
            std::string key = label_key(ev);
            auto it = by_key[state].find(key);
            if (it != by_key[state].end()) {
                Transition& t = a.transitions[it->second];
                t.label.provenance.insert({h, p});
                state = t.to;
            } else {
                StateId fresh = a.num_states++;
                by_key.emplace_back();
                by_key[state].emplace(std::move(key), a.transitions.size());
                Transition t{state, ev, fresh};
                t.label.provenance.insert({h, p});
                a.transitions.push_back(std::move(t));
                state = fresh;
            }
        }
    }
    return canonicalize(a);
}

// L_q^k: all label sequences of length <= k traceable from q, as canonical
// label keys. Always contains the empty sequence.
inline std::set<std::vector<std::string>> bounded_language(const Automaton& a, StateId q, unsigned k) {
    if (q >= a.num_states) throw Error(Errc::UnknownState, "state " + std::to_string(q));
    auto out = detail::out_index(a);
    std::map<std::pair<StateId, unsigned>, std::set<std::vector<std::string>>> memo;
    std::function<const std::set<std::vector<std::string>>&(StateId, unsigned)> lang =
        [&](StateId s, unsigned d) -> const std::set<std::vector<std::string>>& {
        auto it = memo.find({s, d});
        if (it != memo.end()) return it->second;
        std::set<std::vector<std::string>> result;
        result.insert({});
        if (d > 0) {
            for (std::size_t e : out[s]) {
                std::string key = label_key(a.transitions[e].label);
                for (const auto& w : lang(a.transitions[e].to, d - 1)) {
                    std::vector<std::string> seq;
                    seq.reserve(w.size() + 1);
                    seq.push_back(key);
                    seq.insert(seq.end(), w.begin(), w.end());
                    result.insert(std::move(seq));
                }
            }
        }
        return memo.emplace(std::make_pair(s, d), std::move(result)).first->second;
    };
    return lang(q, k);
}

namespace detail {

// Classes of L^k-equality via k rounds of partition refinement; relies on
// label determinism of the input.
inline std::vector<std::size_t> same_future_classes(const Automaton& a, unsigned k) {
    std::map<std::string, std::size_t> label_ids;
    std::vector<std::size_t> tlabel(a.transitions.size());
    for (std::size_t i = 0; i < a.transitions.size(); ++i)
        tlabel[i] = label_ids.try_emplace(label_key(a.transitions[i].label), label_ids.size()).first->second;

    auto out = out_index(a);
    std::vector<std::size_t> cls(a.num_states, 0);
    for (unsigned round = 0; round < k; ++round) {
        std::map<std::vector<std::pair<std::size_t, std::size_t>>, std::size_t> sig_ids;
        std::vector<std::size_t> next(a.num_states);
        for (StateId s = 0; s < a.num_states; ++s) {
            std::vector<std::pair<std::size_t, std::size_t>> sig;
            for (std::size_t e : out[s]) sig.emplace_back(tlabel[e], cls[a.transitions[e].to]);
            std::sort(sig.begin(), sig.end());
            sig.erase(std::unique(sig.begin(), sig.end()), sig.end());
            next[s] = sig_ids.try_emplace(std::move(sig), sig_ids.size()).first->second;
        }
        if (next == cls) break; // stabilized early
        cls = std::move(next);
    }
    return cls;
}

// L_q^k subset of L_r^k, for deterministic automata.
class BoundedSubset {
  public:
    BoundedSubset(const Automaton& a, unsigned k) : m_a(a), m_k(k), m_out(out_index(a)) {
        std::map<std::string, std::size_t> label_ids;
        m_tlabel.resize(a.transitions.size());
        for (std::size_t i = 0; i < a.transitions.size(); ++i)
            m_tlabel[i] = label_ids.try_emplace(label_key(a.transitions[i].label), label_ids.size()).first->second;
        m_memo.assign(a.num_states * a.num_states * (k + 1), 0);
    }

    bool subset(StateId q, StateId r) { return subset(q, r, m_k); }

  private:
    // Recursion strictly decreases d, so no cycle handling is needed.
    bool subset(StateId q, StateId r, unsigned d) {
        if (d == 0 || q == r) return true;
        std::uint8_t& slot = m_memo[(q * m_a.num_states + r) * (m_k + 1) + d];
        if (slot) return slot == 2;
        bool ok = true;
        for (std::size_t eq : m_out[q]) {
            bool found = false;
            for (std::size_t er : m_out[r]) {
                if (m_tlabel[eq] != m_tlabel[er]) continue;
                found = subset(m_a.transitions[eq].to, m_a.transitions[er].to, d - 1);
                break; // deterministic: at most one matching label
            }
            if (!found) {
                ok = false;
                break;
            }
        }
        slot = ok ? 2 : 1;
        return ok;
    }

    const Automaton& m_a;
    unsigned m_k;
    std::vector<std::vector<std::size_t>> m_out;
    std::vector<std::size_t> m_tlabel;
    std::vector<std::uint8_t> m_memo;
};

} // namespace detail

// Merges all states with pairwise equal k-bounded futures, then restores
// label determinism.
inline Automaton merge_same_future(const Automaton& a, unsigned k) {
    Automaton c = canonicalize(a);
    std::vector<std::size_t> cls = detail::same_future_classes(c, k);
    return canonicalize(detail::restore_determinism(detail::quotient(c, cls)));
}

// Merges states whose k-bounded futures are in a strict subset relation
// (either way). The relation is not transitive, so its union-find closure
// decides the merge classes; pairs are visited in canonical state order.
inline Automaton merge_similar_future(const Automaton& a, unsigned k) {
    Automaton c = canonicalize(a);
    std::vector<std::size_t> eq = detail::same_future_classes(c, k);
    detail::BoundedSubset subset(c, k);
    detail::UnionFind uf(c.num_states);
    for (StateId q = 0; q < c.num_states; ++q) {
        for (StateId r = q + 1; r < c.num_states; ++r) {
            if (eq[q] == eq[r]) continue; // equal, not strict
            if (subset.subset(q, r) || subset.subset(r, q)) uf.merge(q, r);
        }
    }
    std::vector<std::size_t> cls(c.num_states);
    for (StateId s = 0; s < c.num_states; ++s) cls[s] = uf.find(s);
    return canonicalize(detail::restore_determinism(detail::quotient(c, cls)));
}

// Renames v2 to v1 everywhere, then re-derives freshness for v1: every
// concrete history is walked along its provenance path, and an occurrence
// whose concrete value rebinds the variable marks its transition fresh.
// Mixed-behavior transitions come out fresh, which keeps every covering
// history accepted.
inline Automaton merge_vars(const Automaton& a, const std::string& v1, const std::string& v2,
                            const SideTable& side) {
    if (v1 == v2) throw Error(Errc::InvalidArgument, "merge_vars needs distinct variables");
    Automaton c = canonicalize(a);

    auto occurs = [&](const std::string& v) {
        for (const auto& t : c.transitions) {
            bool found = false;
            t.label.for_each_field([&](const FieldRef&, const AbstractValue& av) {
                if (av.kind == AbstractValue::Kind::Var && av.var == v) found = true;
            });
            if (found) return true;
        }
        return false;
    };
    if (!occurs(v1)) throw Error(Errc::UnknownVariable, "'" + v1 + "'");
    if (!occurs(v2)) throw Error(Errc::UnknownVariable, "'" + v2 + "'");

    // (i) rename; freshness of v1 occurrences is recomputed below
    for (auto& t : c.transitions) {
        AbstractEvent& label = t.label;
        label.for_each_field([&](const FieldRef& f, const AbstractValue& av) {
            if (av.kind != AbstractValue::Kind::Var) return;
            if (av.var == v2 || av.var == v1) {
                AbstractValue nv = av;
                nv.var = v1;
                nv.fresh = false;
                label.set(f, nv);
            }
        });
    }

    // (ii) walk the concrete histories through their provenance paths
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> occ_tx;
    for (std::size_t i = 0; i < c.transitions.size(); ++i)
        for (const auto& occ : c.transitions[i].label.provenance) occ_tx[occ] = i;

    std::set<std::pair<std::size_t, std::string>> fresh_marks; // (transition, field key)
    auto field_tag = [](const FieldRef& f) { return field_name(f); };
    for (std::size_t h = 0; h < side.concrete.size(); ++h) {
        const auto& events = side.concrete[h];
        bool complete = true;
        for (std::size_t p = 0; p < events.size() && complete; ++p)
            if (!occ_tx.count({h, p})) complete = false;
        if (!complete) continue; // history not represented by this automaton

        std::optional<Scalar> binding;
        for (std::size_t p = 0; p < events.size(); ++p) {
            std::size_t ti = occ_tx[{h, p}];
            c.transitions[ti].label.for_each_field([&](const FieldRef& f, const AbstractValue& av) {
                if (av.kind != AbstractValue::Kind::Var || av.var != v1) return;
                std::optional<Scalar> cv = field_value_of(events[p], f);
                if (!cv) return;
                if (binding && !(*binding == *cv)) fresh_marks.insert({ti, field_tag(f)});
                binding = *cv;
            });
        }
    }

    for (auto& [ti, ftag] : fresh_marks) {
        AbstractEvent& label = c.transitions[ti].label;
        label.for_each_field([&](const FieldRef& f, const AbstractValue& av) {
            if (field_name(f) != ftag) return;
            AbstractValue nv = av;
            nv.fresh = true;
            label.set(f, nv);
        });
    }

    // (iii) labels that became equal collapse
    return canonicalize(detail::restore_determinism(c));
}

namespace detail {

// Matches one concrete event against a label under the variable-binding
// environment: Top matches anything, Concrete matches equal scalars, a bound
// variable must match its binding, and a fresh (or unbound) occurrence
// (re)binds it.
inline bool match_label(const AbstractEvent& label, const EventRecord& ev,
                        std::map<std::string, Scalar>& env) {
    auto match_one = [&](const FieldRef& f, const AbstractValue& av) {
        std::optional<Scalar> cv = field_value_of(ev, f);
        switch (av.kind) {
            case AbstractValue::Kind::Top: return true;
            case AbstractValue::Kind::Concrete: return cv.has_value() && *cv == av.value;
            case AbstractValue::Kind::Var: {
                if (!cv) return false;
                auto it = env.find(av.var);
                if (it == env.end()) {
                    env.emplace(av.var, *cv);
                    return true;
                }
                if (av.fresh) {
                    it->second = *cv;
                    return true;
                }
                return it->second == *cv;
            }
        }
        return false;
    };
    if (!match_one(field_caller(), label.caller)) return false;
    if (!match_one(field_callee(), label.callee)) return false;
    if (!match_one(field_signature(), label.signature)) return false;
    const std::size_t arity = std::max(label.inputs.size(), ev.inputs.size());
    for (std::uint32_t i = 0; i < arity; ++i)
        if (!match_one(field_input(i), label.get(field_input(i)))) return false;
    if (!match_one(field_output(), label.output)) return false;
    if (!match_one(field_value(), label.value)) return false;
    if (!match_one(field_status(), label.status)) return false;
    return true;
}

} // namespace detail

// True iff the concrete history traces a path from the initial state under
// binding semantics. All states accept, so consuming every event suffices.
// Backtracks because several labels may match the same concrete event.
inline bool accepts(const Automaton& a, const std::vector<EventRecord>& events) {
    auto out = detail::out_index(a);
    std::function<bool(StateId, std::size_t, const std::map<std::string, Scalar>&)> walk =
        [&](StateId s, std::size_t pos, const std::map<std::string, Scalar>& env) {
            if (pos == events.size()) return true;
            for (std::size_t e : out[s]) {
                std::map<std::string, Scalar> env2 = env;
                if (detail::match_label(a.transitions[e].label, events[pos], env2) &&
                    walk(a.transitions[e].to, pos + 1, env2))
                    return true;
            }
            return false;
        };
    return walk(a.initial, 0, {});
}

inline bool accepts(const Automaton& a, const History& h) { return accepts(a, h.events); }

// Folds the moves left to right. Merges over variables the recipe no longer
// produces are skipped (mutation can leave stale moves behind); a note per
// skip lands in `warnings` when given.
inline Automaton apply_moves(const Automaton& a, const std::vector<Move>& moves, const SideTable& side,
                             std::vector<std::string>* warnings = nullptr) {
    Automaton cur = a;
    for (const auto& m : moves) {
        switch (m.kind) {
            case Move::Kind::MergeSameFuture: cur = merge_same_future(cur, m.k); break;
            case Move::Kind::MergeSimilarFuture: cur = merge_similar_future(cur, m.k); break;
            case Move::Kind::MergeVars:
                try {
                    cur = merge_vars(cur, m.v1, m.v2, side);
                } catch (const Error& e) {
                    if (e.code() != Errc::UnknownVariable) throw;
                    if (warnings)
                        warnings->push_back("skipping merge of " + m.v1 + "/" + m.v2 + ": " + e.what());
                }
                break;
        }
    }
    return cur;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline std::string render_value(const AbstractValue& v) {
    switch (v.kind) {
        case AbstractValue::Kind::Concrete: return scalar_to_string(v.value);
        case AbstractValue::Kind::Var: return (v.fresh ? "*" : "") + v.var;
        case AbstractValue::Kind::Top: return "";
    }
    return "";
}

inline std::string render_label(const AbstractEvent& e) {
    std::ostringstream out;
    auto row = [&](const std::string& name, const AbstractValue& v) {
        if (v.kind == AbstractValue::Kind::Top) return;
        out << name << ": " << dot_escape(render_value(v)) << "\\l";
    };
    row("Caller", e.caller);
    row("Callee", e.callee);
    row("Signature", e.signature);
    for (std::size_t i = 0; i < e.inputs.size(); ++i) row("Input(" + std::to_string(i) + ")", e.inputs[i]);
    row("Output", e.output);
    row("Value", e.value);
    row("Status", e.status);
    return out.str();
}

} // namespace detail

// Deterministic DOT text: canonical BFS numbering, edges in sorted order,
// one table-like row per non-Top field, fresh variables rendered "*v".
inline std::string to_dot(const Automaton& a) {
    Automaton c = canonicalize(a);
    std::ostringstream out;
    out << "digraph automaton {\n  rankdir=TB;\n  node [shape=circle];\n";
    out << "  __start [shape=point, label=\"\"];\n";
    for (StateId s = 0; s < c.num_states; ++s) out << "  " << s << " [label=\"" << s << "\"];\n";
    out << "  __start -> " << c.initial << ";\n";
    for (const auto& t : c.transitions)
        out << "  " << t.from << " -> " << t.to << " [label=\"" << detail::render_label(t.label)
            << "\"];\n";
    out << "}\n";
    return out.str();
}

} // namespace specmine

#endif // SPECMINE_AUTOMATON_HPP
