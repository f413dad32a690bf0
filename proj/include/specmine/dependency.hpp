#ifndef SPECMINE_DEPENDENCY_HPP
#define SPECMINE_DEPENDENCY_HPP

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "specmine/error.hpp"
#include "specmine/trace.hpp"

namespace specmine {

// Read/write effects of one transaction, with balance locations excluded.
struct EffectSets {
    std::set<Location> reads;
    std::set<Location> writes;
};

// writes: every location written (dropped entirely for reverted
// transactions); reads: every location whose first access is a read.
inline EffectSets effects(const TransactionRecord& tx) {
    EffectSets out;
    const bool reverted = tx.reverted();
    std::set<Location> touched;
    for (const auto& a : tx.accesses) {
        if (a.location.kind == LocationKind::Balance) continue;
        const bool first = touched.insert(a.location).second;
        if (a.mode == AccessMode::Read) {
            if (first) out.reads.insert(a.location);
        } else if (!reverted) {
            out.writes.insert(a.location);
        }
    }
    return out;
}

enum class EdgeKind { Strong, Weak };

// Transactions (incl. ghosts) in blockchain order; edges always point
// forward. A pair that qualifies as both strong and weak keeps only the
// strong edge.
class DependencyGraph {
  public:
    struct Node {
        std::string id;
        bool ghost = false;
        std::string label; // "id: signature(args)" for DOT output
    };

    std::size_t size() const { return m_nodes.size(); }
    const std::vector<Node>& nodes() const { return m_nodes; }
    const Node& node(std::size_t i) const { return m_nodes[i]; }
    const std::map<std::pair<std::size_t, std::size_t>, EdgeKind>& edges() const { return m_edges; }

    bool has_node(const std::string& id) const { return m_index.count(id) > 0; }

    std::size_t index_of(const std::string& id) const {
        auto it = m_index.find(id);
        if (it == m_index.end()) throw Error(Errc::UnknownNode, "'" + id + "'");
        return it->second;
    }

    const EdgeKind* edge(std::size_t from, std::size_t to) const {
        auto it = m_edges.find({from, to});
        return it == m_edges.end() ? nullptr : &it->second;
    }

    const std::vector<std::size_t>& strong_out(std::size_t i) const { return m_strong_out[i]; }
    const std::vector<std::size_t>& all_out(std::size_t i) const { return m_all_out[i]; }
    const std::vector<std::size_t>& weak_out(std::size_t i) const { return m_weak_out[i]; }

    void add_node(Node n) {
        m_index[n.id] = m_nodes.size();
        m_nodes.push_back(std::move(n));
        m_strong_out.emplace_back();
        m_weak_out.emplace_back();
        m_all_out.emplace_back();
    }

    void add_edge(std::size_t from, std::size_t to, EdgeKind kind) {
        if (from == to || to < from) throw Error(Errc::InvalidArgument, "edges must go forward");
        auto [it, inserted] = m_edges.try_emplace({from, to}, kind);
        if (!inserted) {
            if (it->second == EdgeKind::Strong || kind == EdgeKind::Weak) return;
            it->second = EdgeKind::Strong; // upgrade, re-index below
            rebuild_adjacency();
            return;
        }
        (kind == EdgeKind::Strong ? m_strong_out : m_weak_out)[from].push_back(to);
        m_all_out[from].push_back(to);
    }

    friend bool operator==(const DependencyGraph& a, const DependencyGraph& b) {
        auto ids = [](const DependencyGraph& g) {
            std::vector<std::string> v;
            for (const auto& n : g.m_nodes) v.push_back(n.id);
            return v;
        };
        if (ids(a) != ids(b)) return false;
        auto edges_by_id = [](const DependencyGraph& g) {
            std::map<std::pair<std::string, std::string>, EdgeKind> m;
            for (const auto& [e, k] : g.m_edges) m[{g.m_nodes[e.first].id, g.m_nodes[e.second].id}] = k;
            return m;
        };
        return edges_by_id(a) == edges_by_id(b);
    }

  private:
    void rebuild_adjacency() {
        for (auto& v : m_strong_out) v.clear();
        for (auto& v : m_weak_out) v.clear();
        for (auto& v : m_all_out) v.clear();
        for (const auto& [e, k] : m_edges) {
            (k == EdgeKind::Strong ? m_strong_out : m_weak_out)[e.first].push_back(e.second);
            m_all_out[e.first].push_back(e.second);
        }
    }

    std::vector<Node> m_nodes;
    std::map<std::string, std::size_t> m_index;
    std::map<std::pair<std::size_t, std::size_t>, EdgeKind> m_edges;
    std::vector<std::vector<std::size_t>> m_strong_out;
    std::vector<std::vector<std::size_t>> m_weak_out;
    std::vector<std::vector<std::size_t>> m_all_out;
};

namespace detail {

inline std::string node_label(const TransactionRecord& tx) {
    if (tx.ghost) return tx.id;
    std::string args;
    if (!tx.events.empty()) {
        const EventRecord& ev = tx.events.front();
        for (std::size_t i = 0; i < ev.inputs.size(); ++i) {
            if (i) args += ", ";
            args += scalar_to_string(ev.inputs[i]);
        }
        return tx.id + ": " + ev.signature + "(" + args + ")";
    }
    return tx.id;
}

} // namespace detail

// Builds the dependency graph of a ghosted ledger in one pass. For each
// location we track the last writer and the readers seen since that write;
// that index realizes the "no write in between" masking from the edge
// definitions without a quadratic scan.
inline DependencyGraph build_graph(const TraceLedger& ledger) {
    if (!ledger.transactions.empty() && !ledger.has_ghosts())
        throw Error(Errc::NotGhosted, "build_graph expects a ghosted ledger");

    DependencyGraph g;
    for (const auto& tx : ledger.transactions)
        g.add_node({tx.id, tx.ghost, detail::node_label(tx)});

    struct LocationState {
        std::optional<std::size_t> last_writer;
        std::vector<std::size_t> readers_since_write;
    };
    std::map<Location, LocationState> state;

    for (std::size_t j = 0; j < ledger.transactions.size(); ++j) {
        EffectSets eff = effects(ledger.transactions[j]);
        for (const auto& loc : eff.reads) {
            LocationState& st = state[loc];
            if (st.last_writer && *st.last_writer != j) g.add_edge(*st.last_writer, j, EdgeKind::Strong);
            st.readers_since_write.push_back(j);
        }
        for (const auto& loc : eff.writes) {
            LocationState& st = state[loc];
            if (st.last_writer && *st.last_writer != j) g.add_edge(*st.last_writer, j, EdgeKind::Weak);
            for (std::size_t r : st.readers_since_write)
                if (r != j) g.add_edge(r, j, EdgeKind::Weak);
            st.last_writer = j;
            st.readers_since_write.clear();
        }
    }
    return g;
}

// All nodes reachable from `from` over at least one strong edge.
inline std::set<std::size_t> strong_reachable_indices(const DependencyGraph& g, std::size_t from) {
    std::set<std::size_t> seen;
    std::vector<std::size_t> todo(g.strong_out(from).begin(), g.strong_out(from).end());
    while (!todo.empty()) {
        std::size_t n = todo.back();
        todo.pop_back();
        if (!seen.insert(n).second) continue;
        for (std::size_t m : g.strong_out(n)) todo.push_back(m);
    }
    return seen;
}

inline std::set<std::string> strong_reachable(const DependencyGraph& g, const std::string& from) {
    std::set<std::string> out;
    for (std::size_t i : strong_reachable_indices(g, g.index_of(from))) out.insert(g.node(i).id);
    return out;
}

namespace detail {

// Nodes reachable from `from` via a non-empty path containing >= 1 weak edge
// (strong edges allowed in any number).
inline std::set<std::size_t> weak_path_reachable(const DependencyGraph& g, std::size_t from) {
    // state: (node, whether a weak edge occurred on the way)
    std::set<std::pair<std::size_t, bool>> seen;
    std::vector<std::pair<std::size_t, bool>> todo{{from, false}};
    std::set<std::size_t> out;
    while (!todo.empty()) {
        auto [n, weak] = todo.back();
        todo.pop_back();
        if (!seen.insert({n, weak}).second) continue;
        if (weak) out.insert(n);
        for (std::size_t m : g.strong_out(n)) todo.push_back({m, weak});
        for (std::size_t m : g.weak_out(n)) todo.push_back({m, true});
    }
    out.erase(from);
    return out;
}

} // namespace detail

// Keeps the seed, everything the seed strongly reaches, and every node that
// is weakly reachable from the seed and strongly reaches a transaction the
// seed also strongly reaches.
inline DependencyGraph filter_graph(const DependencyGraph& g, const std::string& seed_id) {
    const std::size_t seed = g.index_of(seed_id);
    std::set<std::size_t> strong_from_seed = strong_reachable_indices(g, seed);
    std::set<std::size_t> weak_from_seed = detail::weak_path_reachable(g, seed);

    std::set<std::size_t> keep;
    keep.insert(seed);
    for (std::size_t n : strong_from_seed) keep.insert(n);
    for (std::size_t n : weak_from_seed) {
        if (keep.count(n)) continue;
        std::set<std::size_t> from_n = strong_reachable_indices(g, n);
        bool joins = std::any_of(from_n.begin(), from_n.end(),
                                 [&](std::size_t t) { return strong_from_seed.count(t) > 0; });
        if (joins) keep.insert(n);
    }

    DependencyGraph out;
    std::map<std::size_t, std::size_t> remap;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!keep.count(i)) continue;
        remap[i] = out.size();
        out.add_node(g.node(i));
    }
    for (const auto& [e, k] : g.edges()) {
        auto a = remap.find(e.first);
        auto b = remap.find(e.second);
        if (a != remap.end() && b != remap.end()) out.add_edge(a->second, b->second, k);
    }
    return out;
}

// DOT rendering of a dependency graph. Edges implied by transitivity are
// suppressed here only; the graph itself keeps them.
inline std::string depgraph_to_dot(const DependencyGraph& g) {
    const std::size_t n = g.size();
    // reach_strong[i] / reach_all[i]: nodes reachable from i (non-empty paths)
    std::vector<std::set<std::size_t>> reach_strong(n), reach_all(n);
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t m : g.strong_out(i)) {
            reach_strong[i].insert(m);
            reach_strong[i].insert(reach_strong[m].begin(), reach_strong[m].end());
        }
        for (std::size_t m : g.all_out(i)) {
            reach_all[i].insert(m);
            reach_all[i].insert(reach_all[m].begin(), reach_all[m].end());
        }
    }

    auto implied = [&](std::size_t from, std::size_t to, EdgeKind kind) {
        const auto& reach = kind == EdgeKind::Strong ? reach_strong : reach_all;
        for (std::size_t mid : (kind == EdgeKind::Strong ? g.strong_out(from) : g.all_out(from)))
            if (mid != to && reach[mid].count(to)) return true;
        return false;
    };

    std::ostringstream out;
    out << "digraph dependencies {\n  rankdir=TB;\n  node [shape=box];\n";
    for (std::size_t i = 0; i < n; ++i) {
        out << "  \"" << g.node(i).id << "\" [label=\"" << g.node(i).label << "\"";
        if (g.node(i).ghost) out << " style=dashed";
        out << "];\n";
    }
    for (const auto& [e, k] : g.edges()) {
        if (implied(e.first, e.second, k)) continue;
        out << "  \"" << g.node(e.first).id << "\" -> \"" << g.node(e.second).id << "\"";
        if (k == EdgeKind::Weak) out << " [style=dashed]";
        out << ";\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace specmine

#endif // SPECMINE_DEPENDENCY_HPP
