#ifndef SPECMINE_ABSTRACTION_HPP
#define SPECMINE_ABSTRACTION_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specmine/error.hpp"
#include "specmine/sessions.hpp"
#include "specmine/trace.hpp"

namespace specmine {

// Event fields, in the canonical order used everywhere (matching, rendering,
// variable numbering).
struct FieldRef {
    enum class Tag { Caller, Callee, Signature, Input, Output, Value, Status };
    Tag tag = Tag::Caller;
    std::uint32_t index = 0; // Input only

    friend bool operator==(const FieldRef&, const FieldRef&) = default;
    friend auto operator<=>(const FieldRef&, const FieldRef&) = default;
};

inline FieldRef field_caller() { return {FieldRef::Tag::Caller, 0}; }
inline FieldRef field_callee() { return {FieldRef::Tag::Callee, 0}; }
inline FieldRef field_signature() { return {FieldRef::Tag::Signature, 0}; }
inline FieldRef field_input(std::uint32_t i) { return {FieldRef::Tag::Input, i}; }
inline FieldRef field_output() { return {FieldRef::Tag::Output, 0}; }
inline FieldRef field_value() { return {FieldRef::Tag::Value, 0}; }
inline FieldRef field_status() { return {FieldRef::Tag::Status, 0}; }

inline std::string field_name(const FieldRef& f) {
    switch (f.tag) {
        case FieldRef::Tag::Caller: return "caller";
        case FieldRef::Tag::Callee: return "callee";
        case FieldRef::Tag::Signature: return "sig";
        case FieldRef::Tag::Input: return "in" + std::to_string(f.index);
        case FieldRef::Tag::Output: return "out";
        case FieldRef::Tag::Value: return "value";
        case FieldRef::Tag::Status: return "status";
    }
    return "?";
}

inline std::optional<FieldRef> field_from_name(const std::string& name) {
    if (name == "caller") return field_caller();
    if (name == "callee") return field_callee();
    if (name == "sig") return field_signature();
    if (name == "out") return field_output();
    if (name == "value") return field_value();
    if (name == "status") return field_status();
    if (name.rfind("in", 0) == 0 && name.size() > 2) {
        try {
            return field_input(static_cast<std::uint32_t>(std::stoul(name.substr(2))));
        } catch (...) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

// Concrete value of a field, absent where the event has none.
inline std::optional<Scalar> field_value_of(const EventRecord& ev, const FieldRef& f) {
    switch (f.tag) {
        case FieldRef::Tag::Caller: return Scalar(ev.caller);
        case FieldRef::Tag::Callee: return Scalar(ev.callee);
        case FieldRef::Tag::Signature: return Scalar(ev.signature);
        case FieldRef::Tag::Input:
            if (f.index < ev.inputs.size()) return ev.inputs[f.index];
            return std::nullopt;
        case FieldRef::Tag::Output: return ev.output;
        case FieldRef::Tag::Value: return Scalar(ev.value);
        case FieldRef::Tag::Status: return Scalar(std::string(ev.status == EventStatus::Ok ? "ok" : "error"));
    }
    return std::nullopt;
}

struct FieldKey {
    std::string signature;
    FieldRef field;

    friend bool operator==(const FieldKey&, const FieldKey&) = default;
    friend auto operator<=>(const FieldKey&, const FieldKey&) = default;
};

enum class FieldAbstraction { Identity, Variable, Top };

inline const char* abstraction_name(FieldAbstraction a) {
    switch (a) {
        case FieldAbstraction::Identity: return "identity";
        case FieldAbstraction::Variable: return "variable";
        case FieldAbstraction::Top: return "top";
    }
    return "identity";
}

// An automaton move; applied after construction (see automaton.hpp).
struct Move {
    enum class Kind { MergeSameFuture, MergeSimilarFuture, MergeVars };
    Kind kind = Kind::MergeSameFuture;
    unsigned k = 0;      // future bound
    std::string v1, v2;  // MergeVars

    friend bool operator==(const Move&, const Move&) = default;
};

// Event abstractions (default Identity) plus an ordered move list; the unit
// the tuner mutates.
struct Recipe {
    std::map<FieldKey, FieldAbstraction> abstractions;
    std::vector<Move> moves;

    FieldAbstraction abstraction_for(const FieldKey& key) const {
        auto it = abstractions.find(key);
        return it == abstractions.end() ? FieldAbstraction::Identity : it->second;
    }

    friend bool operator==(const Recipe&, const Recipe&) = default;
};

inline Recipe identity_recipe() { return {}; }

struct AbstractValue {
    enum class Kind { Concrete, Var, Top };
    Kind kind = Kind::Top;
    Scalar value;    // Concrete
    std::string var; // Var
    bool fresh = false;

    static AbstractValue top() { return {}; }
    static AbstractValue concrete(Scalar v) { return {Kind::Concrete, std::move(v), "", false}; }
    static AbstractValue variable(std::string name, bool fresh = false) {
        return {Kind::Var, Scalar(std::int64_t(0)), std::move(name), fresh};
    }

    friend bool operator==(const AbstractValue& a, const AbstractValue& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::Concrete: return a.value == b.value;
            case Kind::Var: return a.var == b.var && a.fresh == b.fresh;
            case Kind::Top: return true;
        }
        return false;
    }
};

using Provenance = std::set<std::pair<std::size_t, std::size_t>>; // (history, position)

// A record of abstract field values. Provenance is carried along but does
// not participate in equality.
struct AbstractEvent {
    AbstractValue caller, callee, signature;
    std::vector<AbstractValue> inputs;
    AbstractValue output, value, status;
    Provenance provenance;

    AbstractValue get(const FieldRef& f) const {
        switch (f.tag) {
            case FieldRef::Tag::Caller: return caller;
            case FieldRef::Tag::Callee: return callee;
            case FieldRef::Tag::Signature: return signature;
            case FieldRef::Tag::Input:
                return f.index < inputs.size() ? inputs[f.index] : AbstractValue::top();
            case FieldRef::Tag::Output: return output;
            case FieldRef::Tag::Value: return value;
            case FieldRef::Tag::Status: return status;
        }
        return AbstractValue::top();
    }

    void set(const FieldRef& f, AbstractValue v) {
        switch (f.tag) {
            case FieldRef::Tag::Caller: caller = std::move(v); return;
            case FieldRef::Tag::Callee: callee = std::move(v); return;
            case FieldRef::Tag::Signature: signature = std::move(v); return;
            case FieldRef::Tag::Input:
                if (f.index >= inputs.size()) inputs.resize(f.index + 1);
                inputs[f.index] = std::move(v);
                return;
            case FieldRef::Tag::Output: output = std::move(v); return;
            case FieldRef::Tag::Value: value = std::move(v); return;
            case FieldRef::Tag::Status: status = std::move(v); return;
        }
    }

    // Fields in canonical order, inputs up to this event's arity.
    template <typename Fn>
    void for_each_field(Fn&& fn) const {
        fn(field_caller(), caller);
        fn(field_callee(), callee);
        fn(field_signature(), signature);
        for (std::uint32_t i = 0; i < inputs.size(); ++i) fn(field_input(i), inputs[i]);
        fn(field_output(), output);
        fn(field_value(), value);
        fn(field_status(), status);
    }

    friend bool operator==(const AbstractEvent& a, const AbstractEvent& b) {
        if (!(a.caller == b.caller && a.callee == b.callee && a.signature == b.signature &&
              a.output == b.output && a.value == b.value && a.status == b.status))
            return false;
        const std::size_t n = std::max(a.inputs.size(), b.inputs.size());
        for (std::size_t i = 0; i < n; ++i) {
            AbstractValue av = i < a.inputs.size() ? a.inputs[i] : AbstractValue::top();
            AbstractValue bv = i < b.inputs.size() ? b.inputs[i] : AbstractValue::top();
            if (!(av == bv)) return false;
        }
        return true;
    }
};

namespace detail {

inline void append_scalar_key(std::string& out, const Scalar& s) {
    if (std::holds_alternative<std::int64_t>(s)) {
        out += 'i';
        out += std::to_string(std::get<std::int64_t>(s));
    } else {
        const std::string& str = std::get<std::string>(s);
        out += 's';
        out += std::to_string(str.size());
        out += ':';
        out += str;
    }
}

inline void append_value_key(std::string& out, const AbstractValue& v, bool structural) {
    switch (v.kind) {
        case AbstractValue::Kind::Top: out += '^'; break;
        case AbstractValue::Kind::Concrete:
            out += '#';
            append_scalar_key(out, v.value);
            break;
        case AbstractValue::Kind::Var:
            if (structural) {
                out += '$';
            } else {
                out += v.fresh ? 'V' : 'v';
                out += std::to_string(v.var.size());
                out += ':';
                out += v.var;
            }
            break;
    }
    out += ';';
}

} // namespace detail

// Injective canonical key; trailing Top inputs are stripped so padded-equal
// events share a key.
inline std::string label_key(const AbstractEvent& e, bool structural = false) {
    std::string out;
    detail::append_value_key(out, e.caller, structural);
    detail::append_value_key(out, e.callee, structural);
    detail::append_value_key(out, e.signature, structural);
    std::size_t arity = e.inputs.size();
    while (arity > 0 && e.inputs[arity - 1].kind == AbstractValue::Kind::Top) --arity;
    out += '[';
    for (std::size_t i = 0; i < arity; ++i) detail::append_value_key(out, e.inputs[i], structural);
    out += ']';
    detail::append_value_key(out, e.output, structural);
    detail::append_value_key(out, e.value, structural);
    detail::append_value_key(out, e.status, structural);
    return out;
}

inline std::string structural_key(const AbstractEvent& e) { return label_key(e, true); }

// Origin of each variable plus the concrete corpus, so later moves can
// re-derive bindings per history.
struct SideTable {
    struct Origin {
        std::size_t history = 0;
        std::size_t position = 0;
        FieldRef field;
        Scalar value;
    };
    std::map<std::string, Origin> vars;
    std::vector<std::vector<EventRecord>> concrete;
};

struct AbstractionResult {
    std::vector<std::vector<AbstractEvent>> histories;
    SideTable side;
};

// Applies the per-(signature, field) abstractions pointwise. Variable
// abstraction assigns one fresh name per field occurrence, in corpus order;
// Status always stays concrete; absent fields render as Top.
inline AbstractionResult abstract_histories(const std::vector<History>& histories, const Recipe& recipe) {
    AbstractionResult result;
    std::size_t counter = 0;
    for (std::size_t h = 0; h < histories.size(); ++h) {
        result.side.concrete.push_back(histories[h].events);
        std::vector<AbstractEvent> abs_history;
        for (std::size_t p = 0; p < histories[h].events.size(); ++p) {
            const EventRecord& ev = histories[h].events[p];
            AbstractEvent ae;
            ae.inputs.resize(ev.inputs.size());
            ae.provenance.insert({h, p});
            auto abstract_field = [&](const FieldRef& f) {
                std::optional<Scalar> concrete = field_value_of(ev, f);
                if (!concrete) {
                    ae.set(f, AbstractValue::top());
                    return;
                }
                if (f.tag == FieldRef::Tag::Status) { // exempt from abstraction
                    ae.set(f, AbstractValue::concrete(*concrete));
                    return;
                }
                switch (recipe.abstraction_for({ev.signature, f})) {
                    case FieldAbstraction::Identity:
                        ae.set(f, AbstractValue::concrete(*concrete));
                        break;
                    case FieldAbstraction::Top:
                        ae.set(f, AbstractValue::top());
                        break;
                    case FieldAbstraction::Variable: {
                        std::string name = "v" + std::to_string(counter++);
                        ae.set(f, AbstractValue::variable(name));
                        result.side.vars[name] = {h, p, f, *concrete};
                        break;
                    }
                }
            };
            abstract_field(field_caller());
            abstract_field(field_callee());
            abstract_field(field_signature());
            for (std::uint32_t i = 0; i < ev.inputs.size(); ++i) abstract_field(field_input(i));
            abstract_field(field_output());
            abstract_field(field_value());
            abstract_field(field_status());
            abs_history.push_back(std::move(ae));
        }
        result.histories.push_back(std::move(abs_history));
    }
    return result;
}

// --- recipe (de)serialization ------------------------------------------------

inline nlohmann::ordered_json recipe_to_json(const Recipe& r) {
    nlohmann::ordered_json j;
    j["abstractions"] = nlohmann::ordered_json::array();
    for (const auto& [key, abs] : r.abstractions) {
        nlohmann::ordered_json ja;
        ja["sig"] = key.signature;
        ja["field"] = field_name(key.field);
        ja["abs"] = abstraction_name(abs);
        j["abstractions"].push_back(std::move(ja));
    }
    j["moves"] = nlohmann::ordered_json::array();
    for (const auto& m : r.moves) {
        nlohmann::ordered_json jm;
        switch (m.kind) {
            case Move::Kind::MergeSameFuture:
                jm["move"] = "merge_same_future";
                jm["k"] = m.k;
                break;
            case Move::Kind::MergeSimilarFuture:
                jm["move"] = "merge_similar_future";
                jm["k"] = m.k;
                break;
            case Move::Kind::MergeVars:
                jm["move"] = "merge_vars";
                jm["v1"] = m.v1;
                jm["v2"] = m.v2;
                break;
        }
        j["moves"].push_back(std::move(jm));
    }
    return j;
}

inline Recipe recipe_from_json(const nlohmann::json& j) {
    auto fail = [](const std::string& msg) -> Error { return Error(Errc::MalformedRecord, "recipe: " + msg); };
    if (!j.is_object()) throw fail("expected an object");
    Recipe r;
    if (j.contains("abstractions")) {
        if (!j["abstractions"].is_array()) throw fail("'abstractions' must be an array");
        for (const auto& ja : j["abstractions"]) {
            if (!ja.is_object() || !ja.contains("sig") || !ja.contains("field") || !ja.contains("abs"))
                throw fail("abstraction entry needs sig/field/abs");
            auto field = field_from_name(ja["field"].get<std::string>());
            if (!field) throw fail("unknown field '" + ja["field"].get<std::string>() + "'");
            const std::string abs = ja["abs"].get<std::string>();
            FieldAbstraction fa;
            if (abs == "identity") fa = FieldAbstraction::Identity;
            else if (abs == "variable") fa = FieldAbstraction::Variable;
            else if (abs == "top") fa = FieldAbstraction::Top;
            else throw fail("unknown abstraction '" + abs + "'");
            r.abstractions[{ja["sig"].get<std::string>(), *field}] = fa;
        }
    }
    if (j.contains("moves")) {
        if (!j["moves"].is_array()) throw fail("'moves' must be an array");
        for (const auto& jm : j["moves"]) {
            if (!jm.is_object() || !jm.contains("move")) throw fail("move entry needs 'move'");
            const std::string kind = jm["move"].get<std::string>();
            Move m;
            if (kind == "merge_same_future") {
                m.kind = Move::Kind::MergeSameFuture;
                m.k = jm.value("k", 0u);
            } else if (kind == "merge_similar_future") {
                m.kind = Move::Kind::MergeSimilarFuture;
                m.k = jm.value("k", 0u);
            } else if (kind == "merge_vars") {
                m.kind = Move::Kind::MergeVars;
                if (!jm.contains("v1") || !jm.contains("v2")) throw fail("merge_vars needs v1/v2");
                m.v1 = jm["v1"].get<std::string>();
                m.v2 = jm["v2"].get<std::string>();
                if (m.v1 == m.v2) throw fail("merge_vars needs distinct variables");
            } else {
                throw fail("unknown move '" + kind + "'");
            }
            r.moves.push_back(std::move(m));
        }
    }
    return r;
}

} // namespace specmine

#endif // SPECMINE_ABSTRACTION_HPP
