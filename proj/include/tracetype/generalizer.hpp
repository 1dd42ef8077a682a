#pragma once

// Coverage filtering of call traces and their generalization into one
// signature per function.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tracetype/hierarchy.hpp"
#include "tracetype/trace.hpp"
#include "tracetype/trace_io.hpp"

namespace tracetype {

// ------------------------------------------------------------ simplify_union

namespace detail {

inline bool is_builtin(TypeSpec const& t, std::string_view name) {
    return t.is(TypeKind::concrete) && t.module.empty() && t.name == name;
}

/// Replaces groups of concrete members with a common proper ancestor when the
/// ancestor's attribute surface covers everything the group shares.
inline bool reduce_to_common_ancestor(std::vector<TypeSpec>& members, TypeHierarchy const& h) {
    for (auto const& m : members) {
        if (!m.is(TypeKind::concrete)) continue;
        auto chain = h.mro(class_of(m));
        for (std::size_t i = 1; i < chain.size(); ++i) {
            auto const& ancestor = chain[i];
            if (ancestor == QualifiedClass{"builtins", "object"}) continue;
            std::vector<std::size_t> group;
            for (std::size_t j = 0; j < members.size(); ++j)
                if (members[j].is(TypeKind::concrete) && h.is_subclass(class_of(members[j]), ancestor))
                    group.push_back(j);
            if (group.size() < 2) continue;
            auto const* anc_info = h.info(ancestor);
            if (!anc_info || anc_info->attributes.empty()) continue;
            std::set<std::string> shared;
            bool known = true;
            for (std::size_t k = 0; k < group.size(); ++k) {
                auto const* mi = h.info(class_of(members[group[k]]));
                if (!mi || mi->attributes.empty()) {
                    known = false;
                    break;
                }
                std::set<std::string> attrs(mi->attributes.begin(), mi->attributes.end());
                if (k == 0) {
                    shared = std::move(attrs);
                } else {
                    std::set<std::string> both;
                    std::set_intersection(shared.begin(), shared.end(), attrs.begin(), attrs.end(),
                                          std::inserter(both, both.end()));
                    shared = std::move(both);
                }
            }
            if (!known) continue;
            std::set<std::string> anc_attrs(anc_info->attributes.begin(), anc_info->attributes.end());
            if (!std::includes(anc_attrs.begin(), anc_attrs.end(), shared.begin(), shared.end())) continue;
            std::vector<TypeSpec> next;
            for (std::size_t j = 0; j < members.size(); ++j)
                if (std::find(group.begin(), group.end(), j) == group.end()) next.push_back(members[j]);
            next.push_back(type_of_class(ancestor));
            members = std::move(next);
            return true;
        }
    }
    return false;
}

} // namespace detail

/// Collapses a set of observed types into one annotation: numeric tower
/// widening (int < float < complex), subsumption of members that are
/// subclasses of other members, replacement of sibling groups by a common
/// ancestor whose attribute surface covers what they share, then a flattened
/// canonical union.
inline TypeSpec simplify_union(std::vector<TypeSpec> types, TypeHierarchy const& h = {}) {
    auto u = make_union(std::move(types));
    if (!u.is(TypeKind::union_)) return u;
    auto members = std::move(u.args);

    auto has = [&](std::string_view n) {
        return std::any_of(members.begin(), members.end(), [&](auto const& t) { return detail::is_builtin(t, n); });
    };
    auto drop = [&](std::string_view n) {
        std::erase_if(members, [&](auto const& t) { return detail::is_builtin(t, n); });
    };
    if (has("complex")) {
        drop("float");
        drop("int");
    } else if (has("float")) {
        drop("int");
    }

    // subsumption: a member that is a subclass of another member is redundant
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < members.size() && !changed; ++i)
            for (std::size_t j = 0; j < members.size() && !changed; ++j)
                if (i != j && members[i].is(TypeKind::concrete) && members[j].is(TypeKind::concrete) &&
                    h.is_subclass(class_of(members[i]), class_of(members[j]))) {
                    members.erase(members.begin() + static_cast<std::ptrdiff_t>(i));
                    changed = true;
                }
    }

    while (detail::reduce_to_common_ancestor(members, h)) {
    }
    return make_union(std::move(members));
}

// ------------------------------------------------------------ filter_traces

struct WeightedTrace {
    CallTrace trace;
    std::uint64_t count = 0;

    bool operator==(WeightedTrace const&) const = default;
};

struct FilterResult {
    std::vector<WeightedTrace> retained;
    std::vector<WeightedTrace> anomalies;
    std::uint64_t total = 0;
};

inline std::string serialized_form(CallTrace const& t) { return trace_record({}, t, 1).dump(); }

/// Sorts traces by descending count (ties by serialized form) and keeps the
/// shortest prefix whose share of all calls reaches `coverage`.
inline FilterResult filter_traces(TraceCounts const& traces, double coverage) {
    FilterResult out;
    std::vector<std::pair<std::string, WeightedTrace>> sorted;
    for (auto const& [t, c] : traces) {
        sorted.push_back({serialized_form(t), {t, c}});
        out.total = saturating_add(out.total, c);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto const& a, auto const& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.first < b.first;
    });
    std::uint64_t cumulative = 0;
    bool reached = false;
    for (auto& [_, wt] : sorted) {
        if (reached) {
            out.anomalies.push_back(std::move(wt));
            continue;
        }
        cumulative += wt.count;
        out.retained.push_back(std::move(wt));
        reached = static_cast<double>(cumulative) / static_cast<double>(out.total) + 1e-12 >= coverage;
    }
    return out;
}

// ------------------------------------------------------------ generalize

struct SignatureParam {
    std::string name;
    TypeSpec type;
    bool has_default = false;

    bool operator==(SignatureParam const&) const = default;
};

struct Signature {
    FunctionKey fn;
    std::vector<SignatureParam> params;
    TypeSpec return_type = make_none();
    std::map<int, std::vector<TypeSpec>> typevars;
    std::set<QualifiedClass> imports_needed;

    bool operator==(Signature const&) const = default;

    SignatureParam* param(std::string_view name) {
        for (auto& p : params)
            if (p.name == name) return &p;
        return nullptr;
    }
};

inline void collect_imports(TypeSpec const& t, std::set<QualifiedClass>& out) {
    if (!t.module.empty() &&
        (t.is(TypeKind::concrete) || t.is(TypeKind::generic) || t.is(TypeKind::protocol) || t.is(TypeKind::shape)))
        out.insert({t.module, t.name});
    for (auto const& a : t.args) collect_imports(a, out);
}

/// Recomputes `imports_needed` from the types the signature mentions.
inline void refresh_imports(Signature& sig) {
    sig.imports_needed.clear();
    for (auto const& p : sig.params) collect_imports(p.type, sig.imports_needed);
    collect_imports(sig.return_type, sig.imports_needed);
    for (auto const& [_, constraints] : sig.typevars)
        for (auto const& c : constraints) collect_imports(c, sig.imports_needed);
}

/// Drops typevar bindings no longer referenced by the signature.
inline void prune_typevars(Signature& sig) {
    std::set<int> used;
    auto scan = [&](TypeSpec const& t) {
        contains_type(t, [&](TypeSpec const& x) {
            if (x.is(TypeKind::typevar)) used.insert(x.typevar_id);
            return false;
        });
    };
    for (auto const& p : sig.params) scan(p.type);
    scan(sig.return_type);
    std::erase_if(sig.typevars, [&](auto const& kv) { return !used.contains(kv.first); });
}

inline TypeSpec generator_type(TypeSpec yield, std::optional<TypeSpec> send, TypeSpec ret) {
    auto trivial = [](TypeSpec const& t) { return t.is(TypeKind::none) || t.is(TypeKind::never); };
    if ((!send || trivial(*send)) && trivial(ret))
        return make_protocol("collections.abc", "Iterator", {std::move(yield)});
    return make_protocol("collections.abc", "Generator",
                         {std::move(yield), send ? std::move(*send) : make_none(), std::move(ret)});
}

namespace detail {

using Column = std::vector<std::optional<TypeSpec>>;

/// Column generalization shared by both passes of Generalize.
class ColumnGeneralizer {
public:
    explicit ColumnGeneralizer(TypeHierarchy const& h) : hierarchy_(h) {}

    void count(Column const& col) {
        if (auto sub = split_generic(col)) {
            for (auto const& s : *sub) count(s);
            return;
        }
        ++occurrences_[col];
    }

    TypeSpec rebuild(Column const& col) {
        if (auto sub = split_generic(col)) {
            TypeSpec g = *first_present(col);
            for (std::size_t i = 0; i < sub->size(); ++i) g.args[i] = rebuild((*sub)[i]);
            return g;
        }
        std::vector<TypeSpec> distinct;
        for (auto const& e : col)
            if (e && !e->is(TypeKind::never) && std::find(distinct.begin(), distinct.end(), *e) == distinct.end())
                distinct.push_back(*e);
        if (distinct.size() >= 2 && occurrences_[col] >= 2) {
            auto [it, inserted] = ids_.try_emplace(col, static_cast<int>(ids_.size()) + 1);
            if (inserted) {
                std::sort(distinct.begin(), distinct.end(), canonical_less);
                typevars_[it->second] = distinct;
            }
            return make_typevar(it->second);
        }
        std::vector<TypeSpec> all;
        for (auto const& e : col)
            if (e) all.push_back(*e);
        return simplify_union(std::move(all), hierarchy_);
    }

    std::map<int, std::vector<TypeSpec>> const& typevars() const { return typevars_; }

private:
    static TypeSpec const* first_present(Column const& col) {
        for (auto const& e : col)
            if (e) return &*e;
        return nullptr;
    }

    /// When every present entry specializes the same generic, the transposed
    /// argument columns; otherwise nothing.
    static std::optional<std::vector<Column>> split_generic(Column const& col) {
        auto const* head = first_present(col);
        if (!head || !head->is_parameterized() || head->args.empty()) return std::nullopt;
        for (auto const& e : col) {
            if (!e) continue;
            if (e->kind != head->kind || e->module != head->module || e->name != head->name ||
                e->args.size() != head->args.size())
                return std::nullopt;
        }
        std::vector<Column> sub(head->args.size());
        for (auto const& e : col)
            for (std::size_t i = 0; i < sub.size(); ++i)
                sub[i].push_back(e ? std::optional<TypeSpec>(e->args[i]) : std::nullopt);
        return sub;
    }

    struct ColumnLess {
        bool operator()(Column const& a, Column const& b) const {
            if (a.size() != b.size()) return a.size() < b.size();
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i].has_value() != b[i].has_value()) return !a[i].has_value();
                if (a[i]) {
                    int c = compare(*a[i], *b[i]);
                    if (c) return c < 0;
                }
            }
            return false;
        }
    };

    TypeHierarchy const& hierarchy_;
    std::map<Column, int, ColumnLess> occurrences_;
    std::map<Column, int, ColumnLess> ids_;
    std::map<int, std::vector<TypeSpec>> typevars_;
};

} // namespace detail

/// Generalizes retained traces of one function. Positions are aligned by
/// parameter name; a trace lacking a parameter contributes no entry to that
/// column. Each column (recursively through generic arguments) becomes the
/// rebuilt generic, a typevar shared with every other column carrying the
/// identical non-constant sequence, or the simplified union of its types.
inline Signature generalize(FunctionKey const& fn, std::vector<CallTrace> const& traces,
                            TypeHierarchy const& hierarchy = {}) {
    Signature sig;
    sig.fn = fn;
    std::vector<std::string> names;
    for (auto const& t : traces)
        for (auto const& n : t.arg_names)
            if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);

    std::vector<detail::Column> columns;
    for (auto const& n : names) {
        detail::Column col;
        for (auto const& t : traces) {
            auto const* a = t.arg(n);
            col.push_back(a ? std::optional<TypeSpec>(*a) : std::nullopt);
        }
        columns.push_back(std::move(col));
    }
    detail::Column ret, yld, snd;
    bool any_yield = false, any_send = false;
    for (auto const& t : traces) {
        ret.push_back(t.return_type);
        yld.push_back(t.yield_type);
        snd.push_back(t.send_type);
        any_yield |= t.yield_type.has_value();
        any_send |= t.send_type.has_value();
    }

    detail::ColumnGeneralizer gen(hierarchy);
    for (auto const& c : columns) gen.count(c);
    gen.count(ret);
    if (any_yield) gen.count(yld);
    if (any_send) gen.count(snd);

    for (std::size_t i = 0; i < names.size(); ++i) sig.params.push_back({names[i], gen.rebuild(columns[i]), false});
    auto ret_type = gen.rebuild(ret);
    if (any_yield) {
        auto y = gen.rebuild(yld);
        std::optional<TypeSpec> s;
        if (any_send) s = gen.rebuild(snd);
        sig.return_type = generator_type(std::move(y), std::move(s), std::move(ret_type));
    } else {
        sig.return_type = std::move(ret_type);
    }
    sig.typevars = gen.typevars();
    refresh_imports(sig);
    return sig;
}

inline Signature generalize(FunctionKey const& fn, std::vector<WeightedTrace> const& traces,
                            TypeHierarchy const& hierarchy = {}) {
    std::vector<CallTrace> plain;
    for (auto const& wt : traces) plain.push_back(wt.trace);
    return generalize(fn, plain, hierarchy);
}

/// Compact version-independent rendering, e.g.
/// `(a: T1, b: T1) -> T1 where T1: (int, str)`.
inline std::string to_string(Signature const& sig) {
    std::string out = "(";
    for (std::size_t i = 0; i < sig.params.size(); ++i) {
        if (i) out += ", ";
        out += sig.params[i].name + ": " + repr(sig.params[i].type);
    }
    out += ") -> " + repr(sig.return_type);
    bool first = true;
    for (auto const& [id, constraints] : sig.typevars) {
        out += first ? " where " : ", ";
        first = false;
        out += "T" + std::to_string(id) + ": (";
        for (std::size_t i = 0; i < constraints.size(); ++i) out += (i ? ", " : "") + repr(constraints[i]);
        out += ")";
    }
    return out;
}

} // namespace tracetype
