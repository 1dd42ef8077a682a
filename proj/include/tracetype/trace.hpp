#pragma once

// Call traces, function identity and the per-run trace store.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "tracetype/type_spec.hpp"

namespace tracetype {

struct FunctionKey {
    std::string source_path;
    std::string qualified_name;
    int first_line = 0;

    auto operator<=>(FunctionKey const&) const = default;
    bool operator==(FunctionKey const&) const = default;
};

struct CallTrace {
    std::vector<std::string> arg_names;
    std::vector<TypeSpec> arg_types;
    TypeSpec return_type = make_none();
    std::optional<TypeSpec> yield_type;
    std::optional<TypeSpec> send_type;

    bool operator==(CallTrace const&) const = default;

    bool is_generator() const { return yield_type.has_value(); }

    /// Type recorded for parameter `name`, if the trace has that slot.
    TypeSpec const* arg(std::string_view name) const {
        for (std::size_t i = 0; i < arg_names.size(); ++i)
            if (arg_names[i] == name) return &arg_types[i];
        return nullptr;
    }
};

namespace detail {

inline int compare_optional(std::optional<TypeSpec> const& a, std::optional<TypeSpec> const& b) {
    if (a.has_value() != b.has_value()) return a.has_value() ? 1 : -1;
    return a ? compare(*a, *b) : 0;
}

} // namespace detail

inline int compare(CallTrace const& a, CallTrace const& b) {
    if (a.arg_names != b.arg_names) return a.arg_names < b.arg_names ? -1 : 1;
    for (std::size_t i = 0; i < a.arg_types.size() && i < b.arg_types.size(); ++i)
        if (int c = compare(a.arg_types[i], b.arg_types[i])) return c;
    if (a.arg_types.size() != b.arg_types.size()) return a.arg_types.size() < b.arg_types.size() ? -1 : 1;
    if (int c = compare(a.return_type, b.return_type)) return c;
    if (int c = detail::compare_optional(a.yield_type, b.yield_type)) return c;
    return detail::compare_optional(a.send_type, b.send_type);
}

struct CallTraceLess {
    bool operator()(CallTrace const& a, CallTrace const& b) const { return compare(a, b) < 0; }
};

/// A declared parameter of an overridden (parent) method.
struct DeclaredParam {
    std::string name;
    std::optional<TypeSpec> type; // absent when unannotated
    bool has_default = false;

    bool operator==(DeclaredParam const&) const = default;
};

struct DeclaredSignature {
    std::vector<DeclaredParam> params;
    std::optional<TypeSpec> return_type;

    bool operator==(DeclaredSignature const&) const = default;
};

enum class ReceiverKind : std::uint8_t { none, instance, class_ };

struct QualifiedClass {
    std::string module;
    std::string name;

    auto operator<=>(QualifiedClass const&) const = default;
    bool operator==(QualifiedClass const&) const = default;
};

/// Method information captured from the live class during tracing.
struct MethodContext {
    QualifiedClass defining_class;
    ReceiverKind receiver = ReceiverKind::instance;
    std::vector<QualifiedClass> mro; // defining class first
    /// Ancestor that declares the overridden method, if any.
    std::optional<QualifiedClass> overridden_in;
    /// Parent's inline annotations; absent when the parent is unannotated or
    /// native and the stub repository must be consulted.
    std::optional<DeclaredSignature> overridden;

    bool operator==(MethodContext const&) const = default;
};

/// Hierarchy and attribute surface of a runtime type, recorded once per type.
struct TypeInfo {
    std::vector<QualifiedClass> mro; // the type itself first
    std::vector<std::string> attributes;

    bool operator==(TypeInfo const&) const = default;
};

using TraceCounts = std::map<CallTrace, std::uint64_t, CallTraceLess>;

inline constexpr std::uint64_t max_trace_count = std::numeric_limits<std::uint64_t>::max() / 2;

inline std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
    return (a > max_trace_count - std::min(b, max_trace_count)) ? max_trace_count : a + b;
}

struct TraceStore {
    std::map<FunctionKey, TraceCounts> entries;
    std::map<FunctionKey, MethodContext> methods;
    std::map<QualifiedClass, TypeInfo> types;
    std::uint64_t seed = 0;

    bool operator==(TraceStore const&) const = default;

    void record(FunctionKey const& fn, CallTrace const& trace, std::uint64_t count = 1) {
        auto& slot = entries[fn][trace];
        slot = saturating_add(slot, count);
    }

    std::uint64_t total_calls(FunctionKey const& fn) const {
        auto it = entries.find(fn);
        if (it == entries.end()) return 0;
        std::uint64_t n = 0;
        for (auto const& [_, c] : it->second) n = saturating_add(n, c);
        return n;
    }

    bool empty() const { return entries.empty() && methods.empty() && types.empty(); }
};

/// Sums counts per (function, trace). Method contexts and type info are
/// unioned; on conflicting duplicates the left operand's entry is kept, and
/// the seed is the smaller nonzero one, so the operation stays commutative on
/// stores produced by the agent (whose metadata never conflicts).
inline TraceStore merge_stores(TraceStore const& a, TraceStore const& b) {
    TraceStore out = a;
    for (auto const& [fn, traces] : b.entries)
        for (auto const& [trace, count] : traces) out.record(fn, trace, count);
    for (auto const& [fn, ctx] : b.methods) out.methods.emplace(fn, ctx);
    for (auto const& [cls, info] : b.types) out.types.emplace(cls, info);
    if (out.seed == 0 || (b.seed != 0 && b.seed < out.seed)) out.seed = b.seed;
    return out;
}

} // namespace tracetype
