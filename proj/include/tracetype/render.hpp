#pragma once

// Rendering TypeSpecs as annotation source text for a target Python version.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracetype/type_spec.hpp"

namespace tracetype {

struct TargetVersion {
    int major = 3;
    int minor = 12;

    auto operator<=>(TargetVersion const&) const = default;

    bool at_least(int maj, int min) const { return *this >= TargetVersion{maj, min}; }

    std::string str() const { return std::to_string(major) + "." + std::to_string(minor); }

    static TargetVersion parse(std::string_view s) {
        auto dot = s.find('.');
        if (dot == std::string_view::npos) throw std::invalid_argument("target version must look like 3.12");
        TargetVersion v{std::stoi(std::string(s.substr(0, dot))), std::stoi(std::string(s.substr(dot + 1)))};
        if (v < TargetVersion{3, 9} || v > TargetVersion{3, 13})
            throw std::invalid_argument("target version must be between 3.9 and 3.13");
        return v;
    }
};

struct RenderContext {
    TargetVersion version;
    /// Spelling for Self when the target lacks it (the defining class).
    std::optional<std::string> self_fallback;
    /// Spells a module-qualified type; defaults to its bare name. May set
    /// `needs_quote` for forward references.
    std::function<std::string(std::string const& module, std::string const& name, bool& needs_quote)> spell;
    std::map<int, std::string> typevar_names;
    /// Names the rendered text needs from `typing`.
    std::set<std::string> typing_names;
    std::vector<std::string> diagnostics;
};

namespace detail {

inline std::string typing_name(RenderContext& ctx, std::string const& n, bool& quote) {
    if (ctx.spell) return ctx.spell("typing", n, quote);
    ctx.typing_names.insert(n);
    return n;
}

inline std::string render(TypeSpec const& t, RenderContext& ctx, bool& quote);

inline std::string render_args(std::vector<TypeSpec> const& args, RenderContext& ctx, bool& quote) {
    std::string out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += render(args[i], ctx, quote);
    }
    return out;
}

inline std::string spelled(TypeSpec const& t, RenderContext& ctx, bool& quote) {
    if (t.module.empty()) return t.name;
    if (ctx.spell) return ctx.spell(t.module, t.name, quote);
    return t.name;
}

inline std::string render(TypeSpec const& t, RenderContext& ctx, bool& quote) {
    bool modern_never = ctx.version.at_least(3, 11);
    switch (t.kind) {
    case TypeKind::concrete: return spelled(t, ctx, quote);
    case TypeKind::generic:
    case TypeKind::protocol: {
        auto base = spelled(t, ctx, quote);
        if (t.kind == TypeKind::generic && t.name == "tuple" && t.module.empty() && t.args.empty())
            return "tuple[()]";
        if (t.args.empty()) return base;
        if (!modern_never &&
            std::any_of(t.args.begin(), t.args.end(), [](auto const& a) { return a.is(TypeKind::never); })) {
            ctx.diagnostics.push_back("Never element type unsupported on " + ctx.version.str() + "; using bare " + base);
            return base;
        }
        return base + "[" + render_args(t.args, ctx, quote) + "]";
    }
    case TypeKind::union_: {
        std::vector<TypeSpec> members;
        bool has_none = false;
        for (auto const& m : t.args) {
            if (m.is(TypeKind::none)) has_none = true;
            else members.push_back(m);
        }
        if (ctx.version.at_least(3, 10)) {
            std::string out;
            for (auto const& m : members) out += (out.empty() ? "" : "|") + render(m, ctx, quote);
            if (has_none) out += "|None";
            return out;
        }
        if (has_none && members.size() == 1)
            return typing_name(ctx, "Optional", quote) + "[" + render(members.front(), ctx, quote) + "]";
        std::string out = typing_name(ctx, "Union", quote) + "[" + render_args(members, ctx, quote);
        if (has_none) out += ", None";
        return out + "]";
    }
    case TypeKind::typevar: {
        auto it = ctx.typevar_names.find(t.typevar_id);
        return it != ctx.typevar_names.end() ? it->second : "T" + std::to_string(t.typevar_id);
    }
    case TypeKind::self:
        if (ctx.version.at_least(3, 11)) return typing_name(ctx, "Self", quote);
        if (ctx.self_fallback) {
            quote = true; // the class is not yet bound inside its own body
            return *ctx.self_fallback;
        }
        ctx.diagnostics.push_back("Self unsupported on " + ctx.version.str() + " and no defining class; using Any");
        return typing_name(ctx, "Any", quote);
    case TypeKind::never:
        return typing_name(ctx, modern_never ? "Never" : "NoReturn", quote);
    case TypeKind::any: return typing_name(ctx, "Any", quote);
    case TypeKind::none: return "None";
    case TypeKind::shape: {
        std::string dims;
        if (t.shape)
            for (std::size_t i = 0; i < t.shape->size(); ++i) dims += (i ? " " : "") + (*t.shape)[i];
        auto base = t.args.empty() ? std::string("Any") : render(t.args.front(), ctx, quote);
        return spelled(t, ctx, quote) + "[" + base + ", \"" + dims + "\"]";
    }
    }
    return "Any";
}

} // namespace detail

/// Renders an annotation. The whole annotation is quoted when any part is a
/// forward reference, so that `X|None` never mixes a string with `|`.
inline std::string render_type(TypeSpec const& t, RenderContext& ctx) {
    bool quote = false;
    auto text = detail::render(t, ctx, quote);
    if (quote) return "\"" + text + "\"";
    return text;
}

inline std::string render_type(TypeSpec const& t, TargetVersion v) {
    RenderContext ctx;
    ctx.version = v;
    return render_type(t, ctx);
}

/// Module-level declaration used below 3.12: `rt_T1 = TypeVar("rt_T1", int, str)`.
inline std::string typevar_declaration(std::string const& name, std::vector<std::string> const& constraints,
                                       std::string const& typevar_spelling = "TypeVar") {
    std::string out = name + " = " + typevar_spelling + "(\"" + name + "\"";
    for (auto const& c : constraints) out += ", " + c;
    return out + ")";
}

/// Inline parameter list used on 3.12+: `[T1: (int, str)]`.
inline std::string type_parameter_list(std::vector<std::pair<std::string, std::vector<std::string>>> const& vars) {
    std::string out = "[";
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (i) out += ", ";
        out += vars[i].first + ": (";
        for (std::size_t j = 0; j < vars[i].second.size(); ++j) out += (j ? ", " : "") + vars[i].second[j];
        out += ")";
    }
    return out + "]";
}

} // namespace tracetype
