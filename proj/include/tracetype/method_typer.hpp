#pragma once

// Method post-processing: receiver and same-class types become Self, and
// parameters of overriding methods are widened to admit whatever the
// overridden declaration admits.

#include <optional>
#include <string>
#include <vector>

#include "tracetype/generalizer.hpp"
#include "tracetype/hierarchy.hpp"
#include "tracetype/stubs.hpp"

namespace tracetype {

namespace detail {

inline TypeSpec replace_type(TypeSpec const& t, TypeSpec const& target, TypeSpec const& with) {
    return transform_type(t, [&](TypeSpec x) { return x == target ? with : x; });
}

inline TypeSpec type_of_self() { return make_generic("", "type", {make_self()}); }

} // namespace detail

/// Rewrites one trace of a method so that the receiver's own type, wherever
/// else it appears (arguments, return, yield, send, nested inside generics),
/// reads as Self. The receiver slot itself becomes Self or type[Self]. Done
/// per trace, so a subclass receiver binds Self just like the defining class.
inline CallTrace bind_receiver(CallTrace trace, ReceiverKind receiver) {
    if (receiver == ReceiverKind::none || trace.arg_types.empty()) return trace;
    TypeSpec observed = trace.arg_types.front();
    TypeSpec instance = observed;
    if (receiver == ReceiverKind::class_) {
        if (!(observed.is(TypeKind::generic) && observed.module.empty() && observed.name == "type" &&
              observed.args.size() == 1))
            return trace;
        instance = observed.args.front();
    }
    if (instance.is(TypeKind::any) || instance.is(TypeKind::none) || instance.is(TypeKind::never)) return trace;
    auto self = make_self();
    for (std::size_t i = 1; i < trace.arg_types.size(); ++i)
        trace.arg_types[i] = detail::replace_type(trace.arg_types[i], instance, self);
    trace.return_type = detail::replace_type(trace.return_type, instance, self);
    if (trace.yield_type) trace.yield_type = detail::replace_type(*trace.yield_type, instance, self);
    if (trace.send_type) trace.send_type = detail::replace_type(*trace.send_type, instance, self);
    trace.arg_types.front() = receiver == ReceiverKind::class_ ? detail::type_of_self() : self;
    return trace;
}

/// Forces the receiver parameter to Self (instance) or type[Self] (class).
inline Signature apply_self(Signature sig, MethodContext const& ctx) {
    if (ctx.receiver == ReceiverKind::none || sig.params.empty()) return sig;
    sig.params.front().type = ctx.receiver == ReceiverKind::class_ ? detail::type_of_self() : make_self();
    prune_typevars(sig);
    refresh_imports(sig);
    return sig;
}

/// Names whose override relationship is not subject to substitutability.
inline bool exempt_from_override(std::string const& qualname) {
    auto name = qualname.substr(qualname.rfind('.') + 1);
    return name == "__init__" || name == "__new__" || name == "__init_subclass__" || name == "__post_init__";
}

/// Widens each parameter so it admits the parent's declared type: when the
/// observed type already fits under the parent's, the parent's type is used;
/// otherwise the union of both. Return types are left as observed.
inline Signature widen_override(Signature sig, MethodContext const& ctx, DeclaredSignature const& parent,
                                TypeHierarchy const& h = {}) {
    if (exempt_from_override(sig.fn.qualified_name)) return sig;
    std::size_t skip = ctx.receiver == ReceiverKind::none ? 0 : 1;
    for (std::size_t i = skip; i < sig.params.size(); ++i) {
        auto& p = sig.params[i];
        DeclaredParam const* declared = nullptr;
        for (auto const& d : parent.params)
            if (d.name == p.name) declared = &d;
        if (!declared && i < parent.params.size() && parent.params[i].name != "self" && parent.params[i].name != "cls")
            declared = &parent.params[i]; // renamed positional parameter
        if (!declared || !declared->type) continue;
        auto const& want = *declared->type;
        if (want.is(TypeKind::any) || contains_type(p.type, [](auto const& x) { return x.is(TypeKind::typevar); }))
            continue;
        if (h.is_subtype(p.type, want)) {
            p.type = want;
        } else {
            std::vector<TypeSpec> members;
            if (p.type.is(TypeKind::union_)) members = p.type.args;
            else members.push_back(p.type);
            members.push_back(want);
            p.type = simplify_union(std::move(members), h);
        }
    }
    prune_typevars(sig);
    refresh_imports(sig);
    return sig;
}

/// Parent declaration for an override: inline annotations captured at run
/// time take precedence; otherwise the stub repository is consulted.
inline std::optional<DeclaredSignature> parent_declaration(MethodContext const& ctx, std::string const& method_name,
                                                           StubRepository* stubs) {
    if (ctx.overridden) return ctx.overridden;
    if (!ctx.overridden_in || !stubs) return std::nullopt;
    return stubs->lookup(ctx.overridden_in->module, ctx.overridden_in->name + "." + method_name);
}

} // namespace tracetype
