#pragma once

// Class hierarchy and attribute surfaces, as recorded during tracing, used for
// subtype checks and common-supertype reduction.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tracetype/trace.hpp"

namespace tracetype {

inline QualifiedClass class_of(TypeSpec const& t) {
    return {t.module.empty() ? std::string("builtins") : t.module, t.name};
}

inline TypeSpec type_of_class(QualifiedClass const& c) {
    return make_concrete(c.module == "builtins" ? std::string() : c.module, c.name);
}

class TypeHierarchy {
public:
    TypeHierarchy() {
        // Built-in relationships that hold independent of any recorded run.
        add({"builtins", "bool"}, {{{"builtins", "bool"}, {"builtins", "int"}, {"builtins", "object"}}, {}});
    }

    explicit TypeHierarchy(std::map<QualifiedClass, TypeInfo> const& recorded) : TypeHierarchy() {
        for (auto const& [cls, info] : recorded) add(cls, info);
    }

    void add(QualifiedClass const& cls, TypeInfo info) { types_[cls] = std::move(info); }

    TypeInfo const* info(QualifiedClass const& cls) const {
        auto it = types_.find(cls);
        return it == types_.end() ? nullptr : &it->second;
    }

    /// Linearized ancestors, the class itself first. Unknown classes yield
    /// just themselves.
    std::vector<QualifiedClass> mro(QualifiedClass const& cls) const {
        if (auto const* i = info(cls); i && !i->mro.empty()) return i->mro;
        return {cls};
    }

    bool is_subclass(QualifiedClass const& sub, QualifiedClass const& super) const {
        if (sub == super) return true;
        auto chain = mro(sub);
        return std::find(chain.begin(), chain.end(), super) != chain.end();
    }

    /// Subtype check over the concrete part of the type language: equal
    /// types, Never below everything, None/concrete classes via the MRO,
    /// union members each admitted, and Any admitting everything.
    bool is_subtype(TypeSpec const& sub, TypeSpec const& super) const {
        if (sub == super) return true;
        if (super.is(TypeKind::any)) return true;
        if (sub.is(TypeKind::never)) return true;
        if (sub.is(TypeKind::union_)) {
            return std::all_of(sub.args.begin(), sub.args.end(),
                               [&](TypeSpec const& m) { return is_subtype(m, super); });
        }
        if (super.is(TypeKind::union_)) {
            return std::any_of(super.args.begin(), super.args.end(),
                               [&](TypeSpec const& m) { return is_subtype(sub, m); });
        }
        if (super.is(TypeKind::concrete) && super.module.empty() && super.name == "object") return true;
        if (sub.is(TypeKind::concrete) && super.is(TypeKind::concrete))
            return is_subclass(class_of(sub), class_of(super));
        if (sub.is_parameterized() && super.kind == sub.kind && super.module == sub.module &&
            super.name == sub.name && super.args.size() == sub.args.size()) {
            // covariant approximation; adequate for annotation widening
            for (std::size_t i = 0; i < sub.args.size(); ++i)
                if (!is_subtype(sub.args[i], super.args[i])) return false;
            return true;
        }
        if (sub.is_parameterized() && super.is(TypeKind::concrete))
            return is_subclass(class_of(sub), class_of(super));
        return false;
    }

private:
    std::map<QualifiedClass, TypeInfo> types_;
};

} // namespace tracetype
