#pragma once

// Canonical import-path selection for runtime types.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracetype/trace.hpp"

namespace tracetype {

/// One place a type can be imported from: `from module import name`, where
/// `name` may itself be dotted for nested classes.
struct ImportPath {
    std::string module;
    std::string name;
    bool in_public_interface = false; // listed in the module's __all__

    bool operator==(ImportPath const&) const = default;
};

inline std::vector<std::string_view> split_dotted(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        auto dot = s.find('.');
        out.push_back(s.substr(0, dot));
        if (dot == std::string_view::npos) break;
        s.remove_prefix(dot + 1);
    }
    return out;
}

inline std::string_view top_package(std::string_view module) { return module.substr(0, module.find('.')); }

inline bool has_underscore_component(ImportPath const& p) {
    for (auto part : split_dotted(p.module))
        if (!part.empty() && part.front() == '_') return true;
    for (auto part : split_dotted(p.name))
        if (!part.empty() && part.front() == '_') return true;
    return false;
}

inline std::size_t path_length(ImportPath const& p) {
    return split_dotted(p.module).size() + split_dotted(p.name).size();
}

/// Picks one path by successive filters; a filter that would discard every
/// remaining candidate is skipped:
///   1. listed in the module's public interface;
///   2. no underscore-prefixed component;
///   3. same top-level package as `defining_module`;
///   4. fewest identifiers;
///   5. lexicographically smallest "module.name".
inline ImportPath select_canonical(std::vector<ImportPath> candidates, std::string_view defining_module) {
    if (candidates.empty()) return {};
    auto keep_if = [&](auto pred) {
        std::vector<ImportPath> kept;
        std::copy_if(candidates.begin(), candidates.end(), std::back_inserter(kept), pred);
        if (!kept.empty()) candidates = std::move(kept);
    };
    keep_if([](ImportPath const& p) { return p.in_public_interface; });
    keep_if([](ImportPath const& p) { return !has_underscore_component(p); });
    auto pkg = top_package(defining_module);
    keep_if([&](ImportPath const& p) { return top_package(p.module) == pkg; });
    std::size_t min_len = path_length(*std::min_element(
        candidates.begin(), candidates.end(),
        [](auto const& a, auto const& b) { return path_length(a) < path_length(b); }));
    keep_if([&](ImportPath const& p) { return path_length(p) == min_len; });
    return *std::min_element(candidates.begin(), candidates.end(), [](auto const& a, auto const& b) {
        return a.module + "." + a.name < b.module + "." + b.name;
    });
}

/// Map from a type's defining identity (its __module__ and __qualname__ as
/// reported by introspection) to every discovered import path, plus the
/// chosen canonical path.
class ImportPathMap {
public:
    void add(QualifiedClass const& identity, ImportPath path) {
        auto& paths = aliases_[identity];
        if (std::find(paths.begin(), paths.end(), path) == paths.end()) paths.push_back(std::move(path));
        canonical_.erase(identity);
    }

    std::vector<ImportPath> const* aliases(QualifiedClass const& identity) const {
        auto it = aliases_.find(identity);
        return it == aliases_.end() ? nullptr : &it->second;
    }

    std::optional<ImportPath> canonical(QualifiedClass const& identity) const {
        auto cached = canonical_.find(identity);
        if (cached != canonical_.end()) return cached->second;
        auto it = aliases_.find(identity);
        if (it == aliases_.end() || it->second.empty()) return std::nullopt;
        auto chosen = select_canonical(it->second, identity.module);
        canonical_.emplace(identity, chosen);
        return chosen;
    }

    std::size_t size() const { return aliases_.size(); }

private:
    std::map<QualifiedClass, std::vector<ImportPath>> aliases_;
    mutable std::map<QualifiedClass, ImportPath> canonical_;
};

} // namespace tracetype
