#pragma once

// Inserts rendered signatures into Python source as pure text insertions
// (replacements only for --overwrite), adding the imports and type-variable
// declarations the new annotations need.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tracetype/generalizer.hpp"
#include "tracetype/py_source.hpp"
#include "tracetype/render.hpp"

namespace tracetype {

struct WriterOptions {
    TargetVersion version;
    bool overwrite = false;
    /// Dotted module name of the file being edited (e.g. `pkg.mod`).
    std::string module_name;
};

struct EditResult {
    std::string text;
    bool skipped = false;
    std::vector<FunctionKey> stale;
    std::vector<std::string> diagnostics;
    bool changed() const { return !skipped && changed_; }
    bool changed_ = false;
};

struct TextEdit {
    std::size_t offset = 0;
    std::size_t remove = 0;
    std::string text;
    int priority = 0; // order among edits at the same offset
    std::size_t sequence = 0;
};

inline std::string apply_text_edits(std::string_view src, std::vector<TextEdit> edits) {
    std::stable_sort(edits.begin(), edits.end(), [](auto const& a, auto const& b) {
        if (a.offset != b.offset) return a.offset < b.offset;
        if (a.priority != b.priority) return a.priority < b.priority;
        return a.sequence < b.sequence;
    });
    std::string out;
    std::size_t pos = 0;
    for (auto const& e : edits) {
        if (e.offset < pos) continue; // overlapping edit; cannot happen for well-formed input
        out.append(src.substr(pos, e.offset - pos));
        out += e.text;
        pos = e.offset + e.remove;
    }
    out.append(src.substr(std::min(pos, src.size())));
    return out;
}

namespace detail {

inline bool same_typing(std::string const& a, std::string const& b) {
    auto norm = [](std::string const& m) { return m == "typing_extensions" ? std::string("typing") : m; };
    return norm(a) == norm(b);
}

/// Decides how each (module, name) is spelled inside one file and which
/// import statements must be added for it.
class ImportPlanner {
public:
    ImportPlanner(py::ModuleIndex const& idx, WriterOptions const& opts, std::string file_stem)
        : idx_(idx), opts_(opts), stem_(std::move(file_stem)) {
        for (auto const& imp : idx.imports)
            for (auto const& n : imp.names) {
                if (imp.is_from) {
                    if (imp.module == "__future__" && n.name == "annotations") future_annotations_ = true;
                    if (n.name != "*") from_bound_[n.as_name.empty() ? n.name : n.as_name] = {imp.module, n.name};
                } else {
                    module_bound_[n.as_name.empty() ? n.name : n.as_name] = n.name;
                }
            }
        for (auto const& c : idx.classes)
            if (c.top_level) local_classes_.emplace(c.name, c.offset);
    }

    /// Offset of the statement being annotated, for forward-reference checks.
    void set_site(std::size_t offset) { site_ = offset; }

    std::string spell(std::string const& module, std::string const& name, bool& quote) {
        if (module.empty() || module == "builtins") return name;
        auto head = name.substr(0, name.find('.'));
        auto rest = name.substr(head.size());

        if (is_local_module(module)) {
            if (auto it = local_classes_.find(head); it != local_classes_.end()) {
                if (it->second >= site_ && !future_annotations_) quote = true;
                return name;
            }
        }
        for (auto const& [bound, origin] : from_bound_)
            if (origin.second == head && same_typing(origin.first, module)) return bound + rest;
        for (auto const& [bound, mod] : module_bound_)
            if (mod == module) return bound + "." + name;
        if (auto it = planned_from_.find(head); it != planned_from_.end() && it->second == module) return name;
        if (!idx_.top_level_names.contains(head) && !planned_from_.contains(head) && !from_bound_.contains(head)) {
            planned_from_[head] = module;
            return name;
        }
        planned_modules_.insert(module);
        return module + "." + name;
    }

    bool future_annotations() const { return future_annotations_; }

    /// New import statements, one per line, deterministic order.
    std::string import_block() const {
        std::map<std::string, std::set<std::string>> by_module;
        for (auto const& [name, module] : planned_from_) by_module[module].insert(name);
        std::string out;
        for (auto const& m : planned_modules_) out += "import " + m + "\n";
        for (auto const& [module, names] : by_module) {
            out += "from " + module + " import ";
            bool first = true;
            for (auto const& n : names) {
                out += (first ? "" : ", ") + n;
                first = false;
            }
            out += "\n";
        }
        return out;
    }

private:
    bool is_local_module(std::string const& module) const {
        if (module == opts_.module_name || module == "__main__") return true;
        auto last = module.substr(module.rfind('.') + 1);
        return last == stem_ && (module == stem_ || opts_.module_name.ends_with("." + module) || module.ends_with("." + stem_));
    }

    py::ModuleIndex const& idx_;
    WriterOptions const& opts_;
    std::string stem_;
    bool future_annotations_ = false;
    std::map<std::string, std::pair<std::string, std::string>> from_bound_;
    std::map<std::string, std::string> module_bound_;
    std::map<std::string, std::size_t> local_classes_;
    std::map<std::string, std::string> planned_from_;
    std::set<std::string> planned_modules_;
    std::size_t site_ = 0;
};

inline bool admits_none(TypeSpec const& t) {
    if (t.is(TypeKind::none) || t.is(TypeKind::any)) return true;
    if (t.is(TypeKind::union_))
        return std::any_of(t.args.begin(), t.args.end(), [](auto const& m) { return m.is(TypeKind::none); });
    return false;
}

inline TypeSpec asyncify(TypeSpec const& ret) {
    if (ret.is(TypeKind::protocol) && ret.module == "collections.abc") {
        if (ret.name == "Iterator") return make_protocol("collections.abc", "AsyncIterator", ret.args);
        if (ret.name == "Generator" && ret.args.size() == 3)
            return make_protocol("collections.abc", "AsyncGenerator", {ret.args[0], ret.args[1]});
    }
    return ret;
}

inline void collect_typevars(TypeSpec const& t, std::vector<int>& ids) {
    contains_type(t, [&](TypeSpec const& x) {
        if (x.is(TypeKind::typevar) && std::find(ids.begin(), ids.end(), x.typevar_id) == ids.end())
            ids.push_back(x.typevar_id);
        return false;
    });
}

/// Constraint list of an existing `rt_Tn = TypeVar("rt_Tn", a, b)` line.
inline std::optional<std::string> existing_constraints(std::string const& value) {
    auto open = value.find('(');
    auto close = value.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    auto inner = value.substr(open + 1, close - open - 1);
    int depth = 0;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (c == '(' || c == '[') ++depth;
        if (c == ')' || c == ']') --depth;
        if (c == ',' && depth == 0) {
            auto rest = inner.substr(i + 1);
            auto b = rest.find_first_not_of(' ');
            return b == std::string::npos ? std::string() : rest.substr(b);
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Rewrites `src` with the given signatures. Every signature must name a
/// function of this file by (qualified name, first line); otherwise the file
/// is returned unchanged and marked skipped with the stale keys listed.
inline EditResult apply_edits(std::string const& src, std::vector<Signature> const& sigs, WriterOptions const& opts,
                              std::string const& file_stem = "") {
    EditResult result;
    result.text = src;
    py::ModuleIndex idx;
    try {
        idx = py::scan_module(src);
    } catch (py::SyntaxError const& e) {
        result.skipped = true;
        result.diagnostics.push_back(std::string("cannot parse: ") + e.what());
        return result;
    }

    std::vector<std::pair<Signature const*, py::FunctionDef const*>> targets;
    for (auto const& s : sigs) {
        auto const* fn = idx.find(s.fn.qualified_name, s.fn.first_line);
        if (!fn) result.stale.push_back(s.fn);
        else targets.push_back({&s, fn});
    }
    if (!result.stale.empty()) {
        result.skipped = true;
        std::string msg = "stale keys (file changed since tracing):";
        for (auto const& k : result.stale) msg += " " + k.qualified_name + "@" + std::to_string(k.first_line);
        result.diagnostics.push_back(msg);
        return result;
    }
    std::sort(targets.begin(), targets.end(),
              [](auto const& a, auto const& b) { return a.second->name_end < b.second->name_end; });

    detail::ImportPlanner planner(idx, opts, file_stem);
    bool inline_typevars = opts.version.at_least(3, 12);

    // module-level typevar declarations already present
    std::map<std::string, std::string> declared_by_constraints; // constraints -> name
    int next_typevar = 1;
    for (auto const& a : idx.assignments) {
        if (!a.target.starts_with("rt_T") || a.value_text.find("TypeVar") == std::string::npos) continue;
        try {
            next_typevar = std::max(next_typevar, std::stoi(a.target.substr(4)) + 1);
        } catch (...) {
            continue;
        }
        if (auto c = detail::existing_constraints(a.value_text)) declared_by_constraints.emplace(*c, a.target);
    }

    std::vector<TextEdit> edits;
    std::size_t seq = 0;
    auto push = [&](std::size_t offset, std::size_t remove, std::string text, int priority) {
        edits.push_back({offset, remove, std::move(text), priority, seq++});
    };

    for (auto const& [sig, fn] : targets) {
        planner.set_site(fn->top_statement_start);
        RenderContext ctx;
        ctx.version = opts.version;
        ctx.spell = [&planner](std::string const& m, std::string const& n, bool& q) { return planner.spell(m, n, q); };
        if (fn->enclosing_class) ctx.self_fallback = *fn->enclosing_class;

        // decide which slots receive annotations
        struct Slot {
            py::Param const* param;
            TypeSpec type;
        };
        std::vector<Slot> slots;
        for (auto const& p : fn->params) {
            if (p.kind == py::ParamKind::kw_marker || p.kind == py::ParamKind::pos_marker) continue;
            if (p.annotation && !opts.overwrite) continue;
            auto it = std::find_if(sig->params.begin(), sig->params.end(), [&](auto const& sp) { return sp.name == p.name; });
            if (it == sig->params.end() || it->type.is(TypeKind::never)) continue;
            TypeSpec t = it->type;
            if (p.default_value && py::detail::strip(p.default_text) == "None" && !detail::admits_none(t))
                t = make_union({t, make_none()});
            slots.push_back({&p, std::move(t)});
        }
        std::optional<TypeSpec> ret;
        if (!fn->return_annotation || opts.overwrite) {
            ret = sig->return_type;
            if (fn->is_async && fn->has_yield) ret = detail::asyncify(*ret);
        }
        if (slots.empty() && !ret) continue;

        std::vector<int> used;
        for (auto const& s : slots) detail::collect_typevars(s.type, used);
        if (ret) detail::collect_typevars(*ret, used);
        std::sort(used.begin(), used.end());

        if (!used.empty() && inline_typevars && fn->type_params) {
            result.diagnostics.push_back(fn->qualname + ": already has type parameters; left unannotated");
            continue;
        }

        // name the typevars and render their constraints
        std::vector<std::pair<std::string, std::vector<std::string>>> inline_vars;
        for (int id : used) {
            auto cit = sig->typevars.find(id);
            if (cit == sig->typevars.end()) continue;
            std::vector<std::string> constraints;
            for (auto const& c : cit->second) constraints.push_back(render_type(c, ctx));
            if (inline_typevars) {
                auto name = "T" + std::to_string(id);
                ctx.typevar_names[id] = name;
                inline_vars.push_back({name, constraints});
                continue;
            }
            std::string key;
            for (std::size_t i = 0; i < constraints.size(); ++i) key += (i ? ", " : "") + constraints[i];
            auto found = declared_by_constraints.find(key);
            if (found == declared_by_constraints.end()) {
                auto name = "rt_T" + std::to_string(next_typevar++);
                bool q = false;
                auto tv = planner.spell("typing", "TypeVar", q);
                push(fn->top_statement_start, 0, typevar_declaration(name, constraints, tv) + "\n", 1);
                found = declared_by_constraints.emplace(key, name).first;
            }
            ctx.typevar_names[id] = found->second;
        }
        if (!inline_vars.empty()) push(fn->name_end, 0, type_parameter_list(inline_vars), 0);

        for (auto const& s : slots) {
            auto text = render_type(s.type, ctx);
            if (s.param->annotation)
                push(s.param->annotation_colon, s.param->annotation->end - s.param->annotation_colon, ": " + text, 0);
            else
                push(s.param->name_end, 0, ": " + text, 0);
        }
        if (ret) {
            auto text = render_type(*ret, ctx);
            if (fn->return_annotation)
                push(fn->arrow, fn->return_annotation->end - fn->arrow, "-> " + text, 0);
            else
                push(fn->close_paren + 1, 0, " -> " + text, 0);
        }
        for (auto& d : ctx.diagnostics) result.diagnostics.push_back(fn->qualname + ": " + d);
    }

    auto imports = planner.import_block();
    if (!imports.empty()) {
        std::size_t at = idx.import_insert_offset;
        if (at == 0) {
            // keep a shebang / encoding comment block first
            while (at < src.size() && src[at] == '#') {
                auto nl = src.find('\n', at);
                at = nl == std::string::npos ? src.size() : nl + 1;
            }
        }
        if (at > 0 && src[at - 1] != '\n') imports = "\n" + imports;
        // a fresh import block is set off from the code that follows
        if (!idx.insert_after_existing_imports && at < src.size() && src[at] != '\n') imports += "\n";
        push(at, 0, imports, -1);
    }
    if (edits.empty()) return result;
    result.text = apply_text_edits(src, std::move(edits));
    result.changed_ = result.text != src;
    return result;
}

/// Writes `text` to `path` through a temporary file and rename. Unless
/// `keep_backup` is false the previous contents are kept as `path.bak`.
inline void write_atomically(std::filesystem::path const& path, std::string const& text, bool keep_backup) {
    namespace fs = std::filesystem;
    if (keep_backup && fs::exists(path)) fs::copy_file(path, fs::path(path.string() + ".bak"), fs::copy_options::overwrite_existing);
    auto tmp = fs::path(path.string() + ".tracetype-tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::error_code ec;
    auto perms = fs::status(path, ec).permissions();
    if (!ec) fs::permissions(tmp, perms, ec);
    fs::rename(tmp, path);
}

} // namespace tracetype
