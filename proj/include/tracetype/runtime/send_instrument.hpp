#pragma once

// Reports values received by generators: every yield expression is wrapped
// as `__tt_send__((yield v))`, a builtin that passes the value through. The
// rewrite happens on the syntax tree before compilation, for the main script
// and for included modules loaded through the path-based importer.

#include "tracetype/runtime/agent.hpp"

namespace tracetype::runtime {

namespace pyb = pybind11;

namespace detail {

inline pyb::object wrap_yields(pyb::handle node, pyb::module_ const& ast) {
    pyb::object ast_node = ast.attr("AST");
    for (auto field : node.attr("_fields")) {
        auto name = field.cast<std::string>();
        if (!pyb::hasattr(node, name.c_str())) continue;
        pyb::object value = node.attr(name.c_str());
        if (pyb::isinstance<pyb::list>(value)) {
            pyb::list items = value;
            for (std::size_t i = 0; i < items.size(); ++i)
                if (pyb::isinstance(items[i], ast_node)) items[i] = wrap_yields(items[i], ast);
        } else if (pyb::isinstance(value, ast_node)) {
            pyb::setattr(node, name.c_str(), wrap_yields(value, ast));
        }
    }
    if (pyb::isinstance(node, ast.attr("Yield"))) {
        pyb::object fn = ast.attr("Name")(pyb::arg("id") = "__tt_send__", pyb::arg("ctx") = ast.attr("Load")());
        pyb::list args;
        args.append(node);
        pyb::object call = ast.attr("Call")(pyb::arg("func") = fn, pyb::arg("args") = args,
                                            pyb::arg("keywords") = pyb::list());
        ast.attr("copy_location")(call, node);
        ast.attr("copy_location")(fn, node);
        return call;
    }
    return pyb::reinterpret_borrow<pyb::object>(node);
}

} // namespace detail

/// Parses, instruments and compiles `source`. Returns None (and appends a
/// warning) when the source does not parse; the caller then loads it as is.
inline pyb::object compile_instrumented(pyb::bytes source, std::string const& filename,
                                        std::vector<std::string>& warnings) {
    auto ast = pyb::module_::import("ast");
    pyb::object tree;
    try {
        tree = ast.attr("parse")(source, filename);
    } catch (pyb::error_already_set& e) {
        warnings.push_back("not instrumenting " + filename + ": " + std::string(e.what()));
        return pyb::none();
    }
    tree = detail::wrap_yields(tree, ast);
    ast.attr("fix_missing_locations")(tree);
    auto builtins = pyb::module_::import("builtins");
    return builtins.attr("compile")(tree, filename, "exec", pyb::arg("dont_inherit") = true);
}

namespace detail {

inline constexpr const char* import_hook_source = R"(
import sys
from importlib.machinery import PathFinder, SourceFileLoader

class _Loader(SourceFileLoader):
    def get_code(self, fullname):
        path = self.get_filename(fullname)
        data = self.get_data(path)
        if b"yield" in data:
            code = _instrument(data, path)
            if code is not None:
                return code
        return super().get_code(fullname)

class _Finder:
    @classmethod
    def find_spec(cls, fullname, path=None, target=None):
        spec = PathFinder.find_spec(fullname, path, target)
        if spec is None or type(spec.loader) is not SourceFileLoader or not spec.origin:
            return None
        if not _wanted(spec.origin):
            return None
        spec.loader = _Loader(fullname, spec.origin)
        return spec

    @classmethod
    def invalidate_caches(cls):
        pass

sys.meta_path.insert(0, _Finder)
)";

} // namespace detail

/// Puts a finder in front of the import system that instruments included
/// source modules. The returned finder is removed by `remove_import_hook`.
inline pyb::object install_import_hook(Agent& agent) {
    pyb::dict ns;
    ns["__builtins__"] = pyb::module_::import("builtins");
    ns["__name__"] = "_tracetype_hook";
    ns["_instrument"] = pyb::cpp_function([&agent](pyb::bytes data, std::string const& path) {
        return compile_instrumented(data, path, agent.warnings());
    });
    ns["_wanted"] = pyb::cpp_function([&agent](std::string const& path) { return agent.file_included(path); });
    pyb::exec(pyb::str(detail::import_hook_source), ns);
    return ns["_Finder"];
}

inline void remove_import_hook(pyb::handle finder) {
    try {
        pyb::list meta = pyb::module_::import("sys").attr("meta_path");
        for (std::size_t i = 0; i < meta.size(); ++i)
            if (meta[i].ptr() == finder.ptr()) {
                meta.attr("pop")(i);
                break;
            }
    } catch (pyb::error_already_set&) {
        PyErr_Clear();
    }
}

} // namespace tracetype::runtime
