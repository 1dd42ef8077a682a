#pragma once

// Runtime value typing for CPython 3.10. Everything here runs with the GIL
// held and never executes user-defined Python code: types are read from
// type objects and instance dictionaries, container elements are reached
// through the concrete C containers.

#include <pybind11/embed.h>
#include <frameobject.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tracetype/annotation_parser.hpp"
#include "tracetype/runtime/config.hpp"
#include "tracetype/import_paths.hpp"
#include "tracetype/shapes.hpp"
#include "tracetype/trace.hpp"

namespace tracetype::runtime {

/// Saves and restores the thread's pending exception around tool work.
class ErrorGuard {
public:
    ErrorGuard() { PyErr_Fetch(&type_, &value_, &tb_); }
    ~ErrorGuard() {
        PyErr_Clear();
        PyErr_Restore(type_, value_, tb_);
    }
    ErrorGuard(ErrorGuard const&) = delete;
    ErrorGuard& operator=(ErrorGuard const&) = delete;

private:
    PyObject *type_, *value_, *tb_;
};

inline std::string utf8(PyObject* s) {
    if (!s || !PyUnicode_Check(s)) return {};
    Py_ssize_t n = 0;
    const char* p = PyUnicode_AsUTF8AndSize(s, &n);
    if (!p) {
        PyErr_Clear();
        return {};
    }
    return std::string(p, static_cast<std::size_t>(n));
}

/// Maps runtime values to TypeSpecs. Concrete classes are named
/// provisionally by their defining (__module__, __qualname__); the run's
/// import-path map later rewrites those to canonical import paths.
class ObjectTyper {
public:
    explicit ObjectTyper(TyperConfig cfg) : cfg_(cfg), rng_(cfg.seed) {}

    ~ObjectTyper() {
        if (Py_IsInitialized())
            for (auto& [_, t] : registry_) Py_XDECREF(t);
    }

    ObjectTyper(ObjectTyper const&) = delete;
    ObjectTyper& operator=(ObjectTyper const&) = delete;

    TyperConfig const& config() const { return cfg_; }

    TypeSpec type_of(PyObject* v) { return type_of(v, cfg_.max_depth); }

    /// Never raises; failures degrade to Any.
    TypeSpec type_of(PyObject* v, int depth) {
        if (!v) return make_any();
        ErrorGuard guard;
        try {
            return type_of_impl(v, depth);
        } catch (...) {
            return make_any();
        }
    }

    /// Types at most `k` elements of an iterable container. Lists and tuples
    /// are sampled uniformly without replacement (seeded); sets and dicts are
    /// read in iteration order up to the cutoff.
    std::vector<TypeSpec> sample_container(PyObject* c, std::size_t k, int depth) {
        std::vector<TypeSpec> out;
        ErrorGuard guard;
        if (PyList_Check(c) || PyTuple_Check(c)) {
            bool list = PyList_Check(c);
            auto n = static_cast<std::size_t>(list ? PyList_GET_SIZE(c) : PyTuple_GET_SIZE(c));
            auto item = [&](std::size_t i) {
                return list ? PyList_GET_ITEM(c, static_cast<Py_ssize_t>(i)) : PyTuple_GET_ITEM(c, static_cast<Py_ssize_t>(i));
            };
            if (n <= k) {
                for (std::size_t i = 0; i < n; ++i) out.push_back(type_of_impl(item(i), depth));
            } else {
                for (auto i : sample_indices(n, k)) out.push_back(type_of_impl(item(i), depth));
            }
        } else if (PyAnySet_Check(c)) {
            Py_ssize_t pos = 0;
            PyObject* key;
            Py_hash_t hash;
            while (out.size() < k && _PySet_NextEntry(c, &pos, &key, &hash)) out.push_back(type_of_impl(key, depth));
        } else if (PyDict_Check(c)) {
            Py_ssize_t pos = 0;
            PyObject *key, *value;
            while (out.size() < k && PyDict_Next(c, &pos, &key, &value)) out.push_back(type_of_impl(key, depth));
        }
        return out;
    }

    /// Iterator typing without advancing it: the underlying container is
    /// found among the iterator's object-graph referents.
    TypeSpec type_iterator(PyObject* it, int depth) {
        ErrorGuard guard;
        auto iter = [](TypeSpec t) { return make_protocol("collections.abc", "Iterator", {std::move(t)}); };
        std::string_view name = Py_TYPE(it)->tp_name;
        if (name == "range_iterator" || name == "longrange_iterator" || name == "bytes_iterator" ||
            name == "bytearray_iterator")
            return iter(make_builtin("int"));
        if (name == "str_iterator" || name == "str_ascii_iterator") return iter(make_builtin("str"));
        if (depth <= 0) return iter(make_any());
        auto* refs = referents(it);
        if (!refs) return iter(make_any());
        TypeSpec elem = make_any();
        bool found = false;
        for (Py_ssize_t i = 0; i < PyList_GET_SIZE(refs) && !found; ++i) {
            PyObject* r = PyList_GET_ITEM(refs, i);
            if (PyDict_Check(r)) {
                found = true;
                auto [k, v] = dict_types(r, depth - 1);
                if (name.find("value") != std::string_view::npos) elem = v;
                else if (name.find("item") != std::string_view::npos) elem = make_generic("", "tuple", {k, v});
                else elem = k;
            } else if (PyList_Check(r) || PyTuple_Check(r) || PyAnySet_Check(r)) {
                found = true;
                elem = make_union(sample_container(r, cfg_.container_sample, depth - 1));
                if (elem.is(TypeKind::never) && container_size(r) > 0) elem = make_any();
            }
        }
        Py_DECREF(refs);
        return iter(elem);
    }

    /// Provisional spec for a class object, registering it for later
    /// import-path resolution and recording its hierarchy once.
    TypeSpec class_spec(PyTypeObject* t) {
        if (auto it = class_cache_.find(t); it != class_cache_.end()) return it->second;
        auto id = identity(t);
        TypeSpec spec = id.module == "builtins" && builtin_named(t, id.name) ? make_builtin(id.name)
                                                                              : make_concrete(id.module, id.name);
        if (!registry_.contains(id)) {
            Py_INCREF(reinterpret_cast<PyObject*>(t));
            registry_.emplace(id, reinterpret_cast<PyObject*>(t));
        }
        record_info(t, id);
        class_cache_.emplace(t, spec);
        return spec;
    }

    /// Converts a runtime annotation object (class, generic alias, union,
    /// special form or string) to a spec. `globals` resolves string
    /// annotations.
    TypeSpec annotation_to_spec(PyObject* ann, PyObject* globals, int depth = 0) {
        ErrorGuard guard;
        try {
            return annotation_impl(ann, globals, depth);
        } catch (...) {
            return make_any();
        }
    }

    /// (module, qualname) identity of a class as introspection reports it.
    static QualifiedClass identity(PyTypeObject* t) {
        if (t->tp_flags & Py_TPFLAGS_HEAPTYPE) {
            auto* heap = reinterpret_cast<PyHeapTypeObject*>(t);
            std::string module = "builtins";
            if (t->tp_dict)
                if (PyObject* m = PyDict_GetItemString(t->tp_dict, "__module__"); m && PyUnicode_Check(m))
                    module = utf8(m);
            return {module, utf8(heap->ht_qualname)};
        }
        std::string_view full = t->tp_name;
        auto dot = full.rfind('.');
        if (dot == std::string_view::npos) return {"builtins", std::string(full)};
        return {std::string(full.substr(0, dot)), std::string(full.substr(dot + 1))};
    }

    std::map<QualifiedClass, PyObject*> const& registry() const { return registry_; }
    std::map<QualifiedClass, TypeInfo> const& type_infos() const { return infos_; }

private:
    static bool builtin_named(PyTypeObject* t, std::string const& name) {
        PyObject* builtins = PyEval_GetBuiltins();
        if (!builtins) return false;
        return PyDict_GetItemString(builtins, name.c_str()) == reinterpret_cast<PyObject*>(t);
    }

    static PyObject* referents(PyObject* obj) {
        static PyObject* get_referents = [] {
            PyObject* gc = PyImport_ImportModule("gc");
            PyObject* f = gc ? PyObject_GetAttrString(gc, "get_referents") : nullptr;
            Py_XDECREF(gc);
            return f;
        }();
        if (!get_referents) return nullptr;
        PyObject* r = PyObject_CallOneArg(get_referents, obj);
        if (!r || !PyList_Check(r)) {
            Py_XDECREF(r);
            PyErr_Clear();
            return nullptr;
        }
        return r;
    }

    static Py_ssize_t container_size(PyObject* c) {
        if (PyList_Check(c)) return PyList_GET_SIZE(c);
        if (PyTuple_Check(c)) return PyTuple_GET_SIZE(c);
        if (PyAnySet_Check(c)) return PySet_GET_SIZE(c);
        if (PyDict_Check(c)) return PyDict_GET_SIZE(c);
        return 0;
    }

    /// Floyd's algorithm: k distinct indices from [0, n), in ascending order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        std::unordered_set<std::size_t> chosen;
        chosen.reserve(k * 2);
        for (std::size_t j = n - k; j < n; ++j) {
            std::uniform_int_distribution<std::size_t> pick(0, j);
            auto t = pick(rng_);
            if (!chosen.insert(t).second) chosen.insert(j);
        }
        std::vector<std::size_t> out(chosen.begin(), chosen.end());
        std::sort(out.begin(), out.end());
        return out;
    }

    std::pair<TypeSpec, TypeSpec> dict_types(PyObject* d, int depth) {
        if (depth < 0) return {make_any(), make_any()};
        std::vector<TypeSpec> keys, values;
        Py_ssize_t pos = 0;
        PyObject *k, *v;
        std::size_t n = 0;
        while (n < cfg_.container_sample && PyDict_Next(d, &pos, &k, &v)) {
            keys.push_back(type_of_impl(k, depth));
            values.push_back(type_of_impl(v, depth));
            ++n;
        }
        return {make_union(std::move(keys)), make_union(std::move(values))};
    }

    TypeSpec elements(PyObject* c, int depth) {
        if (depth <= 0) return make_any();
        return make_union(sample_container(c, cfg_.container_sample, depth - 1));
    }

    TypeSpec type_of_impl(PyObject* v, int depth) {
        if (v == Py_None) return make_none();
        PyTypeObject* t = Py_TYPE(v);
        if (t == &PyLong_Type) return make_builtin("int");
        if (t == &PyBool_Type) return make_builtin("bool");
        if (t == &PyFloat_Type) return make_builtin("float");
        if (t == &PyUnicode_Type) return make_builtin("str");
        if (t == &PyBytes_Type) return make_builtin("bytes");
        if (t == &PyComplex_Type) return make_builtin("complex");

        if (t == &PyList_Type) return make_generic("", "list", {elements(v, depth)});
        if (t == &PySet_Type) return make_generic("", "set", {elements(v, depth)});
        if (t == &PyFrozenSet_Type) return make_generic("", "frozenset", {elements(v, depth)});
        if (t == &PyTuple_Type) return tuple_type(v, depth);
        if (t == &PyDict_Type) {
            if (depth <= 0) return make_generic("", "dict", {make_any(), make_any()});
            auto [k, val] = dict_types(v, depth - 1);
            return make_generic("", "dict", {k, val});
        }
        if (PyType_Check(v)) return make_generic("", "type", {class_spec(reinterpret_cast<PyTypeObject*>(v))});

        std::string_view tname = t->tp_name;
        if (tname == "dict_keys" || tname == "dict_values" || tname == "dict_items") {
            auto* dict = reinterpret_cast<PyObject*>(reinterpret_cast<_PyDictViewObject*>(v)->dv_dict);
            auto [k, val] = dict && depth > 0 ? dict_types(dict, depth - 1) : std::pair{make_any(), make_any()};
            if (tname == "dict_keys") return make_protocol("collections.abc", "KeysView", {k});
            if (tname == "dict_values") return make_protocol("collections.abc", "ValuesView", {val});
            return make_protocol("collections.abc", "ItemsView", {k, val});
        }
        if (PyDict_Check(v) && (tname == "collections.OrderedDict" || tname == "collections.defaultdict")) {
            auto [k, val] = depth > 0 ? dict_types(v, depth - 1) : std::pair{make_any(), make_any()};
            class_spec(t);
            return make_generic("collections", std::string(tname.substr(tname.find('.') + 1)), {k, val});
        }
        if (PyGen_CheckExact(v)) return make_protocol("collections.abc", "Generator", {make_any(), make_any(), make_any()});
        if (PyCoro_CheckExact(v)) return make_protocol("collections.abc", "Coroutine", {make_any(), make_any(), make_any()});
        if (PyAsyncGen_CheckExact(v)) return make_protocol("collections.abc", "AsyncGenerator", {make_any(), make_any()});

        if (cfg_.infer_shapes && tname == "numpy.ndarray") {
            if (auto shaped = array_type(v)) return *shaped;
        }

        auto base = class_spec(t);
        if (auto generic = orig_class(v, base)) return *generic;

        if (base.module == "builtins" && !(t->tp_flags & Py_TPFLAGS_HEAPTYPE)) {
            // unnamed built-in type: iterators get a protocol, the rest waits
            // for import-path resolution (e.g. function -> types.FunctionType)
            if (t->tp_iternext && t->tp_iternext != &_PyObject_NextNotImplemented && t->tp_iter)
                return type_iterator(v, depth);
        }
        return base;
    }

    TypeSpec tuple_type(PyObject* v, int depth) {
        Py_ssize_t n = PyTuple_GET_SIZE(v);
        if (n == 0) return make_generic("", "tuple", {});
        if (depth <= 0) return make_generic("", "tuple", {make_any(), make_ellipsis()});
        if (n <= 10) {
            std::vector<TypeSpec> items;
            for (Py_ssize_t i = 0; i < n; ++i) items.push_back(type_of_impl(PyTuple_GET_ITEM(v, i), depth - 1));
            return make_generic("", "tuple", std::move(items));
        }
        return make_generic("", "tuple", {make_union(sample_container(v, cfg_.container_sample, depth - 1)), make_ellipsis()});
    }

    std::optional<TypeSpec> array_type(PyObject* v) {
        PyObject* dtype = PyObject_GetAttrString(v, "dtype");
        PyObject* dname = dtype ? PyObject_GetAttrString(dtype, "name") : nullptr;
        PyObject* shape = PyObject_GetAttrString(v, "shape");
        std::optional<TypeSpec> out;
        if (dname && shape && PyTuple_Check(shape)) {
            if (auto token = element_kind_token(utf8(dname))) {
                ShapeObservation obs{*token, {}};
                for (Py_ssize_t i = 0; i < PyTuple_GET_SIZE(shape); ++i)
                    obs.dims.push_back(PyLong_AsLongLong(PyTuple_GET_ITEM(shape, i)));
                class_spec(Py_TYPE(v));
                out = make_array_type(obs);
            }
        }
        Py_XDECREF(dtype);
        Py_XDECREF(dname);
        Py_XDECREF(shape);
        PyErr_Clear();
        return out;
    }

    /// Generic instances created as `C[int]()` carry `__orig_class__` in
    /// their instance dictionary.
    std::optional<TypeSpec> orig_class(PyObject* v, TypeSpec const& base) {
        PyObject** dictptr = _PyObject_GetDictPtr(v);
        if (!dictptr || !*dictptr || !PyDict_CheckExact(*dictptr)) return std::nullopt;
        PyObject* alias = PyDict_GetItemString(*dictptr, "__orig_class__");
        if (!alias) return std::nullopt;
        PyObject* args = PyObject_GetAttrString(alias, "__args__");
        if (!args) {
            // a missing attribute means "not parameterized"; anything else
            // is a failed introspection and the value is typed Any
            bool missing = PyErr_ExceptionMatches(PyExc_AttributeError);
            PyErr_Clear();
            if (missing) return std::nullopt;
            throw std::runtime_error("__orig_class__ introspection raised");
        }
        if (!PyTuple_Check(args)) {
            Py_DECREF(args);
            return std::nullopt;
        }
        std::vector<TypeSpec> params;
        for (Py_ssize_t i = 0; i < PyTuple_GET_SIZE(args); ++i)
            params.push_back(annotation_impl(PyTuple_GET_ITEM(args, i), nullptr, 1));
        Py_DECREF(args);
        return make_generic(base.module, base.name, std::move(params));
    }

    void record_info(PyTypeObject* t, QualifiedClass const& id) {
        if (infos_.contains(id)) return;
        static const std::set<std::string> skipped = {"__module__", "__dict__",    "__weakref__", "__doc__",
                                                      "__qualname__", "__annotations__", "__slots__",
                                                      "__abstractmethods__", "_abc_impl", "__parameters__",
                                                      "__orig_bases__"};
        TypeInfo info;
        std::set<std::string> attrs;
        PyObject* mro = t->tp_mro;
        if (mro && PyTuple_Check(mro)) {
            for (Py_ssize_t i = 0; i < PyTuple_GET_SIZE(mro); ++i) {
                auto* base = reinterpret_cast<PyTypeObject*>(PyTuple_GET_ITEM(mro, i));
                auto bid = identity(base);
                info.mro.push_back(bid);
                if (base == &PyBaseObject_Type || !base->tp_dict) continue;
                Py_ssize_t pos = 0;
                PyObject *k, *val;
                while (PyDict_Next(base->tp_dict, &pos, &k, &val)) {
                    auto name = utf8(k);
                    if (!name.empty() && !skipped.contains(name)) attrs.insert(name);
                }
            }
        }
        info.attributes.assign(attrs.begin(), attrs.end());
        infos_.emplace(id, std::move(info));
        // ancestors get their own surfaces for common-supertype checks
        if (mro && PyTuple_Check(mro))
            for (Py_ssize_t i = 1; i < PyTuple_GET_SIZE(mro); ++i) {
                auto* base = reinterpret_cast<PyTypeObject*>(PyTuple_GET_ITEM(mro, i));
                if (base == &PyBaseObject_Type) continue;
                auto bid = identity(base);
                if (!registry_.contains(bid)) {
                    Py_INCREF(reinterpret_cast<PyObject*>(base));
                    registry_.emplace(bid, reinterpret_cast<PyObject*>(base));
                }
                record_info(base, bid);
            }
    }

    // ------------------------------------------------------- annotations

    static std::optional<std::string> special_form_name(PyObject* ann) {
        std::string_view tn = Py_TYPE(ann)->tp_name;
        if (tn != "_SpecialForm" && tn != "typing._SpecialForm" && tn != "typing_extensions._SpecialForm" &&
            tn != "_AnyMeta")
            return std::nullopt;
        PyObject* name = PyObject_GetAttrString(ann, "_name");
        if (!name) {
            PyErr_Clear();
            return std::nullopt;
        }
        auto out = utf8(name);
        Py_DECREF(name);
        return out;
    }

    TypeSpec annotation_impl(PyObject* ann, PyObject* globals, int depth) {
        if (!ann || depth > 6) return make_any();
        if (ann == Py_None || ann == reinterpret_cast<PyObject*>(Py_TYPE(Py_None))) return make_none();
        if (ann == Py_Ellipsis) return make_ellipsis();
        if (PyUnicode_Check(ann)) {
            auto resolver = [&](std::string const& dotted) -> std::optional<QualifiedClass> {
                return resolve_name(dotted, globals);
            };
            return parse_annotation(utf8(ann), resolver);
        }
        if (auto special = special_form_name(ann)) {
            if (*special == "Any") return make_any();
            if (*special == "Self") return make_self();
            if (*special == "NoReturn" || *special == "Never") return make_never();
            return make_any();
        }
        std::string_view tn = Py_TYPE(ann)->tp_name;
        if (tn == "TypeVar") return make_any();
        if (PyTuple_Check(ann) && PyTuple_GET_SIZE(ann) == 0) return make_generic("", "tuple", {});

        PyObject* origin = PyObject_GetAttrString(ann, "__origin__");
        if (!origin) PyErr_Clear();
        PyObject* args = PyObject_GetAttrString(ann, "__args__");
        if (!args) PyErr_Clear();
        std::vector<TypeSpec> params;
        if (args && PyTuple_Check(args))
            for (Py_ssize_t i = 0; i < PyTuple_GET_SIZE(args); ++i)
                params.push_back(annotation_impl(PyTuple_GET_ITEM(args, i), globals, depth + 1));
        Py_XDECREF(args);

        TypeSpec out = make_any();
        if (tn == "types.UnionType") {
            out = make_union(std::move(params));
        } else if (origin) {
            if (auto special = special_form_name(origin)) {
                if (*special == "Union" || *special == "Optional") out = make_union(std::move(params));
            } else if (PyType_Check(origin)) {
                auto base = class_spec(reinterpret_cast<PyTypeObject*>(origin));
                if (base.module == "collections.abc" || base.module == "_collections_abc") {
                    auto id = identity(reinterpret_cast<PyTypeObject*>(origin));
                    out = id.name == "Callable" ? make_protocol("collections.abc", id.name)
                                                : make_protocol("collections.abc", id.name, std::move(params));
                } else {
                    out = make_generic(base.module, base.name, std::move(params));
                }
            }
        } else if (PyType_Check(ann)) {
            out = class_spec(reinterpret_cast<PyTypeObject*>(ann));
            auto id = identity(reinterpret_cast<PyTypeObject*>(ann));
            if (id.module == "_collections_abc" || id.module == "collections.abc")
                out = make_protocol("collections.abc", id.name);
        }
        Py_XDECREF(origin);
        return out;
    }

    /// Looks a dotted name up in `globals` (then builtins) and describes
    /// what it denotes.
    std::optional<QualifiedClass> resolve_name(std::string const& dotted, PyObject* globals) {
        auto parts = split_dotted(dotted);
        PyObject* obj = nullptr;
        std::string head(parts.front());
        if (globals && PyDict_Check(globals)) obj = PyDict_GetItemString(globals, head.c_str());
        if (!obj) obj = PyDict_GetItemString(PyEval_GetBuiltins(), head.c_str());
        if (!obj) return std::nullopt;
        Py_INCREF(obj);
        for (std::size_t i = 1; i < parts.size() && obj; ++i) {
            PyObject* next = PyObject_GetAttrString(obj, std::string(parts[i]).c_str());
            Py_DECREF(obj);
            obj = next;
        }
        if (!obj) {
            PyErr_Clear();
            return std::nullopt;
        }
        std::optional<QualifiedClass> out;
        if (auto special = special_form_name(obj)) {
            out = QualifiedClass{"typing", *special};
        } else if (PyType_Check(obj)) {
            auto* t = reinterpret_cast<PyTypeObject*>(obj);
            class_spec(t);
            out = identity(t);
        } else if (Py_TYPE(obj) == &PyModule_Type) {
            out = std::nullopt;
        } else {
            // typing aliases such as List, Optional
            PyObject* name = PyObject_GetAttrString(obj, "_name");
            PyObject* mod = PyObject_GetAttrString(obj, "__module__");
            if (name && mod && PyUnicode_Check(name) && PyUnicode_Check(mod)) out = QualifiedClass{utf8(mod), utf8(name)};
            Py_XDECREF(name);
            Py_XDECREF(mod);
            PyErr_Clear();
        }
        Py_DECREF(obj);
        return out;
    }

    TyperConfig cfg_;
    std::mt19937_64 rng_;
    std::map<QualifiedClass, PyObject*> registry_;
    std::map<QualifiedClass, TypeInfo> infos_;
    std::unordered_map<PyTypeObject*, TypeSpec> class_cache_;
};

// ------------------------------------------------------------ import paths

/// Scans the loaded modules for every registered type and records all paths
/// under which each can be imported. Modules whose scan fails are skipped
/// and reported in `warnings`.
inline ImportPathMap build_import_map(std::map<QualifiedClass, PyObject*> const& registry,
                                      std::vector<std::string>& warnings) {
    ImportPathMap map;
    ErrorGuard guard;
    std::unordered_map<PyObject*, QualifiedClass> by_object;
    for (auto const& [id, obj] : registry) by_object.emplace(obj, id);

    PyObject* modules = PySys_GetObject("modules"); // borrowed
    if (!modules || !PyDict_Check(modules)) return map;
    PyObject* items = PyDict_Items(modules); // snapshot
    if (!items) {
        PyErr_Clear();
        return map;
    }
    for (Py_ssize_t i = 0; i < PyList_GET_SIZE(items); ++i) {
        PyObject* pair = PyList_GET_ITEM(items, i);
        PyObject* name = PyTuple_GET_ITEM(pair, 0);
        PyObject* mod = PyTuple_GET_ITEM(pair, 1);
        if (!PyUnicode_Check(name) || !PyModule_Check(mod)) continue;
        auto modname = utf8(name);
        PyObject* dict = PyModule_GetDict(mod);
        if (!dict) {
            PyErr_Clear();
            warnings.push_back("skipping module " + modname + ": no namespace");
            continue;
        }
        std::set<std::string> exported;
        if (PyObject* all = PyDict_GetItemString(dict, "__all__")) {
            PyObject* seq = PySequence_Fast(all, "__all__");
            if (seq) {
                for (Py_ssize_t j = 0; j < PySequence_Fast_GET_SIZE(seq); ++j)
                    exported.insert(utf8(PySequence_Fast_GET_ITEM(seq, j)));
                Py_DECREF(seq);
            } else {
                PyErr_Clear();
                warnings.push_back("module " + modname + ": unreadable __all__");
            }
        }
        Py_ssize_t pos = 0;
        PyObject *key, *value;
        while (PyDict_Next(dict, &pos, &key, &value)) {
            auto it = by_object.find(value);
            if (it == by_object.end() || !PyUnicode_Check(key)) continue;
            auto attr = utf8(key);
            map.add(it->second, ImportPath{modname, attr, exported.contains(attr)});
        }
    }
    Py_DECREF(items);

    // nested classes are reachable only through their defining module
    for (auto const& [id, obj] : registry) {
        if (id.name.find('.') == std::string::npos || id.name.find("<locals>") != std::string::npos) continue;
        PyObject* mod = PyDict_GetItemString(modules, id.module.c_str());
        if (!mod) continue;
        PyObject* cur = mod;
        Py_INCREF(cur);
        for (auto part : split_dotted(id.name)) {
            PyObject* next = PyObject_GetAttrString(cur, std::string(part).c_str());
            Py_DECREF(cur);
            cur = next;
            if (!cur) break;
        }
        if (cur == obj) map.add(id, ImportPath{id.module, id.name, false});
        Py_XDECREF(cur);
        PyErr_Clear();
    }
    return map;
}

} // namespace tracetype::runtime
