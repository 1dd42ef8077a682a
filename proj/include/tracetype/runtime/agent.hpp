#pragma once

// Sampling agent for CPython 3.10.
//
// A frame-evaluation hook wraps the default evaluator, so every frame entry
// (call or generator resumption) and exit (return, yield or exception) passes
// through the agent while the interpreter keeps its fast dispatch path. Each code object carries a FnInfo in its extra slots holding the
// function identity, the include/exclude verdict and its sampling state, so
// the common path is a pointer lookup and an epoch comparison. Sampled calls
// stay pending (keyed by frame) until their return event.

#include <fnmatch.h>

#include "tracetype/runtime/object_typer.hpp"

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "tracetype/py_source.hpp"
#include "tracetype/sampling.hpp"
#include "tracetype/stubs.hpp"

namespace tracetype::runtime {

struct FnInfo {
    std::uint64_t generation = 0;
    bool excluded = true;
    FunctionKey key;
    std::vector<std::string> arg_names;
    int fixed_args = 0; // positional + keyword-only
    bool varargs = false, varkw = false;
    int flags = 0;
    ReceiverKind receiver = ReceiverKind::none;
    bool method_done = false;
    LocationState loc;
    std::size_t pending = 0;
};

namespace detail {

inline void free_fn_info(void* p) { delete static_cast<FnInfo*>(p); }

inline Py_ssize_t code_extra_index() {
    static Py_ssize_t index = _PyEval_RequestCodeExtraIndex(&free_fn_info);
    return index;
}

inline bool power_of_two(std::uint64_t n) { return n && !(n & (n - 1)); }

inline std::uint64_t next_generation() {
    static std::uint64_t g = 0;
    return ++g;
}

struct FileEntry {
    bool excluded = true;
    std::string path;
    std::optional<py::ModuleIndex> index;
};

} // namespace detail

class Agent;

namespace detail {
inline std::atomic<Agent*> active_agent{nullptr};
}

class Agent {
public:
    explicit Agent(AgentConfig cfg)
        : cfg_(std::move(cfg)), controller_(cfg_.sampling), typer_(cfg_.typer), generation_(detail::next_generation()) {}

    ~Agent() {
        stop();
        if (Py_IsInitialized())
            for (auto& [_, d] : deferred_) Py_XDECREF(d.generator);
    }

    Agent(Agent const&) = delete;
    Agent& operator=(Agent const&) = delete;

    static Agent* active() { return detail::active_agent.load(std::memory_order_acquire); }

    AgentConfig const& config() const { return cfg_; }
    SamplingController& controller() { return controller_; }
    ObjectTyper& typer() { return typer_; }
    std::vector<std::string>& warnings() { return warnings_; }

    /// Installs the hooks for every thread of the interpreter. Requires the GIL.
    void start() {
        if (running_) return;
        detail::code_extra_index();
        if (!libraries_loaded_) load_library_paths();
        install_send_builtin();
        detail::active_agent.store(this, std::memory_order_release);
        stopped_ = false;
        running_ = true;
        auto* interp = PyThreadState_Get()->interp;
        previous_eval_ = _PyInterpreterState_GetEvalFrameFunc(interp);
        _PyInterpreterState_SetEvalFrameFunc(interp, &Agent::eval_frame);
        timer_stop_ = false;
        timer_ = std::thread([this] { timer_loop(); });
    }

    /// Removes the hooks and completes whatever is still pending: generators
    /// that yielded are recorded with a Never return, functions that returned
    /// a generator which never yielded get Iterator[Any].
    void stop() {
        if (!running_) return;
        running_ = false;
        stopped_ = true;
        {
            std::lock_guard lock(timer_mutex_);
            timer_stop_ = true;
        }
        timer_cv_.notify_all();
        if (timer_.joinable()) timer_.join();
        if (!Py_IsInitialized()) return;
        if (previous_eval_) _PyInterpreterState_SetEvalFrameFunc(PyThreadState_Get()->interp, previous_eval_);
        for (auto& [frame, p] : pending_) {
            if (p.yields.empty()) continue;
            p.trace.return_type = make_never();
            finish_generator(p);
            raw_.record(p.key, p.trace);
        }
        pending_.clear();
        for (auto& [frame, d] : deferred_) {
            d.trace.return_type = make_protocol("collections.abc", "Iterator", {make_any()});
            raw_.record(d.key, d.trace);
            Py_XDECREF(d.generator);
        }
        deferred_.clear();
        Agent* self = this;
        detail::active_agent.compare_exchange_strong(self, nullptr);
    }

    /// Traces as recorded, with provisional (defining-module) class names.
    TraceStore const& raw_store() const { return raw_; }

    /// Final store: class names rewritten to canonical import paths, classes
    /// with no importable path degraded to Any. Needs the live interpreter.
    TraceStore finish() {
        stop();
        ErrorGuard guard;
        auto paths = build_import_map(typer_.registry(), warnings_);
        auto rename = [&](QualifiedClass const& id) -> std::optional<QualifiedClass> {
            auto fix = [&](std::string m) { return m == "__main__" ? cfg_.main_module : m; };
            if (auto p = paths.canonical(id)) return QualifiedClass{fix(p->module), p->name};
            if (id.module == "builtins" || id.name.find("<locals>") != std::string::npos) return std::nullopt;
            return QualifiedClass{fix(id.module), id.name};
        };
        auto canon = [&](TypeSpec const& t) {
            return transform_type(t, [&](TypeSpec x) {
                if (!(x.is(TypeKind::concrete) || x.is(TypeKind::generic)) || x.module.empty()) return x;
                auto c = rename({x.module, x.name});
                if (!c) return make_any();
                x.module = c->module;
                x.name = c->name;
                return x;
            });
        };
        auto canon_opt = [&](std::optional<TypeSpec> const& t) -> std::optional<TypeSpec> {
            if (!t) return t;
            return canon(*t);
        };

        TraceStore out;
        out.seed = cfg_.typer.seed;
        for (auto const& [fn, traces] : raw_.entries)
            for (auto const& [t, count] : traces) {
                CallTrace c = t;
                for (auto& a : c.arg_types) a = canon(a);
                c.return_type = canon(c.return_type);
                c.yield_type = canon_opt(c.yield_type);
                c.send_type = canon_opt(c.send_type);
                out.record(fn, c, count);
            }
        auto canon_class = [&](QualifiedClass const& c) { return rename(c).value_or(c); };
        for (auto const& [fn, ctx] : raw_.methods) {
            if (!out.entries.contains(fn)) continue;
            MethodContext m = ctx;
            m.defining_class = canon_class(m.defining_class);
            for (auto& c : m.mro) c = canon_class(c);
            if (m.overridden_in) m.overridden_in = canon_class(*m.overridden_in);
            if (m.overridden) {
                for (auto& p : m.overridden->params) p.type = canon_opt(p.type);
                m.overridden->return_type = canon_opt(m.overridden->return_type);
            }
            out.methods.emplace(fn, std::move(m));
        }
        for (auto const& [id, info] : typer_.type_infos()) {
            auto c = rename(id);
            if (!c) continue;
            TypeInfo i = info;
            for (auto& m : i.mro) m = canon_class(m);
            out.types.emplace(*c, std::move(i));
        }
        return out;
    }

    /// Verdict for a source file under the include/exclude filters and the
    /// library-path defaults.
    bool file_included(std::string const& filename) { return !file_entry(filename).excluded; }

    // ------------------------------------------------------------- events

    static PyObject* eval_frame(PyThreadState* ts, PyFrameObject* f, int throwflag) {
        Agent* a = active();
        if (!a || a->stopped_) return _PyEval_EvalFrameDefault(ts, f, throwflag);
        try {
            a->on_call(f);
        } catch (...) {
            PyErr_Clear();
        }
        PyObject* result = _PyEval_EvalFrameDefault(ts, f, throwflag);
        if (active() != a || a->stopped_) return result;
        PyObject *type = nullptr, *value = nullptr, *tb = nullptr;
        if (!result) PyErr_Fetch(&type, &value, &tb);
        try {
            a->on_return(f, result);
        } catch (...) {
        }
        if (!result) PyErr_Restore(type, value, tb);
        else PyErr_Clear();
        return result;
    }

    /// Value received at a yield point of an instrumented generator.
    void on_send(PyFrameObject* f, PyObject* value) {
        if (!f || stopped_) return;
        auto* info = lookup(f->f_code);
        if (!info || info->pending == 0) return;
        auto it = pending_.find(f);
        if (it == pending_.end()) return;
        auto& p = it->second;
        if (!detail::power_of_two(++p.send_events)) return;
        InTool scope(in_tool_);
        p.sends.push_back(typer_.type_of(value));
    }

private:
    struct PendingCall {
        FnInfo* fn = nullptr;
        FunctionKey key;
        CallTrace trace;
        std::vector<TypeSpec> yields, sends;
        std::uint64_t yield_events = 0, send_events = 0;
    };

    /// A function that returned a generator object: its return type is
    /// known once the generator first yields.
    struct Deferred {
        FunctionKey key;
        CallTrace trace;
        PyObject* generator = nullptr; // weak reference object
    };

    struct InTool {
        explicit InTool(std::atomic<bool>& flag) : flag_(flag) { flag_.store(true, std::memory_order_relaxed); }
        ~InTool() { flag_.store(false, std::memory_order_relaxed); }
        std::atomic<bool>& flag_;
    };

    static constexpr int generator_flags = CO_GENERATOR | CO_COROUTINE | CO_ASYNC_GENERATOR | CO_ITERABLE_COROUTINE;

    FnInfo* lookup(PyCodeObject* code) {
        void* extra = nullptr;
        if (_PyCode_GetExtra(reinterpret_cast<PyObject*>(code), detail::code_extra_index(), &extra) < 0) {
            PyErr_Clear();
            return nullptr;
        }
        auto* info = static_cast<FnInfo*>(extra);
        return info && info->generation == generation_ ? info : nullptr;
    }

    FnInfo* info_for(PyCodeObject* code) {
        void* extra = nullptr;
        if (_PyCode_GetExtra(reinterpret_cast<PyObject*>(code), detail::code_extra_index(), &extra) < 0) {
            PyErr_Clear();
            return nullptr;
        }
        auto* info = static_cast<FnInfo*>(extra);
        if (info && info->generation == generation_) return info;
        if (!info) {
            info = new FnInfo;
            if (_PyCode_SetExtra(reinterpret_cast<PyObject*>(code), detail::code_extra_index(), info) < 0) {
                PyErr_Clear();
                delete info;
                return nullptr;
            }
        }
        classify(*info, code);
        return info;
    }

    void classify(FnInfo& info, PyCodeObject* code) {
        ErrorGuard guard;
        info = FnInfo{};
        info.generation = generation_;
        auto name = utf8(code->co_name);
        if (name.empty() || name.front() == '<') return;
        auto& file = file_entry(utf8(code->co_filename));
        if (file.excluded) return;
        // only definitions the source scanner can see are annotatable; this
        // also drops class bodies, which run as code objects of their own
        auto const* idx = module_index(file);
        if (!idx) return;
        auto fn = std::find_if(idx->functions.begin(), idx->functions.end(), [&](py::FunctionDef const& d) {
            return d.name == name && (d.first_line == code->co_firstlineno || d.def_line == code->co_firstlineno);
        });
        if (fn == idx->functions.end()) return;
        info.excluded = false;
        info.flags = code->co_flags;
        info.fixed_args = code->co_argcount + code->co_kwonlyargcount;
        info.varargs = code->co_flags & CO_VARARGS;
        info.varkw = code->co_flags & CO_VARKEYWORDS;
        int slots = info.fixed_args + (info.varargs ? 1 : 0) + (info.varkw ? 1 : 0);
        for (int i = 0; i < slots && i < PyTuple_GET_SIZE(code->co_varnames); ++i)
            info.arg_names.push_back(utf8(PyTuple_GET_ITEM(code->co_varnames, i)));

        info.key = {file.path, fn->qualname, code->co_firstlineno};
        if (fn->enclosing_class && code->co_argcount > 0) {
            info.receiver = ReceiverKind::instance;
            for (auto const& d : fn->decorators) {
                if (d == "staticmethod") info.receiver = ReceiverKind::none;
                if (d == "classmethod") info.receiver = ReceiverKind::class_;
            }
            if (name == "__new__" || name == "__init_subclass__" || name == "__class_getitem__")
                info.receiver = ReceiverKind::class_;
        }
        info.method_done = info.receiver == ReceiverKind::none;
    }

    detail::FileEntry& file_entry(std::string const& filename) {
        auto it = files_.find(filename);
        if (it != files_.end()) return it->second;
        if (!libraries_loaded_) load_library_paths();
        detail::FileEntry e;
        if (!filename.empty() && filename.front() != '<') {
            std::error_code ec;
            auto abs = std::filesystem::absolute(filename, ec).lexically_normal();
            e.path = ec ? filename : abs.string();
            auto rel = std::filesystem::relative(abs, std::filesystem::current_path(ec), ec).string();
            auto matches = [&](std::vector<std::string> const& pats) {
                for (auto const& p : pats)
                    if (::fnmatch(p.c_str(), e.path.c_str(), 0) == 0 || ::fnmatch(p.c_str(), rel.c_str(), 0) == 0 ||
                        ::fnmatch(p.c_str(), filename.c_str(), 0) == 0)
                        return true;
                return false;
            };
            bool library = e.path.find("/site-packages/") != std::string::npos ||
                           e.path.find("/dist-packages/") != std::string::npos;
            for (auto const& lib : library_paths_)
                if (e.path.starts_with(lib)) library = true;
            if (!cfg_.include.empty()) e.excluded = !matches(cfg_.include);
            else e.excluded = library;
            if (!e.excluded && matches(cfg_.exclude)) e.excluded = true;
            if (e.path.ends_with(".pyi")) e.excluded = true;
        }
        return files_.emplace(filename, std::move(e)).first->second;
    }

    py::ModuleIndex const* module_index(detail::FileEntry& file) {
        if (file.index) return &*file.index;
        std::ifstream in(file.path, std::ios::binary);
        if (!in) return nullptr;
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            file.index = py::scan_module(ss.str());
        } catch (std::exception const& e) {
            warnings_.push_back("cannot scan " + file.path + ": " + e.what());
            file.index = py::ModuleIndex{};
        }
        return &*file.index;
    }

    PyObject* arg_value(PyFrameObject* f, int i) {
        PyObject* v = f->f_localsplus[i];
        if (v) return v;
        PyCodeObject* code = f->f_code;
        if (!code->co_cell2arg) return nullptr;
        Py_ssize_t ncells = PyTuple_GET_SIZE(code->co_cellvars);
        for (Py_ssize_t j = 0; j < ncells; ++j)
            if (code->co_cell2arg[j] == i) {
                PyObject* cell = f->f_localsplus[code->co_nlocals + j];
                return cell && PyCell_Check(cell) ? PyCell_GET(cell) : nullptr;
            }
        return nullptr;
    }

    void on_call(PyFrameObject* f) {
        if (f->f_lasti >= 0) return; // generator resumption
        FnInfo* info = info_for(f->f_code);
        if (!info || info->excluded || controller_.is_disabled(info->loc)) return;
        InTool scope(in_tool_);
        ErrorGuard guard;
        PendingCall p;
        p.fn = info;
        p.key = info->key;
        p.trace.arg_names = info->arg_names;
        int i = 0;
        for (; i < info->fixed_args; ++i) p.trace.arg_types.push_back(typer_.type_of(arg_value(f, i)));
        if (info->varargs) {
            PyObject* t = arg_value(f, i++);
            p.trace.arg_types.push_back(t && PyTuple_Check(t) ? make_union(typer_.sample_container(
                                                                    t, typer_.config().container_sample, typer_.config().max_depth))
                                                              : make_any());
        }
        if (info->varkw) {
            PyObject* d = arg_value(f, i);
            std::vector<TypeSpec> values;
            if (d && PyDict_Check(d)) {
                Py_ssize_t pos = 0;
                PyObject *k, *v;
                while (values.size() < typer_.config().container_sample && PyDict_Next(d, &pos, &k, &v))
                    values.push_back(typer_.type_of(v));
            }
            p.trace.arg_types.push_back(make_union(std::move(values)));
        }
        if (!info->method_done) {
            info->method_done = true;
            resolve_method(*info, f);
        }
        pending_[f] = std::move(p);
        ++info->pending;
        if (controller_.over_budget()) controller_.disable(info->loc);
    }

    void on_return(PyFrameObject* f, PyObject* arg) {
        if (!deferred_.empty()) check_deferred(f, arg);
        FnInfo* info = lookup(f->f_code);
        if (!info || info->pending == 0) return;
        auto it = pending_.find(f);
        if (it == pending_.end()) return;
        bool gen_like = info->flags & generator_flags;
        if (gen_like && f->f_state == FRAME_SUSPENDED) {
            if (!arg) return;
            PyObject* value = arg;
            if (info->flags & CO_ASYNC_GENERATOR) {
                // yields arrive wrapped; anything else is an await suspension
                if (std::string_view(Py_TYPE(arg)->tp_name) != "async_generator_wrapped_value") return;
                value = *reinterpret_cast<PyObject**>(reinterpret_cast<char*>(arg) + sizeof(PyObject));
            } else if (!(info->flags & CO_GENERATOR)) {
                return; // coroutine await
            }
            auto& p = it->second;
            if (!detail::power_of_two(++p.yield_events)) return;
            InTool scope(in_tool_);
            p.yields.push_back(typer_.type_of(value));
            return;
        }
        InTool scope(in_tool_);
        ErrorGuard guard;
        PendingCall p = std::move(it->second);
        pending_.erase(it);
        --info->pending;
        bool generator = info->flags & (CO_GENERATOR | CO_ASYNC_GENERATOR);
        if (!arg) {
            // exceptional exit: only generators that produced values count
            if (!generator || p.yields.empty()) return;
            p.trace.return_type = make_never();
            finish_generator(p);
            record_sampled(*info, p);
            return;
        }
        if (generator) {
            p.trace.return_type = typer_.type_of(arg);
            finish_generator(p);
            record_sampled(*info, p);
            return;
        }
        if (PyGen_CheckExact(arg) && !(info->flags & generator_flags)) {
            auto* gen = reinterpret_cast<PyGenObject*>(arg);
            if (gen->gi_frame && !deferred_.contains(gen->gi_frame)) {
                if (PyObject* ref = PyWeakref_NewRef(arg, nullptr)) {
                    deferred_[gen->gi_frame] = Deferred{p.key, std::move(p.trace), ref};
                    return;
                }
                PyErr_Clear();
            }
        }
        p.trace.return_type = typer_.type_of(arg);
        record_sampled(*info, p);
    }

    /// Records a completed call. A location whose trace was already known is
    /// disabled until the next re-enable; new type combinations keep it live.
    void record_sampled(FnInfo& info, PendingCall const& p) {
        auto& traces = raw_.entries[p.key];
        if (traces.contains(p.trace)) controller_.disable(info.loc);
        raw_.record(p.key, p.trace);
    }

    void finish_generator(PendingCall& p) {
        p.trace.yield_type = make_union(p.yields);
        if (!p.sends.empty()) p.trace.send_type = make_union(p.sends);
    }

    void check_deferred(PyFrameObject* f, PyObject* arg) {
        auto it = deferred_.find(f);
        if (it == deferred_.end()) return;
        auto& d = it->second;
        PyObject* gen = PyWeakref_GetObject(d.generator);
        if (gen == Py_None || !PyGen_Check(gen) || reinterpret_cast<PyGenObject*>(gen)->gi_frame != f) {
            Py_DECREF(d.generator);
            deferred_.erase(it);
            return;
        }
        InTool scope(in_tool_);
        TypeSpec elem = make_never();
        if (f->f_state == FRAME_SUSPENDED && arg) elem = typer_.type_of(arg);
        d.trace.return_type = make_protocol("collections.abc", "Iterator", {elem});
        raw_.record(d.key, d.trace);
        Py_DECREF(d.generator);
        deferred_.erase(it);
    }

    // ----------------------------------------------------------- methods

    static bool wraps_code(PyObject* attr, PyCodeObject* code) {
        if (!attr) return false;
        if (PyFunction_Check(attr)) return PyFunction_GET_CODE(attr) == reinterpret_cast<PyObject*>(code);
        if (!safe_wrapper(attr)) return false;
        for (const char* field : {"__func__", "fget", "fset", "fdel"}) {
            PyObject* inner = PyObject_GetAttrString(attr, field);
            if (!inner) {
                PyErr_Clear();
                continue;
            }
            bool hit = PyFunction_Check(inner) && PyFunction_GET_CODE(inner) == reinterpret_cast<PyObject*>(code);
            Py_DECREF(inner);
            if (hit) return true;
        }
        return false;
    }

    // descriptors whose attributes can be read without running user code
    static bool safe_wrapper(PyObject* attr) {
        auto* t = Py_TYPE(attr);
        return t == &PyClassMethod_Type || t == &PyStaticMethod_Type || t == &PyProperty_Type;
    }

    static PyObject* unwrap_function(PyObject* attr) {
        if (PyFunction_Check(attr)) {
            Py_INCREF(attr);
            return attr;
        }
        if (!safe_wrapper(attr)) return nullptr;
        PyObject* inner = PyObject_GetAttrString(attr, "__func__");
        if (inner && PyFunction_Check(inner)) return inner;
        Py_XDECREF(inner);
        PyErr_Clear();
        return nullptr;
    }

    std::optional<DeclaredSignature> declared_signature_of(PyObject* attr) {
        PyObject* fn = unwrap_function(attr);
        if (!fn) return std::nullopt;
        std::optional<DeclaredSignature> out;
        PyObject* anns = PyObject_GetAttrString(fn, "__annotations__");
        if (anns && PyDict_Check(anns) && PyDict_GET_SIZE(anns) > 0) {
            auto* code = reinterpret_cast<PyCodeObject*>(PyFunction_GET_CODE(fn));
            PyObject* globals = PyFunction_GET_GLOBALS(fn);
            PyObject* defaults = PyFunction_GET_DEFAULTS(fn);
            PyObject* kwdefaults = PyFunction_GET_KW_DEFAULTS(fn);
            int npos = code->co_argcount;
            int ndef = defaults && PyTuple_Check(defaults) ? static_cast<int>(PyTuple_GET_SIZE(defaults)) : 0;
            int slots = code->co_argcount + code->co_kwonlyargcount + ((code->co_flags & CO_VARARGS) ? 1 : 0) +
                        ((code->co_flags & CO_VARKEYWORDS) ? 1 : 0);
            DeclaredSignature sig;
            for (int i = 0; i < slots && i < PyTuple_GET_SIZE(code->co_varnames); ++i) {
                PyObject* pname = PyTuple_GET_ITEM(code->co_varnames, i);
                DeclaredParam p;
                p.name = utf8(pname);
                if (i < npos) p.has_default = i >= npos - ndef;
                else if (kwdefaults && PyDict_Check(kwdefaults)) p.has_default = PyDict_GetItem(kwdefaults, pname);
                if (PyObject* a = PyDict_GetItem(anns, pname)) p.type = typer_.annotation_to_spec(a, globals);
                sig.params.push_back(std::move(p));
            }
            if (PyObject* r = PyDict_GetItemString(anns, "return")) sig.return_type = typer_.annotation_to_spec(r, globals);
            out = std::move(sig);
        }
        Py_XDECREF(anns);
        Py_DECREF(fn);
        PyErr_Clear();
        return out;
    }

    /// Finds the class whose namespace holds this code, then the ancestors
    /// that define the same attribute.
    void resolve_method(FnInfo& info, PyFrameObject* f) {
        PyObject* receiver = info.fixed_args > 0 ? arg_value(f, 0) : nullptr;
        if (!receiver) return;
        PyTypeObject* start = info.receiver == ReceiverKind::instance ? Py_TYPE(receiver)
                              : PyType_Check(receiver)               ? reinterpret_cast<PyTypeObject*>(receiver)
                                                                     : nullptr;
        if (!start || !start->tp_mro || !PyTuple_Check(start->tp_mro)) return;
        PyTypeObject* defining = nullptr;
        PyObject* key = nullptr;
        for (Py_ssize_t i = 0; i < PyTuple_GET_SIZE(start->tp_mro) && !defining; ++i) {
            auto* base = reinterpret_cast<PyTypeObject*>(PyTuple_GET_ITEM(start->tp_mro, i));
            if (!base->tp_dict) continue;
            Py_ssize_t pos = 0;
            PyObject *k, *v;
            while (PyDict_Next(base->tp_dict, &pos, &k, &v))
                if (wraps_code(v, f->f_code)) {
                    defining = base;
                    key = k;
                    break;
                }
        }
        if (!defining) return;
        MethodContext ctx;
        ctx.receiver = info.receiver;
        typer_.class_spec(defining);
        ctx.defining_class = ObjectTyper::identity(defining);
        std::vector<DeclaredSignature> declared;
        PyObject* mro = defining->tp_mro;
        for (Py_ssize_t i = 0; mro && i < PyTuple_GET_SIZE(mro); ++i) {
            auto* base = reinterpret_cast<PyTypeObject*>(PyTuple_GET_ITEM(mro, i));
            ctx.mro.push_back(ObjectTyper::identity(base));
            if (i == 0 || !base->tp_dict) continue;
            PyObject* attr = PyDict_GetItem(base->tp_dict, key);
            if (!attr) continue;
            if (!ctx.overridden_in) ctx.overridden_in = ObjectTyper::identity(base);
            if (auto d = declared_signature_of(attr)) declared.push_back(std::move(*d));
        }
        if (!declared.empty()) ctx.overridden = union_signatures(declared);
        raw_.methods[info.key] = std::move(ctx);
    }

    // ------------------------------------------------------------- setup

    void load_library_paths() {
        libraries_loaded_ = true;
        library_paths_.clear();
        ErrorGuard guard;
        PyObject* sysconfig = PyImport_ImportModule("sysconfig");
        PyObject* paths = sysconfig ? PyObject_CallMethod(sysconfig, "get_paths", nullptr) : nullptr;
        if (paths && PyDict_Check(paths))
            for (const char* k : {"stdlib", "platstdlib", "purelib", "platlib"})
                if (PyObject* v = PyDict_GetItemString(paths, k)) {
                    auto p = utf8(v);
                    if (!p.empty()) library_paths_.push_back(p.back() == '/' ? p : p + "/");
                }
        Py_XDECREF(paths);
        Py_XDECREF(sysconfig);
    }

    static PyObject* send_hook(PyObject*, PyObject* value) {
        if (Agent* a = active(); a && !a->stopped_) {
            try {
                a->on_send(PyEval_GetFrame(), value);
            } catch (...) {
            }
        }
        Py_INCREF(value);
        return value;
    }

    void install_send_builtin() {
        static PyMethodDef def{"__tt_send__", &Agent::send_hook, METH_O, nullptr};
        ErrorGuard guard;
        PyObject* fn = PyCFunction_New(&def, nullptr);
        PyObject* builtins = PyImport_ImportModule("builtins");
        if (fn && builtins) PyObject_SetAttrString(builtins, "__tt_send__", fn);
        Py_XDECREF(fn);
        Py_XDECREF(builtins);
    }

    void timer_loop() {
        std::unique_lock lock(timer_mutex_);
        while (!timer_stop_) {
            if (timer_cv_.wait_for(lock, cfg_.sampling.tick_interval, [this] { return timer_stop_; })) break;
            controller_.profile_tick(in_tool_.load(std::memory_order_relaxed));
        }
    }

    AgentConfig cfg_;
    SamplingController controller_;
    ObjectTyper typer_;
    std::uint64_t generation_;
    TraceStore raw_;
    std::unordered_map<PyFrameObject*, PendingCall> pending_;
    std::unordered_map<PyFrameObject*, Deferred> deferred_;
    std::unordered_map<std::string, detail::FileEntry> files_;
    std::vector<std::string> library_paths_;
    bool libraries_loaded_ = false;
    std::vector<std::string> warnings_;
    std::atomic<bool> in_tool_{false};
    std::atomic<bool> stopped_{true};
    bool running_ = false;
    _PyFrameEvalFunction previous_eval_ = nullptr;
    std::thread timer_;
    std::mutex timer_mutex_;
    std::condition_variable timer_cv_;
    bool timer_stop_ = false;
};

} // namespace tracetype::runtime
