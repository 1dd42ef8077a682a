#pragma once

// Runs a Python program (script path or -m module) under the agent,
// reproducing the interpreter's own handling of argv, sys.path[0], __main__,
// SystemExit, uncaught exceptions and shutdown order. Works inside a running
// interpreter (the agent extension module) or an embedded one.

#include "tracetype/runtime/send_instrument.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef TRACETYPE_PYTHON_EXECUTABLE
#define TRACETYPE_PYTHON_EXECUTABLE "python3"
#endif

namespace tracetype::runtime {

struct RunRequest {
    std::string target;           // script path, or module name when module_mode
    bool module_mode = false;
    std::vector<std::string> args; // passed to the program
    AgentConfig agent;
};

struct RunOutcome {
    int exit_code = 0;
    bool tool_error = false;
    std::string error;
    TraceStore store;
    std::vector<std::string> warnings;
};

namespace detail {

/// Exit status for a pending SystemExit, as the interpreter computes it.
inline int system_exit_code() {
    PyObject *type, *value, *tb;
    PyErr_Fetch(&type, &value, &tb);
    PyErr_NormalizeException(&type, &value, &tb);
    int code = 0;
    PyObject* c = value ? PyObject_GetAttrString(value, "code") : nullptr;
    if (!c) PyErr_Clear();
    if (!c || c == Py_None) {
        code = 0;
    } else if (PyLong_Check(c)) {
        code = static_cast<int>(PyLong_AsLong(c));
    } else {
        PyObject* err = PySys_GetObject("stderr");
        if (err && err != Py_None) {
            PyFile_WriteObject(c, err, Py_PRINT_RAW);
            PyFile_WriteString("\n", err);
        }
        PyErr_Clear();
        code = 1;
    }
    Py_XDECREF(c);
    Py_XDECREF(type);
    Py_XDECREF(value);
    Py_XDECREF(tb);
    return code;
}

/// Status after an uncaught exception in the target (or its shutdown hooks).
inline int exception_exit_code() {
    if (PyErr_ExceptionMatches(PyExc_SystemExit)) return system_exit_code();
    PyErr_Print();
    return 1;
}

inline void call_if_loaded(const char* module, const char* fn) {
    PyObject* modules = PySys_GetObject("modules");
    PyObject* m = modules ? PyDict_GetItemString(modules, module) : nullptr;
    if (!m) return;
    PyObject* r = PyObject_CallMethod(m, fn, nullptr);
    if (!r) {
        PyErr_WriteUnraisable(m);
        PyErr_Clear();
    }
    Py_XDECREF(r);
}

inline std::string read_file(std::filesystem::path const& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

/// Runs the target under a fresh agent in the already initialized
/// interpreter (GIL held). With `replace_path0` the current sys.path[0] (as
/// set by `python -c`) is replaced rather than shadowed. Does not finalize.
inline RunOutcome run_in_interpreter(RunRequest const& req, bool replace_path0) {
    RunOutcome out;
    std::string source;
    std::filesystem::path script;
    if (!req.module_mode) {
        // the interpreter makes the script's own path absolute (not resolved)
        script = std::filesystem::absolute(req.target).lexically_normal();
        try {
            source = detail::read_file(script);
        } catch (std::exception const& e) {
            out.tool_error = true;
            out.error = e.what();
            out.exit_code = 2;
            return out;
        }
    }

    AgentConfig acfg = req.agent;
    if (acfg.main_module == "__main__")
        acfg.main_module = req.module_mode ? req.target : script.stem().string();

    int code = 0;
    std::error_code ec;
    std::string path0 = req.module_mode ? std::filesystem::current_path(ec).string()
                                        : std::filesystem::weakly_canonical(std::filesystem::absolute(script), ec)
                                              .parent_path()
                                              .string();
    {
        auto sys = pybind11::module_::import("sys");
        pybind11::list argv;
        argv.append(req.module_mode ? std::string("-m") : req.target);
        for (auto const& a : req.args) argv.append(a);
        sys.attr("argv") = argv;
        pybind11::list sys_path = sys.attr("path");
        if (replace_path0 && !sys_path.empty()) sys_path[0] = path0;
        else sys_path.insert(0, path0);

        // a fresh __main__, as the interpreter gives a script
        pybind11::dict modules = sys.attr("modules");
        [[maybe_unused]] pybind11::object previous_main = modules.contains("__main__") ? modules["__main__"] : pybind11::object();
        pybind11::module_ main = pybind11::module_::import("types").attr("ModuleType")("__main__");
        main.attr("__builtins__") = pybind11::module_::import("builtins");
        modules["__main__"] = main;

        Agent agent(acfg);
        pybind11::object finder;
        pybind11::object compiled;
        bool started = false, runnable = true;
        try {
            if (acfg.instrument_sends) finder = install_import_hook(agent);
            if (!req.module_mode) {
                main.attr("__file__") = script.string();
                main.attr("__cached__") = pybind11::none();
                pybind11::bytes data(source);
                if (acfg.instrument_sends && source.find("yield") != std::string::npos)
                    compiled = compile_instrumented(data, script.string(), agent.warnings());
                if (!compiled || compiled.is_none())
                    compiled = pybind11::module_::import("builtins")
                                   .attr("compile")(data, script.string(), "exec", pybind11::arg("dont_inherit") = true);
            }
        } catch (pybind11::error_already_set& e) {
            // the script itself does not compile: report like the interpreter
            e.restore();
            code = detail::exception_exit_code();
            runnable = false;
        } catch (std::exception const& e) {
            if (finder) remove_import_hook(finder);
            out.tool_error = true;
            out.error = e.what();
            out.exit_code = 2;
            return out;
        }

        // the program's frames must not chain onto the bootstrap caller's, as
        // in a plain interpreter where the script is the bottom frame
        PyThreadState* ts = PyThreadState_Get();
        PyFrameObject* caller_frame = ts->frame;
        ts->frame = nullptr;

        if (runnable) {
            agent.start();
            started = true;
            PyObject* r = nullptr;
            if (req.module_mode) {
                PyObject* runpy = PyImport_ImportModule("runpy");
                r = runpy ? PyObject_CallMethod(runpy, "_run_module_as_main", "si", req.target.c_str(), 1) : nullptr;
                Py_XDECREF(runpy);
            } else {
                PyObject* globals = PyModule_GetDict(main.ptr());
                r = PyEval_EvalCode(compiled.ptr(), globals, globals);
            }
            if (!r) code = detail::exception_exit_code();
            Py_XDECREF(r);
        }

        // the interpreter's own order: join threads, then exit handlers
        detail::call_if_loaded("threading", "_shutdown");
        if (PyObject* atexit = PyImport_ImportModule("atexit")) {
            PyObject* r = PyObject_CallMethod(atexit, "_run_exitfuncs", nullptr);
            if (!r) PyErr_Clear();
            Py_XDECREF(r);
            Py_DECREF(atexit);
        }
        PyErr_Clear();
        ts->frame = caller_frame;
        if (started) out.store = agent.finish();
        else out.store.seed = acfg.typer.seed;
        if (finder) remove_import_hook(finder);
        out.warnings = agent.warnings();
    }
    out.exit_code = code;
    return out;
}

/// Initializes an embedded interpreter, runs the target, finalizes.
inline RunOutcome run_program(RunRequest const& req) {
    if (!req.module_mode && !std::filesystem::exists(req.target)) {
        RunOutcome out;
        out.tool_error = true;
        out.error = "cannot read " + req.target;
        out.exit_code = 2;
        return out;
    }
    PyConfig config;
    PyConfig_InitPythonConfig(&config);
    config.parse_argv = 0;
    PyStatus status = PyConfig_SetBytesString(&config, &config.program_name, TRACETYPE_PYTHON_EXECUTABLE);
    if (!PyStatus_Exception(status)) status = Py_InitializeFromConfig(&config);
    PyConfig_Clear(&config);
    if (PyStatus_Exception(status)) {
        RunOutcome out;
        out.tool_error = true;
        out.error = std::string("interpreter initialization failed: ") + (status.err_msg ? status.err_msg : "");
        out.exit_code = 2;
        return out;
    }
    auto out = run_in_interpreter(req, false);
    if (Py_FinalizeEx() < 0 && out.exit_code == 0 && !out.tool_error) out.exit_code = 120;
    return out;
}

} // namespace tracetype::runtime
