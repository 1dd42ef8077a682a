// tracetype command line.
//
//   tracetype run [options] (-m module | script) [args...]
//   tracetype annotate [options] traces.jsonl...
//   tracetype [options] script [args...]      run, then annotate
//
// Exit status: the target's own status for run modes, 2 for tool errors.

#include <CLI11.hpp>

#include "tracetype/launch.hpp"
#include "tracetype/pipeline.hpp"

#include <iostream>
#include <random>

#ifndef TRACETYPE_PYTHON_EXECUTABLE
#define TRACETYPE_PYTHON_EXECUTABLE "python3"
#endif
#ifndef TRACETYPE_MODULE_DIR
#define TRACETYPE_MODULE_DIR ""
#endif

namespace {

using namespace tracetype;

struct Options {
    double budget = 0.05;
    double coverage = 0.8;
    std::size_t container_sample = 1000;
    std::string target_version = "3.12";
    bool infer_shapes = false;
    std::vector<std::string> include, exclude;
    bool diff = false;
    bool overwrite = false;
    std::optional<std::uint64_t> seed;
    std::string output = "tracetype-traces.jsonl";
    std::string report;
    std::vector<std::string> stubs;
    std::string root;
    std::string module;
    int tick_ms = 10;
    bool no_send_hook = false;
    std::vector<std::string> traces;
};

struct ToolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

runtime::AgentConfig agent_config(Options const& o) {
    runtime::AgentConfig c;
    c.sampling.budget = o.budget;
    c.sampling.tick_interval = std::chrono::milliseconds(o.tick_ms);
    c.typer.container_sample = o.container_sample;
    c.typer.infer_shapes = o.infer_shapes;
    c.typer.seed = o.seed ? *o.seed : std::random_device{}() | (std::uint64_t{std::random_device{}()} << 32);
    if (c.typer.seed == 0) c.typer.seed = 1;
    c.include = o.include;
    c.exclude = o.exclude;
    c.instrument_sends = !o.no_send_hook;
    return c;
}

AnnotateOptions annotate_options(Options const& o) {
    AnnotateOptions a;
    a.coverage = o.coverage;
    try {
        a.version = TargetVersion::parse(o.target_version);
    } catch (std::exception const& e) {
        throw ToolError(e.what());
    }
    a.infer_shapes = o.infer_shapes;
    a.overwrite = o.overwrite;
    a.root = o.root;
    for (auto const& s : o.stubs) a.stub_roots.emplace_back(s);
    return a;
}

void write_text(std::filesystem::path const& p, std::string const& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ToolError("cannot write " + p.string());
    out << text;
    if (!out) throw ToolError("cannot write " + p.string());
}

TraceStore load_traces(std::vector<std::string> const& paths) {
    if (paths.empty()) throw ToolError("no trace files given");
    TraceStore merged;
    for (auto const& p : paths) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw ToolError("cannot read " + p);
        try {
            merged = merge_stores(merged, deserialize_store(in));
        } catch (FormatError const& e) {
            throw ToolError(p + ": " + e.what());
        }
    }
    return merged;
}

void add_options(CLI::App& app, Options& o) {
    app.add_option("--budget", o.budget, "Share of run time the tracer may spend in its own code")
        ->check(CLI::Range(1e-6, 1.0))
        ->capture_default_str();
    app.add_option("--coverage", o.coverage, "Share of calls the kept traces must cover")
        ->check(CLI::Range(1e-6, 1.0))
        ->capture_default_str();
    app.add_option("--container-sample", o.container_sample, "Elements inspected per container")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--target-version", o.target_version, "Python version the annotations target (3.9 to 3.13)")
        ->capture_default_str();
    app.add_flag("--infer-shapes", o.infer_shapes, "Record array shapes and emit shape annotations");
    app.add_option("--include", o.include, "Glob of source files to trace (repeatable)");
    app.add_option("--exclude", o.exclude, "Glob of source files not to trace (repeatable)");
    app.add_flag("--diff", o.diff, "Print a unified diff instead of editing files");
    app.add_flag("--overwrite", o.overwrite, "Replace existing annotations and keep no backup");
    app.add_option("--seed", o.seed, "Sampling seed (random by default; recorded in the trace file)");
    app.add_option("-o,--output", o.output, "Trace file to write")->capture_default_str();
    app.add_option("--report", o.report, "Anomaly report path (default: beside the trace file)");
    app.add_option("--stubs", o.stubs, "Stub directory searched for parent declarations (repeatable)");
    app.add_option("--root", o.root, "Source root that module names are relative to");
    app.add_option("--tick-ms", o.tick_ms, "Self-profiling interval in milliseconds")
        ->check(CLI::Range(1, 10000))
        ->capture_default_str();
    app.add_flag("--no-send-hook", o.no_send_hook, "Do not rewrite generators to observe sent values");
    app.add_option("-m", o.module, "Run a module as a script");

}

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

bool has_agent_module(std::filesystem::path const& dir) {
    std::error_code ec;
    if (dir.empty() || !std::filesystem::is_directory(dir, ec)) return false;
    for (auto const& e : std::filesystem::directory_iterator(dir, ec))
        if (e.path().filename().string().starts_with("_tracetype_agent") && e.path().extension() == ".so")
            return true;
    return false;
}

std::filesystem::path agent_module_dir() {
    for (std::filesystem::path dir : {std::filesystem::path(env_or("TRACETYPE_MODULE_DIR", "")), executable_dir(),
                                      std::filesystem::path(TRACETYPE_MODULE_DIR)})
        if (has_agent_module(dir)) return dir;
    throw ToolError("agent module _tracetype_agent not found (set TRACETYPE_MODULE_DIR)");
}

/// Runs the target; its interpreter writes the trace file. Returns the
/// target's status.
int do_run(Options const& o, std::vector<std::string> const& rest, TraceStore* store_out) {
    LaunchRequest req;
    req.python = env_or("TRACETYPE_PYTHON", TRACETYPE_PYTHON_EXECUTABLE);
    req.module_dir = agent_module_dir();
    req.agent = agent_config(o);
    req.output = std::filesystem::absolute(o.output);
    if (!o.module.empty()) {
        req.module_mode = true;
        req.target = o.module;
        req.args = rest;
    } else {
        if (rest.empty()) throw ToolError("no target script given");
        req.target = rest.front();
        req.args.assign(rest.begin() + 1, rest.end());
        if (!std::filesystem::is_regular_file(req.target)) throw ToolError("cannot read " + req.target);
    }
    std::error_code ec;
    std::filesystem::remove(req.output, ec);
    int status;
    try {
        status = launch_traced(req);
    } catch (std::exception const& e) {
        throw ToolError(e.what());
    }
    if (!std::filesystem::exists(req.output)) {
        // the program ended without normal shutdown (os._exit, a signal)
        std::cerr << "tracetype: warning: no trace file was written\n";
        if (store_out) *store_out = TraceStore{};
        return status;
    }
    if (store_out) *store_out = load_traces({req.output.string()});
    return status;
}

void do_annotate(Options const& o, TraceStore const& store) {
    auto opts = annotate_options(o);
    auto result = annotate(store, opts);
    for (auto const& d : result.diagnostics) std::cerr << "tracetype: " << d << '\n';

    std::filesystem::path report = o.report;
    if (report.empty()) {
        std::filesystem::path base = o.traces.empty() ? std::filesystem::path(o.output) : std::filesystem::path(o.traces.front());
        report = base.parent_path() / "tracetype-anomalies.jsonl";
    }
    write_text(report, result.anomaly_report);

    std::size_t skipped = 0;
    for (auto const& f : result.files) skipped += f.edit.skipped ? 1 : 0;
    if (o.diff) {
        std::cout << render_diff(result);
    } else {
        auto n = commit_edits(result, !o.overwrite);
        std::cerr << "tracetype: annotated " << n << " file(s)";
        if (skipped) std::cerr << ", skipped " << skipped;
        std::cerr << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Infers type annotations by observing a running Python program."};
    app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
    app.prefix_command();
    app.require_subcommand(0, 1);

    add_options(app, o);
    auto* run = app.add_subcommand("run", "Run a program under the tracer and write its traces");
    add_options(*run, o);
    run->prefix_command();
    auto* annotate_cmd = app.add_subcommand("annotate", "Annotate sources from trace files");
    add_options(*annotate_cmd, o);
    annotate_cmd->add_option("traces", o.traces, "Trace files")->required();

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& e) {
        return app.exit(e);
    } catch (CLI::CallForAllHelp const& e) {
        return app.exit(e);
    } catch (CLI::ParseError const& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*annotate_cmd) {
            do_annotate(o, load_traces(o.traces));
            return 0;
        }
        if (*run) return do_run(o, run->remaining(), nullptr);
        auto rest = app.remaining();
        if (rest.empty() && o.module.empty()) {
            std::cerr << app.help();
            return 2;
        }
        TraceStore store;
        int status = do_run(o, rest, &store);
        do_annotate(o, store);
        return status;
    } catch (ToolError const& e) {
        std::cerr << "tracetype: error: " << e.what() << '\n';
        return 2;
    } catch (std::exception const& e) {
        std::cerr << "tracetype: error: " << e.what() << '\n';
        return 2;
    }
}
