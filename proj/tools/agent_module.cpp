// Extension module loaded into the target's own interpreter by the command
// line (see tracetype/launch.hpp). run() takes
//   [config json, trace output, "-m" | "-", target, program args...]
// and returns the exit status the program would have had.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tracetype/runtime/runner.hpp"
#include "tracetype/trace_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace {

void write_store(std::string const& path, tracetype::TraceStore const& store) {
    std::filesystem::path p(path);
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << tracetype::serialize_store(store);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

int run(std::vector<std::string> const& argv) {
    using namespace tracetype::runtime;
    if (argv.size() < 4) throw std::invalid_argument("expected: config output mode target [args...]");
    RunRequest req;
    req.agent = agent_config_from_json(nlohmann::json::parse(argv[0]));
    req.module_mode = argv[2] == "-m";
    req.target = argv[3];
    req.args.assign(argv.begin() + 4, argv.end());
    auto outcome = run_in_interpreter(req, true);
    if (outcome.tool_error) {
        std::fprintf(stderr, "tracetype: error: %s\n", outcome.error.c_str());
        return 2;
    }
    for (auto const& w : outcome.warnings) std::fprintf(stderr, "tracetype: warning: %s\n", w.c_str());
    try {
        write_store(argv[1], outcome.store);
    } catch (std::exception const& e) {
        std::fprintf(stderr, "tracetype: error: %s\n", e.what());
    }
    return outcome.exit_code;
}

} // namespace

PYBIND11_MODULE(_tracetype_agent, m) {
    m.def("run", &run);
}
