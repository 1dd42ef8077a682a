#pragma once

// Starts the target program in a child interpreter with the agent extension
// loaded, so traced code runs on the stock interpreter build.

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracetype/runtime/config.hpp"

extern char** environ;

namespace tracetype {

struct LaunchRequest {
    std::string python = "python3";
    std::filesystem::path module_dir; // holds _tracetype_agent*.so
    runtime::AgentConfig agent;
    std::filesystem::path output;
    bool module_mode = false;
    std::string target;
    std::vector<std::string> args;
};

namespace detail {

// the helper's own names are dropped before the program starts
inline constexpr const char* launch_bootstrap =
    "import sys\n"
    "sys.path.insert(0, sys.argv[1])\n"
    "import _tracetype_agent\n"
    "sys.path.remove(sys.argv[1])\n"
    "sys.exit(_tracetype_agent.run(sys.argv[2:]))\n";

inline int wait_status(pid_t pid) {
    int status = 0;
    while (waitpid(pid, &status, 0) < 0)
        if (errno != EINTR) throw std::runtime_error(std::string("waitpid: ") + std::strerror(errno));
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return 1;
}

} // namespace detail

/// Directory of the running executable, empty when unknown.
inline std::filesystem::path executable_dir() {
    std::error_code ec;
    auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
    return ec ? std::filesystem::path() : p.parent_path();
}

/// Runs the program and waits for it. Returns its exit status (128 + signal
/// when killed). The trace file is written by the child at shutdown.
inline int launch_traced(LaunchRequest const& req) {
    std::vector<std::string> argv_s{req.python, "-c", detail::launch_bootstrap, req.module_dir.string(),
                                    runtime::to_json(req.agent).dump(), req.output.string(),
                                    req.module_mode ? "-m" : "-", req.target};
    argv_s.insert(argv_s.end(), req.args.begin(), req.args.end());
    std::vector<char*> argv;
    for (auto& a : argv_s) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    int rc = posix_spawnp(&pid, req.python.c_str(), nullptr, nullptr, argv.data(), environ);
    if (rc != 0) throw std::runtime_error("cannot start " + req.python + ": " + std::strerror(rc));
    return detail::wait_status(pid);
}

} // namespace tracetype
