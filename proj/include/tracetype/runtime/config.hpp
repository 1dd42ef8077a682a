#pragma once

// Agent settings. Free of Python so the command line can build them and hand
// them to the interpreter process as JSON.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracetype/sampling.hpp"

namespace tracetype::runtime {

struct TyperConfig {
    std::size_t container_sample = 1000;
    int max_depth = 3;
    bool infer_shapes = false;
    std::uint64_t seed = 1;
};

struct AgentConfig {
    SamplingConfig sampling;
    TyperConfig typer;
    std::vector<std::string> include; // fnmatch patterns; empty admits everything not excluded
    std::vector<std::string> exclude;
    std::string main_module = "__main__"; // name that replaces __main__ in recorded types
    bool instrument_sends = true;
};

inline nlohmann::json to_json(AgentConfig const& c) {
    return {
        {"budget", c.sampling.budget},
        {"tick_ms", c.sampling.tick_interval.count()},
        {"window", c.sampling.window},
        {"container_sample", c.typer.container_sample},
        {"max_depth", c.typer.max_depth},
        {"infer_shapes", c.typer.infer_shapes},
        {"seed", c.typer.seed},
        {"include", c.include},
        {"exclude", c.exclude},
        {"main_module", c.main_module},
        {"instrument_sends", c.instrument_sends},
    };
}

/// Missing keys keep their defaults.
inline AgentConfig agent_config_from_json(nlohmann::json const& j) {
    AgentConfig c;
    c.sampling.budget = j.value("budget", c.sampling.budget);
    c.sampling.tick_interval = std::chrono::milliseconds(j.value("tick_ms", c.sampling.tick_interval.count()));
    c.sampling.window = j.value("window", c.sampling.window);
    c.typer.container_sample = j.value("container_sample", c.typer.container_sample);
    c.typer.max_depth = j.value("max_depth", c.typer.max_depth);
    c.typer.infer_shapes = j.value("infer_shapes", c.typer.infer_shapes);
    c.typer.seed = j.value("seed", c.typer.seed);
    c.include = j.value("include", c.include);
    c.exclude = j.value("exclude", c.exclude);
    c.main_module = j.value("main_module", c.main_module);
    c.instrument_sends = j.value("instrument_sends", c.instrument_sends);
    return c;
}

} // namespace tracetype::runtime
