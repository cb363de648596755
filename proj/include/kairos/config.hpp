#pragma once

#include <string>

#include "kairos/harness.hpp"

namespace kairos {

// Loads an experiment config from JSON. Built-in workload templates can be
// referenced by name ("qa", "rg", "cg") or full custom apps spelled out; see
// the README for the schema. Throws std::invalid_argument with a field path
// on malformed input.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

// Strategy shorthand: "kairos", "parrot" (fcfs+round_robin), "ayo"
// (topo_depth+round_robin), "oracle", "kairos_wo_priority",
// "kairos_wo_packing", or an explicit "<scheduler>+<dispatcher>" pair.
StrategyConfig strategy_from_shorthand(const std::string& name);

}  // namespace kairos
