#pragma once

#include <string>

#include "debiasreg/sim.hpp"

namespace debiasreg {

// Experiment configs are plain text, `key = value` entries grouped in the
// sections [model], [penalty], [directions] and [mc]. Unknown sections or
// keys are hard errors; parse and validation errors carry line numbers.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin = "<string>");

// Canonical text form; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace debiasreg
