#pragma once

#include "ganmod/synthesis.hpp"
#include "ganmod/trainer.hpp"

#include <string>

namespace ganmod {

struct RunConfig {
    SynthesisConfig syn = SynthesisConfig::toy_default();
    TrainingConfig train;
    bool seed_set = false;
};

// key = value lines, '#' comments; unknown or duplicate keys are rejected and
// a seed must be given (no wall-clock fallback).
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
RunConfig parse_run_config(const std::string& path);

} // namespace ganmod
