#pragma once

#include <stdexcept>
#include <string>

namespace ganmod {

// Model/shape configuration is inconsistent (bad layer spec, dimension mismatch).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A runtime argument is out of its contract (control value out of range, unknown domain).
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite value or otherwise cannot continue.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint or image file problems.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ganmod
