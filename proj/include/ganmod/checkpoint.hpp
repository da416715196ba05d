#pragma once

#include "ganmod/inference.hpp"

#include <string>
#include <vector>

namespace ganmod {

// Everything one run needs to continue or serve: configs, weights, optimizer
// moments, and the domain registry (images included, so archives are
// self-contained even for procedurally rendered domains).
struct CheckpointBundle {
    std::string phase = "source"; // "source": generator only; "adapted": + hyper-network
    int64_t step = 0;
    SynthesisConfig syn;
    TrainingConfig train;
    Generator gen;
    bool has_hyper = false;
    Hypernet hyper;
    DomainRegistry registry;
    bool has_moments = false;
    std::vector<Tensor> adam_m, adam_v; // one per hyper parameter, in name order
    int64_t adam_t = 0;
};

// Single binary archive: magic "GMCK", u32 version, u64 manifest length,
// JSON manifest, then the named float32 little-endian arrays back to back.
// Written to a temp file and renamed so a crash never leaves a torn archive.
void save_checkpoint(const CheckpointBundle& b, const std::string& path);
CheckpointBundle load_checkpoint(const std::string& path);

AdaptedModel make_adapted_model(CheckpointBundle b);

} // namespace ganmod
