#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ganmod/graph.hpp"
#include "ganmod/rng.hpp"

namespace ganmod {

struct EncoderConfig {
    int resolution = 32;
    int d_e = 32;
    uint64_t seed = 0;
};

// Frozen random conv net standing in for an external image encoder: three
// stride-2 conv stages, global average pool, linear head, L2 normalize.
// Deterministic in the seed and differentiable w.r.t. the image.
class ToyConvEncoder {
public:
    ToyConvEncoder() = default;
    explicit ToyConvEncoder(EncoderConfig cfg);

    const EncoderConfig& config() const { return cfg_; }

    Tensor embed(const Tensor& image) const;         // (3,R,R) in [-1,1] -> unit (d_e)
    Var embed_graph(Graph& g, Var image) const;

private:
    EncoderConfig cfg_;
    std::vector<Tensor> conv_w, conv_b;
    Tensor head_w, head_b;
};

struct AugmentParams {
    double flip_prob = 0.5;
    double brightness_lo = 0.8, brightness_hi = 1.25;
    double shift_lo = -0.1, shift_hi = 0.1;
    double saturation_lo = 0.8, saturation_hi = 1.25;
    static AugmentParams none() { return {0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0}; }
};

// horizontal flip + brightness/shift/per-channel saturation jitter, clamped to [-1,1]
Tensor augment(const Tensor& image, Rng& rng, const AugmentParams& p);

// seam for plugging in external encoders: anything image -> unit vector
using ImageEmbedder = std::function<Tensor(const Tensor&)>;

// cosine similarity averaged over several embedders (two external encoders
// would combine this way)
double averaged_similarity(const std::vector<ImageEmbedder>& embedders, const Tensor& a, const Tensor& b);

} // namespace ganmod
