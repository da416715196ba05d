#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganmod/graph.hpp"
#include "ganmod/rng.hpp"

namespace ganmod {

struct ModulationSet; // hypernet.hpp

struct LayerConfig {
    int c_in = 0;
    int c_out = 0;
    int kernel = 3;
    int resolution = 0;
};

struct SynthesisConfig {
    int d_z = 64;
    int d_w = 64;
    int mapping_layers = 2;
    double mapping_slope = 0.2; // leaky slope of the mapping net; 1.0 makes it linear
    double demod_eps = 1e-8;
    std::vector<LayerConfig> layers;

    int output_resolution() const { return layers.empty() ? 0 : layers.back().resolution; }
    void validate() const;
    static SynthesisConfig toy_default();
};

// Handle to one parameter tensor; checkpoints store exactly these names.
struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

// Per-layer style affine: s = W w + b, bias starts at 1 so styles begin near one.
struct AffineParams {
    Tensor w, b;
};

struct ConvLayerParams {
    Tensor weight; // (C_in, C_out, k, k)
    Tensor bias;   // (C_out)
    AffineParams affine;
};

// The generator: mapping net, learned constant input, style-modulated conv stack
// with nearest-neighbor upsampling, and a modulation-only 1x1 RGB head with tanh.
class Generator {
public:
    Generator() = default;
    explicit Generator(SynthesisConfig cfg);
    static Generator random_init(SynthesisConfig cfg, uint64_t seed);

    const SynthesisConfig& config() const { return cfg_; }
    int layer_count() const { return static_cast<int>(cfg_.layers.size()); }

    Tensor mapping_forward(const Tensor& z) const;
    // One w per conv layer (the RGB head reuses the last); mods == nullptr is the
    // frozen source path.
    Tensor synthesize(const std::vector<Tensor>& latents, const ModulationSet* mods = nullptr) const;
    Tensor synthesize(const Tensor& w, const ModulationSet* mods = nullptr) const;

    struct Lifted { // graph handles for every parameter
        std::vector<Var> map_w, map_b;
        Var const_input;
        struct Conv {
            Var weight, bias, affine_w, affine_b;
        };
        std::vector<Conv> convs;
        Conv rgb;
    };
    struct LayerMods { // per-layer weight residual and filter scale, in graph form
        Var dphi;  // (C_in, C_out, k, k)
        Var delta; // (C_out)
    };
    Lifted lift(Graph& g, bool trainable) const;
    Var mapping_graph(Graph& g, const Lifted& p, Var z) const;
    Var synthesize_graph(Graph& g, const Lifted& p, const std::vector<Var>& latents,
                         const std::vector<LayerMods>* mods = nullptr) const;

    std::vector<NamedTensor> named_params();
    int64_t param_count() const;
    uint64_t weight_checksum() const; // FNV-1a over float32 little-endian bytes

    std::vector<Tensor> map_w, map_b;
    Tensor const_input; // (C_in of layer 0, r0, r0)
    std::vector<ConvLayerParams> convs;
    ConvLayerParams rgb;

private:
    SynthesisConfig cfg_;
};

// Single-layer building blocks over plain tensors (style = affine output A(w)).
Tensor style_of(const AffineParams& a, const Tensor& w);
// x * f(phi, style) + bias, where f = demodulate(modulate(.))
Tensor conv_forward(const Tensor& x, const Tensor& phi, const Tensor& bias, const Tensor& style,
                    double demod_eps);
// x * (delta . f(phi + dphi, style)) + bias
Tensor conv_forward_adapted(const Tensor& x, const Tensor& phi, const Tensor& dphi,
                            const Tensor& delta, const Tensor& bias, const Tensor& style,
                            double demod_eps);

Tensor normal_tensor(Rng& rng, std::vector<int> shape, double stddev);
uint64_t fnv1a_f32(uint64_t h, const Tensor& t);

} // namespace ganmod
