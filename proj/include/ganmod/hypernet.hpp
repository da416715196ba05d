#pragma once

#include <cstdint>
#include <vector>

#include "ganmod/synthesis.hpp"

namespace ganmod {

struct Rank1Factors {
    Tensor gamma; // (C_out)
    Tensor u;     // (C_in)
    Tensor psi;   // (k*k)
};

struct LayerModulation {
    Rank1Factors factors;
    Tensor delta; // (C_out)
};

struct ModulationSet {
    std::vector<LayerModulation> layers;
};

Tensor one_hot(int index, int count);
// soft condition vectors: entries >= 0 and summing to 1 (within 1e-6)
void validate_condition(const Tensor& c, int count);
Tensor interpolate_domains(const Tensor& c_a, const Tensor& c_b, double t);
// residual[i,j,p] = u[i] * gamma[j] * psi[p], reshaped to (C_in, C_out, k, k)
Tensor reconstruct_residual(const Rank1Factors& f);
// residual scaled by alpha (applied to psi so it stays exactly linear); delta
// blended toward one: delta <- alpha*delta + (1-alpha)
ModulationSet scale_modulation(ModulationSet m, double alpha);

// graph handles for a plain ModulationSet (constants; rank-1 product built in-graph)
std::vector<Generator::LayerMods> lift_modulations(Graph& g, const ModulationSet& m,
                                                   const std::vector<LayerConfig>& layers);

struct HypernetConfig {
    int n_domains = 0;
    int d_v = 32;
    double mlp_slope = 0.2;
    double mlp_attenuation = 0.1;
    double head_attenuation = 0.01;
    std::vector<LayerConfig> layers;
    void validate() const;
};

// Maps a domain condition to per-layer rank-1 weight residuals and filter
// scales: a 2-layer MLP c -> v, then four affine heads per conv layer.
class Hypernet {
public:
    Hypernet() = default;
    // zero weights + contract biases: gamma=1, u=1, psi=0, delta=1
    explicit Hypernet(HypernetConfig cfg);
    static Hypernet bias_only(HypernetConfig cfg) { return Hypernet(std::move(cfg)); }
    // attenuated random weights, same biases
    static Hypernet random_init(HypernetConfig cfg, uint64_t seed);

    const HypernetConfig& config() const { return cfg_; }

    Tensor map_domain(const Tensor& c) const;
    ModulationSet predict_modulations(const Tensor& v) const;
    ModulationSet predict(const Tensor& c) const;

    struct Lifted {
        std::vector<Var> mlp_w, mlp_b;
        struct Head {
            Var w, b;
        };
        struct Layer {
            Head gamma, u, psi, delta;
        };
        std::vector<Layer> layers;
    };
    Lifted lift(Graph& g, bool trainable) const;
    Var map_domain_graph(Graph& g, const Lifted& p, Var c) const;
    std::vector<Generator::LayerMods> modulations_graph(Graph& g, const Lifted& p, Var c) const;

    std::vector<NamedTensor> named_params();
    int64_t param_count() const;
    static int64_t analytic_param_count(const HypernetConfig& cfg);
    // weights + biases of the four heads of one layer: (d_v + 1)(C_in + 2 C_out + k^2)
    static int64_t analytic_layer_param_count(const LayerConfig& l, int d_v);

    struct HeadParams {
        Tensor w, b;
    };
    struct LayerHeads {
        HeadParams gamma, u, psi, delta;
    };
    std::vector<Tensor> mlp_w, mlp_b;
    std::vector<LayerHeads> heads;

private:
    HypernetConfig cfg_;
};

} // namespace ganmod
