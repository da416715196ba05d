#pragma once

#include "ganmod/hypernet.hpp"
#include "ganmod/procedural.hpp"
#include "ganmod/synthesis.hpp"
#include "ganmod/trainer.hpp"

#include <cstdint>
#include <vector>

namespace ganmod {

// Per-layer latents for synthesis: layers below `cutoff` see w, layers at or
// above it see (1-kappa)*w + kappa*w_c. kappa endpoints return the inputs
// unchanged so downstream synthesis is bit-identical to the unmixed calls.
std::vector<Tensor> style_mix(const Tensor& w, const Tensor& w_c, double kappa, int cutoff, int layer_count);

// Sum of c[j] * w_c[j] over the registry; zero coefficients are skipped so a
// one-hot condition returns the cached latent unchanged.
Tensor blend_latent(const DomainRegistry& registry, const Tensor& condition);

// A trained bundle: frozen generator, hyper-network, prepared registry, and
// the configs needed to rebuild the encoders deterministically.
struct AdaptedModel {
    SynthesisConfig syn;
    TrainingConfig train;
    Generator gen;
    Hypernet hyper;
    DomainRegistry registry;
    int64_t step = 0;

    ToyConvEncoder make_encoder() const;
    ToyConvEncoder make_id_encoder() const;
};

Tensor synthesize_adapted_w(const AdaptedModel& m, const Tensor& w, const Tensor& condition, double alpha,
                            double kappa);
Tensor synthesize_adapted(const AdaptedModel& m, const Tensor& z, const Tensor& condition, double alpha,
                          double kappa);

// Interpolating in the domain-latent space v instead of on the condition
// vector (experimental alternative; sweeps interpolate c by default).
Tensor synthesize_interp_v(const AdaptedModel& m, const Tensor& w, const Tensor& c_a, const Tensor& c_b,
                           double t, double alpha, double kappa);

// Images for t = 0, 1/(steps-1), ..., 1 interpolating the condition from c_a
// to c_b. Endpoints are computed with the untouched conditions.
std::vector<Tensor> domain_sweep(const AdaptedModel& m, const Tensor& w, const Tensor& c_a, const Tensor& c_b,
                                 int steps, double alpha, double kappa, bool v_space = false);

struct InversionOptions {
    double lr = 0.05;
    int iters = 500;
    double stop_sim = 0.995;
    uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int mean_latent_samples = 256;
    bool w_plus = false; // optimize one latent per synthesis layer
};

struct InversionResult {
    Tensor w; // (d_w), or (layers, d_w) when w_plus
    double pixel_l1 = 0;
    double one_minus_sim = 0;
    int iters_run = 0;
};

// Average mapped latent over `samples` standard-normal draws.
Tensor mean_latent(const Generator& gen, int samples, uint64_t seed);

InversionResult invert_image(const Generator& gen, const ToyConvEncoder& encoder, const Tensor& target,
                             const InversionOptions& opt);

// Inverts the first training image of every domain and caches the latent.
void prepare_registry(const Generator& gen, const ToyConvEncoder& encoder, DomainRegistry& registry,
                      const InversionOptions& opt);

// Fraction of fully adapted syntheses (alpha=1, kappa=1) whose embedding is
// closest to an image of their own domain.
double domain_classification_rate(const AdaptedModel& m, int per_domain, uint64_t seed);

} // namespace ganmod
