#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ganmod/hypernet.hpp"
#include "ganmod/losses.hpp"
#include "ganmod/procedural.hpp"

namespace ganmod {

// derived-seed streams; per-step seeds make interrupted and straight-through
// runs draw identical randomness
namespace streams {
constexpr uint64_t hyper_init = 1;
constexpr uint64_t train_step = 2;
constexpr uint64_t eval = 3;
constexpr uint64_t pretrain = 4;
constexpr uint64_t invert = 5;
constexpr uint64_t mean_latent = 6;
} // namespace streams

struct TrainingConfig {
    double lr = 0.002;
    double beta1 = 0.0;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    int batch = 4;
    int64_t steps = 1000;
    LossWeights weights;
    double tau = 1.0;
    uint64_t seed = 0;
    int d_v = 32;
    double mlp_attenuation = 0.1;
    double head_attenuation = 0.01;
    int fine_cutoff = 2; // first layer index that receives the mixed latent
    AugmentParams augment;
    bool augment_positives = false; // the default contrast loss augments negatives only
    std::vector<double> domain_weights; // empty -> uniform
    uint64_t encoder_seed = 1001;
    uint64_t id_encoder_seed = 2002;
    int d_e = 32;
    int64_t pretrain_steps = 800;
    double pretrain_lr = 0.002;
    double invert_lr = 0.05;
    int invert_steps = 500;
    double invert_stop_sim = 0.995;
    int64_t sample_every = 0;     // 0 = off
    int64_t checkpoint_every = 0; // 0 = off

    void validate(int layer_count) const;
};

class AdamOptimizer {
public:
    AdamOptimizer() = default;
    AdamOptimizer(double lr, double beta1, double beta2, double eps)
        : lr(lr), beta1(beta1), beta2(beta2), eps(eps) {}

    void attach(std::vector<NamedTensor> params); // zeroed moments
    // one update; parameters and moments land back on the float32 grid so
    // checkpoints reproduce the exact optimizer state
    void step(const std::vector<Tensor>& grads);

    int64_t steps_taken() const { return t_; }
    void set_steps_taken(int64_t t) { t_ = t; }
    size_t size() const { return params_.size(); }
    std::vector<NamedTensor> moment_tensors(); // adam.m.<name>, adam.v.<name>
    const std::vector<NamedTensor>& attached() const { return params_; }

    double lr = 0.002, beta1 = 0.0, beta2 = 0.99, eps = 1e-8;

private:
    std::vector<NamedTensor> params_;
    std::vector<Tensor> m_, v_;
    int64_t t_ = 0;
};

struct Batch {
    std::vector<Tensor> z;
    std::vector<int> domain;
    std::vector<int> image_index;
};

Batch sample_batch(const DomainRegistry& reg, Rng& rng, int batch_size, int d_z,
                   const std::vector<double>& domain_weights = {});

struct StepStats {
    LossReport loss;
    double grad_norm = 0;
};

// Adaptation training: hyper-network learns, the generator stays frozen.
class TrainSession {
public:
    TrainSession(TrainingConfig cfg, const Generator& gen, DomainRegistry registry,
                 const ToyConvEncoder& encoder, const ToyConvEncoder& id_encoder);

    // resume from checkpointed state
    void restore(Hypernet hyper, std::vector<Tensor> m, std::vector<Tensor> v, int64_t adam_t,
                 int64_t step);

    StepStats train_step();                   // samples its own batch from the per-step seed
    StepStats train_step(const Batch& batch); // fixed batch (tests)
    using StepHook = std::function<void(const TrainSession&, const StepStats&)>;
    void run(int64_t steps, const StepHook& on_step = {});

    const Hypernet& hyper() const { return hyper_; }
    Hypernet& hyper() { return hyper_; }
    AdamOptimizer& optimizer() { return opt_; }
    const AdamOptimizer& optimizer() const { return opt_; }
    int64_t step() const { return step_; }
    const DomainRegistry& registry() const { return registry_; }
    const TrainingConfig& config() const { return cfg_; }
    const Generator& generator() const { return gen_; }

private:
    StepStats step_impl(const Batch& batch, Rng& rng);
    void build_caches();

    TrainingConfig cfg_;
    const Generator& gen_;
    DomainRegistry registry_;
    const ToyConvEncoder& encoder_;
    const ToyConvEncoder& id_encoder_;
    Hypernet hyper_;
    AdamOptimizer opt_;
    int64_t step_ = 0;

    // fixed per run: embeddings of training images, source renders at each w_c
    std::vector<std::vector<Tensor>> target_embed_; // [domain][image]
    std::vector<Tensor> src_at_wc_;                 // [domain]
    std::vector<Tensor> e_src_at_wc_;               // [domain]
};

// Fits the generator to the procedural source domain (pixel L1 + embedding
// similarity against latent-parameterized renders); the only place generator
// weights ever change.
void pretrain_source(Generator& gen, const TrainingConfig& cfg,
                     const std::function<void(int64_t, double)>& on_step = {});

} // namespace ganmod
