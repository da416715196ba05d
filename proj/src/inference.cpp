#include "ganmod/inference.hpp"

#include <cmath>
#include <string>

namespace ganmod {

std::vector<Tensor> style_mix(const Tensor& w, const Tensor& w_c, double kappa, int cutoff, int layer_count) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ArgumentError("kappa must lie in [0,1]");
    if (cutoff < 0 || cutoff > layer_count) throw ConfigError("style-mix cutoff must lie in [0, layer count]");
    if (!w.same_shape(w_c)) throw ArgumentError("style_mix latents must share a shape");
    std::vector<Tensor> latents;
    latents.reserve(static_cast<size_t>(layer_count));
    Tensor mixed;
    if (kappa == 0.0) {
        mixed = w;
    } else if (kappa == 1.0) {
        mixed = w_c;
    } else {
        mixed = Tensor(w.shape());
        for (int64_t i = 0; i < w.numel(); ++i) mixed[i] = (1.0 - kappa) * w[i] + kappa * w_c[i];
    }
    for (int l = 0; l < layer_count; ++l) latents.push_back(l < cutoff ? w : mixed);
    return latents;
}

Tensor blend_latent(const DomainRegistry& registry, const Tensor& condition) {
    validate_condition(condition, registry.size());
    for (int j = 0; j < registry.size(); ++j) {
        if (condition[j] != 1.0) continue;
        const Tensor& wc = registry.domains[j].w_c;
        if (wc.numel() == 0) throw ArgumentError("domain " + registry.domains[j].id + " has no cached latent");
        return wc; // one-hot: hand back the cached latent untouched
    }
    Tensor out;
    for (int j = 0; j < registry.size(); ++j) {
        if (condition[j] == 0.0) continue;
        const Tensor& wc = registry.domains[j].w_c;
        if (wc.numel() == 0) throw ArgumentError("domain " + registry.domains[j].id + " has no cached latent");
        if (out.numel() == 0) out = Tensor(wc.shape());
        for (int64_t i = 0; i < wc.numel(); ++i) out[i] += condition[j] * wc[i];
    }
    if (out.numel() == 0) throw ArgumentError("condition selects no domain");
    return out;
}

ToyConvEncoder AdaptedModel::make_encoder() const {
    return ToyConvEncoder({syn.output_resolution(), train.d_e, train.encoder_seed});
}

ToyConvEncoder AdaptedModel::make_id_encoder() const {
    return ToyConvEncoder({syn.output_resolution(), train.d_e, train.id_encoder_seed});
}

Tensor synthesize_adapted_w(const AdaptedModel& m, const Tensor& w, const Tensor& condition, double alpha,
                            double kappa) {
    validate_condition(condition, m.registry.size());
    if (!std::isfinite(alpha)) throw ArgumentError("alpha must be finite");
    int L = m.gen.layer_count();
    std::vector<Tensor> latents;
    if (kappa == 0.0) {
        latents.assign(static_cast<size_t>(L), w);
    } else {
        latents = style_mix(w, blend_latent(m.registry, condition), kappa, m.train.fine_cutoff, L);
    }
    if (alpha == 0.0) return m.gen.synthesize(latents);
    ModulationSet mods = m.hyper.predict(condition);
    if (alpha != 1.0) mods = scale_modulation(mods, alpha);
    return m.gen.synthesize(latents, &mods);
}

Tensor synthesize_adapted(const AdaptedModel& m, const Tensor& z, const Tensor& condition, double alpha,
                          double kappa) {
    return synthesize_adapted_w(m, m.gen.mapping_forward(z), condition, alpha, kappa);
}

Tensor synthesize_interp_v(const AdaptedModel& m, const Tensor& w, const Tensor& c_a, const Tensor& c_b,
                           double t, double alpha, double kappa) {
    validate_condition(c_a, m.registry.size());
    validate_condition(c_b, m.registry.size());
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("interpolation parameter must lie in [0,1]");
    if (!std::isfinite(alpha)) throw ArgumentError("alpha must be finite");
    int L = m.gen.layer_count();
    std::vector<Tensor> latents;
    if (kappa == 0.0) {
        latents.assign(static_cast<size_t>(L), w);
    } else {
        Tensor w_c = blend_latent(m.registry, interpolate_domains(c_a, c_b, t));
        latents = style_mix(w, w_c, kappa, m.train.fine_cutoff, L);
    }
    if (alpha == 0.0) return m.gen.synthesize(latents);
    Tensor v;
    if (t == 0.0) {
        v = m.hyper.map_domain(c_a);
    } else if (t == 1.0) {
        v = m.hyper.map_domain(c_b);
    } else {
        Tensor v_a = m.hyper.map_domain(c_a);
        Tensor v_b = m.hyper.map_domain(c_b);
        v = Tensor(v_a.shape());
        for (int64_t i = 0; i < v.numel(); ++i) v[i] = (1.0 - t) * v_a[i] + t * v_b[i];
    }
    ModulationSet mods = m.hyper.predict_modulations(v);
    if (alpha != 1.0) mods = scale_modulation(mods, alpha);
    return m.gen.synthesize(latents, &mods);
}

std::vector<Tensor> domain_sweep(const AdaptedModel& m, const Tensor& w, const Tensor& c_a, const Tensor& c_b,
                                 int steps, double alpha, double kappa, bool v_space) {
    if (steps < 2) throw ArgumentError("domain sweep needs at least 2 steps");
    std::vector<Tensor> images;
    images.reserve(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(steps - 1);
        images.push_back(v_space
                             ? synthesize_interp_v(m, w, c_a, c_b, t, alpha, kappa)
                             : synthesize_adapted_w(m, w, interpolate_domains(c_a, c_b, t), alpha, kappa));
    }
    return images;
}

Tensor mean_latent(const Generator& gen, int samples, uint64_t seed) {
    if (samples < 1) throw ArgumentError("mean latent needs at least one sample");
    Rng rng(mix_seed(seed, streams::mean_latent));
    Tensor acc({gen.config().d_w});
    Tensor z({gen.config().d_z});
    for (int s = 0; s < samples; ++s) {
        for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
        Tensor w = gen.mapping_forward(z);
        for (int64_t i = 0; i < acc.numel(); ++i) acc[i] += w[i];
    }
    for (int64_t i = 0; i < acc.numel(); ++i) acc[i] /= samples;
    quantize_f32(acc);
    return acc;
}

InversionResult invert_image(const Generator& gen, const ToyConvEncoder& encoder, const Tensor& target,
                             const InversionOptions& opt) {
    int res = gen.config().output_resolution();
    if (target.rank() != 3 || target.size(0) != 3 || target.size(1) != res || target.size(2) != res)
        throw ArgumentError("inversion target must be (3," + std::to_string(res) + "," + std::to_string(res) +
                            ")");
    if (opt.iters < 0) throw ArgumentError("inversion iteration count must be >= 0");
    int L = gen.layer_count();
    Tensor init = mean_latent(gen, opt.mean_latent_samples, opt.seed);
    InversionResult result;
    if (opt.w_plus) {
        result.w = Tensor({L, gen.config().d_w});
        for (int l = 0; l < L; ++l)
            for (int64_t i = 0; i < init.numel(); ++i) result.w.at(l, i) = init[i];
    } else {
        result.w = init;
    }

    AdamOptimizer adam(opt.lr, opt.beta1, opt.beta2, opt.adam_eps);
    adam.attach({{"w", &result.w}});
    Tensor e_target = encoder.embed(target);

    for (int it = 0;; ++it) {
        Graph g;
        Generator::Lifted gv = gen.lift(g, false);
        std::vector<Var> latents;
        if (opt.w_plus) {
            // Adam owns the (L, d_w) tensor; the graph sees one leaf per row.
            for (int l = 0; l < L; ++l) {
                Tensor row({gen.config().d_w});
                for (int64_t i = 0; i < row.numel(); ++i) row[i] = result.w.at(l, i);
                latents.push_back(g.leaf(row, true));
            }
        } else {
            latents.assign(static_cast<size_t>(L), g.leaf(result.w, true));
        }
        Var synth = gen.synthesize_graph(g, gv, latents);
        Var pix = g.mean_abs_diff(synth, g.constant(target));
        Var sim = g.dot(encoder.embed_graph(g, synth), g.constant(e_target));
        Var loss = g.add(pix, g.add_scalar(g.scale(sim, -1.0), 1.0));

        result.pixel_l1 = g.value(pix)[0];
        result.one_minus_sim = 1.0 - g.value(sim)[0];
        result.iters_run = it;
        if (!std::isfinite(g.value(loss)[0]))
            throw TrainingError("inversion diverged at iteration " + std::to_string(it) +
                                " (pixel L1 " + std::to_string(result.pixel_l1) + ")");
        if (g.value(sim)[0] >= opt.stop_sim || it >= opt.iters) break;

        g.backward(loss);
        Tensor grad(result.w.shape());
        if (opt.w_plus) {
            for (int l = 0; l < L; ++l) {
                Tensor rg = g.grad(latents[static_cast<size_t>(l)]);
                for (int64_t i = 0; i < rg.numel(); ++i) grad.at(l, i) = rg[i];
            }
        } else {
            grad = g.grad(latents[0]);
        }
        adam.step({grad});
    }
    return result;
}

void prepare_registry(const Generator& gen, const ToyConvEncoder& encoder, DomainRegistry& registry,
                      const InversionOptions& opt) {
    if (registry.size() < 1) throw ConfigError("cannot prepare an empty registry");
    for (int i = 0; i < registry.size(); ++i) {
        Domain& d = registry.domains[i];
        if (d.images.empty()) throw ConfigError("domain " + d.id + " has no training images");
        InversionOptions per = opt;
        per.seed = mix_seed(opt.seed, streams::invert, static_cast<uint64_t>(i));
        per.w_plus = false; // the cached latent is a single w by contract
        d.w_c = invert_image(gen, encoder, d.images[0], per).w;
    }
}

double domain_classification_rate(const AdaptedModel& m, int per_domain, uint64_t seed) {
    if (per_domain < 1) throw ArgumentError("per-domain sample count must be >= 1");
    ToyConvEncoder encoder = m.make_encoder();
    int N = m.registry.size();
    std::vector<std::vector<Tensor>> refs;
    for (const Domain& d : m.registry.domains) {
        std::vector<Tensor> embs;
        for (const Tensor& img : d.images) embs.push_back(encoder.embed(img));
        refs.push_back(std::move(embs));
    }
    Rng rng(mix_seed(seed, streams::eval));
    int correct = 0;
    Tensor z({m.syn.d_z});
    for (int c = 0; c < N; ++c) {
        Tensor cond = one_hot(c, N);
        for (int k = 0; k < per_domain; ++k) {
            for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
            Tensor e = encoder.embed(synthesize_adapted(m, z, cond, 1.0, 1.0));
            int best = -1;
            double best_sim = 0;
            for (int j = 0; j < N; ++j) {
                for (const Tensor& ref : refs[static_cast<size_t>(j)]) {
                    double s = 0;
                    for (int64_t i = 0; i < e.numel(); ++i) s += e[i] * ref[i];
                    if (best < 0 || s > best_sim) {
                        best = j;
                        best_sim = s;
                    }
                }
            }
            if (best == c) ++correct;
        }
    }
    return static_cast<double>(correct) / (static_cast<double>(N) * per_domain);
}

} // namespace ganmod
