#include "ganmod/trainer.hpp"

#include <cmath>

namespace ganmod {

void TrainingConfig::validate(int layer_count) const {
    if (lr < 0 || pretrain_lr < 0 || invert_lr < 0) throw ConfigError("learning rates must be nonnegative");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError("Adam betas must lie in [0,1)");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (steps < 0 || pretrain_steps < 0 || invert_steps < 0) throw ConfigError("step counts must be >= 0");
    if (!(tau > 0)) throw ConfigError("temperature must be positive");
    if (weights.contra < 0 || weights.mtg < 0 || weights.id < 0) throw ConfigError("loss weights must be >= 0");
    if (d_v < 1 || d_e < 1) throw ConfigError("latent/embedding dims must be positive");
    if (fine_cutoff < 0 || fine_cutoff >= layer_count)
        throw ConfigError("fine-scale cutoff must lie in [0, layer count)");
}

void AdamOptimizer::attach(std::vector<NamedTensor> params) {
    params_ = std::move(params);
    m_.clear();
    v_.clear();
    for (const NamedTensor& p : params_) {
        m_.push_back(Tensor(p.tensor->shape()));
        v_.push_back(Tensor(p.tensor->shape()));
    }
    t_ = 0;
}

void AdamOptimizer::step(const std::vector<Tensor>& grads) {
    if (grads.size() != params_.size()) throw ConfigError("gradient count does not match attached parameters");
    ++t_;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
        Tensor& theta = *params_[p].tensor;
        const Tensor& g = grads[p];
        if (!theta.same_shape(g))
            throw ConfigError("gradient shape mismatch for " + params_[p].name + ": " + shape_str(g.shape()));
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (int64_t i = 0; i < theta.numel(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
        quantize_f32(theta);
        quantize_f32(m);
        quantize_f32(v);
    }
}

std::vector<NamedTensor> AdamOptimizer::moment_tensors() {
    std::vector<NamedTensor> out;
    for (size_t p = 0; p < params_.size(); ++p) {
        out.push_back({"adam.m." + params_[p].name, &m_[p]});
        out.push_back({"adam.v." + params_[p].name, &v_[p]});
    }
    return out;
}

Batch sample_batch(const DomainRegistry& reg, Rng& rng, int batch_size, int d_z,
                   const std::vector<double>& domain_weights) {
    if (reg.size() < 1) throw ConfigError("cannot sample from an empty registry");
    std::vector<double> cum;
    if (!domain_weights.empty()) {
        if (static_cast<int>(domain_weights.size()) != reg.size())
            throw ConfigError("domain weight count does not match registry");
        double sum = 0;
        for (double w : domain_weights) {
            if (w < 0) throw ConfigError("domain weights must be nonnegative");
            sum += w;
        }
        if (!(sum > 0)) throw ConfigError("domain weights sum to zero");
        double acc = 0;
        for (double w : domain_weights) cum.push_back(acc += w / sum);
    }
    Batch batch;
    for (int b = 0; b < batch_size; ++b) {
        int d;
        if (cum.empty()) {
            d = rng.uniform_int(reg.size());
        } else {
            double u = rng.uniform();
            d = 0;
            while (d + 1 < reg.size() && u >= cum[static_cast<size_t>(d)]) ++d;
        }
        batch.domain.push_back(d);
        batch.image_index.push_back(rng.uniform_int(static_cast<int>(reg.domains[d].images.size())));
        Tensor z({d_z});
        for (int i = 0; i < d_z; ++i) z[i] = rng.normal();
        batch.z.push_back(std::move(z));
    }
    return batch;
}

namespace {

std::vector<Var> hyper_lifted_vars(const Hypernet::Lifted& p) {
    std::vector<Var> out;
    for (size_t l = 0; l < p.mlp_w.size(); ++l) {
        out.push_back(p.mlp_w[l]);
        out.push_back(p.mlp_b[l]);
    }
    for (const Hypernet::Lifted::Layer& layer : p.layers) {
        out.push_back(layer.gamma.w);
        out.push_back(layer.gamma.b);
        out.push_back(layer.u.w);
        out.push_back(layer.u.b);
        out.push_back(layer.psi.w);
        out.push_back(layer.psi.b);
        out.push_back(layer.delta.w);
        out.push_back(layer.delta.b);
    }
    return out;
}

std::vector<Var> gen_lifted_vars(const Generator::Lifted& p) {
    std::vector<Var> out;
    for (size_t l = 0; l < p.map_w.size(); ++l) {
        out.push_back(p.map_w[l]);
        out.push_back(p.map_b[l]);
    }
    out.push_back(p.const_input);
    for (const Generator::Lifted::Conv& c : p.convs) {
        out.push_back(c.weight);
        out.push_back(c.bias);
        out.push_back(c.affine_w);
        out.push_back(c.affine_b);
    }
    out.push_back(p.rgb.weight);
    out.push_back(p.rgb.bias);
    out.push_back(p.rgb.affine_w);
    out.push_back(p.rgb.affine_b);
    return out;
}

Var one_minus_dot(Graph& g, Var a, Var b) { return g.add_scalar(g.scale(g.dot(a, b), -1.0), 1.0); }

} // namespace

TrainSession::TrainSession(TrainingConfig cfg, const Generator& gen, DomainRegistry registry,
                           const ToyConvEncoder& encoder, const ToyConvEncoder& id_encoder)
    : cfg_(std::move(cfg)), gen_(gen), registry_(std::move(registry)), encoder_(encoder),
      id_encoder_(id_encoder) {
    cfg_.validate(gen_.layer_count());
    int res = gen_.config().output_resolution();
    if (registry_.size() < 1) throw ConfigError("training needs at least one domain");
    if (!registry_.prepared()) throw ConfigError("registry is not prepared: some domains lack an inverted latent");
    for (const Domain& d : registry_.domains) {
        for (const Tensor& img : d.images)
            if (img.rank() != 3 || img.size(0) != 3 || img.size(1) != res || img.size(2) != res)
                throw ConfigError("domain " + d.id + " has an image that is not (3," + std::to_string(res) +
                                  "," + std::to_string(res) + ")");
        if (d.w_c.numel() != gen_.config().d_w) throw ConfigError("domain " + d.id + " has a bad cached latent");
    }
    HypernetConfig hc;
    hc.n_domains = registry_.size();
    hc.d_v = cfg_.d_v;
    hc.mlp_attenuation = cfg_.mlp_attenuation;
    hc.head_attenuation = cfg_.head_attenuation;
    hc.layers = gen_.config().layers;
    hyper_ = Hypernet::random_init(hc, mix_seed(cfg_.seed, streams::hyper_init));
    opt_ = AdamOptimizer(cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
    opt_.attach(hyper_.named_params());
    build_caches();
}

void TrainSession::restore(Hypernet hyper, std::vector<Tensor> m, std::vector<Tensor> v, int64_t adam_t,
                           int64_t step) {
    hyper_ = std::move(hyper);
    opt_ = AdamOptimizer(cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
    opt_.attach(hyper_.named_params());
    std::vector<NamedTensor> moments = opt_.moment_tensors();
    if (m.size() * 2 != moments.size() || v.size() * 2 != moments.size())
        throw ConfigError("restored moment count does not match the hyper-network");
    for (size_t i = 0; i < m.size(); ++i) {
        if (!moments[2 * i].tensor->same_shape(m[i]) || !moments[2 * i + 1].tensor->same_shape(v[i]))
            throw ConfigError("restored moment shape mismatch at " + moments[2 * i].name);
        *moments[2 * i].tensor = std::move(m[i]);
        *moments[2 * i + 1].tensor = std::move(v[i]);
    }
    opt_.set_steps_taken(adam_t);
    step_ = step;
}

void TrainSession::build_caches() {
    target_embed_.clear();
    src_at_wc_.clear();
    e_src_at_wc_.clear();
    for (const Domain& d : registry_.domains) {
        std::vector<Tensor> embs;
        for (const Tensor& img : d.images) embs.push_back(encoder_.embed(img));
        target_embed_.push_back(std::move(embs));
        Tensor src = gen_.synthesize(d.w_c);
        e_src_at_wc_.push_back(encoder_.embed(src));
        src_at_wc_.push_back(std::move(src));
    }
}

StepStats TrainSession::train_step() {
    Rng rng(mix_seed(cfg_.seed, streams::train_step, static_cast<uint64_t>(step_)));
    Batch batch = sample_batch(registry_, rng, cfg_.batch, gen_.config().d_z, cfg_.domain_weights);
    StepStats stats = step_impl(batch, rng);
    ++step_;
    return stats;
}

StepStats TrainSession::train_step(const Batch& batch) {
    Rng rng(mix_seed(cfg_.seed, streams::train_step, static_cast<uint64_t>(step_)));
    StepStats stats = step_impl(batch, rng);
    ++step_;
    return stats;
}

StepStats TrainSession::step_impl(const Batch& batch, Rng& rng) {
    int B = static_cast<int>(batch.z.size());
    if (B < 1 || batch.domain.size() != batch.z.size()) throw ConfigError("malformed batch");
    Graph g;
    Hypernet::Lifted hv = hyper_.lift(g, true);
    Generator::Lifted gv = gen_.lift(g, false);
    int L = gen_.layer_count();

    Var total_sum;
    double contra_sum = 0, mtg_sum = 0, id_sum = 0;
    for (int b = 0; b < B; ++b) {
        int ci = batch.domain[b];
        if (ci < 0 || ci >= registry_.size()) throw ConfigError("batch references an unknown domain");
        const Domain& dom = registry_.domains[ci];
        int ii = batch.image_index.empty() ? 0 : batch.image_index[b];
        const Tensor& target = dom.images[ii];

        Tensor w = gen_.mapping_forward(batch.z[b]);
        Tensor src_w = gen_.synthesize(w); // frozen source render, no gradient needed

        std::vector<Generator::LayerMods> mods =
            hyper_.modulations_graph(g, hv, g.constant(one_hot(ci, registry_.size())));
        Var synth_w = gen_.synthesize_graph(g, gv, std::vector<Var>(L, g.constant(w)), &mods);
        Var synth_wc = gen_.synthesize_graph(g, gv, std::vector<Var>(L, g.constant(dom.w_c)), &mods);
        Var e_synth_w = encoder_.embed_graph(g, synth_w);
        Var e_synth_wc = encoder_.embed_graph(g, synth_wc);

        Var e_pos = cfg_.augment_positives
                        ? g.constant(encoder_.embed(augment(target, rng, cfg_.augment)))
                        : g.constant(target_embed_[ci][ii]);
        std::vector<Var> e_negs;
        for (int j = 0; j < registry_.size(); ++j) {
            if (j == ci) continue;
            const Domain& neg = registry_.domains[j];
            int ni = rng.uniform_int(static_cast<int>(neg.images.size()));
            e_negs.push_back(g.constant(encoder_.embed(augment(neg.images[ni], rng, cfg_.augment))));
        }
        Var contra = contrastive_graph(g, e_synth_w, e_pos, e_negs, cfg_.tau);

        MtgTerms terms;
        terms.synth_at_wc = synth_wc;
        terms.target = g.constant(target);
        terms.e_synth_wc = e_synth_wc;
        terms.e_synth_w = e_synth_w;
        terms.e_src_w = g.constant(encoder_.embed(src_w));
        terms.e_src_wc = g.constant(e_src_at_wc_[ci]);
        terms.e_target = g.constant(target_embed_[ci][ii]);
        Var mtg = mtg_graph(g, terms);

        Var id;
        if (cfg_.weights.id != 0.0) id = identity_graph(g, id_encoder_, synth_w, g.constant(src_w));

        Var total_b = weighted_total_graph(g, contra, mtg, id, cfg_.weights);
        total_sum = total_sum.valid() ? g.add(total_sum, total_b) : total_b;
        contra_sum += g.value(contra)[0];
        mtg_sum += g.value(mtg)[0];
        id_sum += id.valid() ? g.value(id)[0] : 0.0;
    }

    Var total = g.scale(total_sum, 1.0 / B);
    StepStats stats;
    stats.loss = weigh(contra_sum / B, mtg_sum / B, id_sum / B, cfg_.weights); // throws on non-finite
    g.backward(total);

    std::vector<Var> vars = hyper_lifted_vars(hv);
    std::vector<Tensor> grads;
    grads.reserve(vars.size());
    double sq = 0;
    for (Var v : vars) {
        Tensor grad = g.grad(v);
        for (int64_t i = 0; i < grad.numel(); ++i) sq += grad[i] * grad[i];
        grads.push_back(std::move(grad));
    }
    stats.grad_norm = std::sqrt(sq);
    if (!std::isfinite(stats.grad_norm)) {
        std::string doms;
        for (int d : batch.domain) doms += (doms.empty() ? "" : ",") + std::to_string(d);
        throw TrainingError("non-finite gradient at step " + std::to_string(step_) + " (domains " + doms + ")");
    }
    opt_.step(grads);
    return stats;
}

void TrainSession::run(int64_t steps, const StepHook& on_step) {
    for (int64_t s = 0; s < steps; ++s) {
        StepStats stats = train_step();
        if (on_step) on_step(*this, stats);
    }
}

void pretrain_source(Generator& gen, const TrainingConfig& cfg,
                     const std::function<void(int64_t, double)>& on_step) {
    int res = gen.config().output_resolution();
    ToyConvEncoder encoder({res, cfg.d_e, cfg.encoder_seed});
    AdamOptimizer opt(cfg.pretrain_lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    opt.attach(gen.named_params());
    int L = gen.layer_count();
    for (int64_t t = 0; t < cfg.pretrain_steps; ++t) {
        Rng rng(mix_seed(cfg.seed, streams::pretrain, static_cast<uint64_t>(t)));
        Graph g;
        Generator::Lifted gv = gen.lift(g, true);
        Var loss_sum;
        for (int b = 0; b < cfg.batch; ++b) {
            Tensor z({gen.config().d_z});
            for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
            Tensor target = render_source_image(z, res);
            Var w = gen.mapping_graph(g, gv, g.constant(z));
            Var synth = gen.synthesize_graph(g, gv, std::vector<Var>(L, w));
            Var pix = g.mean_abs_diff(synth, g.constant(target));
            Var emb = one_minus_dot(g, encoder.embed_graph(g, synth), g.constant(encoder.embed(target)));
            Var loss_b = g.add(pix, emb);
            loss_sum = loss_sum.valid() ? g.add(loss_sum, loss_b) : loss_b;
        }
        Var loss = g.scale(loss_sum, 1.0 / cfg.batch);
        double value = g.value(loss)[0];
        if (!std::isfinite(value)) throw TrainingError("pretraining diverged at step " + std::to_string(t));
        g.backward(loss);
        std::vector<Var> vars = gen_lifted_vars(gv);
        std::vector<Tensor> grads;
        grads.reserve(vars.size());
        for (Var v : vars) grads.push_back(g.grad(v));
        opt.step(grads);
        if (on_step) on_step(t, value);
    }
}

} // namespace ganmod
