#include "ganmod/hypernet.hpp"

#include <cmath>

namespace ganmod {

Tensor one_hot(int index, int count) {
    if (count < 1 || index < 0 || index >= count)
        throw ArgumentError("one_hot: index " + std::to_string(index) + " out of [0, " + std::to_string(count) + ")");
    Tensor c({count});
    c[index] = 1.0;
    return c;
}

void validate_condition(const Tensor& c, int count) {
    if (c.rank() != 1 || c.numel() != count)
        throw ArgumentError("condition vector must have length " + std::to_string(count) + ", got " +
                            shape_str(c.shape()));
    double sum = 0.0;
    for (int64_t i = 0; i < c.numel(); ++i) {
        if (!(c[i] >= 0.0)) throw ArgumentError("condition entries must be nonnegative");
        sum += c[i];
    }
    if (std::fabs(sum - 1.0) > 1e-6)
        throw ArgumentError("condition entries must sum to 1, got " + std::to_string(sum));
}

Tensor interpolate_domains(const Tensor& c_a, const Tensor& c_b, double t) {
    if (!c_a.same_shape(c_b)) throw ArgumentError("interpolate_domains: condition shapes differ");
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("interpolation t must lie in [0, 1]");
    if (t == 0.0) return c_a; // endpoints reproduce the inputs exactly
    if (t == 1.0) return c_b;
    Tensor out = c_a;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = (1.0 - t) * c_a[i] + t * c_b[i];
    return out;
}

Tensor reconstruct_residual(const Rank1Factors& f) {
    int cin = static_cast<int>(f.u.numel());
    int cout = static_cast<int>(f.gamma.numel());
    int sp = static_cast<int>(f.psi.numel());
    int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(sp))));
    if (k * k != sp) throw ConfigError("spatial factor length must be a square, got " + std::to_string(sp));
    Graph g;
    Var r = g.rank1(g.constant(f.u), g.constant(f.gamma), g.constant(f.psi));
    return g.value(g.reshape(r, {cin, cout, k, k}));
}

ModulationSet scale_modulation(ModulationSet m, double alpha) {
    for (LayerModulation& lm : m.layers) {
        for (int64_t i = 0; i < lm.factors.psi.numel(); ++i) lm.factors.psi[i] *= alpha;
        for (int64_t i = 0; i < lm.delta.numel(); ++i) lm.delta[i] = alpha * lm.delta[i] + (1.0 - alpha);
    }
    return m;
}

std::vector<Generator::LayerMods> lift_modulations(Graph& g, const ModulationSet& m,
                                                   const std::vector<LayerConfig>& layers) {
    if (m.layers.size() != layers.size()) throw ConfigError("modulation set does not cover every layer");
    std::vector<Generator::LayerMods> out;
    out.reserve(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
        const LayerModulation& lm = m.layers[l];
        const LayerConfig& lc = layers[l];
        Var r = g.rank1(g.constant(lm.factors.u), g.constant(lm.factors.gamma), g.constant(lm.factors.psi));
        out.push_back({g.reshape(r, {lc.c_in, lc.c_out, lc.kernel, lc.kernel}), g.constant(lm.delta)});
    }
    return out;
}

void HypernetConfig::validate() const {
    if (n_domains < 1) throw ConfigError("hypernet needs at least one domain");
    if (d_v < 1) throw ConfigError("domain latent dim must be positive");
    if (layers.empty()) throw ConfigError("hypernet has no layers to modulate");
}

Hypernet::Hypernet(HypernetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    mlp_w = {Tensor({cfg_.d_v, cfg_.n_domains}), Tensor({cfg_.d_v, cfg_.d_v})};
    mlp_b = {Tensor({cfg_.d_v}), Tensor({cfg_.d_v})};
    for (const LayerConfig& lc : cfg_.layers) {
        LayerHeads h;
        h.gamma = {Tensor({lc.c_out, cfg_.d_v}), Tensor::full({lc.c_out}, 1.0)};
        h.u = {Tensor({lc.c_in, cfg_.d_v}), Tensor::full({lc.c_in}, 1.0)};
        h.psi = {Tensor({lc.kernel * lc.kernel, cfg_.d_v}), Tensor({lc.kernel * lc.kernel})};
        h.delta = {Tensor({lc.c_out, cfg_.d_v}), Tensor::full({lc.c_out}, 1.0)};
        heads.push_back(std::move(h));
    }
}

Hypernet Hypernet::random_init(HypernetConfig cfg, uint64_t seed) {
    Hypernet net(std::move(cfg));
    const HypernetConfig& c = net.cfg_;
    Rng rng(seed);
    net.mlp_w[0] = normal_tensor(rng, {c.d_v, c.n_domains},
                                 c.mlp_attenuation / std::sqrt(static_cast<double>(c.n_domains)));
    net.mlp_w[1] = normal_tensor(rng, {c.d_v, c.d_v}, c.mlp_attenuation / std::sqrt(static_cast<double>(c.d_v)));
    double head_std = c.head_attenuation / std::sqrt(static_cast<double>(c.d_v));
    for (size_t l = 0; l < c.layers.size(); ++l) {
        const LayerConfig& lc = c.layers[l];
        LayerHeads& h = net.heads[l];
        h.gamma.w = normal_tensor(rng, {lc.c_out, c.d_v}, head_std);
        h.u.w = normal_tensor(rng, {lc.c_in, c.d_v}, head_std);
        h.psi.w = normal_tensor(rng, {lc.kernel * lc.kernel, c.d_v}, head_std);
        h.delta.w = normal_tensor(rng, {lc.c_out, c.d_v}, head_std);
    }
    for (NamedTensor nt : net.named_params()) quantize_f32(*nt.tensor);
    return net;
}

Tensor Hypernet::map_domain(const Tensor& c) const {
    if (c.rank() != 1 || c.numel() != cfg_.n_domains)
        throw ConfigError("condition length " + shape_str(c.shape()) + " does not match " +
                          std::to_string(cfg_.n_domains) + " domains");
    Graph g;
    return g.value(map_domain_graph(g, lift(g, false), g.constant(c)));
}

ModulationSet Hypernet::predict_modulations(const Tensor& v) const {
    if (v.rank() != 1 || v.numel() != cfg_.d_v) throw ConfigError("domain latent has wrong length");
    Graph g;
    Lifted p = lift(g, false);
    Var vv = g.constant(v);
    ModulationSet out;
    for (size_t l = 0; l < heads.size(); ++l) {
        LayerModulation lm;
        lm.factors.gamma = g.value(g.linear(vv, p.layers[l].gamma.w, p.layers[l].gamma.b));
        lm.factors.u = g.value(g.linear(vv, p.layers[l].u.w, p.layers[l].u.b));
        lm.factors.psi = g.value(g.linear(vv, p.layers[l].psi.w, p.layers[l].psi.b));
        lm.delta = g.value(g.linear(vv, p.layers[l].delta.w, p.layers[l].delta.b));
        out.layers.push_back(std::move(lm));
    }
    return out;
}

ModulationSet Hypernet::predict(const Tensor& c) const { return predict_modulations(map_domain(c)); }

Hypernet::Lifted Hypernet::lift(Graph& g, bool trainable) const {
    Lifted p;
    auto put = [&](const Tensor& t) { return trainable ? g.leaf(t, true) : g.constant(t); };
    for (size_t l = 0; l < mlp_w.size(); ++l) {
        p.mlp_w.push_back(put(mlp_w[l]));
        p.mlp_b.push_back(put(mlp_b[l]));
    }
    for (const LayerHeads& h : heads)
        p.layers.push_back({{put(h.gamma.w), put(h.gamma.b)},
                            {put(h.u.w), put(h.u.b)},
                            {put(h.psi.w), put(h.psi.b)},
                            {put(h.delta.w), put(h.delta.b)}});
    return p;
}

Var Hypernet::map_domain_graph(Graph& g, const Lifted& p, Var c) const {
    // leaky activation on the hidden layer only; the output stays linear
    Var h = g.leaky_relu(g.linear(c, p.mlp_w[0], p.mlp_b[0]), cfg_.mlp_slope);
    return g.linear(h, p.mlp_w[1], p.mlp_b[1]);
}

std::vector<Generator::LayerMods> Hypernet::modulations_graph(Graph& g, const Lifted& p, Var c) const {
    Var v = map_domain_graph(g, p, c);
    std::vector<Generator::LayerMods> out;
    out.reserve(cfg_.layers.size());
    for (size_t l = 0; l < cfg_.layers.size(); ++l) {
        const LayerConfig& lc = cfg_.layers[l];
        Var gamma = g.linear(v, p.layers[l].gamma.w, p.layers[l].gamma.b);
        Var u = g.linear(v, p.layers[l].u.w, p.layers[l].u.b);
        Var psi = g.linear(v, p.layers[l].psi.w, p.layers[l].psi.b);
        Var delta = g.linear(v, p.layers[l].delta.w, p.layers[l].delta.b);
        Var r = g.reshape(g.rank1(u, gamma, psi), {lc.c_in, lc.c_out, lc.kernel, lc.kernel});
        out.push_back({r, delta});
    }
    return out;
}

std::vector<NamedTensor> Hypernet::named_params() {
    std::vector<NamedTensor> out;
    for (size_t l = 0; l < mlp_w.size(); ++l) {
        out.push_back({"mlp.w" + std::to_string(l), &mlp_w[l]});
        out.push_back({"mlp.b" + std::to_string(l), &mlp_b[l]});
    }
    for (size_t l = 0; l < heads.size(); ++l) {
        std::string p = "head" + std::to_string(l) + ".";
        out.push_back({p + "gamma_w", &heads[l].gamma.w});
        out.push_back({p + "gamma_b", &heads[l].gamma.b});
        out.push_back({p + "u_w", &heads[l].u.w});
        out.push_back({p + "u_b", &heads[l].u.b});
        out.push_back({p + "psi_w", &heads[l].psi.w});
        out.push_back({p + "psi_b", &heads[l].psi.b});
        out.push_back({p + "delta_w", &heads[l].delta.w});
        out.push_back({p + "delta_b", &heads[l].delta.b});
    }
    return out;
}

int64_t Hypernet::param_count() const {
    int64_t n = 0;
    for (NamedTensor nt : const_cast<Hypernet*>(this)->named_params()) n += nt.tensor->numel();
    return n;
}

int64_t Hypernet::analytic_layer_param_count(const LayerConfig& l, int d_v) {
    return static_cast<int64_t>(d_v + 1) * (l.c_in + 2 * l.c_out + l.kernel * l.kernel);
}

int64_t Hypernet::analytic_param_count(const HypernetConfig& cfg) {
    int64_t n = static_cast<int64_t>(cfg.d_v) * cfg.n_domains + cfg.d_v // first MLP layer
                + static_cast<int64_t>(cfg.d_v) * cfg.d_v + cfg.d_v;    // second MLP layer
    for (const LayerConfig& l : cfg.layers) n += analytic_layer_param_count(l, cfg.d_v);
    return n;
}

} // namespace ganmod
