#include "ganmod/synthesis.hpp"

#include <cmath>

#include "ganmod/hypernet.hpp"

namespace ganmod {

void SynthesisConfig::validate() const {
    if (d_z <= 0 || d_w <= 0) throw ConfigError("latent dims must be positive");
    if (mapping_layers < 1) throw ConfigError("mapping needs at least one layer");
    if (layers.empty()) throw ConfigError("no synthesis layers configured");
    for (size_t l = 0; l < layers.size(); ++l) {
        const LayerConfig& lc = layers[l];
        if (lc.c_in <= 0 || lc.c_out <= 0) throw ConfigError("layer " + std::to_string(l) + ": bad channel count");
        if (lc.kernel < 1 || lc.kernel % 2 == 0)
            throw ConfigError("layer " + std::to_string(l) + ": kernel must be odd and positive");
        if (lc.resolution < 1) throw ConfigError("layer " + std::to_string(l) + ": bad resolution");
        if (l > 0) {
            if (lc.c_in != layers[l - 1].c_out)
                throw ConfigError("layer " + std::to_string(l) + ": input channels do not chain");
            if (lc.resolution != layers[l - 1].resolution && lc.resolution != 2 * layers[l - 1].resolution)
                throw ConfigError("layer " + std::to_string(l) + ": resolution must stay or double");
        }
    }
}

SynthesisConfig SynthesisConfig::toy_default() {
    SynthesisConfig c;
    c.layers = {{64, 64, 3, 4}, {64, 64, 3, 8}, {64, 32, 3, 16}, {32, 16, 3, 32}};
    return c;
}

Tensor normal_tensor(Rng& rng, std::vector<int> shape, double stddev) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
    return t;
}

uint64_t fnv1a_f32(uint64_t h, const Tensor& t) {
    for (int64_t i = 0; i < t.numel(); ++i) {
        float f = static_cast<float>(t[i]);
        uint32_t bits;
        static_assert(sizeof(bits) == sizeof(f));
        __builtin_memcpy(&bits, &f, 4);
        for (int byte = 0; byte < 4; ++byte) {
            h ^= (bits >> (8 * byte)) & 0xff;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

Generator::Generator(SynthesisConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    int in = cfg_.d_z;
    for (int l = 0; l < cfg_.mapping_layers; ++l) {
        map_w.push_back(Tensor({cfg_.d_w, in}));
        map_b.push_back(Tensor({cfg_.d_w}));
        in = cfg_.d_w;
    }
    int r0 = cfg_.layers.front().resolution;
    const_input = Tensor({cfg_.layers.front().c_in, r0, r0});
    for (const LayerConfig& lc : cfg_.layers) {
        ConvLayerParams p;
        p.weight = Tensor({lc.c_in, lc.c_out, lc.kernel, lc.kernel});
        p.bias = Tensor({lc.c_out});
        p.affine.w = Tensor({lc.c_in, cfg_.d_w});
        p.affine.b = Tensor::full({lc.c_in}, 1.0);
        convs.push_back(std::move(p));
    }
    int c_last = cfg_.layers.back().c_out;
    rgb.weight = Tensor({c_last, 3, 1, 1});
    rgb.bias = Tensor({3});
    rgb.affine.w = Tensor({c_last, cfg_.d_w});
    rgb.affine.b = Tensor::full({c_last}, 1.0);
}

Generator Generator::random_init(SynthesisConfig cfg, uint64_t seed) {
    Generator gen(std::move(cfg));
    const SynthesisConfig& c = gen.cfg_;
    Rng rng(seed);
    int in = c.d_z;
    for (int l = 0; l < c.mapping_layers; ++l) {
        gen.map_w[l] = normal_tensor(rng, {c.d_w, in}, 1.0 / std::sqrt(static_cast<double>(in)));
        in = c.d_w;
    }
    for (int64_t i = 0; i < gen.const_input.numel(); ++i) gen.const_input[i] = rng.normal();
    double aff_std = 1.0 / std::sqrt(static_cast<double>(c.d_w));
    for (size_t l = 0; l < c.layers.size(); ++l) {
        const LayerConfig& lc = c.layers[l];
        double w_std = 1.0 / std::sqrt(static_cast<double>(lc.c_in) * lc.kernel * lc.kernel);
        gen.convs[l].weight = normal_tensor(rng, {lc.c_in, lc.c_out, lc.kernel, lc.kernel}, w_std);
        gen.convs[l].affine.w = normal_tensor(rng, {lc.c_in, c.d_w}, aff_std);
    }
    int c_last = c.layers.back().c_out;
    gen.rgb.weight = normal_tensor(rng, {c_last, 3, 1, 1}, 1.0 / std::sqrt(static_cast<double>(c_last)));
    gen.rgb.affine.w = normal_tensor(rng, {c_last, c.d_w}, aff_std);
    for (NamedTensor nt : gen.named_params()) quantize_f32(*nt.tensor);
    return gen;
}

Tensor Generator::mapping_forward(const Tensor& z) const {
    if (z.rank() != 1 || z.numel() != cfg_.d_z)
        throw ConfigError("mapping input must be a " + std::to_string(cfg_.d_z) + "-vector, got " +
                          shape_str(z.shape()));
    // same accumulation order as Graph::linear so plain and graph paths agree exactly
    Tensor h = z;
    for (size_t l = 0; l < map_w.size(); ++l) {
        const Tensor& W = map_w[l];
        const Tensor& b = map_b[l];
        int m = W.size(0), n = W.size(1);
        Tensor out({m});
        for (int i = 0; i < m; ++i) {
            double s = b[i];
            const double* row = W.data() + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) s += row[j] * h[j];
            out[i] = s < 0 ? s * cfg_.mapping_slope : s;
        }
        h = std::move(out);
    }
    return h;
}

Generator::Lifted Generator::lift(Graph& g, bool trainable) const {
    Lifted p;
    auto put = [&](const Tensor& t) { return trainable ? g.leaf(t, true) : g.constant(t); };
    for (size_t l = 0; l < map_w.size(); ++l) {
        p.map_w.push_back(put(map_w[l]));
        p.map_b.push_back(put(map_b[l]));
    }
    p.const_input = put(const_input);
    for (const ConvLayerParams& c : convs)
        p.convs.push_back({put(c.weight), put(c.bias), put(c.affine.w), put(c.affine.b)});
    p.rgb = {put(rgb.weight), put(rgb.bias), put(rgb.affine.w), put(rgb.affine.b)};
    return p;
}

Var Generator::mapping_graph(Graph& g, const Lifted& p, Var z) const {
    Var h = z;
    for (size_t l = 0; l < p.map_w.size(); ++l)
        h = g.leaky_relu(g.linear(h, p.map_w[l], p.map_b[l]), cfg_.mapping_slope);
    return h;
}

Var Generator::synthesize_graph(Graph& g, const Lifted& p, const std::vector<Var>& latents,
                                const std::vector<LayerMods>* mods) const {
    if (latents.size() != cfg_.layers.size())
        throw ConfigError("need one latent per layer: got " + std::to_string(latents.size()) + " for " +
                          std::to_string(cfg_.layers.size()) + " layers");
    if (mods && mods->size() != cfg_.layers.size())
        throw ConfigError("modulation set does not cover every layer");
    Var x = p.const_input;
    for (size_t l = 0; l < cfg_.layers.size(); ++l) {
        if (l > 0 && cfg_.layers[l].resolution != cfg_.layers[l - 1].resolution) x = g.upsample2(x);
        const Lifted::Conv& c = p.convs[l];
        Var style = g.linear(latents[l], c.affine_w, c.affine_b);
        Var w = c.weight;
        if (mods) w = g.add(w, (*mods)[l].dphi);
        w = g.demodulate(g.modulate(w, style), cfg_.demod_eps);
        if (mods) w = g.filter_scale(w, (*mods)[l].delta);
        x = g.tanh(g.conv2d(x, w, c.bias)); // smooth stack: the training loss stays differentiable everywhere
    }
    Var style = g.linear(latents.back(), p.rgb.affine_w, p.rgb.affine_b);
    Var w = g.modulate(p.rgb.weight, style); // RGB head: modulation only, no demod
    return g.tanh(g.conv2d(x, w, p.rgb.bias));
}

Tensor Generator::synthesize(const std::vector<Tensor>& latents, const ModulationSet* mods) const {
    Graph g;
    Lifted p = lift(g, false);
    std::vector<Var> lat;
    lat.reserve(latents.size());
    for (const Tensor& w : latents) lat.push_back(g.constant(w));
    if (mods) {
        std::vector<LayerMods> mv = lift_modulations(g, *mods, cfg_.layers);
        return g.value(synthesize_graph(g, p, lat, &mv));
    }
    return g.value(synthesize_graph(g, p, lat));
}

Tensor Generator::synthesize(const Tensor& w, const ModulationSet* mods) const {
    return synthesize(std::vector<Tensor>(cfg_.layers.size(), w), mods);
}

std::vector<NamedTensor> Generator::named_params() {
    std::vector<NamedTensor> out;
    for (size_t l = 0; l < map_w.size(); ++l) {
        out.push_back({"map.w" + std::to_string(l), &map_w[l]});
        out.push_back({"map.b" + std::to_string(l), &map_b[l]});
    }
    out.push_back({"const", &const_input});
    for (size_t l = 0; l < convs.size(); ++l) {
        std::string p = "conv" + std::to_string(l) + ".";
        out.push_back({p + "weight", &convs[l].weight});
        out.push_back({p + "bias", &convs[l].bias});
        out.push_back({p + "affine_w", &convs[l].affine.w});
        out.push_back({p + "affine_b", &convs[l].affine.b});
    }
    out.push_back({"rgb.weight", &rgb.weight});
    out.push_back({"rgb.bias", &rgb.bias});
    out.push_back({"rgb.affine_w", &rgb.affine.w});
    out.push_back({"rgb.affine_b", &rgb.affine.b});
    return out;
}

int64_t Generator::param_count() const {
    int64_t n = 0;
    for (NamedTensor nt : const_cast<Generator*>(this)->named_params()) n += nt.tensor->numel();
    return n;
}

uint64_t Generator::weight_checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (NamedTensor nt : const_cast<Generator*>(this)->named_params()) h = fnv1a_f32(h, *nt.tensor);
    return h;
}

Tensor style_of(const AffineParams& a, const Tensor& w) {
    Graph g;
    return g.value(g.linear(g.constant(w), g.constant(a.w), g.constant(a.b)));
}

Tensor conv_forward(const Tensor& x, const Tensor& phi, const Tensor& bias, const Tensor& style,
                    double demod_eps) {
    Graph g;
    Var w = g.demodulate(g.modulate(g.constant(phi), g.constant(style)), demod_eps);
    return g.value(g.conv2d(g.constant(x), w, g.constant(bias)));
}

Tensor conv_forward_adapted(const Tensor& x, const Tensor& phi, const Tensor& dphi,
                            const Tensor& delta, const Tensor& bias, const Tensor& style,
                            double demod_eps) {
    Graph g;
    Var w = g.add(g.constant(phi), g.constant(dphi));
    w = g.demodulate(g.modulate(w, g.constant(style)), demod_eps);
    w = g.filter_scale(w, g.constant(delta));
    return g.value(g.conv2d(g.constant(x), w, g.constant(bias)));
}

} // namespace ganmod
