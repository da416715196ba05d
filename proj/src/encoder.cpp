#include "ganmod/encoder.hpp"

#include <cmath>

#include "ganmod/synthesis.hpp"

namespace ganmod {

namespace {
constexpr int kStageChannels[] = {12, 24, 48};
constexpr int kStages = 3;
} // namespace

ToyConvEncoder::ToyConvEncoder(EncoderConfig cfg) : cfg_(cfg) {
    if (cfg_.resolution < 4) throw ConfigError("encoder resolution must be at least 4");
    if (cfg_.d_e < 1) throw ConfigError("embedding dim must be positive");
    Rng rng(cfg_.seed);
    int c_in = 3;
    for (int s = 0; s < kStages; ++s) {
        int c_out = kStageChannels[s];
        conv_w.push_back(normal_tensor(rng, {c_in, c_out, 3, 3}, 1.0 / std::sqrt(9.0 * c_in)));
        // bias-free stages keep the net odd, which spreads embeddings of
        // differently-colored images instead of collapsing them into a cone
        conv_b.push_back(Tensor({c_out}));
        c_in = c_out;
    }
    // sized so the pre-normalization vector keeps O(1) length: the projection
    // of a unit feature vector through N(0, 1/d_e) entries has unit norm in
    // expectation, which keeps the final normalization well-conditioned
    head_w = normal_tensor(rng, {cfg_.d_e, c_in}, 1.0 / std::sqrt(static_cast<double>(cfg_.d_e)));
    // tiny offset so an all-gray frame still lands on the unit sphere
    head_b = normal_tensor(rng, {cfg_.d_e}, 0.01);
}

Var ToyConvEncoder::embed_graph(Graph& g, Var image) const {
    const Tensor& v = g.value(image);
    if (v.rank() != 3 || v.size(0) != 3 || v.size(1) != cfg_.resolution || v.size(2) != cfg_.resolution)
        throw ArgumentError("encoder expects a (3," + std::to_string(cfg_.resolution) + "," +
                            std::to_string(cfg_.resolution) + ") image, got " + shape_str(v.shape()));
    Var x = image;
    for (int s = 0; s < kStages; ++s)
        x = g.tanh(g.conv2d(x, g.constant(conv_w[s]), g.constant(conv_b[s]), 2));
    // soft-normalized pooling makes the features contrast-invariant, so washed
    // out frames embed as stably as saturated ones
    Var pooled = g.l2_normalize(g.global_avg_pool(x), 1e-2);
    return g.l2_normalize(g.linear(pooled, g.constant(head_w), g.constant(head_b)), 1e-20);
}

Tensor ToyConvEncoder::embed(const Tensor& image) const {
    Graph g;
    return g.value(embed_graph(g, g.constant(image)));
}

Tensor augment(const Tensor& image, Rng& rng, const AugmentParams& p) {
    // fixed draw order so a seeded rng reproduces the augmentation exactly
    bool flip = rng.uniform() < p.flip_prob;
    double brightness = rng.uniform(p.brightness_lo, p.brightness_hi);
    double shift = rng.uniform(p.shift_lo, p.shift_hi);
    double sat[3] = {rng.uniform(p.saturation_lo, p.saturation_hi),
                     rng.uniform(p.saturation_lo, p.saturation_hi),
                     rng.uniform(p.saturation_lo, p.saturation_hi)};
    if (image.rank() != 3 || image.size(0) != 3) throw ArgumentError("augment expects a (3,H,W) image");
    int H = image.size(1), W = image.size(2);
    Tensor out = image;
    if (flip)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) out.at(c, y, x) = image.at(c, y, W - 1 - x);
    // jitter happens on [0,1] intensities; each stage is skipped when it is the
    // identity so zero-strength augmentation returns the input bit-for-bit
    bool any_jitter = brightness != 1.0 || shift != 0.0 || sat[0] != 1.0 || sat[1] != 1.0 || sat[2] != 1.0;
    if (any_jitter) {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double v[3];
                for (int c = 0; c < 3; ++c) {
                    v[c] = (out.at(c, y, x) + 1.0) * 0.5;
                    if (brightness != 1.0) v[c] *= brightness;
                    if (shift != 0.0) v[c] += shift;
                }
                double gray = (v[0] + v[1] + v[2]) / 3.0;
                for (int c = 0; c < 3; ++c) {
                    if (sat[c] != 1.0) v[c] = gray + sat[c] * (v[c] - gray);
                    double r = v[c] * 2.0 - 1.0;
                    out.at(c, y, x) = r < -1.0 ? -1.0 : (r > 1.0 ? 1.0 : r);
                }
            }
    }
    return out;
}

double averaged_similarity(const std::vector<ImageEmbedder>& embedders, const Tensor& a, const Tensor& b) {
    if (embedders.empty()) throw ArgumentError("averaged similarity needs at least one embedder");
    double acc = 0;
    for (const ImageEmbedder& embed : embedders) {
        Tensor ea = embed(a);
        Tensor eb = embed(b);
        if (!ea.same_shape(eb)) throw ArgumentError("embedder returned mismatched shapes");
        double dot = 0;
        for (int64_t i = 0; i < ea.numel(); ++i) dot += ea[i] * eb[i];
        acc += dot;
    }
    return acc / static_cast<double>(embedders.size());
}

} // namespace ganmod
