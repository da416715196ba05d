#include "ganmod/procedural.hpp"

#include <cmath>
#include <set>

namespace ganmod {

int DomainRegistry::index_of(const std::string& id) const {
    for (size_t i = 0; i < domains.size(); ++i)
        if (domains[i].id == id) return static_cast<int>(i);
    return -1;
}

const Domain& DomainRegistry::at(int index) const {
    if (index < 0 || index >= size())
        throw ArgumentError("domain index " + std::to_string(index) + " out of range (have " +
                            std::to_string(size()) + " domains)");
    return domains[static_cast<size_t>(index)];
}

bool DomainRegistry::prepared() const {
    for (const Domain& d : domains)
        if (d.w_c.empty()) return false;
    return !domains.empty();
}

namespace {

void hsv_to_rgb(double h_deg, double s, double v, double rgb[3]) {
    double h = std::fmod(std::fmod(h_deg, 360.0) + 360.0, 360.0) / 60.0;
    int i = static_cast<int>(h) % 6;
    double f = h - std::floor(h);
    double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

double smoothstep(double x) {
    x = x < 0 ? 0 : (x > 1 ? 1 : x);
    return x * x * (3 - 2 * x);
}

// coverage in [0,1]: 1 deep inside the shape, 0 outside, ~1px soft edge
double shape_coverage(ShapeKind shape, double dx, double dy, double size, double aa) {
    switch (shape) {
        case ShapeKind::circle: {
            double r = std::sqrt(dx * dx + dy * dy);
            return smoothstep((size - r) / aa + 0.5);
        }
        case ShapeKind::square: {
            double d = std::max(std::fabs(dx), std::fabs(dy));
            return smoothstep((size - d) / aa + 0.5);
        }
        case ShapeKind::star: {
            double r = std::sqrt(dx * dx + dy * dy);
            double theta = std::atan2(dy, dx);
            double phase = theta * 5.0 / (2.0 * M_PI);
            double tri = 2.0 * std::fabs(phase - std::floor(phase) - 0.5); // 1 at the points
            double r_th = size * (0.42 + 0.58 * tri);
            return smoothstep((r_th - r) / aa + 0.5);
        }
    }
    return 0.0;
}

} // namespace

std::vector<Tensor> render_domain_samples(const ProceduralDomainSpec& spec, int resolution) {
    if (resolution < 4) throw ConfigError("render resolution too small");
    if (spec.samples < 1) throw ConfigError("samples per domain must be >= 1");
    std::vector<Tensor> out;
    const double aa = 1.5 / resolution;
    for (int s = 0; s < spec.samples; ++s) {
        Rng rng(mix_seed(spec.seed, 0xD0, static_cast<uint64_t>(s)));
        double hue = rng.uniform(spec.hue_lo, spec.hue_hi);
        double cx = 0.5 + rng.uniform(-0.04, 0.04);
        double cy = 0.5 + rng.uniform(-0.04, 0.04);
        double size = 0.30 + rng.uniform(-0.04, 0.04);
        double base[3];
        hsv_to_rgb(hue, spec.saturation, 0.9, base);
        // the background carries a dim tint of the domain hue so the whole
        // frame, not just the shape, belongs to the domain
        double bgc[3];
        hsv_to_rgb(hue, spec.saturation * 0.8, 0.3, bgc);
        double bg[3] = {bgc[0] * 2.0 - 1.0, bgc[1] * 2.0 - 1.0, bgc[2] * 2.0 - 1.0};
        Tensor img({3, resolution, resolution});
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x) {
                double px = (x + 0.5) / resolution, py = (y + 0.5) / resolution;
                double cov = shape_coverage(spec.shape, px - cx, py - cy, size, aa);
                double fg[3] = {base[0], base[1], base[2]};
                if (spec.texture == TextureKind::striped) {
                    bool dark = (y / 4) % 2 == 1;
                    if (dark)
                        for (double& c : fg) c *= 0.45;
                } else if (spec.texture == TextureKind::noisy) {
                    double n = rng.uniform(-0.25, 0.25);
                    for (double& c : fg) c += n;
                }
                for (int c = 0; c < 3; ++c) {
                    double v = (fg[c] * 2.0 - 1.0); // [0,1] color to [-1,1]
                    double r = bg[c] + cov * (v - bg[c]);
                    img.at(c, y, x) = r < -1.0 ? -1.0 : (r > 1.0 ? 1.0 : r);
                }
            }
        quantize_f32(img); // images persist as float32; keep them on that grid from birth
        out.push_back(std::move(img));
    }
    return out;
}

std::vector<ProceduralDomainSpec> default_target_specs(uint64_t seed) {
    std::vector<ProceduralDomainSpec> specs(4);
    // hue centers sit ~90 degrees apart so the four targets stay mutually
    // distinguishable under the toy encoder
    specs[0] = {"red-striped-circles", ShapeKind::circle, -8.0, 8.0, 0.9, TextureKind::striped, 1, mix_seed(seed, 1)};
    specs[1] = {"lime-squares", ShapeKind::square, 85.0, 105.0, 0.85, TextureKind::flat, 1, mix_seed(seed, 2)};
    specs[2] = {"cyan-stars", ShapeKind::star, 172.0, 188.0, 0.85, TextureKind::flat, 1, mix_seed(seed, 3)};
    specs[3] = {"violet-noisy-circles", ShapeKind::circle, 262.0, 278.0, 0.9, TextureKind::noisy, 1, mix_seed(seed, 4)};
    return specs;
}

DomainRegistry build_registry(const std::vector<ProceduralDomainSpec>& specs, int resolution) {
    if (specs.empty()) throw ArgumentError("registry needs at least one domain spec");
    std::set<std::string> seen;
    DomainRegistry reg;
    reg.resolution = resolution;
    for (const ProceduralDomainSpec& spec : specs) {
        if (!seen.insert(spec.id).second) throw ArgumentError("duplicate domain id: " + spec.id);
        Domain d;
        d.id = spec.id;
        d.images = render_domain_samples(spec, resolution);
        reg.domains.push_back(std::move(d));
    }
    return reg;
}

Tensor render_source_image(const Tensor& z, int resolution) {
    if (z.numel() < 5) throw ConfigError("source renderer reads the first 5 latent entries");
    double cx = 0.5 + 0.18 * std::tanh(z[0] / 2.0);
    double cy = 0.5 + 0.18 * std::tanh(z[1] / 2.0);
    double size = 0.22 + 0.08 * std::tanh(z[2] / 2.0);
    double fg = 0.5 * std::tanh(z[3] / 2.0);
    double bg = -0.55 + 0.1 * std::tanh(z[4] / 2.0);
    double aa = 1.5 / resolution;
    Tensor img({3, resolution, resolution});
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            double px = (x + 0.5) / resolution, py = (y + 0.5) / resolution;
            double cov = shape_coverage(ShapeKind::circle, px - cx, py - cy, size, aa);
            double v = bg + cov * (fg - bg);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
        }
    return img;
}

} // namespace ganmod
