#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganmod/rng.hpp"
#include "ganmod/tensor.hpp"

namespace ganmod {

enum class ShapeKind { circle, square, star };
enum class TextureKind { flat, striped, noisy };

struct ProceduralDomainSpec {
    std::string id;
    ShapeKind shape = ShapeKind::circle;
    double hue_lo = 0.0, hue_hi = 0.0; // degrees, wraps mod 360
    double saturation = 0.85;
    TextureKind texture = TextureKind::flat;
    int samples = 1;
    uint64_t seed = 0;
};

struct Domain {
    std::string id;
    std::vector<Tensor> images;
    std::vector<std::string> image_paths; // set when loaded from folders
    Tensor w_c;                           // inverted latent; empty until prepared
    bool contains_faces = false;
};

struct DomainRegistry {
    int resolution = 0;
    std::vector<Domain> domains;

    int size() const { return static_cast<int>(domains.size()); }
    int index_of(const std::string& id) const; // -1 when absent
    const Domain& at(int index) const;         // ArgumentError when out of range
    bool prepared() const;                     // every domain has w_c
};

std::vector<Tensor> render_domain_samples(const ProceduralDomainSpec& spec, int resolution);
std::vector<ProceduralDomainSpec> default_target_specs(uint64_t seed);
DomainRegistry build_registry(const std::vector<ProceduralDomainSpec>& specs, int resolution);

// gray circle parameterized by the leading latent entries; the pretraining target
Tensor render_source_image(const Tensor& z, int resolution);

} // namespace ganmod
