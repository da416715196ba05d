#pragma once

#include "ganmod/procedural.hpp"
#include "ganmod/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ganmod {

// images are (3,H,W) in [-1,1]; bytes map through round((v+1)/2 * 255)
void write_png(const std::string& path, const Tensor& image);
Tensor read_png(const std::string& path); // lands on the float32 grid

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);
Tensor center_crop_square(const Tensor& image);

struct GridCellMeta {
    uint64_t seed = 0;
    std::vector<double> condition;
    double alpha = 1.0;
    double kappa = 1.0;
};

// tiles the images row-major into one PNG plus a <path>.json sidecar
// describing every cell
void write_image_grid(const std::string& path, const std::vector<Tensor>& images, int columns,
                      const std::vector<GridCellMeta>& meta = {});

// every subdirectory (sorted by name) becomes a domain; its *.png files
// (sorted) are cropped square and resized to `resolution`; a marker file
// named "contains_faces" sets the flag
DomainRegistry load_registry_from_folders(const std::string& root, int resolution);

} // namespace ganmod
