#include "ganmod/png_io.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ganmod {

namespace {

uint8_t to_byte(double v) {
    double scaled = (v + 1.0) * 0.5 * 255.0;
    long r = std::lround(scaled);
    return static_cast<uint8_t>(std::clamp(r, 0L, 255L));
}

void check_image(const Tensor& image, const std::string& what) {
    if (image.rank() != 3 || image.size(0) != 3 || image.size(1) < 1 || image.size(2) < 1)
        throw ArgumentError(what + " must be a (3,H,W) tensor, got " + shape_str(image.shape()));
}

struct FileCloser {
    FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

} // namespace

void write_png(const std::string& path, const Tensor& image) {
    check_image(image, "png image");
    int H = image.size(1), W = image.size(2);
    std::vector<uint8_t> bytes(static_cast<size_t>(H) * W * 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int ch = 0; ch < 3; ++ch)
                bytes[(static_cast<size_t>(y) * W + x) * 3 + ch] = to_byte(image.at(ch, y, x));

    std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "wb");
    if (!fc.f) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing " + path);
    }
    png_init_io(png, fc.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < H; ++y) png_write_row(png, bytes.data() + static_cast<size_t>(y) * W * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::string& path) {
    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialization failed");
    }
    std::vector<uint8_t> bytes;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng failed reading " + path);
    }
    png_init_io(png, fc.f);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    png_uint_32 W = png_get_image_width(png, info);
    png_uint_32 H = png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != static_cast<size_t>(W) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": unsupported pixel layout after RGB conversion");
    }
    bytes.resize(static_cast<size_t>(W) * H * 3);
    rows.resize(H);
    for (png_uint_32 y = 0; y < H; ++y) rows[y] = bytes.data() + static_cast<size_t>(y) * W * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor image({3, static_cast<int>(H), static_cast<int>(W)});
    for (png_uint_32 y = 0; y < H; ++y)
        for (png_uint_32 x = 0; x < W; ++x)
            for (int ch = 0; ch < 3; ++ch)
                image.at(ch, static_cast<int>(y), static_cast<int>(x)) =
                    bytes[(static_cast<size_t>(y) * W + x) * 3 + ch] / 255.0 * 2.0 - 1.0;
    quantize_f32(image);
    return image;
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
    check_image(image, "resize input");
    if (out_h < 1 || out_w < 1) throw ArgumentError("resize target must be positive");
    int H = image.size(1), W = image.size(2);
    if (H == out_h && W == out_w) return image;
    Tensor out({3, out_h, out_w});
    for (int y = 0; y < out_h; ++y) {
        double sy = (out_h == 1) ? 0.0 : (y + 0.5) * H / out_h - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(H - 1));
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, H - 1);
        double fy = sy - y0;
        for (int x = 0; x < out_w; ++x) {
            double sx = (out_w == 1) ? 0.0 : (x + 0.5) * W / out_w - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(W - 1));
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, W - 1);
            double fx = sx - x0;
            for (int ch = 0; ch < 3; ++ch) {
                double top = image.at(ch, y0, x0) * (1 - fx) + image.at(ch, y0, x1) * fx;
                double bot = image.at(ch, y1, x0) * (1 - fx) + image.at(ch, y1, x1) * fx;
                out.at(ch, y, x) = top * (1 - fy) + bot * fy;
            }
        }
    }
    return out;
}

Tensor center_crop_square(const Tensor& image) {
    check_image(image, "crop input");
    int H = image.size(1), W = image.size(2);
    if (H == W) return image;
    int side = std::min(H, W);
    int oy = (H - side) / 2, ox = (W - side) / 2;
    Tensor out({3, side, side});
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) out.at(ch, y, x) = image.at(ch, y + oy, x + ox);
    return out;
}

void write_image_grid(const std::string& path, const std::vector<Tensor>& images, int columns,
                      const std::vector<GridCellMeta>& meta) {
    if (images.empty()) throw ArgumentError("image grid needs at least one image");
    if (columns < 1) throw ArgumentError("image grid needs at least one column");
    if (!meta.empty() && meta.size() != images.size())
        throw ArgumentError("grid metadata count does not match image count");
    int H = images[0].size(1), W = images[0].size(2);
    for (const Tensor& img : images) {
        check_image(img, "grid cell");
        if (img.size(1) != H || img.size(2) != W) throw ArgumentError("grid cells must share a size");
    }
    int rows = (static_cast<int>(images.size()) + columns - 1) / columns;
    Tensor grid = Tensor::full({3, rows * H, columns * W}, -1.0);
    for (size_t i = 0; i < images.size(); ++i) {
        int r = static_cast<int>(i) / columns, c = static_cast<int>(i) % columns;
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    grid.at(ch, r * H + y, c * W + x) = images[i].at(ch, y, x);
    }
    write_png(path, grid);

    nlohmann::ordered_json sidecar;
    sidecar["rows"] = rows;
    sidecar["columns"] = columns;
    sidecar["cell_height"] = H;
    sidecar["cell_width"] = W;
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (size_t i = 0; i < meta.size(); ++i) {
        cells.push_back({{"row", static_cast<int>(i) / columns},
                         {"col", static_cast<int>(i) % columns},
                         {"seed", meta[i].seed},
                         {"condition", meta[i].condition},
                         {"alpha", meta[i].alpha},
                         {"kappa", meta[i].kappa}});
    }
    sidecar["cells"] = cells;
    std::ofstream f(path + ".json", std::ios::trunc);
    if (!f) throw IoError("cannot write " + path + ".json");
    f << sidecar.dump(2) << "\n";
}

DomainRegistry load_registry_from_folders(const std::string& root, int resolution) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError(root + " is not a directory");
    if (resolution < 1) throw ArgumentError("registry resolution must be positive");
    std::vector<fs::path> dirs;
    for (const fs::directory_entry& e : fs::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    DomainRegistry reg;
    reg.resolution = resolution;
    for (const fs::path& dir : dirs) {
        Domain d;
        d.id = dir.filename().string();
        d.contains_faces = fs::exists(dir / "contains_faces");
        std::vector<fs::path> files;
        for (const fs::directory_entry& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& file : files) {
            Tensor img = resize_bilinear(center_crop_square(read_png(file.string())), resolution, resolution);
            quantize_f32(img);
            d.images.push_back(std::move(img));
            d.image_paths.push_back(file.string());
        }
        if (d.images.empty()) throw IoError("domain folder " + dir.string() + " holds no .png images");
        reg.domains.push_back(std::move(d));
    }
    if (reg.domains.empty()) throw IoError(root + " holds no domain folders");
    return reg;
}

} // namespace ganmod
