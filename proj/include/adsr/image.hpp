#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adsr/transform.hpp"

namespace adsr {

/// Row-major 2D grid; (x, y) with y down, index y*width + x.
template <typename T>
struct Grid {
    int width = 0, height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(std::size_t(w) * h, fill) {}

    T& at(int x, int y) { return data[std::size_t(y) * width + x]; }
    const T& at(int x, int y) const { return data[std::size_t(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t size() const { return data.size(); }
};

using DepthGrid = Grid<float>;
using MaskGrid = Grid<std::uint8_t>;

/// RGB image, channels in [0,1].
struct ImageRGB {
    int width = 0, height = 0;
    std::vector<Eigen::Vector3f> pixels;

    ImageRGB() = default;
    ImageRGB(int w, int h, Eigen::Vector3f fill = Eigen::Vector3f::Zero())
        : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

    Eigen::Vector3f& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
    const Eigen::Vector3f& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
};

// PNG IO (8-bit). Gray PNGs carry mask ids, RGB PNGs carry color.
MaskGrid load_mask_png(const std::string& path);
void save_mask_png(const MaskGrid& mask, const std::string& path);
ImageRGB load_image_png(const std::string& path);
void save_image_png(const ImageRGB& img, const std::string& path);

// Raw little-endian f32 depth with JSON sidecar {width, height, units:"m"}.
// meta_path defaults to raster_path + ".json" when empty.
DepthGrid load_depth(const std::string& raster_path, const std::string& meta_path = "");
void save_depth(const DepthGrid& depth, const std::string& raster_path,
                const std::string& meta_path = "");

}  // namespace adsr
