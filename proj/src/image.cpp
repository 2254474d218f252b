#include "adsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "adsr/error.hpp"

namespace adsr {

namespace {

std::vector<std::uint8_t> read_png(const std::string& path, int want_channels,
                                   int* width, int* height) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw Error("failed to read PNG " + path + ": " + img.message);
    img.format = want_channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error("failed to decode PNG " + path + ": " + img.message);
    }
    *width = static_cast<int>(img.width);
    *height = static_cast<int>(img.height);
    return buf;
}

void write_png(const std::string& path, const std::uint8_t* data, int width,
               int height, int channels) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = width;
    img.height = height;
    img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr))
        throw Error("failed to write PNG " + path + ": " + img.message);
}

}  // namespace

MaskGrid load_mask_png(const std::string& path) {
    int w, h;
    auto buf = read_png(path, 1, &w, &h);
    MaskGrid mask(w, h);
    std::copy(buf.begin(), buf.end(), mask.data.begin());
    return mask;
}

void save_mask_png(const MaskGrid& mask, const std::string& path) {
    write_png(path, mask.data.data(), mask.width, mask.height, 1);
}

ImageRGB load_image_png(const std::string& path) {
    int w, h;
    auto buf = read_png(path, 3, &w, &h);
    ImageRGB img(w, h);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = Eigen::Vector3f(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]) / 255.0f;
    return img;
}

void save_image_png(const ImageRGB& img, const std::string& path) {
    std::vector<std::uint8_t> buf(img.pixels.size() * 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c)
            buf[3 * i + c] = static_cast<std::uint8_t>(
                std::lround(std::clamp(img.pixels[i][c], 0.0f, 1.0f) * 255.0f));
    write_png(path, buf.data(), img.width, img.height, 3);
}

DepthGrid load_depth(const std::string& raster_path, const std::string& meta_path) {
    const std::string meta = meta_path.empty() ? raster_path + ".json" : meta_path;
    std::ifstream mf(meta);
    if (!mf) throw Error("cannot open depth meta " + meta);
    nlohmann::json j;
    try {
        mf >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed depth meta " + meta + ": " + e.what());
    }
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();

    std::ifstream rf(raster_path, std::ios::binary);
    if (!rf) throw Error("cannot open depth raster " + raster_path);
    rf.seekg(0, std::ios::end);
    const auto actual = static_cast<std::size_t>(rf.tellg());
    const std::size_t expected = 4ull * width * height;
    if (actual != expected)
        throw Error("depth raster " + raster_path + " size mismatch: expected " +
                    std::to_string(expected) + " bytes, got " + std::to_string(actual));
    rf.seekg(0);
    DepthGrid depth(width, height);
    rf.read(reinterpret_cast<char*>(depth.data.data()),
            static_cast<std::streamsize>(expected));
    if (!rf) throw Error("short read on depth raster " + raster_path);
    return depth;
}

void save_depth(const DepthGrid& depth, const std::string& raster_path,
                const std::string& meta_path) {
    std::ofstream rf(raster_path, std::ios::binary);
    if (!rf) throw Error("cannot write depth raster " + raster_path);
    rf.write(reinterpret_cast<const char*>(depth.data.data()),
             static_cast<std::streamsize>(depth.data.size() * 4));
    const std::string meta = meta_path.empty() ? raster_path + ".json" : meta_path;
    nlohmann::json j{{"width", depth.width}, {"height", depth.height}, {"units", "m"}};
    std::ofstream mf(meta);
    if (!mf) throw Error("cannot write depth meta " + meta);
    mf << j.dump(2) << "\n";
}

}  // namespace adsr
