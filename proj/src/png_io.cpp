#include "sria/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <memory>

namespace sria::png {
namespace {

struct ImageGuard {
    png_image* image;
    ~ImageGuard() { png_image_free(image); }
};

RgbaImage decode_rgba(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    ImageGuard guard{&image};

    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw DataError("cannot read PNG '" + path.string() + "': " + image.message);
    }
    image.format = PNG_FORMAT_RGBA;
    const auto width = static_cast<int>(image.width);
    const auto height = static_cast<int>(image.height);
    if (width < 1 || height < 1) {
        throw DataError("PNG '" + path.string() + "' has an empty raster");
    }
    std::vector<Rgba> buffer(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        throw DataError("cannot decode PNG '" + path.string() + "': " + image.message);
    }
    return RgbaImage(width, height, std::move(buffer));
}

std::uint8_t luma(const Rgba& p) {
    const double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    return static_cast<std::uint8_t>(std::lround(y));
}

template <typename Pixel>
void encode(const std::filesystem::path& path, int width, int height, png_uint_32 format,
            const Pixel* data) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    ImageGuard guard{&image};
    if (width < 1 || height < 1) {
        throw InvalidArgument("refusing to write empty raster to '" + path.string() + "'");
    }
    if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr)) {
        throw DataError("cannot write PNG '" + path.string() + "': " + image.message);
    }
}

}  // namespace

GrayImage read_gray(const std::filesystem::path& path) {
    const auto rgba = decode_rgba(path);
    GrayImage out(rgba.width(), rgba.height());
    auto dst = out.pixels();
    auto src = rgba.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const auto& p = src[i];
        dst[i] = (p[0] == p[1] && p[1] == p[2]) ? p[0] : luma(p);
    }
    return out;
}

RgbImage read_rgb(const std::filesystem::path& path) {
    const auto rgba = decode_rgba(path);
    RgbImage out(rgba.width(), rgba.height());
    auto dst = out.pixels();
    auto src = rgba.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = {src[i][0], src[i][1], src[i][2]};
    }
    return out;
}

RgbaImage read_rgba(const std::filesystem::path& path) { return decode_rgba(path); }

BinaryMask read_mask(const std::filesystem::path& path) {
    const auto gray = read_gray(path);
    BinaryMask out(gray.width(), gray.height());
    auto dst = out.pixels();
    auto src = gray.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] >= 128 ? 1 : 0;
    }
    return out;
}

void write(const std::filesystem::path& path, const GrayImage& img) {
    encode(path, img.width(), img.height(), PNG_FORMAT_GRAY, img.pixels().data());
}

void write(const std::filesystem::path& path, const RgbImage& img) {
    encode(path, img.width(), img.height(), PNG_FORMAT_RGB, img.pixels().data());
}

void write(const std::filesystem::path& path, const RgbaImage& img) {
    encode(path, img.width(), img.height(), PNG_FORMAT_RGBA, img.pixels().data());
}

void write(const std::filesystem::path& path, const BinaryMask& mask) {
    GrayImage gray(mask.width(), mask.height());
    auto dst = gray.pixels();
    auto src = mask.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] ? 255 : 0;
    }
    write(path, gray);
}

}  // namespace sria::png
