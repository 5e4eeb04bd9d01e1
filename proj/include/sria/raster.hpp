#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sria/errors.hpp"

namespace sria {

using Rgb = std::array<std::uint8_t, 3>;
using Rgba = std::array<std::uint8_t, 4>;

struct Point {
    int x = 0;
    int y = 0;
    bool operator==(const Point&) const = default;
};

/// Dense row-major raster. The tag parameter keeps semantically different
/// rasters with the same pixel type (gray levels vs. mask bits) apart.
template <typename Pixel, typename Tag = void>
class Image {
public:
    using pixel_type = Pixel;

    Image() = default;
    Image(int width, int height, Pixel fill = Pixel{})
        : width_(width), height_(height) {
        if (width < 0 || height < 0) {
            throw InvalidArgument("image dimensions must be non-negative");
        }
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }
    Image(int width, int height, std::vector<Pixel> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width < 0 || height < 0 ||
            data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw InvalidArgument("image data length does not match width x height");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t size() const noexcept { return data_.size(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    Pixel& at(int x, int y) noexcept { return data_[index(x, y)]; }
    const Pixel& at(int x, int y) const noexcept { return data_[index(x, y)]; }

    std::span<Pixel> pixels() noexcept { return data_; }
    std::span<const Pixel> pixels() const noexcept { return data_; }

    bool same_shape(int w, int h) const noexcept { return width_ == w && height_ == h; }
    template <typename P, typename T>
    bool same_shape(const Image<P, T>& other) const noexcept {
        return same_shape(other.width(), other.height());
    }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Pixel> data_;
};

struct GrayTag;
struct MaskTag;

using GrayImage = Image<std::uint8_t, GrayTag>;
/// 0 = background, 1 = foreground.
using BinaryMask = Image<std::uint8_t, MaskTag>;
using SoftMask = Image<double>;
using RgbImage = Image<Rgb>;
using RgbaImage = Image<Rgba>;

/// Axis-aligned box, half-open on the max edges.
template <typename T>
struct Box {
    T x_min{};
    T y_min{};
    T x_max{};
    T y_max{};

    T width() const noexcept { return x_max - x_min; }
    T height() const noexcept { return y_max - y_min; }
    T area() const noexcept { return valid() ? width() * height() : T{}; }
    bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
    bool contains(T x, T y) const noexcept {
        return x >= x_min && x < x_max && y >= y_min && y < y_max;
    }
    Box translated(T dx, T dy) const noexcept {
        return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
    }
    bool operator==(const Box&) const = default;
};

using BoundingBox = Box<int>;
using BoxF = Box<double>;

inline BoxF to_boxf(const BoundingBox& b) {
    return {static_cast<double>(b.x_min), static_cast<double>(b.y_min),
            static_cast<double>(b.x_max), static_cast<double>(b.y_max)};
}

/// Tight box around every pixel for which `pred` holds; nullopt when none does.
template <typename Pixel, typename Tag, typename Pred>
std::optional<BoundingBox> tight_bounds(const Image<Pixel, Tag>& img, Pred pred) {
    int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (pred(img.at(x, y))) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        }
    }
    if (x1 < 0) return std::nullopt;
    return BoundingBox{x0, y0, x1 + 1, y1 + 1};
}

inline std::optional<BoundingBox> tight_bounds(const BinaryMask& mask) {
    return tight_bounds(mask, [](std::uint8_t v) { return v != 0; });
}

inline std::optional<BoundingBox> alpha_bounds(const RgbaImage& img) {
    return tight_bounds(img, [](const Rgba& p) { return p[3] != 0; });
}

template <typename Pixel, typename Tag>
Image<Pixel, Tag> crop(const Image<Pixel, Tag>& img, const BoundingBox& box) {
    Image<Pixel, Tag> out(box.width(), box.height());
    for (int y = 0; y < box.height(); ++y) {
        for (int x = 0; x < box.width(); ++x) {
            out.at(x, y) = img.at(box.x_min + x, box.y_min + y);
        }
    }
    return out;
}

}  // namespace sria
