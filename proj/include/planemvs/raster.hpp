#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace planemvs {

/// Row-major 2D grid. Element (x, y) lives at index y * width + x.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, const T& fill = T{})
        : width_(width), height_(height),
          values_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill)
    {
        assert(width >= 0 && height >= 0);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::size_t index(int x, int y) const noexcept
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    T& operator()(int x, int y) noexcept { return values_[index(x, y)]; }
    const T& operator()(int x, int y) const noexcept { return values_[index(x, y)]; }

    T& operator[](std::size_t i) noexcept { return values_[i]; }
    const T& operator[](std::size_t i) const noexcept { return values_[i]; }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    /// True when (x, y) lies in the closed pixel-centre rectangle [0, w-1] x [0, h-1].
    bool contains(double x, double y) const noexcept
    {
        return x >= 0.0 && y >= 0.0 && x <= width_ - 1 && y <= height_ - 1;
    }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    bool operator==(const Raster&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> values_;
};

/// Intensities in [0, 1].
using GrayImage = Raster<float>;
using Rgb8 = std::array<std::uint8_t, 3>;
using ColorImage = Raster<Rgb8>;

/// Bilinear sample at a point inside [0, w-1] x [0, h-1].
inline float sample_bilinear(const GrayImage& img, double x, double y) noexcept
{
    const int x0 = std::clamp(static_cast<int>(x), 0, std::max(img.width() - 2, 0));
    const int y0 = std::clamp(static_cast<int>(y), 0, std::max(img.height() - 2, 0));
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img(x0, y0) + fx * (img(x1, y0) - img(x0, y0));
    const double bottom = img(x0, y1) + fx * (img(x1, y1) - img(x0, y1));
    return static_cast<float>(top + fy * (bottom - top));
}

/// Depth raster with an explicit validity flag per pixel. Depth is stored in
/// double precision in memory; files carry float32 with NaN for invalid.
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height) : depth_(width, height, 0.0), valid_(width, height, 0) {}

    int width() const noexcept { return depth_.width(); }
    int height() const noexcept { return depth_.height(); }

    bool is_valid(int x, int y) const noexcept { return valid_(x, y) != 0; }

    std::optional<double> at(int x, int y) const noexcept
    {
        if (!valid_(x, y)) {
            return std::nullopt;
        }
        return depth_(x, y);
    }

    /// Raw depth; meaningful only where is_valid().
    double raw(int x, int y) const noexcept { return depth_(x, y); }

    void set(int x, int y, double depth) noexcept
    {
        depth_(x, y) = depth;
        valid_(x, y) = 1;
    }

    void invalidate(int x, int y) noexcept
    {
        depth_(x, y) = 0.0;
        valid_(x, y) = 0;
    }

    /// Bilinear read at a sub-pixel position. Returns nullopt outside
    /// [0, w-1] x [0, h-1] or when any contributing tap is invalid.
    std::optional<double> sample_bilinear(double x, double y) const noexcept
    {
        if (!depth_.contains(x, y)) {
            return std::nullopt;
        }
        const int x0 = static_cast<int>(x);
        const int y0 = static_cast<int>(y);
        const double fx = x - x0;
        const double fy = y - y0;
        const int x1 = fx > 0.0 ? x0 + 1 : x0;
        const int y1 = fy > 0.0 ? y0 + 1 : y0;
        if (!valid_(x0, y0) || !valid_(x1, y0) || !valid_(x0, y1) || !valid_(x1, y1)) {
            return std::nullopt;
        }
        const double top = depth_(x0, y0) + fx * (depth_(x1, y0) - depth_(x0, y0));
        const double bottom = depth_(x0, y1) + fx * (depth_(x1, y1) - depth_(x0, y1));
        return top + fy * (bottom - top);
    }

    /// Bilinear read of 1/depth, returned as a depth. Exact on planar
    /// surfaces, whose inverse depth is affine in the image.
    std::optional<double> sample_inverse_bilinear(double x, double y) const noexcept
    {
        if (!depth_.contains(x, y)) {
            return std::nullopt;
        }
        const int x0 = static_cast<int>(x);
        const int y0 = static_cast<int>(y);
        const double fx = x - x0;
        const double fy = y - y0;
        const int x1 = fx > 0.0 ? x0 + 1 : x0;
        const int y1 = fy > 0.0 ? y0 + 1 : y0;
        if (!valid_(x0, y0) || !valid_(x1, y0) || !valid_(x0, y1) || !valid_(x1, y1)) {
            return std::nullopt;
        }
        const double i00 = 1.0 / depth_(x0, y0);
        const double i10 = 1.0 / depth_(x1, y0);
        const double i01 = 1.0 / depth_(x0, y1);
        const double i11 = 1.0 / depth_(x1, y1);
        const double top = i00 + fx * (i10 - i00);
        const double bottom = i01 + fx * (i11 - i01);
        return 1.0 / (top + fy * (bottom - top));
    }

    std::size_t valid_count() const noexcept
    {
        std::size_t n = 0;
        for (auto v : valid_.values()) {
            n += v;
        }
        return n;
    }

    bool operator==(const DepthMap&) const = default;

private:
    Raster<double> depth_;
    Raster<std::uint8_t> valid_;
};

} // namespace planemvs
