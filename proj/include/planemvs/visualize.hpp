#pragma once

#include <array>
#include <filesystem>
#include <optional>

#include "planemvs/raster.hpp"

namespace planemvs::viz {

struct ValueRange {
    double lo = 0.0;
    double hi = 1.0;
};

/// The 256-entry viridis table, low to high (also shipped as data/viridis.txt).
const std::array<Rgb8, 256>& viridis();

/// Linearly interpolated percentiles of the valid depths. Throws Degenerate
/// when no pixel is valid.
ValueRange percentile_range(const DepthMap& depth, double lo_percent = 2.0, double hi_percent = 98.0);

/// Maps valid depths linearly over `range` (clamped) onto viridis; invalid
/// pixels are black. Uses percentile_range() when no range is given.
ColorImage colorize_depth(const DepthMap& depth, std::optional<ValueRange> range = std::nullopt);

void write_png(const std::filesystem::path& path, const ColorImage& image);

} // namespace planemvs::viz
