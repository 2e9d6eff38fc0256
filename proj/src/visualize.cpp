#include "planemvs/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "planemvs/error.hpp"

namespace planemvs::viz {

const std::array<Rgb8, 256>& viridis()
{
    static const std::array<Rgb8, 256> table = {{
#include "viridis_table.inc"
    }};
    return table;
}

ValueRange percentile_range(const DepthMap& depth, double lo_percent, double hi_percent)
{
    if (!(lo_percent >= 0.0 && lo_percent <= hi_percent && hi_percent <= 100.0)) {
        throw Error(ErrorKind::InvalidArgument, "percentiles must satisfy 0 <= lo <= hi <= 100");
    }
    std::vector<double> values;
    values.reserve(depth.valid_count());
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            if (const auto d = depth.at(x, y)) {
                values.push_back(*d);
            }
        }
    }
    if (values.empty()) {
        throw Error(ErrorKind::Degenerate, "depth raster has no valid pixel");
    }
    std::sort(values.begin(), values.end());
    const auto at = [&](double percent) {
        const double pos = percent / 100.0 * static_cast<double>(values.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const std::size_t j = std::min(i + 1, values.size() - 1);
        return values[i] + (pos - static_cast<double>(i)) * (values[j] - values[i]);
    };
    return {at(lo_percent), at(hi_percent)};
}

ColorImage colorize_depth(const DepthMap& depth, std::optional<ValueRange> range)
{
    const ValueRange r = range ? *range : percentile_range(depth);
    const auto& table = viridis();
    const double span = r.hi - r.lo;
    ColorImage out(depth.width(), depth.height(), Rgb8{0, 0, 0});
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            const auto d = depth.at(x, y);
            if (!d) {
                continue;
            }
            const double t = span > 0.0 ? std::clamp((*d - r.lo) / span, 0.0, 1.0) : 0.0;
            out(x, y) = table[static_cast<std::size_t>(std::lround(t * 255.0))];
        }
    }
    return out;
}

void write_png(const std::filesystem::path& path, const ColorImage& image)
{
    cv::Mat mat(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            const Rgb8& c = image(x, y);
            row[x] = cv::Vec3b(c[2], c[1], c[0]);
        }
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
}

} // namespace planemvs::viz
