#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include <opencv2/imgcodecs.hpp>

#include "fixtures.hpp"
#include "planemvs/error.hpp"
#include "planemvs/visualize.hpp"

using namespace planemvs;

namespace {

int table_index(const Rgb8& c)
{
    const auto& t = viz::viridis();
    const auto it = std::find(t.begin(), t.end(), c);
    return it == t.end() ? -1 : static_cast<int>(it - t.begin());
}

} // namespace

TEST_CASE("the colormap runs from dark violet to yellow")
{
    const auto& t = viz::viridis();
    CHECK(t.front() == Rgb8{68, 1, 84});
    CHECK(t.back() == Rgb8{253, 231, 37});
    // Quantising to 8 bits merges two pairs of neighbouring entries.
    CHECK(std::set<Rgb8>(t.begin(), t.end()).size() >= 254);
    // Luminance rises along the table up to 8-bit rounding.
    const auto luma = [](const Rgb8& c) { return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]; };
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(luma(t[i]) > luma(t[i - 1]) - 0.5);
    }
    CHECK(luma(t.back()) - luma(t.front()) > 150.0);
}

TEST_CASE("constant depth becomes a single colour and invalid pixels stay black")
{
    DepthMap d(40, 30);
    for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 40; ++x) {
            if (x != y) {
                d.set(x, y, 3.0);
            }
        }
    }
    const ColorImage img = viz::colorize_depth(d);
    std::set<Rgb8> colours;
    for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 40; ++x) {
            if (x == y) {
                CHECK(img(x, y) == Rgb8{0, 0, 0});
            } else {
                colours.insert(img(x, y));
            }
        }
    }
    CHECK(colours.size() == 1);
}

TEST_CASE("percentile limits ignore rare outliers")
{
    DepthMap d(100, 100);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 100; ++x) {
            d.set(x, y, 1.0 + (y * 100 + x) / 10000.0);
        }
    }
    for (int i = 0; i < 100; ++i) {
        d.set(i, 50, i % 2 ? 1e6 : -1e6);
    }
    const auto r = viz::percentile_range(d);
    CHECK(r.lo > 1.0);
    CHECK(r.lo < 1.05);
    CHECK(r.hi > 1.95);
    CHECK(r.hi < 2.0);
    // Interior values still spread over most of the table.
    const ColorImage img = viz::colorize_depth(d);
    CHECK(table_index(img(0, 10)) < 40);
    CHECK(table_index(img(99, 90)) > 215);
    CHECK(table_index(img(50, 25)) > table_index(img(50, 20)));
}

TEST_CASE("a depth gradient yields a monotone colour progression")
{
    DepthMap d(256, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 256; ++x) {
            d.set(x, y, 2.0 + 0.01 * x);
        }
    }
    const ColorImage img = viz::colorize_depth(d);
    for (int y = 0; y < 8; ++y) {
        int last = -1;
        for (int x = 0; x < 256; ++x) {
            const int idx = table_index(img(x, y));
            REQUIRE(idx >= 0);
            CHECK(idx >= last);
            last = idx;
        }
        CHECK(table_index(img(0, y)) == 0);
        CHECK(table_index(img(255, y)) == 255);
    }
}

TEST_CASE("a raster without valid depth cannot be colourised")
{
    const DepthMap d(10, 10);
    try {
        viz::colorize_depth(d);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Degenerate);
    }
    CHECK_NOTHROW(viz::colorize_depth(d, viz::ValueRange{0.0, 1.0}));
}

TEST_CASE("PNG output keeps the colours")
{
    fixtures::TempDir tmp("viz_png");
    ColorImage img(3, 2, Rgb8{0, 0, 0});
    img(0, 0) = {255, 0, 0};
    img(2, 1) = {10, 20, 30};
    viz::write_png(tmp.path() / "a.png", img);
    const cv::Mat m = cv::imread((tmp.path() / "a.png").string(), cv::IMREAD_COLOR);
    REQUIRE(m.cols == 3);
    CHECK(m.at<cv::Vec3b>(0, 0) == cv::Vec3b(0, 0, 255));
    CHECK(m.at<cv::Vec3b>(1, 2) == cv::Vec3b(30, 20, 10));
}
