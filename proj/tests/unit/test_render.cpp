#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "support.hpp"
#include "tsvlm/errors.hpp"
#include "tsvlm/render.hpp"

using namespace tsvlm;

namespace {

bool is_bg(const Image& img, int x, int y) {
    const auto c = img.at(x, y);
    return c.r == 255 && c.g == 255 && c.b == 255;
}

TimeSeries two_dim() {
    std::vector<double> a;
    std::vector<double> b;
    for (int t = 0; t < 40; ++t) {
        a.push_back(std::sin(t / 4.0) * 3.0);
        b.push_back(t / 10.0 - 1.0);
    }
    return {"golden", {a, b}, "x"};
}

} // namespace

TEST(Render, ConstantSeriesIsMidHeightLine) {
    const TimeSeries s{"c", {std::vector<double>(20, 4.2)}, "x"};
    const auto img = rasterize(s, {});
    ASSERT_EQ(img.width, 336);
    ASSERT_EQ(img.height, 336);
    const int mid = 336 / 2;
    EXPECT_FALSE(is_bg(img, 168, mid));
    EXPECT_FALSE(is_bg(img, 168, mid - 1));
    EXPECT_TRUE(is_bg(img, 168, mid - 4));
    EXPECT_TRUE(is_bg(img, 168, mid + 3));
    // Every painted pixel sits on the centre band.
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!is_bg(img, x, y)) {
                ASSERT_LE(std::abs(y - mid), 2) << x << "," << y;
            }
        }
    }
}

TEST(Render, Deterministic) {
    const auto s = two_dim();
    EXPECT_EQ(render_plot(s, {}), render_plot(s, {}));
    RenderConfig scatter;
    scatter.plot_type = PlotType::Scatter;
    EXPECT_EQ(render_plot(s, scatter), render_plot(s, scatter));
    EXPECT_NE(render_plot(s, scatter), render_plot(s, {}));
}

TEST(Render, GoldenTwoDimension) {
    const auto path = fixtures::data_dir() / "golden_2dim.png";
    const auto bytes = render_plot(two_dim(), {});
    if (std::getenv("TSVLM_UPDATE_GOLDEN") != nullptr) {
        fixtures::write_all(path, std::string(bytes.begin(), bytes.end()));
    }
    const auto golden = fixtures::read_all(path);
    ASSERT_FALSE(golden.empty()) << "missing " << path;
    const auto want = decode_png(std::vector<std::uint8_t>(golden.begin(), golden.end()));
    const auto got = rasterize(two_dim(), {});
    ASSERT_EQ(want.width, got.width);
    ASSERT_EQ(want.height, got.height);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < got.pixels.size(); ++i) {
        diff += want.pixels[i] != got.pixels[i];
    }
    EXPECT_EQ(diff, 0u);

    // Palette colours 0 and 1 are both present.
    const auto palette = RenderConfig::default_palette();
    bool seen0 = false;
    bool seen1 = false;
    for (int y = 0; y < got.height; ++y) {
        for (int x = 0; x < got.width; ++x) {
            const auto c = got.at(x, y);
            seen0 = seen0 || (c.r == palette[0].r && c.g == palette[0].g && c.b == palette[0].b);
            seen1 = seen1 || (c.r == palette[1].r && c.g == palette[1].g && c.b == palette[1].b);
        }
    }
    EXPECT_TRUE(seen0);
    EXPECT_TRUE(seen1);
}

TEST(Render, PngHasNoAncillaryChunks) {
    const auto bytes = render_plot(two_dim(), {});
    ASSERT_GT(bytes.size(), 8u);
    std::size_t pos = 8;
    std::vector<std::string> chunks;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = (std::uint32_t{bytes[pos]} << 24) | (std::uint32_t{bytes[pos + 1]} << 16) |
                                  (std::uint32_t{bytes[pos + 2]} << 8) | std::uint32_t{bytes[pos + 3]};
        chunks.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                            bytes.begin() + static_cast<std::ptrdiff_t>(pos + 8));
        pos += 12 + len;
    }
    for (const auto& c : chunks) {
        EXPECT_TRUE(c == "IHDR" || c == "IDAT" || c == "IEND") << c;
    }
    EXPECT_EQ(chunks.front(), "IHDR");
    EXPECT_EQ(chunks.back(), "IEND");
}

TEST(Render, GeometryEndpoints) {
    RenderConfig cfg;
    EXPECT_NEAR(x_coordinate(0, 50, cfg), 0.05 * 336, 1e-9);
    EXPECT_NEAR(x_coordinate(49, 50, cfg), 0.95 * 336, 1e-9);

    // The leftmost and rightmost painted columns sit within one pixel of the
    // mapped endpoints, padded by the disc radius.
    cfg.plot_type = PlotType::Scatter;
    cfg.point_radius = 0.5;
    const TimeSeries s{"g", {{0, 1, 0, 1, 0, 1}}, "x"};
    const auto img = rasterize(s, cfg);
    int left = img.width;
    int right = -1;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!is_bg(img, x, y)) {
                left = std::min(left, x);
                right = std::max(right, x);
            }
        }
    }
    EXPECT_LE(std::abs(left + 0.5 - 0.05 * 336), 1.0);
    EXPECT_LE(std::abs(right + 0.5 - 0.95 * 336), 1.0);
}

TEST(Render, ScatterAndLineShareCentres) {
    const TimeSeries s{"p", {{1, 5, 2, 8, 3}}, "x"};
    RenderConfig line;
    RenderConfig scatter;
    scatter.plot_type = PlotType::Scatter;
    const auto a = rasterize(s, line);
    const auto b = rasterize(s, scatter);
    for (std::size_t i = 0; i < 5; ++i) {
        const double x = x_coordinate(i, 5, line);
        const double y0 = 336 * (1 - 0.05);
        const double y1 = 336 * 0.05;
        const double y = y0 - (s.values[0][i] - 1.0) / 7.0 * (y0 - y1);
        const int px = static_cast<int>(std::floor(x));
        const int py = std::min(335, static_cast<int>(std::floor(y)));
        EXPECT_FALSE(is_bg(a, px, py)) << i;
        EXPECT_FALSE(is_bg(b, px, py)) << i;
    }
}

TEST(Render, JointYRangeAcrossDimensions) {
    // Second dimension spans a far wider range; the first must stay near the middle.
    const TimeSeries s{"j", {{0, 0.1, 0, 0.1}, {-10, 10, -10, 10}}, "x"};
    const auto img = rasterize(s, {});
    const auto blue = RenderConfig::default_palette()[0];
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto c = img.at(x, y);
            if (c.r == blue.r && c.g == blue.g && c.b == blue.b) {
                ASSERT_LT(std::abs(y - 168), 10);
            }
        }
    }
}

TEST(Render, Stacked) {
    RenderConfig cfg;
    cfg.layout = PanelLayout::Stacked;
    const auto img = rasterize(two_dim(), cfg);
    const auto orange = RenderConfig::default_palette()[1];
    for (int y = 0; y < img.height / 2; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto c = img.at(x, y);
            ASSERT_FALSE(c.r == orange.r && c.g == orange.g && c.b == orange.b);
        }
    }
}

TEST(Render, Errors) {
    EXPECT_THROW(rasterize({"e", {{1.0}}, "x"}, {}), RenderError);
    EXPECT_THROW(rasterize({"e", {{1.0, NAN}}, "x"}, {}), RenderError);
    RenderConfig small;
    small.width = 32;
    EXPECT_THROW(rasterize(two_dim(), small), RenderError);
    RenderConfig wide;
    wide.margin = 0.25;
    EXPECT_THROW(rasterize(two_dim(), wide), RenderError);
    EXPECT_THROW(decode_png({1, 2, 3}), RenderError);
}

TEST(ImagePath, Examples) {
    EXPECT_EQ(image_path("CinC_test_0007"), "images/CinC_test_0007.png");
    EXPECT_THROW(image_path(""), PathError);
    EXPECT_THROW(image_path("a/b"), PathError);
    EXPECT_THROW(image_path(".."), PathError);
    EXPECT_THROW(image_path("a b"), PathError);
}
