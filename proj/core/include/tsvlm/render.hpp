#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tsvlm/corpus.hpp"

namespace tsvlm {

enum class PlotType { Line, Scatter };
enum class PanelLayout { Overlay, Stacked };

std::string_view to_string(PlotType p) noexcept;
PlotType parse_plot_type(std::string_view s);

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

struct RenderConfig {
    int width = 336;
    int height = 336;
    PlotType plot_type = PlotType::Line;
    double stroke_width = 2.0;
    double point_radius = 2.0;
    double margin = 0.05;
    Rgb background{255, 255, 255};
    std::vector<Rgb> series_palette = default_palette();
    PanelLayout layout = PanelLayout::Overlay;

    // Throws RenderError unless width, height >= 64, margin in [0, 0.25),
    // positive stroke/radius and a non-empty palette.
    void validate() const;

    static std::vector<Rgb> default_palette();
};

// 8-bit RGB raster, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Rgb at(int x, int y) const;
    bool operator==(const Image&) const = default;
};

// Rasterizes the series without axes, ticks, text or legends.
Image rasterize(const TimeSeries& s, const RenderConfig& cfg);

// PNG (8-bit RGB, no ancillary chunks) of rasterize(s, cfg).
std::vector<std::uint8_t> render_plot(const TimeSeries& s, const RenderConfig& cfg);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);

// Continuous pixel coordinate of sample `index` out of `count`.
double x_coordinate(std::size_t index, std::size_t count, const RenderConfig& cfg);

// "images/<record_id>.png"; throws PathError on empty or unsafe ids.
std::string image_path(std::string_view record_id);

} // namespace tsvlm
