#include "tsvlm/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <limits>

#include "tsvlm/errors.hpp"

namespace tsvlm {

std::string_view to_string(PlotType p) noexcept {
    return p == PlotType::Line ? "line" : "scatter";
}

PlotType parse_plot_type(std::string_view s) {
    if (s == "line") {
        return PlotType::Line;
    }
    if (s == "scatter") {
        return PlotType::Scatter;
    }
    throw ConfigError("unknown plot type '" + std::string(s) + "'");
}

std::vector<Rgb> RenderConfig::default_palette() {
    return {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
            {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207}};
}

void RenderConfig::validate() const {
    if (width < 64 || height < 64) {
        throw RenderError("image must be at least 64x64 pixels");
    }
    if (!(margin >= 0.0 && margin < 0.25)) {
        throw RenderError("margin must be in [0, 0.25)");
    }
    if (!(stroke_width > 0.0) || !(point_radius > 0.0)) {
        throw RenderError("stroke width and point radius must be positive");
    }
    if (series_palette.empty()) {
        throw RenderError("palette is empty");
    }
}

Rgb Image::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

double x_coordinate(std::size_t index, std::size_t count, const RenderConfig& cfg) {
    const double w = static_cast<double>(cfg.width);
    if (count < 2) {
        return w / 2.0;
    }
    const double t = static_cast<double>(index) / static_cast<double>(count - 1);
    return cfg.margin * w + t * (1.0 - 2.0 * cfg.margin) * w;
}

namespace {

struct Point {
    double x;
    double y;
};

class Canvas {
public:
    Canvas(int w, int h, Rgb bg) : img_{w, h, {}} {
        img_.pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
        for (std::size_t i = 0; i < img_.pixels.size(); i += 3) {
            img_.pixels[i] = bg.r;
            img_.pixels[i + 1] = bg.g;
            img_.pixels[i + 2] = bg.b;
        }
    }

    // Fills every pixel whose center lies within `radius` of segment a-b.
    void segment(Point a, Point b, double radius, Rgb c) {
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        const double r2 = radius * radius;
        const int x0 = clamp_x(std::floor(std::min(a.x, b.x) - radius - 1.0));
        const int x1 = clamp_x(std::ceil(std::max(a.x, b.x) + radius + 1.0));
        const int y0 = clamp_y(std::floor(std::min(a.y, b.y) - radius - 1.0));
        const int y1 = clamp_y(std::ceil(std::max(a.y, b.y) + radius + 1.0));
        for (int py = y0; py <= y1; ++py) {
            for (int px = x0; px <= x1; ++px) {
                const double cx = px + 0.5;
                const double cy = py + 0.5;
                double t = len2 > 0.0 ? ((cx - a.x) * dx + (cy - a.y) * dy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ex = cx - (a.x + t * dx);
                const double ey = cy - (a.y + t * dy);
                if (ex * ex + ey * ey <= r2) {
                    set(px, py, c);
                }
            }
        }
    }

    void disc(Point p, double radius, Rgb c) { segment(p, p, radius, c); }

    Image take() && { return std::move(img_); }

private:
    int clamp_x(double v) const { return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(img_.width - 1))); }
    int clamp_y(double v) const { return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(img_.height - 1))); }

    void set(int x, int y, Rgb c) {
        const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(img_.width) + static_cast<std::size_t>(x)) * 3;
        img_.pixels[i] = c.r;
        img_.pixels[i + 1] = c.g;
        img_.pixels[i + 2] = c.b;
    }

    Image img_;
};

struct Band {
    double top;
    double bottom;
    double lo;
    double hi;
};

double y_coordinate(double v, const Band& band, double margin) {
    const double h = band.bottom - band.top;
    if (!(band.hi > band.lo)) {
        return (band.top + band.bottom) / 2.0;
    }
    const double y_top = band.top + margin * h;
    const double y_bottom = band.bottom - margin * h;
    return y_bottom - (v - band.lo) / (band.hi - band.lo) * (y_bottom - y_top);
}

} // namespace

Image rasterize(const TimeSeries& s, const RenderConfig& cfg) {
    cfg.validate();
    if (s.timesteps() < 2) {
        throw RenderError("series '" + s.id + "' needs at least 2 timesteps to plot");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& row : s.values) {
        if (row.size() != s.timesteps()) {
            throw RenderError("series '" + s.id + "' has ragged dimensions");
        }
        for (double v : row) {
            if (!std::isfinite(v)) {
                throw RenderError("series '" + s.id + "' has a non-finite value");
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    Canvas canvas(cfg.width, cfg.height, cfg.background);
    const double height = static_cast<double>(cfg.height);
    const std::size_t dims = s.dims();
    for (std::size_t d = 0; d < dims; ++d) {
        Band band{0.0, height, lo, hi};
        if (cfg.layout == PanelLayout::Stacked) {
            band.top = height * static_cast<double>(d) / static_cast<double>(dims);
            band.bottom = height * static_cast<double>(d + 1) / static_cast<double>(dims);
            const auto [mn, mx] = std::minmax_element(s.values[d].begin(), s.values[d].end());
            band.lo = *mn;
            band.hi = *mx;
        }
        const Rgb color = cfg.series_palette[d % cfg.series_palette.size()];
        const auto& row = s.values[d];
        const std::size_t n = row.size();
        auto point = [&](std::size_t i) { return Point{x_coordinate(i, n, cfg), y_coordinate(row[i], band, cfg.margin)}; };
        if (cfg.plot_type == PlotType::Line) {
            for (std::size_t i = 0; i + 1 < n; ++i) {
                canvas.segment(point(i), point(i + 1), cfg.stroke_width / 2.0, color);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                canvas.disc(point(i), cfg.point_radius, color);
            }
        }
    }
    return std::move(canvas).take();
}

namespace {

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) {
        throw RenderError("png_create_write_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RenderError("PNG encoding failed");
    }
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    const auto stride = static_cast<std::size_t>(img.width) * 3;
    for (int y = 0; y < img.height; ++y) {
        png_write_row(png, img.pixels.data() + static_cast<std::size_t>(y) * stride);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw RenderError(std::string("PNG decode failed: ") + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    Image img;
    img.width = static_cast<int>(image.width);
    img.height = static_cast<int>(image.height);
    img.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw RenderError(std::string("PNG decode failed: ") + image.message);
    }
    return img;
}

std::vector<std::uint8_t> render_plot(const TimeSeries& s, const RenderConfig& cfg) {
    return encode_png(rasterize(s, cfg));
}

std::string image_path(std::string_view record_id) {
    if (record_id.empty()) {
        throw PathError("record id is empty");
    }
    if (record_id == "." || record_id == "..") {
        throw PathError("record id '" + std::string(record_id) + "' is not a file name");
    }
    for (char c : record_id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        if (!ok) {
            throw PathError("record id '" + std::string(record_id) + "' contains unsafe characters");
        }
    }
    return "images/" + std::string(record_id) + ".png";
}

} // namespace tsvlm
