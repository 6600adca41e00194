#include "seismo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <stdexcept>

#include <png.h>

namespace seismo::plot {

Rgb palette(int i) {
    static constexpr std::array<Rgb, 6> kColors{{{31, 119, 180}, {214, 39, 40}, {44, 160, 44},
                                                 {255, 127, 14}, {148, 103, 189}, {23, 190, 207}}};
    return kColors[static_cast<std::size_t>(i) % kColors.size()];
}

Canvas::Canvas(int width, int height, Rgb background) : w_(width), h_(height), px_(3u * width * height) {
    if (width < 1 || height < 1) throw std::invalid_argument("canvas must be non-empty");
    for (std::size_t i = 0; i < px_.size(); i += 3) std::copy(background.begin(), background.end(), px_.begin() + i);
}

void Canvas::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::copy(c.begin(), c.end(), px_.begin() + 3 * (static_cast<std::size_t>(y) * w_ + x));
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::rect(int x0, int y0, int x1, int y1, Rgb c, bool filled) {
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    if (filled) {
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) set(x, y, c);
        return;
    }
    line(x0, y0, x1, y0, c);
    line(x1, y0, x1, y1, c);
    line(x1, y1, x0, y1, c);
    line(x0, y1, x0, y0, c);
}

void Canvas::dot(int x, int y, int radius, Rgb c) {
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) set(x + dx, y + dy, c);
}

void Canvas::save_png(const std::filesystem::path& file) const {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(file.c_str(), "wb"), &std::fclose);
    if (!fp) throw std::runtime_error("cannot write " + file.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + file.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w_, h_, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y)
        png_write_row(png, const_cast<png_bytep>(px_.data() + 3 * static_cast<std::size_t>(y) * w_));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {

constexpr int kW = 640, kH = 420, kMargin = 40;
constexpr Rgb kAxis{60, 60, 60};

struct Frame {
    double x0, x1, y0, y1;
    int px(double x) const { return kMargin + static_cast<int>(std::lround((x - x0) / (x1 - x0) * (kW - 2 * kMargin))); }
    int py(double y) const {
        return kH - kMargin - static_cast<int>(std::lround((y - y0) / (y1 - y0) * (kH - 2 * kMargin)));
    }
};

Frame fit_frame(std::span<const Series> series, bool log_x) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (auto [x, y] : s) {
            if (!std::isfinite(y)) continue;
            const double xx = log_x ? std::log10(x) : x;
            x0 = std::min(x0, xx);
            x1 = std::max(x1, xx);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (!std::isfinite(x0)) return {0, 1, 0, 1};
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    return {x0, x1, y0 - pad, y1 + pad};
}

void axes(Canvas& c) { c.rect(kMargin, kMargin, kW - kMargin, kH - kMargin, kAxis, false); }

// Viridis-like ramp from dark blue to yellow.
Rgb ramp(double t) {
    t = std::clamp(t, 0.0, 1.0);
    static constexpr std::array<std::array<double, 3>, 5> k{
        {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    const double s = t * 4.0;
    const int i = std::min(3, static_cast<int>(s));
    const double f = s - i;
    Rgb out;
    for (int ch = 0; ch < 3; ++ch) out[ch] = static_cast<std::uint8_t>(std::lround(k[i][ch] * (1 - f) + k[i + 1][ch] * f));
    return out;
}

}  // namespace

void line_chart(const std::filesystem::path& file, std::span<const Series> series, bool log_x) {
    Canvas c(kW, kH);
    axes(c);
    const Frame f = fit_frame(series, log_x);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const Rgb col = palette(static_cast<int>(s));
        bool have = false;
        int lx = 0, ly = 0;
        for (auto [x, y] : series[s]) {
            if (!std::isfinite(y)) {
                have = false;
                continue;
            }
            const int px = f.px(log_x ? std::log10(x) : x), py = f.py(y);
            if (have) c.line(lx, ly, px, py, col);
            c.dot(px, py, 2, col);
            lx = px;
            ly = py;
            have = true;
        }
    }
    c.save_png(file);
}

void scatter_chart(const std::filesystem::path& file, std::span<const Series> sets) {
    Canvas c(kW, kH);
    axes(c);
    const Frame f = fit_frame(sets, false);
    for (std::size_t s = 0; s < sets.size(); ++s)
        for (auto [x, y] : sets[s]) c.dot(f.px(x), f.py(y), 2, palette(static_cast<int>(s)));
    c.save_png(file);
}

void box_chart(const std::filesystem::path& file, std::span<const std::array<double, 5>> boxes) {
    Canvas c(kW, kH);
    axes(c);
    if (boxes.empty()) {
        c.save_png(file);
        return;
    }
    Series ys;
    for (const auto& b : boxes) {
        ys.push_back({0.0, b[3]});
        ys.push_back({1.0, b[4]});
    }
    const std::vector<Series> one{ys};
    const Frame f = fit_frame(one, false);
    const double slot = static_cast<double>(kW - 2 * kMargin) / boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        const Rgb col = palette(static_cast<int>(i));
        const int cx = kMargin + static_cast<int>((i + 0.5) * slot), half = static_cast<int>(slot * 0.25);
        c.rect(cx - half, f.py(b[0]), cx + half, f.py(b[2]), col, false);
        c.line(cx - half, f.py(b[1]), cx + half, f.py(b[1]), col);
        c.line(cx, f.py(b[0]), cx, f.py(b[3]), col);
        c.line(cx, f.py(b[2]), cx, f.py(b[4]), col);
        c.line(cx - half / 2, f.py(b[3]), cx + half / 2, f.py(b[3]), col);
        c.line(cx - half / 2, f.py(b[4]), cx + half / 2, f.py(b[4]), col);
    }
    c.save_png(file);
}

void heatmaps(const std::filesystem::path& file, std::span<const std::vector<float>> maps, int height, int width,
              double vmin, double vmax, int scale) {
    if (maps.empty()) throw std::invalid_argument("heatmaps: nothing to draw");
    const int gap = 4;
    const int n = static_cast<int>(maps.size());
    Canvas c(n * width * scale + (n + 1) * gap, height * scale + 2 * gap);
    const double span = vmax > vmin ? vmax - vmin : 1.0;
    for (int m = 0; m < n; ++m) {
        if (maps[m].size() != static_cast<std::size_t>(height) * width)
            throw std::invalid_argument("heatmaps: map size mismatch");
        const int ox = gap + m * (width * scale + gap);
        for (int r = 0; r < height; ++r)
            for (int col = 0; col < width; ++col) {
                const Rgb px = ramp((maps[m][static_cast<std::size_t>(r) * width + col] - vmin) / span);
                c.rect(ox + col * scale, gap + r * scale, ox + (col + 1) * scale - 1, gap + (r + 1) * scale - 1, px,
                       true);
            }
    }
    c.save_png(file);
}

}  // namespace seismo::plot
