#pragma once

// Bare raster charts written as PNG: no text, just frame, data and a fixed palette.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace seismo::plot {

using Rgb = std::array<std::uint8_t, 3>;

// Distinct series colors, cycled.
Rgb palette(int i);

class Canvas {
public:
    Canvas(int width, int height, Rgb background = {255, 255, 255});

    int width() const { return w_; }
    int height() const { return h_; }
    void set(int x, int y, Rgb c);
    void line(int x0, int y0, int x1, int y1, Rgb c);
    void rect(int x0, int y0, int x1, int y1, Rgb c, bool filled);
    void dot(int x, int y, int radius, Rgb c);
    void save_png(const std::filesystem::path& file) const;

private:
    int w_, h_;
    std::vector<std::uint8_t> px_;
};

using Series = std::vector<std::pair<double, double>>;

void line_chart(const std::filesystem::path& file, std::span<const Series> series, bool log_x = false);
void scatter_chart(const std::filesystem::path& file, std::span<const Series> sets);
// One box per entry: (q1, median, q3, whisker_lo, whisker_hi).
void box_chart(const std::filesystem::path& file, std::span<const std::array<double, 5>> boxes);
// Row-major maps side by side, shared color scale [vmin, vmax].
void heatmaps(const std::filesystem::path& file, std::span<const std::vector<float>> maps, int height, int width,
              double vmin, double vmax, int scale = 4);

}  // namespace seismo::plot
