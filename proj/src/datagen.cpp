#include "seismo/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <regex>
#include <stdexcept>

#include "seismo/io.hpp"

namespace seismo::datagen {

bool is_valid_year(int year) { return year >= kFirstYear && year <= kLastYear && year % kFirstYear == 0; }

void GeneratorConfig::validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("grid dimensions must be positive");
    for (double v : layer_velocity)
        if (!(v > 0.0)) throw std::invalid_argument("layer velocities must be positive");
    if (layer_velocity[0] > layer_velocity[1] || layer_velocity[1] > layer_velocity[2])
        throw std::invalid_argument("velocity inversion with depth");
    if (layer_top[0] <= 0 || layer_top[1] <= layer_top[0]) throw std::invalid_argument("layer depths must increase");
    if (layer_top[1] >= height) throw std::invalid_argument("layer depth exceeds grid height");
    if (max_reduction < 0.0 || max_reduction >= 1.0) throw std::invalid_argument("max_reduction must be in [0,1)");
    if (mass_per_cell < 0.0) throw std::invalid_argument("mass_per_cell must be non-negative");
    if (support_threshold < 0.0) throw std::invalid_argument("support_threshold must be non-negative");
}

std::string to_string(LeakClass c) {
    switch (c) {
        case LeakClass::Tiny: return "tiny";
        case LeakClass::Small: return "small";
        case LeakClass::Medium: return "medium";
        case LeakClass::Large: return "large";
    }
    return "unknown";
}

LeakClass classify_leak(double mass_kg) {
    if (!(mass_kg >= 0.0)) throw std::invalid_argument("leak mass must be non-negative");
    if (mass_kg < kClassBounds[0]) return LeakClass::Tiny;
    if (mass_kg < kClassBounds[1]) return LeakClass::Small;
    if (mass_kg < kClassBounds[2]) return LeakClass::Medium;
    return LeakClass::Large;
}

bool is_small_leak(LeakClass c) { return c == LeakClass::Tiny || c == LeakClass::Small; }

BaselineMap generate_baseline(const GeneratorConfig& config) {
    config.validate();
    BaselineMap b{config.height, config.width, {}};
    b.grid.resize(static_cast<std::size_t>(config.height) * config.width);
    for (int r = 0; r < config.height; ++r) {
        const int layer = r < config.layer_top[0] ? 0 : (r < config.layer_top[1] ? 1 : 2);
        std::fill_n(b.grid.begin() + static_cast<std::ptrdiff_t>(r) * config.width, config.width,
                    static_cast<float>(config.layer_velocity[layer]));
    }
    return b;
}

namespace {

struct Blob {
    double row, col;
    double sigma_along, sigma_across;
};

// Truncated Gaussian: 1 at the centre, exactly 0 beyond three sigma.
double blob_value(const Blob& b, double dir_r, double dir_c, double r, double c) {
    const double dr = r - b.row, dc = c - b.col;
    const double along = dr * dir_r + dc * dir_c;
    const double across = -dr * dir_c + dc * dir_r;
    const double q = (along * along) / (b.sigma_along * b.sigma_along) +
                     (across * across) / (b.sigma_across * b.sigma_across);
    constexpr double cutoff = 9.0;
    if (q >= cutoff) return 0.0;
    const double floor = std::exp(-0.5 * cutoff);
    return (std::exp(-0.5 * q) - floor) / (1.0 - floor);
}

}  // namespace

LeakageScenario generate_scenario(std::uint64_t seed, const BaselineMap& baseline, const GeneratorConfig& config,
                                  int scenario_id) {
    config.validate();
    if (baseline.height != config.height || baseline.width != config.width)
        throw std::invalid_argument("baseline dimensions do not match generator config");

    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x5eed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double well_row = std::floor(0.5 * (config.layer_top[0] + config.layer_top[1]));
    const double well_col = std::floor(config.width * (0.25 + 0.5 * unit(rng)));
    // Buoyant migration: upward half-plane, mostly lateral.
    const double theta = std::numbers::pi * (1.0 + unit(rng));
    const double dir_r = std::sin(theta), dir_c = std::cos(theta);
    const double strength =
        std::min(config.max_strength, std::exp(config.strength_log_mean + config.strength_log_sd * normal(rng)));

    LeakageScenario s;
    s.scenario_id = scenario_id;
    s.seed = seed;
    const std::size_t cells = static_cast<std::size_t>(config.height) * config.width;
    std::vector<double> intensity(cells, 0.0);

    for (int k = 0; k < kNumYears; ++k) {
        const int year = year_at(k);
        const double u = static_cast<double>(year) / kLastYear;
        const double sigma = std::max(0.25, config.extent_scale * strength * std::pow(u, config.extent_power));
        const Blob blob{well_row + dir_r * sigma, well_col + dir_c * sigma, sigma,
                        std::max(0.25, config.across_ratio * sigma)};
        const int r0 = std::max(0, static_cast<int>(std::floor(blob.row - 3.0 * sigma)) - 1);
        const int r1 = std::min(config.height - 1, static_cast<int>(std::ceil(blob.row + 3.0 * sigma)) + 1);
        const int c0 = std::max(0, static_cast<int>(std::floor(blob.col - 3.0 * sigma)) - 1);
        const int c1 = std::min(config.width - 1, static_cast<int>(std::ceil(blob.col + 3.0 * sigma)) + 1);
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) {
                auto& v = intensity[static_cast<std::size_t>(r) * config.width + c];
                v = std::max(v, blob_value(blob, dir_r, dir_c, r, c));
            }

        VelocityMap m{config.height, config.width, std::vector<float>(cells), year, scenario_id, 0.0};
        int support = 0;
        for (std::size_t i = 0; i < cells; ++i) {
            const double base = baseline.grid[i];
            m.grid[i] = static_cast<float>(base * (1.0 - config.max_reduction * intensity[i]));
            if (static_cast<double>(baseline.grid[i]) - static_cast<double>(m.grid[i]) > config.support_threshold)
                ++support;
        }
        m.leak_mass = support * config.mass_per_cell;
        s.mass_trajectory[k] = m.leak_mass;
        s.maps.push_back(std::move(m));
    }
    return s;
}

int plume_area(const VelocityMap& map, const BaselineMap& baseline, double threshold) {
    int n = 0;
    for (std::size_t i = 0; i < map.grid.size(); ++i)
        if (static_cast<double>(baseline.grid[i]) - static_cast<double>(map.grid[i]) > threshold) ++n;
    return n;
}

Split split_dataset(std::span<const int> scenario_ids, double train_fraction, std::uint64_t seed) {
    if (scenario_ids.size() < 2) throw std::invalid_argument("split_dataset needs at least two scenarios");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    std::vector<int> ids(scenario_ids.begin(), scenario_ids.end());
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit draw so the permutation does not depend on
    // the standard library's shuffle implementation.
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        const std::size_t j = rng() % (i + 1);
        std::swap(ids[i], ids[j]);
    }
    const long n = static_cast<long>(ids.size());
    const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
    Split out;
    out.train_ids.assign(ids.begin(), ids.begin() + n_train);
    out.test_ids.assign(ids.begin() + n_train, ids.end());
    std::sort(out.train_ids.begin(), out.train_ids.end());
    std::sort(out.test_ids.begin(), out.test_ids.end());
    return out;
}

MassHistogram mass_histogram(std::span<const LeakageScenario> scenarios, int bins) {
    if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    MassHistogram h;
    std::vector<double> masses;
    for (const auto& s : scenarios)
        for (const auto& m : s.maps) masses.push_back(m.leak_mass);
    const double top = masses.empty() ? 0.0 : *std::max_element(masses.begin(), masses.end());
    const double width = top > 0.0 ? top / bins : 0.0;
    for (int b = 0; b < bins; ++b) {
        h.bin_lo.push_back(b * width);
        h.bin_hi.push_back(b + 1 == bins ? top : (b + 1) * width);
    }
    h.count.assign(bins, 0);
    std::array<long, 4> per_class{};
    for (double m : masses) {
        int b = width > 0.0 ? static_cast<int>(m / width) : 0;
        h.count[std::min(b, bins - 1)]++;
        per_class[static_cast<int>(classify_leak(m))]++;
    }
    h.total = static_cast<long>(masses.size());
    for (int c = 0; c < 4; ++c)
        h.class_fraction[c] = h.total > 0 ? static_cast<double>(per_class[c]) / static_cast<double>(h.total) : 0.0;
    return h;
}

std::filesystem::path scenario_path(const std::filesystem::path& dir, int id) {
    return dir / ("scenario_" + std::to_string(id) + ".f32");
}

void save_scenario(const std::filesystem::path& dir, const LeakageScenario& s) {
    if (s.maps.size() != kNumYears) throw std::invalid_argument("scenario must hold 20 maps");
    const int h = s.maps.front().height, w = s.maps.front().width;
    std::vector<float> flat;
    flat.reserve(static_cast<std::size_t>(kNumYears) * h * w);
    for (const auto& m : s.maps) flat.insert(flat.end(), m.grid.begin(), m.grid.end());
    const auto data = scenario_path(dir, s.scenario_id);
    io::write_f32(data, flat);

    std::vector<int> years;
    for (const auto& m : s.maps) years.push_back(m.year);
    io::Meta meta;
    meta.put("scenario.id", s.scenario_id);
    meta.put("scenario.seed", s.seed);
    meta.put("scenario.maps", kNumYears);
    meta.put("scenario.height", h);
    meta.put("scenario.width", w);
    meta.put("scenario.dtype", "f32le");
    meta.put("scenario.years", io::join(std::span<const int>(years)));
    meta.put("scenario.masses", io::join(std::span<const double>(s.mass_trajectory)));
    auto sidecar = data;
    io::write_meta(sidecar.replace_extension(".meta"), meta);
}

LeakageScenario load_scenario(const std::filesystem::path& dir, int id) {
    auto data = scenario_path(dir, id);
    auto sidecar = data;
    const auto meta = io::read_meta(sidecar.replace_extension(".meta"));
    const int h = meta.get<int>("scenario.height"), w = meta.get<int>("scenario.width");
    const auto years = io::split_ints(meta.get<std::string>("scenario.years"));
    const auto masses = io::split_doubles(meta.get<std::string>("scenario.masses"));
    const auto flat = io::read_f32(data);
    if (years.size() != kNumYears || masses.size() != kNumYears ||
        flat.size() != static_cast<std::size_t>(kNumYears) * h * w)
        throw std::runtime_error("scenario " + std::to_string(id) + ": sidecar does not match data file");
    LeakageScenario s;
    s.scenario_id = meta.get<int>("scenario.id");
    s.seed = meta.get<std::uint64_t>("scenario.seed");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int k = 0; k < kNumYears; ++k) {
        VelocityMap m{h, w, std::vector<float>(flat.begin() + k * plane, flat.begin() + (k + 1) * plane), years[k],
                      s.scenario_id, masses[k]};
        s.mass_trajectory[k] = masses[k];
        s.maps.push_back(std::move(m));
    }
    return s;
}

std::vector<int> list_scenarios(const std::filesystem::path& dir) {
    static const std::regex pattern(R"(scenario_(\d+)\.f32)");
    std::vector<int> ids;
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (std::regex_match(name, m, pattern)) ids.push_back(std::stoi(m[1].str()));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void save_baseline(const std::filesystem::path& file, const BaselineMap& b) {
    io::write_f32(file, b.grid);
    io::Meta meta;
    meta.put("baseline.height", b.height);
    meta.put("baseline.width", b.width);
    meta.put("baseline.dtype", "f32le");
    auto sidecar = file;
    io::write_meta(sidecar.replace_extension(".meta"), meta);
}

BaselineMap load_baseline(const std::filesystem::path& file) {
    auto sidecar = file;
    const auto meta = io::read_meta(sidecar.replace_extension(".meta"));
    BaselineMap b{meta.get<int>("baseline.height"), meta.get<int>("baseline.width"), io::read_f32(file)};
    if (b.grid.size() != static_cast<std::size_t>(b.height) * b.width)
        throw std::runtime_error("baseline sidecar does not match data file");
    return b;
}

void write_histogram_csv(const std::filesystem::path& file, const MassHistogram& h) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + file.string());
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < h.count.size(); ++b)
        out << io::format_double(h.bin_lo[b]) << ',' << io::format_double(h.bin_hi[b]) << ',' << h.count[b] << '\n';
}

}  // namespace seismo::datagen
