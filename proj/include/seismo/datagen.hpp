#pragma once

// Procedural time-lapse CO2 leakage scenarios on a three-layer velocity model.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace seismo::datagen {

inline constexpr int kNumYears = 20;
inline constexpr int kFirstYear = 10;
inline constexpr int kLastYear = 200;

constexpr int year_at(int index) { return kFirstYear * (index + 1); }
constexpr int year_index(int year) { return year / kFirstYear - 1; }
bool is_valid_year(int year);

struct GeneratorConfig {
    int height = 64;
    int width = 64;
    std::array<double, 3> layer_velocity{1800.0, 2400.0, 3000.0};  // m/s, top to bottom
    std::array<int, 2> layer_top{22, 43};                          // first row of layers 2 and 3
    double max_reduction = 0.15;                                   // peak multiplicative velocity drop
    double support_threshold = 1.0;                                // m/s deviation counted as plume
    double mass_per_cell = 1.0e6;                                  // kg per plume cell
    // Plume extent: sigma(t) = extent_scale * strength * (t / 200)^extent_power,
    // strength ~ lognormal(strength_log_mean, strength_log_sd).
    double extent_scale = 3.0;
    double extent_power = 0.75;
    double strength_log_mean = 0.0;
    double strength_log_sd = 0.7;
    double max_strength = 2.5;
    double across_ratio = 0.55;  // cross-direction width relative to along-direction width

    void validate() const;
};

struct BaselineMap {
    int height = 0;
    int width = 0;
    std::vector<float> grid;  // row-major, m/s

    float at(int r, int c) const { return grid[static_cast<std::size_t>(r) * width + c]; }
};

struct VelocityMap {
    int height = 0;
    int width = 0;
    std::vector<float> grid;  // row-major, m/s
    int year = kFirstYear;
    int scenario_id = 0;
    double leak_mass = 0.0;  // kg

    float at(int r, int c) const { return grid[static_cast<std::size_t>(r) * width + c]; }
};

struct LeakageScenario {
    int scenario_id = 0;
    std::uint64_t seed = 0;
    std::vector<VelocityMap> maps;                  // years 10..200
    std::array<double, kNumYears> mass_trajectory{};  // kg, non-decreasing
};

enum class LeakClass { Tiny, Small, Medium, Large };

inline constexpr std::array<double, 3> kClassBounds{9.10e6, 2.67e7, 8.05e7};
inline constexpr std::array<double, 4> kTargetClassFractions{0.20, 0.20, 0.20, 0.40};

std::string to_string(LeakClass c);
LeakClass classify_leak(double mass_kg);
bool is_small_leak(LeakClass c);  // Tiny or Small

BaselineMap generate_baseline(const GeneratorConfig& config);

LeakageScenario generate_scenario(std::uint64_t seed, const BaselineMap& baseline, const GeneratorConfig& config,
                                  int scenario_id = 0);

// Cells deviating from the baseline by more than config.support_threshold.
int plume_area(const VelocityMap& map, const BaselineMap& baseline, double threshold);

struct Split {
    std::vector<int> train_ids;
    std::vector<int> test_ids;
};

// Partition by scenario id. The permutation depends only on the id list and
// `seed`; round(fraction * n) ids go to training.
Split split_dataset(std::span<const int> scenario_ids, double train_fraction, std::uint64_t seed = 2021);

struct MassHistogram {
    std::vector<double> bin_lo;
    std::vector<double> bin_hi;
    std::vector<long> count;
    std::array<double, 4> class_fraction{};  // Tiny, Small, Medium, Large
    long total = 0;
};

// Per-map leak masses binned on [0, max mass].
MassHistogram mass_histogram(std::span<const LeakageScenario> scenarios, int bins);

// On-disk layout: DIR/scenario_<id>.f32 (20 x H x W float32) + DIR/scenario_<id>.meta.
std::filesystem::path scenario_path(const std::filesystem::path& dir, int id);
void save_scenario(const std::filesystem::path& dir, const LeakageScenario& s);
LeakageScenario load_scenario(const std::filesystem::path& dir, int id);
std::vector<int> list_scenarios(const std::filesystem::path& dir);

void save_baseline(const std::filesystem::path& file, const BaselineMap& b);
BaselineMap load_baseline(const std::filesystem::path& file);

void write_histogram_csv(const std::filesystem::path& file, const MassHistogram& h);

}  // namespace seismo::datagen
