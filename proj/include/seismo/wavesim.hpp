#pragma once

// Constant-density acoustic finite-difference modelling:
//   p_tt + eta(x) p_t = v^2 (lap p + rho s)
// 8th-order central Laplacian, 2nd-order leapfrog in time, damping eta > 0
// only inside a sponge strip padded around the model.

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seismo/datagen.hpp"

namespace seismo::wavesim {

struct GridPos {
    int row = 0;
    int col = 0;
    bool operator==(const GridPos&) const = default;
};

struct SimConfig {
    double dx = 10.0;        // m
    double dt = 1.5e-3;      // s
    int nt = 400;
    double peak_frequency = 15.0;  // Hz
    int boundary_width = 20;       // sponge cells padded on every side
    double density = 1000.0;       // kg/m^3
    double cfl_coeff = 0.5;
    double source_amplitude = 1.0;
    double source_radius = 0.0;  // m; 0 injects at a single cell, otherwise a normalized Gaussian
    double sponge_reflection = 1e-3;
    int snapshot_every = 0;  // 0 disables wavefield snapshots
    std::vector<GridPos> sources;
    std::vector<GridPos> receivers;

    // Sources evenly spaced on the top row, a receiver on every surface cell.
    static SimConfig surface_acquisition(int height, int width, int shots);
};

struct SeismicGather {
    int num_receivers = 0;
    int nt = 0;
    std::vector<float> traces;  // receiver-major: traces[r * nt + t]
    int shot_index = 0;
    int scenario_id = 0;
    int year = 0;

    float at(int receiver, int step) const { return traces[static_cast<std::size_t>(receiver) * nt + step]; }
};

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// w(t) = (1 - 2 pi^2 f^2 tau^2) exp(-pi^2 f^2 tau^2), tau = t - 1.5 / f.
// Warns on stderr when nt * dt does not reach past the main lobe.
std::vector<double> ricker_wavelet(double peak_frequency, double dt, int nt);

struct CflReport {
    bool pass = false;
    double max_stable_dt = 0.0;
    double v_max = 0.0;
};

CflReport cfl_check(const SimConfig& config, std::span<const float> velocity);

struct ShotResult {
    SeismicGather gather;
    std::vector<std::vector<float>> snapshots;  // padded-free H x W frames
};

// All shots of config.sources over one velocity model (row-major, H x W).
std::vector<ShotResult> propagate(int height, int width, std::span<const float> velocity, const SimConfig& config);
std::vector<ShotResult> propagate(const datagen::VelocityMap& map, const SimConfig& config);

// On-disk gathers, one file per scenario: gathers_<id>.f32 with layout
// [year][shot][receiver][step] plus gathers_<id>.meta.
std::filesystem::path gather_path(const std::filesystem::path& dir, int scenario_id);

struct GatherSet {
    int maps = 0;  // years (20) for scenarios, sample count for synthetic sets
    int shots = 0;
    int receivers = 0;
    int nt = 0;
    std::vector<float> values;

    std::span<const float> map_slice(int m) const {
        const std::size_t per = static_cast<std::size_t>(shots) * receivers * nt;
        return {values.data() + m * per, per};
    }
};

void write_sim_meta(const std::filesystem::path& file, const SimConfig& config, int maps, const std::string& kind,
                    int id);
SimConfig read_sim_meta(const std::filesystem::path& file);

// Simulates every scenario map; throws SimulationError carrying
// (scenario, year, shot) when a run fails.
void forward_dataset(const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                     const SimConfig& config);
GatherSet simulate_maps(std::span<const std::vector<float>> maps, int height, int width, const SimConfig& config,
                        const std::string& context);
GatherSet load_gathers(const std::filesystem::path& file);
void save_gathers(const std::filesystem::path& file, const GatherSet& g, const SimConfig& config,
                  const std::string& kind, int id);

}  // namespace seismo::wavesim
