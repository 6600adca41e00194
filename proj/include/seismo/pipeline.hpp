#pragma once

// Experiment orchestration with hash-keyed stage caching.
//
// Stages: data -> gathers -> generator -> augmentation (+ synthetic gathers)
// -> inversion (baseline and augmented) -> test. Each stage writes into
// CACHE/<stage>_<key>/ where key hashes every setting the stage depends on,
// so sweeps and reruns reuse shared work.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "seismo/featureext.hpp"
#include "seismo/genmodels.hpp"
#include "seismo/inversion.hpp"
#include "seismo/io.hpp"
#include "seismo/wavesim.hpp"

namespace seismo::pipeline {

struct ExperimentConfig {
    std::string profile = "desk";

    // [data]
    int scenarios = 60;
    int height = 64;
    int width = 64;
    std::uint64_t data_seed = 1000;  // scenario i uses data_seed + i
    double train_fraction = 0.8;
    std::uint64_t split_seed = 2021;

    // [sim]
    double dx = 10.0;
    double dt = 1.5e-3;
    int nt = 400;
    double peak_frequency = 15.0;
    int shots = 3;
    int boundary_width = 20;

    // [generator]
    std::vector<std::string> models{"vae_reg"};  // compared against the baseline; "linear" needs no training
    int gen_epochs = 15;
    int gen_batch = 32;
    double gen_lr = 1e-4;
    double gamma = 1e2;
    std::string layers = "D";
    std::vector<int> gen_channels{16, 32, 64, 128};
    int latent = 64;
    std::uint64_t gen_seed = 1;
    std::vector<int> extractor_widths{64, 128, 256, 512, 512};

    // [inversion]
    int inv_epochs = 20;
    int inv_batch = 24;
    double inv_lr = 0.01;
    double weight_decay = 1e-4;
    std::vector<int> inv_encoder{8, 16, 32, 32, 64};
    std::vector<int> inv_decoder{32, 16, 8, 8};
    int bottleneck = 256;

    // [augmentation]
    int aug_count = 300;
    std::string alpha_mode = "adjacent";
    bool small_leak_bias = true;
    bool stochastic = false;

    // [run]
    std::vector<std::uint64_t> seeds{0, 1};
    std::filesystem::path output = "runs";
    std::filesystem::path cache;  // empty: OUTPUT/cache; SEISMO_CACHE overrides both
    bool verbose = false;

    static ExperimentConfig for_profile(const std::string& name);  // desk, paper, smoke
    // Profile from the file's [run] profile (or `profile_override`), then file values on top.
    static ExperimentConfig load(const std::filesystem::path& file, const std::string& profile_override = "");
    void apply(const io::Meta& m);
    io::Meta to_meta() const;
    std::string canonical() const;  // deterministic text of every setting
    std::string hash() const;       // sha256 of canonical()
    void validate() const;

    std::filesystem::path cache_root() const;
    wavesim::SimConfig sim_config() const;
    genmodels::GenHyper gen_hyper(const std::string& model) const;
    inversion::InvHyper inv_hyper(std::uint64_t seed) const;
    genmodels::AugmentConfig augment_config(int count, std::uint64_t seed) const;
};

// Cached stage outputs.
struct DataStage {
    std::filesystem::path dir;        // train/, test/, baseline.f32, mass_histogram.csv
    std::filesystem::path gather_dir;  // train/, test/ gathers
    std::filesystem::path train() const { return dir / "train"; }
    std::filesystem::path test() const { return dir / "test"; }
    std::filesystem::path train_gathers() const { return gather_dir / "train"; }
    std::filesystem::path test_gathers() const { return gather_dir / "test"; }
};

// DIR/train, DIR/test, DIR/baseline.f32, DIR/mass_histogram.csv.
void generate_dataset(const ExperimentConfig& cfg, const std::filesystem::path& out);
// Gathers of every scenario in data_dir/{train,test} into out_dir/{train,test}.
void simulate_dataset(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir);
// Synthetic gathers for an augmentation directory (gathers_synthetic.*).
void simulate_augmentation(const ExperimentConfig& cfg, const std::filesystem::path& aug_dir);

DataStage prepare_data(const ExperimentConfig& cfg);
std::filesystem::path prepare_generator(const ExperimentConfig& cfg, const DataStage& data, const std::string& model);
// Augmentation directory with synthetic.* and gathers_synthetic.*.
std::filesystem::path prepare_augmentation(const ExperimentConfig& cfg, const DataStage& data,
                                           const std::string& model, int count, std::uint64_t seed);
// Inversion checkpoint trained on the real set plus `aug_dir` (empty: baseline).
std::filesystem::path prepare_inversion(const ExperimentConfig& cfg, const DataStage& data,
                                        const std::filesystem::path& aug_dir, std::uint64_t seed);

struct RunRow {
    std::string model;  // baseline or generator tag
    std::uint64_t seed = 0;
    double general = 0.0;
    double small = 0.0;
};

struct RunResult {
    std::filesystem::path dir;
    std::vector<RunRow> rows;
    bool ok = true;
};

// Writes DIR/manifest.ini, DIR/results.csv (per seed) and DIR/table.csv
// (mean test loss per model on the general and small-leak subsets, with
// improvement over the baseline).
RunResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
    int size = 0;
    long n = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

std::vector<SweepRow> summarize(const std::vector<std::pair<int, double>>& size_losses);

// Small-leak test loss per augmentation size and seed, one augmenter (cfg.models[0]).
// Writes runs.csv (size, seed, loss), sweep.csv (size, n, mean, std) and sweep.png.
std::vector<SweepRow> sweep_size(const ExperimentConfig& cfg, std::vector<int> sizes, int seed_groups = 0);

// param = layers (vae_percep over A..D) or gamma (vae_reg over the given values).
// Writes grid_runs.csv and grid.csv.
struct GridRow {
    std::string value;
    long n = 0;
    double mean_small = 0.0;
    double std_small = 0.0;
    double mean_general = 0.0;
};

std::vector<GridRow> grid_search(const ExperimentConfig& cfg, const std::string& param,
                                 std::vector<std::string> values = {});

double mean_of(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

}  // namespace seismo::pipeline
