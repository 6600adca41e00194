#pragma once

// Image metrics and distribution diagnostics for generated and inverted maps.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seismo/datagen.hpp"

namespace seismo::evaluate {

double mae(std::span<const float> a, std::span<const float> b);

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

// Mean of the SSIM map over all fully-contained Gaussian windows.
double ssim(std::span<const float> a, std::span<const float> b, int height, int width, const SsimConfig& cfg = {});

struct YearRow {
    int year = 0;
    long count = 0;
    double mean = 0.0;  // meaningless when count == 0
};

// One row per year 10..200; years without samples keep count 0.
std::vector<YearRow> per_year_loss_curve(std::span<const std::pair<int, double>> year_losses);

// Reconstruction MSE (normalized units) of every map of every test scenario.
std::vector<std::pair<int, double>> reconstruction_losses(const std::filesystem::path& generator_ckpt,
                                                          std::span<const datagen::LeakageScenario> test_set);

enum class Projection { PCA, NMF };
std::string to_string(Projection p);
Projection parse_projection(const std::string& text);

struct PcaModel {
    Eigen::RowVectorXd mean;
    Eigen::MatrixXd components;  // k x P, orthonormal rows
    Eigen::VectorXd explained;   // singular values squared / (n - 1)
};

PcaModel pca_fit(const Eigen::MatrixXd& x, int k);
Eigen::MatrixXd pca_transform(const PcaModel& m, const Eigen::MatrixXd& x);
Eigen::MatrixXd pca_inverse(const PcaModel& m, const Eigen::MatrixXd& scores);

struct NmfModel {
    Eigen::MatrixXd w;  // n x k
    Eigen::MatrixXd h;  // k x P
};

// Multiplicative-update NMF minimizing ||X - WH||_F^2 from a seeded start.
NmfModel nmf_fit(const Eigen::MatrixXd& x, int k, int iterations = 300, std::uint64_t seed = 0);

struct Projection2d {
    Projection method = Projection::PCA;
    Eigen::MatrixXd true_points;       // n_true x 2
    Eigen::MatrixXd generated_points;  // n_gen x 2
    double overlap = 0.0;
};

// Fit on the union of both sets (one map per row), project each to 2-D.
Projection2d project_2d(const Eigen::MatrixXd& true_maps, const Eigen::MatrixXd& generated_maps, Projection method);

// Histogram intersection of two 2-D point clouds on a shared grid, in [0, 1].
double overlap_score(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int bins = 10);

// Depth-axis wavenumber magnitude of (map - baseline): per-column DFT along
// depth, power-averaged over columns, scaled so that sum(s_k^2) equals
// sum(perturbation^2) / width. Returns all `height` bins.
std::vector<double> kz_spectrum(std::span<const float> map, std::span<const float> baseline, int height, int width);

struct BoxStats {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double whisker_lo = 0.0;
    double whisker_hi = 0.0;
    std::vector<double> outliers;
};

// Tukey hinges, whiskers at the most extreme values within 1.5 IQR of the hinges.
BoxStats boxplot_stats(std::span<const double> values);

struct EvalInputs {
    std::filesystem::path test_dir;
    std::filesystem::path test_gathers;  // empty: test_dir
    std::filesystem::path baseline_file;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> generator_ckpt;
    std::vector<std::filesystem::path> inversion_ckpts;  
    std::uint64_t seed = 11;
};

struct EvalSummary {
    double ssim_range = 0.0;
    std::vector<std::pair<std::string, double>> scalars;  // written to summary.csv
};

// Writes metrics.csv, per_year.csv, boxplot.csv, kz.csv, projections.csv,
// summary.csv and PNG plots into out_dir.
EvalSummary run_evaluation(const EvalInputs& in);

}  // namespace seismo::evaluate
