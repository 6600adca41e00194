#pragma once

// Miniature encoder-decoder inversion network: shot gathers -> velocity map.
//
// Input (N, shots, nt, receivers). A tall first kernel with stride 4 in time
// shrinks the record, strided convs reduce both axes, a dense bottleneck
// re-maps to the coarse output grid and upsampling convs decode to H x W.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seismo/datagen.hpp"
#include "seismo/io.hpp"
#include "seismo/losses.hpp"
#include "seismo/nn.hpp"
#include "seismo/optim.hpp"

namespace seismo::inversion {

struct InvArch {
    int shots = 3;
    int nt = 400;
    int receivers = 64;
    int height = 64;
    int width = 64;
    std::vector<int> encoder{8, 16, 32, 32, 64};  // first block uses the time kernel
    int time_kernel = 7;
    int time_stride = 4;
    int bottleneck = 256;
    std::vector<int> decoder{32, 16, 8, 8};  // one 2x upsampling block each
    double slope = 0.2;

    static InvArch tiny();  // 1 shot, 16 steps, 4 receivers, 4x4 maps
    int decoder_factor() const { return 1 << decoder.size(); }
    void validate() const;
};

template <typename T>
nn::Sequential<T> build_network(const InvArch& a) {
    a.validate();
    nn::Sequential<T> net;
    int c = a.shots, h = a.nt, w = a.receivers;
    const T slope = static_cast<T>(a.slope);
    for (std::size_t b = 0; b < a.encoder.size(); ++b) {
        nn::ConvShape s = b == 0 ? nn::ConvShape{c, a.encoder[0], a.time_kernel, 3, a.time_stride, 1, a.time_kernel / 2, 1}
                                 : nn::ConvShape{c, a.encoder[b], 3, 3, 2, 2, 1, 1};
        auto& conv = net.add("enc" + std::to_string(b + 1), nn::Conv2d<T>(s));
        h = conv.out_h(h);
        w = conv.out_w(w);
        c = a.encoder[b];
        net.add("enc_act" + std::to_string(b + 1), nn::LeakyRelu<T>(slope));
    }
    const int hb = a.height / a.decoder_factor(), wb = a.width / a.decoder_factor();
    const int c0 = a.encoder.back();
    net.add("fc1", nn::Dense<T>(c * h * w, a.bottleneck));
    net.add("fc1_act", nn::LeakyRelu<T>(slope));
    net.add("fc2", nn::Dense<T>(a.bottleneck, c0 * hb * wb));
    net.add("unflatten", nn::Reshape<T>(c0, hb, wb));
    net.add("fc2_act", nn::LeakyRelu<T>(slope));
    int in = c0;
    for (std::size_t b = 0; b < a.decoder.size(); ++b) {
        const std::string k = std::to_string(b + 1);
        net.add("up" + k, nn::Upsample2<T>());
        net.add("dec" + k, nn::Conv2d<T>({in, a.decoder[b], 3, 3, 1, 1, 1, 1}));
        net.add("dec_act" + k, nn::LeakyRelu<T>(slope));
        in = a.decoder[b];
    }
    net.add("out", nn::Conv2d<T>({in, 1, 3, 3, 1, 1, 1, 1}));
    return net;
}

// Mean |pred - truth| over batch and pixels.
template <typename T>
double invnet_loss(const Tensor<T>& pred, const Tensor<T>& truth, Tensor<T>* grad_pred = nullptr) {
    return losses::mae(truth, pred, grad_pred);
}

enum class Provenance { Real, Synthetic };

// One training/test example. Gathers are [shot][receiver][step] as written by wavesim.
struct Pair {
    std::vector<float> gather;
    std::vector<float> target;  // m/s, row-major H x W
    double leak_mass = 0.0;
    Provenance provenance = Provenance::Real;
    int scenario_id = 0;
    int year = 0;
    double alpha = 0.0;  // synthetic only
};

struct PairSet {
    int shots = 0;
    int receivers = 0;
    int nt = 0;
    int height = 0;
    int width = 0;
    std::string tag = "none";  // generator tag for synthetic sets
    std::vector<Pair> pairs;
};

// Scenario maps from DIR/scenario_*.f32 with gathers from GATHER_DIR/gathers_*.f32
// (GATHER_DIR defaults to DIR).
PairSet load_real_pairs(const std::filesystem::path& dir, const std::filesystem::path& gather_dir = {});
// Synthetic maps from DIR/synthetic.* with gathers from GATHER_DIR/gathers_synthetic.f32.
PairSet load_synthetic_pairs(const std::filesystem::path& dir, const std::filesystem::path& gather_dir = {});

// Per-(shot, receiver) standardization statistics over a training set.
struct TraceStats {
    int shots = 0;
    int receivers = 0;
    std::vector<float> mean;
    std::vector<float> stddev;
};

TraceStats fit_trace_stats(const PairSet& set);

struct TargetNorm {
    double vmin = 0.0;
    double vmax = 1.0;
};

struct InvHyper {
    int epochs = 80;
    int batch = 24;
    double lr = 0.01;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    InvArch arch;
    bool verbose = false;
};

struct InvEpoch {
    int epoch = 0;
    double train_loss = 0.0;  // mean MAE (normalized units) over the epoch
};

struct InversionCheckpoint {
    InvHyper hyper;
    std::string augmentation = "none";  // none, ae, vae, vae_percep, vae_reg, linear
    int real_pairs = 0;
    int synthetic_pairs = 0;
    TraceStats stats;
    TargetNorm norm;
    int epoch = 0;
    std::vector<InvEpoch> history;
    io::WeightArchive weights;

    nn::Sequential<float> instantiate() const;
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

// `synthetic` may be empty; its tag becomes the checkpoint's augmentation tag.
InversionCheckpoint train_inversion(const PairSet& real, const PairSet& synthetic, const InvHyper& hyper);

// Network input for a list of pairs (standardized, transposed to (shots, nt, receivers)).
Tensor<float> make_input(std::span<const Pair* const> pairs, const TraceStats& stats, const InvArch& arch);

// Predicted maps in m/s, one vector per gather ([shot][receiver][step]).
std::vector<std::vector<float>> invnet_forward(const InversionCheckpoint& ckpt,
                                               std::span<const std::vector<float>> gathers);

enum class Subset { General, Small };
std::string to_string(Subset s);
Subset parse_subset(const std::string& text);

struct SampleError {
    int index = 0;
    int scenario_id = 0;
    int year = 0;
    datagen::LeakClass leak_class = datagen::LeakClass::Tiny;
    double mae = 0.0;       // normalized units (checkpoint target bounds)
    double mae_mps = 0.0;   // m/s
};

struct TestReport {
    Subset subset = Subset::General;
    double loss = 0.0;  // mean of per-sample MAE
    std::vector<SampleError> samples;
    std::vector<std::vector<float>> predictions;  // m/s, aligned with samples
};

TestReport test_inversion(const InversionCheckpoint& ckpt, const PairSet& test, Subset subset,
                          bool keep_predictions = false);

void write_report_csv(const std::filesystem::path& file, const TestReport& r);

// DIR/header.ini, DIR/weights.bin (network + trace statistics), DIR/history.csv
void save_checkpoint(const std::filesystem::path& dir, const InversionCheckpoint& ckpt);
InversionCheckpoint load_checkpoint(const std::filesystem::path& dir);
void write_history_csv(const std::filesystem::path& file, std::span<const InvEpoch> history);

}  // namespace seismo::inversion
