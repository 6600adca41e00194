#pragma once

// Fixed-weight convolutional feature pyramid with VGG-19 block widths.
//
// Block l is conv(3x3) + ReLU, with 2x average pooling between blocks; the
// ReLU output of each block is the "conv<l>_1" feature map. Weights are either
// generated deterministically (orthogonal rows, ReLU gain, zero bias) or
// loaded from a portable weight file.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "seismo/io.hpp"
#include "seismo/nn.hpp"

namespace seismo::featureext {

enum class LayerSelection { A = 2, B = 3, C = 4, D = 5 };

inline int block_count(LayerSelection s) { return static_cast<int>(s); }
LayerSelection parse_selection(const std::string& text);
std::string to_string(LayerSelection s);
std::string layer_name(int block);  // 0 -> "conv1_1"

struct ExtractorConfig {
    std::vector<int> widths{64, 128, 256, 512, 512};
    int input_copies = 3;  // single-channel maps are replicated at the stem
    std::uint64_t seed = 1337;
};

template <typename T>
struct FeaturePyramid {
    std::vector<std::string> names;
    std::vector<Tensor<T>> maps;  // one (N, N_l, h_l, w_l) tensor per selected block
};

template <typename T>
class FeatureExtractor {
public:
    explicit FeatureExtractor(ExtractorConfig config = {}) : config_(std::move(config)) {
        if (config_.widths.empty()) throw std::invalid_argument("extractor needs at least one block");
        int in = config_.input_copies;
        net_.add("stem", nn::ReplicateChannel<T>(config_.input_copies));
        for (std::size_t b = 0; b < config_.widths.size(); ++b) {
            if (b > 0) net_.add("pool" + std::to_string(b), nn::AvgPool2<T>());
            net_.add(layer_name(static_cast<int>(b)), nn::Conv2d<T>({in, config_.widths[b], 3, 3, 1, 1, 1, 1}));
            tap_.push_back(net_.size() + 1);  // activation-trace index of this block's ReLU output
            net_.add("relu" + std::to_string(b + 1) + "_1", nn::LeakyRelu<T>(T(0)));
            in = config_.widths[b];
        }
        fixed_init();
    }

    const ExtractorConfig& config() const { return config_; }
    const std::string& provenance() const { return provenance_; }
    int blocks() const { return static_cast<int>(config_.widths.size()); }
    int min_side() const { return 1 << blocks(); }

    void save_weights(const std::filesystem::path& path) const {
        io::WeightArchive a;
        io::export_parameters(net_, "", a);
        a.save(path);
    }

    void load_weights(const std::filesystem::path& path) {
        install_weights(io::WeightArchive::load(path));
        provenance_ = "loaded:" + path.filename().string();
    }

    void install_weights(const io::WeightArchive& archive) { io::install_parameters(net_, "", archive); }

    struct Trace {
        std::vector<Tensor<T>> acts;
        int blocks = 0;
    };

    // Feature maps of the first `blocks` blocks. `trace` (optional) keeps the
    // activations needed by backward().
    std::vector<Tensor<T>> features(const Tensor<T>& image, int blocks, Trace* trace = nullptr) const {
        check_input(image, blocks);
        const std::size_t last = tap_[blocks - 1];
        std::vector<Tensor<T>> acts;
        acts.reserve(last + 1);
        acts.push_back(image);
        for (std::size_t i = 0; i < last; ++i) acts.push_back(net_.layer(i).forward(acts.back()));
        std::vector<Tensor<T>> out;
        for (int b = 0; b < blocks; ++b) out.push_back(acts[tap_[b]]);
        if (trace) {
            trace->acts = std::move(acts);
            trace->blocks = blocks;
        }
        return out;
    }

    FeaturePyramid<T> extract(const Tensor<T>& image, LayerSelection selection) const {
        const int blocks = block_count(selection);
        if (blocks > this->blocks()) throw std::invalid_argument("selection exceeds extractor depth");
        FeaturePyramid<T> p;
        p.maps = features(image, blocks);
        for (int b = 0; b < blocks; ++b) p.names.push_back(layer_name(b));
        return p;
    }

    // dL/dimage given dL/dfeature for every block recorded in `trace`.
    Tensor<T> backward(const Trace& trace, std::span<const Tensor<T>> feature_grads) const {
        if (static_cast<int>(feature_grads.size()) != trace.blocks)
            throw std::invalid_argument("one gradient per extracted block is required");
        int b = trace.blocks - 1;
        Tensor<T> g = feature_grads[b];
        for (std::size_t i = tap_[trace.blocks - 1]; i-- > 0;) {
            g = net_.layer(i).backward(trace.acts[i], trace.acts[i + 1], g, {});
            if (b > 0 && i == tap_[b - 1]) {
                --b;
                for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] += feature_grads[b].data[k];
            }
        }
        return g;
    }

    nn::Sequential<T>& network() { return net_; }
    const nn::Sequential<T>& network() const { return net_; }

private:
    void check_input(const Tensor<T>& image, int blocks) const {
        if (blocks < 1 || blocks > this->blocks()) throw std::invalid_argument("invalid block count");
        if (image.c != 1) throw std::invalid_argument("extractor expects single-channel images");
        if (image.h < min_side() || image.w < min_side())
            throw std::invalid_argument("image too small for feature extraction: need at least " +
                                        std::to_string(min_side()) + "x" + std::to_string(min_side()));
    }

    void fixed_init() {
        std::mt19937_64 rng(config_.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto names = net_.parameter_names();
        auto params = net_.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = *params[i];
            if (names[i].ends_with(".bias")) {
                std::fill(p.data.begin(), p.data.end(), T(0));
                continue;
            }
            const int rows = p.n, cols = p.c * p.h * p.w;
            const bool wide = rows <= cols;
            Eigen::MatrixXd g(wide ? cols : rows, wide ? rows : cols);
            for (Eigen::Index c = 0; c < g.cols(); ++c)
                for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
            Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
            const Eigen::MatrixXd w = wide ? Eigen::MatrixXd(q.transpose()) : q;
            // Unit-norm rows (on average, for tall matrices) times the ReLU gain.
            const double gain = std::sqrt(2.0) * (wide ? 1.0 : std::sqrt(static_cast<double>(rows) / cols));
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) p.data[static_cast<std::size_t>(r) * cols + c] = static_cast<T>(gain * w(r, c));
        }
        provenance_ = "fixed-seed-" + std::to_string(config_.seed);
    }

    ExtractorConfig config_;
    nn::Sequential<T> net_;
    std::vector<std::size_t> tap_;
    std::string provenance_;
};

}  // namespace seismo::featureext
