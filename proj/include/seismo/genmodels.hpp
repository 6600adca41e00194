#pragma once

// Generative augmenters: a time-conditioned autoencoder and a VAE trained
// with plain, perception (Gram) or temporal-difference regularized losses.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "seismo/datagen.hpp"
#include "seismo/featureext.hpp"
#include "seismo/io.hpp"
#include "seismo/losses.hpp"
#include "seismo/nn.hpp"
#include "seismo/optim.hpp"

namespace seismo::genmodels {

enum class ModelKind { AE, VAE, VAEPercep, VAEReg };

std::string to_string(ModelKind k);  // ae, vae, vae_percep, vae_reg
ModelKind parse_model_kind(const std::string& text);  // also accepts vae-percep / vae-reg
inline bool is_vae_family(ModelKind k) { return k != ModelKind::AE; }

struct Architecture {
    int height = 64;
    int width = 64;
    std::vector<int> channels{16, 32, 64, 128};  // encoder widths, one stride-2 block each
    int latent = 64;
    double slope = 0.2;

    // 8x8 input, two blocks of width 2, latent 4 (for finite-difference checks).
    static Architecture tiny();
    int down_factor() const { return 1 << channels.size(); }
    void validate() const;
};

// Year (possibly fractional, for interpolated pseudo-years) normalized to t / 200.
inline double normalized_year(double year) {
    if (!(year >= datagen::kFirstYear && year <= datagen::kLastYear))
        throw std::invalid_argument("year must lie in [10, 200], got " + io::format_double(year));
    return year / datagen::kLastYear;
}

template <typename T>
Tensor<T> temporal_channel(double year, int height, int width) {
    return Tensor<T>(1, 1, height, width, static_cast<T>(normalized_year(year)));
}

template <typename T>
nn::Sequential<T> build_encoder(const Architecture& a, int in_channels, int out_features) {
    a.validate();
    nn::Sequential<T> net;
    int in = in_channels;
    for (std::size_t b = 0; b < a.channels.size(); ++b) {
        const int out = a.channels[b];
        net.add("conv" + std::to_string(b + 1), nn::Conv2d<T>({in, out, 3, 3, 2, 2, 1, 1}));
        net.add("act" + std::to_string(b + 1), nn::LeakyRelu<T>(static_cast<T>(a.slope)));
        in = out;
    }
    const int cells = (a.height / a.down_factor()) * (a.width / a.down_factor());
    net.add("head", nn::Dense<T>(in * cells, out_features));
    return net;
}

// Dense to the coarsest grid, then one upsample + conv block per encoder
// block, then a linear 1-channel output conv.
template <typename T>
nn::Sequential<T> build_decoder(const Architecture& a) {
    a.validate();
    nn::Sequential<T> net;
    const int hb = a.height / a.down_factor(), wb = a.width / a.down_factor();
    const int nb = static_cast<int>(a.channels.size());
    int in = a.channels.back();
    net.add("fc", nn::Dense<T>(a.latent, in * hb * wb));
    net.add("unflatten", nn::Reshape<T>(in, hb, wb));
    net.add("fc_act", nn::LeakyRelu<T>(static_cast<T>(a.slope)));
    for (int b = nb - 1; b >= 0; --b) {
        const int out = b > 0 ? a.channels[b - 1] : std::max(1, a.channels[0] / 2);
        const std::string k = std::to_string(nb - b);
        net.add("up" + k, nn::Upsample2<T>());
        net.add("deconv" + k, nn::Conv2d<T>({in, out, 3, 3, 1, 1, 1, 1}));
        net.add("deact" + k, nn::LeakyRelu<T>(static_cast<T>(a.slope)));
        in = out;
    }
    net.add("out", nn::Conv2d<T>({in, 1, 3, 3, 1, 1, 1, 1}));
    return net;
}

template <typename T>
struct Grads {
    std::vector<Tensor<T>> encoder;
    std::vector<Tensor<T>> decoder;
};

template <typename T>
class Generator {
public:
    Generator(ModelKind kind, Architecture arch)
        : kind_(kind),
          arch_(std::move(arch)),
          encoder_(build_encoder<T>(arch_, kind == ModelKind::AE ? 3 : 1,
                                    kind == ModelKind::AE ? arch_.latent : 2 * arch_.latent)),
          decoder_(build_decoder<T>(arch_)) {}

    ModelKind kind() const { return kind_; }
    const Architecture& arch() const { return arch_; }
    nn::Sequential<T>& encoder() { return encoder_; }
    nn::Sequential<T>& decoder() { return decoder_; }
    const nn::Sequential<T>& encoder() const { return encoder_; }
    const nn::Sequential<T>& decoder() const { return decoder_; }

    void init(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        nn::he_init(encoder_, rng);
        nn::he_init(decoder_, rng);
    }

    Grads<T> zero_grads() const { return {encoder_.zero_grads(), decoder_.zero_grads()}; }

    std::vector<Tensor<T>*> parameters() {
        auto p = encoder_.parameters();
        for (auto* q : decoder_.parameters()) p.push_back(q);
        return p;
    }

    std::size_t parameter_count() const { return encoder_.parameter_count() + decoder_.parameter_count(); }

    void export_to(io::WeightArchive& a) const {
        io::export_parameters(encoder_, "encoder.", a);
        io::export_parameters(decoder_, "decoder.", a);
    }
    void install_from(const io::WeightArchive& a) {
        io::install_parameters(encoder_, "encoder.", a);
        io::install_parameters(decoder_, "decoder.", a);
    }

private:
    ModelKind kind_;
    Architecture arch_;
    nn::Sequential<T> encoder_;
    nn::Sequential<T> decoder_;
};

// ---- autoencoder -------------------------------------------------------

template <typename T>
Tensor<T> ae_input(const Tensor<T>& x10, const Tensor<T>& x200, std::span<const double> years) {
    require_same_shape(x10, x200, "ae_forward");
    if (x10.c != 1) throw std::invalid_argument("ae_forward: maps must be single-channel");
    if (static_cast<int>(years.size()) != x10.n) throw std::invalid_argument("ae_forward: one year per sample");
    Tensor<T> in(x10.n, 3, x10.h, x10.w);
    const std::size_t plane = static_cast<std::size_t>(x10.h) * x10.w;
    for (int i = 0; i < x10.n; ++i) {
        auto dst = in.sample(i);
        std::copy_n(x10.sample(i).begin(), plane, dst.begin());
        std::copy_n(x200.sample(i).begin(), plane, dst.begin() + plane);
        std::fill_n(dst.begin() + 2 * plane, plane, static_cast<T>(normalized_year(years[i])));
    }
    return in;
}

template <typename T>
void require_input_size(const Generator<T>& g, const Tensor<T>& x, const char* what) {
    if (x.h != g.arch().height || x.w != g.arch().width)
        throw std::invalid_argument(std::string(what) + ": map is " + std::to_string(x.h) + "x" +
                                    std::to_string(x.w) + ", model expects " + std::to_string(g.arch().height) +
                                    "x" + std::to_string(g.arch().width));
}

template <typename T>
Tensor<T> ae_forward(const Generator<T>& g, const Tensor<T>& x10, const Tensor<T>& x200, std::span<const double> years) {
    if (g.kind() != ModelKind::AE) throw std::invalid_argument("ae_forward needs an autoencoder");
    require_input_size(g, x10, "ae_forward");
    const Tensor<T> code = g.encoder().forward(ae_input(x10, x200, years));
    return g.decoder().forward(code);
}

template <typename T>
struct TripleBatch {
    Tensor<T> x10;
    Tensor<T> x200;
    std::vector<double> years;
    Tensor<T> target;
};

template <typename T>
struct MapBatch {
    Tensor<T> x;    // (N, 1, H, W)
    Tensor<T> eps;  // (N, latent, 1, 1)
};

// x_t1 is the later map of each adjacent pair.
template <typename T>
struct PairBatch {
    Tensor<T> x_t1;
    Tensor<T> x_t2;
    Tensor<T> eps_t1;
    Tensor<T> eps_t2;
    std::vector<int> year_t1;
    std::vector<int> year_t2;
};

template <typename T>
using Batch = std::variant<TripleBatch<T>, MapBatch<T>, PairBatch<T>>;

struct LossParts {
    double total = 0.0;
    double recon = 0.0;
    double kld = 0.0;
    double percep = 0.0;
    double reg = 0.0;
};

template <typename T>
LossParts ae_loss(const Generator<T>& g, const TripleBatch<T>& b, Grads<T>* grads = nullptr) {
    if (b.target.empty()) throw std::invalid_argument("ae_loss: empty batch");
    if (g.kind() != ModelKind::AE) throw std::invalid_argument("ae_loss needs an autoencoder");
    require_input_size(g, b.target, "ae_loss");
    const auto enc = g.encoder().forward_trace(ae_input(b.x10, b.x200, b.years));
    const auto dec = g.decoder().forward_trace(enc.back());
    Tensor<T> dxhat;
    LossParts p;
    p.recon = losses::mse(b.target, dec.back(), grads ? &dxhat : nullptr);
    p.total = p.recon;
    if (grads) {
        const Tensor<T> dcode = g.decoder().backward(dec, dxhat, grads->decoder);
        g.encoder().backward(enc, dcode, grads->encoder, false);
    }
    return p;
}

// ---- VAE ---------------------------------------------------------------

template <typename T>
struct VaePass {
    std::vector<Tensor<T>> enc_acts;
    std::vector<Tensor<T>> dec_acts;
    Tensor<T> mu;       // (N, L, 1, 1)
    Tensor<T> log_var;  // (N, L, 1, 1)
    Tensor<T> eps;
    Tensor<T> xhat;
};

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_head(const Tensor<T>& head, int latent) {
    Tensor<T> mu(head.n, latent, 1, 1), lv(head.n, latent, 1, 1);
    for (int i = 0; i < head.n; ++i) {
        auto src = head.sample(i);
        std::copy_n(src.begin(), latent, mu.sample(i).begin());
        std::copy_n(src.begin() + latent, latent, lv.sample(i).begin());
    }
    return {mu, lv};
}

// Posterior parameters (mu, log_var) of each map.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> vae_encode(const Generator<T>& g, const Tensor<T>& x) {
    if (!is_vae_family(g.kind())) throw std::invalid_argument("vae_encode needs a VAE-family model");
    require_input_size(g, x, "vae_encode");
    return split_head(g.encoder().forward(x), g.arch().latent);
}

template <typename T>
Tensor<T> vae_decode(const Generator<T>& g, const Tensor<T>& z) {
    if (z.sample_size() != static_cast<std::size_t>(g.arch().latent))
        throw std::invalid_argument("vae_decode: latent size mismatch");
    Tensor<T> zz = z;
    zz.c = g.arch().latent;
    zz.h = zz.w = 1;
    return g.decoder().forward(zz);
}

// Deterministic reconstruction decode(mu(x)).
template <typename T>
Tensor<T> vae_reconstruct(const Generator<T>& g, const Tensor<T>& x) {
    return vae_decode(g, vae_encode(g, x).first);
}

template <typename T>
VaePass<T> vae_pass(const Generator<T>& g, const Tensor<T>& x, const Tensor<T>& eps) {
    if (!is_vae_family(g.kind())) throw std::invalid_argument("VAE loss needs a VAE-family model");
    require_input_size(g, x, "vae_loss");
    const int L = g.arch().latent;
    if (eps.n != x.n || eps.sample_size() != static_cast<std::size_t>(L))
        throw std::invalid_argument("vae_loss: eps must be (N, latent)");
    VaePass<T> p;
    p.enc_acts = g.encoder().forward_trace(x);
    std::tie(p.mu, p.log_var) = split_head(p.enc_acts.back(), L);
    p.eps = eps;
    Tensor<T> z(x.n, L, 1, 1);
    const auto zv = losses::reparameterize<T>(p.mu.data, p.log_var.data, eps.data);
    z.data.assign(zv.begin(), zv.end());
    p.dec_acts = g.decoder().forward_trace(z);
    p.xhat = p.dec_acts.back();
    return p;
}

template <typename T>
double pass_kld(const VaePass<T>& p) {
    return losses::kld<T>(p.mu.data, p.log_var.data);
}

// Backpropagates dL/dxhat plus the KL term through decoder, sampling and encoder.
template <typename T>
void vae_backprop(const Generator<T>& g, const VaePass<T>& p, const Tensor<T>& dxhat, Grads<T>& grads) {
    const int L = g.arch().latent;
    const Tensor<T> dz = g.decoder().backward(p.dec_acts, dxhat, grads.decoder);
    Tensor<T> dmu(p.mu.n, L, 1, 1), dlv(p.mu.n, L, 1, 1);
    for (std::size_t k = 0; k < dz.size(); ++k) {
        dmu.data[k] = dz.data[k];
        dlv.data[k] = dz.data[k] * p.eps.data[k] * T(0.5) * std::exp(p.log_var.data[k] / T(2));
    }
    losses::kld<T>(p.mu.data, p.log_var.data, dmu.data, dlv.data);
    Tensor<T> dhead(p.mu.n, 2 * L, 1, 1);
    for (int i = 0; i < p.mu.n; ++i) {
        auto dst = dhead.sample(i);
        std::copy_n(dmu.sample(i).begin(), L, dst.begin());
        std::copy_n(dlv.sample(i).begin(), L, dst.begin() + L);
    }
    g.encoder().backward(p.enc_acts, dhead, grads.encoder, false);
}

template <typename T>
LossParts vae_loss(const Generator<T>& g, const MapBatch<T>& b, Grads<T>* grads = nullptr) {
    if (b.x.empty()) throw std::invalid_argument("vae_loss: empty batch");
    const auto p = vae_pass(g, b.x, b.eps);
    Tensor<T> dxhat;
    LossParts out;
    out.recon = losses::sse(b.x, p.xhat, grads ? &dxhat : nullptr);
    out.kld = pass_kld(p);
    out.total = out.recon + out.kld;
    if (grads) vae_backprop(g, p, dxhat, *grads);
    return out;
}

template <typename T>
LossParts vae_percep_loss(const Generator<T>& g, const MapBatch<T>& b, const featureext::FeatureExtractor<T>& extractor,
                          featureext::LayerSelection layers, Grads<T>* grads = nullptr) {
    if (b.x.empty()) throw std::invalid_argument("vae_percep_loss: empty batch");
    const auto p = vae_pass(g, b.x, b.eps);
    Tensor<T> d_recon, d_percep;
    LossParts out;
    out.recon = losses::sse(b.x, p.xhat, grads ? &d_recon : nullptr);
    out.kld = pass_kld(p);
    out.percep = losses::perception_loss(extractor, b.x, p.xhat, layers, grads ? &d_percep : nullptr);
    out.total = out.recon + out.kld + out.percep;
    if (grads) {
        for (std::size_t k = 0; k < d_recon.size(); ++k) d_recon.data[k] += d_percep.data[k];
        vae_backprop(g, p, d_recon, *grads);
    }
    return out;
}

inline void require_adjacent(int year_t1, int year_t2) {
    if (!datagen::is_valid_year(year_t1) || !datagen::is_valid_year(year_t2) ||
        year_t1 - year_t2 != datagen::kFirstYear)
        throw std::invalid_argument("temporal regularization needs adjacent years with t1 > t2 (got " +
                                    std::to_string(year_t1) + ", " + std::to_string(year_t2) + ")");
}

template <typename T>
double temporal_reg(const Tensor<T>& x_t1, const Tensor<T>& x_t2, const Tensor<T>& xhat_t1, const Tensor<T>& xhat_t2,
                    int year_t1, int year_t2) {
    require_adjacent(year_t1, year_t2);
    return losses::temporal_reg(x_t1, x_t2, xhat_t1, xhat_t2);
}

template <typename T>
LossParts vae_reg_loss(const Generator<T>& g, const PairBatch<T>& b, double gamma, Grads<T>* grads = nullptr) {
    if (gamma < 0.0) throw std::invalid_argument("gamma must be non-negative");
    if (b.x_t1.empty()) throw std::invalid_argument("vae_reg_loss: empty batch");
    require_same_shape(b.x_t1, b.x_t2, "vae_reg_loss");
    if (static_cast<int>(b.year_t1.size()) != b.x_t1.n || b.year_t2.size() != b.year_t1.size())
        throw std::invalid_argument("vae_reg_loss: one year pair per sample");
    for (std::size_t i = 0; i < b.year_t1.size(); ++i) require_adjacent(b.year_t1[i], b.year_t2[i]);

    const int n = b.x_t1.n;
    const std::vector<Tensor<T>> xs{b.x_t1, b.x_t2};
    const std::vector<Tensor<T>> es{b.eps_t1, b.eps_t2};
    const Tensor<T> x = stack<T>(xs);
    const auto p = vae_pass(g, x, stack<T>(es));
    const Tensor<T> xhat_t1 = slice(p.xhat, 0, n), xhat_t2 = slice(p.xhat, n, 2 * n);

    Tensor<T> d_recon, d1, d2;
    LossParts out;
    out.recon = losses::sse(x, p.xhat, grads ? &d_recon : nullptr);
    out.kld = pass_kld(p);
    out.reg = losses::temporal_reg(b.x_t1, b.x_t2, xhat_t1, xhat_t2, grads ? &d1 : nullptr, grads ? &d2 : nullptr);
    out.total = out.recon + out.kld + gamma * out.reg;
    if (grads) {
        const std::size_t half = d1.size();
        for (std::size_t k = 0; k < half; ++k) {
            d_recon.data[k] += static_cast<T>(gamma) * d1.data[k];
            d_recon.data[half + k] += static_cast<T>(gamma) * d2.data[k];
        }
        vae_backprop(g, p, d_recon, *grads);
    }
    return out;
}

struct LossContext {
    double gamma = 1e2;
    featureext::LayerSelection layers = featureext::LayerSelection::D;
};

// Dispatches on the model kind; the batch type must match it.
template <typename T>
LossParts compute_loss(const Generator<T>& g, const Batch<T>& batch, const LossContext& ctx,
                       const featureext::FeatureExtractor<T>* extractor, Grads<T>* grads = nullptr) {
    auto wrong = [&](const char* need) {
        return std::invalid_argument("model kind " + to_string(g.kind()) + " takes " + need);
    };
    switch (g.kind()) {
        case ModelKind::AE:
            if (!std::holds_alternative<TripleBatch<T>>(batch))
                throw wrong("triple-channel batches (x_10, x_200, t)");
            return ae_loss(g, std::get<TripleBatch<T>>(batch), grads);
        case ModelKind::VAE:
            if (!std::holds_alternative<MapBatch<T>>(batch)) throw wrong("single-map batches");
            return vae_loss(g, std::get<MapBatch<T>>(batch), grads);
        case ModelKind::VAEPercep:
            if (!std::holds_alternative<MapBatch<T>>(batch)) throw wrong("single-map batches");
            if (extractor == nullptr) throw std::invalid_argument("vae_percep needs a feature extractor");
            return vae_percep_loss(g, std::get<MapBatch<T>>(batch), *extractor, ctx.layers, grads);
        case ModelKind::VAEReg:
            if (!std::holds_alternative<PairBatch<T>>(batch)) throw wrong("adjacent-year pair batches");
            return vae_reg_loss(g, std::get<PairBatch<T>>(batch), ctx.gamma, grads);
    }
    throw std::logic_error("unknown model kind");
}

// decode(alpha * encode(x_a) + (1 - alpha) * encode(x_b)) for arbitrary
// encode/decode callables operating on single samples.
template <typename T, typename Encode, typename Decode>
Tensor<T> interpolate_with(Encode&& encode, Decode&& decode, const Tensor<T>& x_a, const Tensor<T>& x_b,
                           double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    require_same_shape(x_a, x_b, "latent_interpolate");
    const Tensor<T> za = encode(x_a), zb = encode(x_b);
    require_same_shape(za, zb, "latent_interpolate");
    Tensor<T> z(za.n, za.c, za.h, za.w);
    const T a = static_cast<T>(alpha), b = static_cast<T>(1.0 - alpha);
    for (std::size_t k = 0; k < z.size(); ++k) z.data[k] = a * za.data[k] + b * zb.data[k];
    return decode(z);
}

template <typename T>
Tensor<T> latent_interpolate(const Generator<T>& g, const Tensor<T>& x_a, const Tensor<T>& x_b, double alpha) {
    return interpolate_with<T>([&](const Tensor<T>& x) { return vae_encode(g, x).first; },
                               [&](const Tensor<T>& z) { return vae_decode(g, z); }, x_a, x_b, alpha);
}

template <typename T>
Tensor<T> linear_interp_baseline(const Tensor<T>& x_a, const Tensor<T>& x_b, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    require_same_shape(x_a, x_b, "linear_interp_baseline");
    Tensor<T> out(x_a.n, x_a.c, x_a.h, x_a.w);
    for (std::size_t k = 0; k < out.size(); ++k)
        out.data[k] = static_cast<T>(alpha * x_a.data[k] + (1.0 - alpha) * x_b.data[k]);
    return out;
}

// ---- training, checkpoints, augmentation (float) -------------------------

struct Normalization {
    double vmin = 0.0;
    double vmax = 1.0;
    float forward(float v) const { return static_cast<float>((v - vmin) / (vmax - vmin)); }
    float inverse(float x) const { return static_cast<float>(vmin + x * (vmax - vmin)); }
};

Normalization fit_normalization(std::span<const datagen::LeakageScenario> scenarios);
Tensor<float> to_tensor(const datagen::VelocityMap& m, const Normalization& norm);
std::vector<float> from_tensor(const Tensor<float>& t, int sample, const Normalization& norm);

struct GenHyper {
    ModelKind kind = ModelKind::VAEReg;
    int epochs = 100;
    int batch = 32;  // maps (ae, vae, vae_percep) or adjacent pairs (vae_reg) per step
    double lr = 1e-4;
    double gamma = 1e2;
    featureext::LayerSelection layers = featureext::LayerSelection::D;
    std::uint64_t seed = 0;
    Architecture arch;
    featureext::ExtractorConfig extractor;
    std::filesystem::path extractor_weights;  // empty: fixed-seed weights
    bool verbose = false;
};

struct EpochLoss {
    int epoch = 0;
    LossParts loss;  // per-item means over the epoch
};

struct GeneratorCheckpoint {
    GenHyper hyper;
    Normalization norm;
    int epoch = 0;
    std::vector<EpochLoss> history;
    io::WeightArchive weights;
    std::string extractor_provenance;

    ModelKind kind() const { return hyper.kind; }
    Generator<float> instantiate() const;
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

GeneratorCheckpoint train_generative(std::span<const datagen::LeakageScenario> train_set, const GenHyper& hyper);

// DIR/header.ini, DIR/weights.bin, DIR/history.csv
void save_checkpoint(const std::filesystem::path& dir, const GeneratorCheckpoint& ckpt);
GeneratorCheckpoint load_checkpoint(const std::filesystem::path& dir);
void write_history_csv(const std::filesystem::path& file, ModelKind kind, std::span<const EpochLoss> history);

// Deterministic per-map reconstructions of a scenario (normalized units,
// 20 maps): decode(mu) for VAE-family models, ae_forward at the map's own
// year for the autoencoder.
Tensor<float> reconstruct_scenario(const Generator<float>& g, const datagen::LeakageScenario& s,
                                   const Normalization& norm);

enum class AlphaMode { Endpoints, Adjacent };
std::string to_string(AlphaMode m);
AlphaMode parse_alpha_mode(const std::string& text);

struct AugmentConfig {
    int count = 3000;
    AlphaMode mode = AlphaMode::Adjacent;
    std::vector<double> alpha_grid;  // empty: [0.6, 1] step 0.05 (endpoints), [0, 1] step 0.1 (adjacent)
    bool small_leak_bias = true;     // adjacent mode: prefer pairs whose later map is Tiny or Small
    bool stochastic = false;         // sample z instead of using mu
    std::uint64_t seed = 7;
};

std::vector<double> default_alpha_grid(AlphaMode m);

struct SyntheticSample {
    int height = 0;
    int width = 0;
    std::vector<float> map;  // m/s
    double alpha = 0.0;
    int scenario_id = 0;
    int year_a = 0;
    int year_b = 0;
    double pseudo_year = 0.0;
    double leak_mass = 0.0;  // interpolated between the source maps' masses
};

std::vector<SyntheticSample> generate_augmentation(const GeneratorCheckpoint& ckpt,
                                                   std::span<const datagen::LeakageScenario> train_set,
                                                   const AugmentConfig& cfg);

// Pixel-space alpha * x_a + (1 - alpha) * x_b over the same pair selection.
std::vector<SyntheticSample> generate_linear_augmentation(std::span<const datagen::LeakageScenario> train_set,
                                                          const AugmentConfig& cfg);

// DIR/synthetic.f32 (count x H x W) + DIR/synthetic.csv (per-sample labels) + DIR/synthetic.meta
void save_augmentation(const std::filesystem::path& dir, std::span<const SyntheticSample> samples,
                       const std::string& generator_tag);
std::vector<SyntheticSample> load_augmentation(const std::filesystem::path& dir, std::string* generator_tag = nullptr);

}  // namespace seismo::genmodels
