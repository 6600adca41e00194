#include "seismo/genmodels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace seismo::genmodels {

namespace fs = std::filesystem;
using datagen::LeakageScenario;

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::AE: return "ae";
        case ModelKind::VAE: return "vae";
        case ModelKind::VAEPercep: return "vae_percep";
        case ModelKind::VAEReg: return "vae_reg";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "ae") return ModelKind::AE;
    if (text == "vae") return ModelKind::VAE;
    if (text == "vae_percep" || text == "vae-percep") return ModelKind::VAEPercep;
    if (text == "vae_reg" || text == "vae-reg") return ModelKind::VAEReg;
    throw std::invalid_argument("unknown model kind '" + text + "' (ae, vae, vae-percep, vae-reg)");
}

Architecture Architecture::tiny() {
    Architecture a;
    a.height = a.width = 8;
    a.channels = {2, 2};
    a.latent = 4;
    return a;
}

void Architecture::validate() const {
    if (channels.empty()) throw std::invalid_argument("architecture needs at least one block");
    for (int c : channels)
        if (c < 1) throw std::invalid_argument("channel widths must be positive");
    if (latent < 1) throw std::invalid_argument("latent size must be positive");
    const int f = down_factor();
    if (height < f || width < f || height % f != 0 || width % f != 0)
        throw std::invalid_argument("map size " + std::to_string(height) + "x" + std::to_string(width) +
                                    " is not divisible by 2^" + std::to_string(channels.size()));
}

std::string to_string(AlphaMode m) { return m == AlphaMode::Endpoints ? "endpoints" : "adjacent"; }

AlphaMode parse_alpha_mode(const std::string& text) {
    if (text == "endpoints") return AlphaMode::Endpoints;
    if (text == "adjacent") return AlphaMode::Adjacent;
    throw std::invalid_argument("alpha mode must be endpoints or adjacent (got '" + text + "')");
}

std::vector<double> default_alpha_grid(AlphaMode m) {
    std::vector<double> g;
    if (m == AlphaMode::Endpoints)
        for (int i = 0; i <= 8; ++i) g.push_back(0.6 + 0.05 * i);
    else
        for (int i = 0; i <= 10; ++i) g.push_back(0.1 * i);
    return g;
}

Normalization fit_normalization(std::span<const LeakageScenario> scenarios) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : scenarios)
        for (const auto& m : s.maps)
            for (float v : m.grid) {
                lo = std::min(lo, static_cast<double>(v));
                hi = std::max(hi, static_cast<double>(v));
            }
    if (!(hi > lo)) throw std::invalid_argument("cannot normalize: training maps are empty or constant");
    return {lo, hi};
}

Tensor<float> to_tensor(const datagen::VelocityMap& m, const Normalization& norm) {
    Tensor<float> t(1, 1, m.height, m.width);
    for (std::size_t k = 0; k < t.size(); ++k) t.data[k] = norm.forward(m.grid[k]);
    return t;
}

std::vector<float> from_tensor(const Tensor<float>& t, int sample, const Normalization& norm) {
    auto s = t.sample(sample);
    std::vector<float> out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = norm.inverse(s[k]);
    return out;
}

Generator<float> GeneratorCheckpoint::instantiate() const {
    Generator<float> g(hyper.kind, hyper.arch);
    g.install_from(weights);
    return g;
}

namespace {

struct Item {
    int scenario = 0;
    int k = 0;  // year index (for pairs: the later map, k >= 1)
};

void fill_normal(Tensor<float>& t, std::mt19937_64& rng) {
    std::normal_distribution<float> nd(0.0f, 1.0f);
    for (auto& v : t.data) v = nd(rng);
}

Tensor<float> gather(const std::vector<std::vector<Tensor<float>>>& maps, std::span<const Item> items, int dk) {
    std::vector<Tensor<float>> parts;
    parts.reserve(items.size());
    for (const auto& it : items) parts.push_back(maps[it.scenario][it.k + dk]);
    return stack<float>(parts);
}

bool finite(const LossParts& p) {
    return std::isfinite(p.total) && std::isfinite(p.recon) && std::isfinite(p.kld) && std::isfinite(p.percep) &&
           std::isfinite(p.reg);
}

void check_train_set(std::span<const LeakageScenario> train_set, const Architecture& arch) {
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    for (const auto& s : train_set) {
        if (static_cast<int>(s.maps.size()) != datagen::kNumYears)
            throw std::invalid_argument("scenario " + std::to_string(s.scenario_id) + " does not have 20 maps");
        for (const auto& m : s.maps)
            if (m.height != arch.height || m.width != arch.width)
                throw std::invalid_argument("scenario " + std::to_string(s.scenario_id) + " maps are " +
                                            std::to_string(m.height) + "x" + std::to_string(m.width) +
                                            ", architecture expects " + std::to_string(arch.height) + "x" +
                                            std::to_string(arch.width));
    }
}

}  // namespace

GeneratorCheckpoint train_generative(std::span<const LeakageScenario> train_set, const GenHyper& hyper) {
    hyper.arch.validate();
    if (hyper.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (hyper.batch < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(hyper.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (hyper.gamma < 0.0) throw std::invalid_argument("gamma must be non-negative");
    check_train_set(train_set, hyper.arch);

    GeneratorCheckpoint ckpt;
    ckpt.hyper = hyper;
    ckpt.norm = fit_normalization(train_set);

    Generator<float> g(hyper.kind, hyper.arch);
    g.init(hyper.seed);

    std::optional<featureext::FeatureExtractor<float>> extractor;
    if (hyper.kind == ModelKind::VAEPercep) {
        extractor.emplace(hyper.extractor);
        if (!hyper.extractor_weights.empty()) extractor->load_weights(hyper.extractor_weights);
        if (featureext::block_count(hyper.layers) > extractor->blocks())
            throw std::invalid_argument("layer selection exceeds extractor depth");
        ckpt.extractor_provenance = extractor->provenance();
    }

    std::vector<std::vector<Tensor<float>>> maps(train_set.size());
    for (std::size_t s = 0; s < train_set.size(); ++s)
        for (const auto& m : train_set[s].maps) maps[s].push_back(to_tensor(m, ckpt.norm));

    std::vector<Item> items;
    for (int s = 0; s < static_cast<int>(train_set.size()); ++s)
        for (int k = hyper.kind == ModelKind::VAEReg ? 1 : 0; k < datagen::kNumYears; ++k) items.push_back({s, k});

    std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
    nn::Adam<float> adam(g.parameters(), {.lr = hyper.lr});
    const LossContext ctx{hyper.gamma, hyper.layers};
    const int L = hyper.arch.latent;

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        std::shuffle(items.begin(), items.end(), rng);
        LossParts acc;
        for (std::size_t start = 0; start < items.size(); start += hyper.batch) {
            const std::size_t stop = std::min(items.size(), start + static_cast<std::size_t>(hyper.batch));
            const std::span<const Item> chunk(items.data() + start, stop - start);
            const int n = static_cast<int>(chunk.size());

            Batch<float> batch;
            if (hyper.kind == ModelKind::AE) {
                TripleBatch<float> b;
                std::vector<Tensor<float>> f10, f200;
                for (const auto& it : chunk) {
                    f10.push_back(maps[it.scenario].front());
                    f200.push_back(maps[it.scenario].back());
                    b.years.push_back(datagen::year_at(it.k));
                }
                b.x10 = stack<float>(f10);
                b.x200 = stack<float>(f200);
                b.target = gather(maps, chunk, 0);
                batch = std::move(b);
            } else if (hyper.kind == ModelKind::VAEReg) {
                PairBatch<float> b;
                b.x_t1 = gather(maps, chunk, 0);
                b.x_t2 = gather(maps, chunk, -1);
                b.eps_t1 = Tensor<float>(n, L, 1, 1);
                b.eps_t2 = Tensor<float>(n, L, 1, 1);
                fill_normal(b.eps_t1, rng);
                fill_normal(b.eps_t2, rng);
                for (const auto& it : chunk) {
                    b.year_t1.push_back(datagen::year_at(it.k));
                    b.year_t2.push_back(datagen::year_at(it.k - 1));
                }
                batch = std::move(b);
            } else {
                MapBatch<float> b;
                b.x = gather(maps, chunk, 0);
                b.eps = Tensor<float>(n, L, 1, 1);
                fill_normal(b.eps, rng);
                batch = std::move(b);
            }

            Grads<float> grads = g.zero_grads();
            const LossParts p = compute_loss(g, batch, ctx, extractor ? &*extractor : nullptr, &grads);
            if (!finite(p))
                throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch), epoch);

            // The autoencoder loss is a per-batch mean; the VAE losses are sums over the batch.
            const double w = hyper.kind == ModelKind::AE ? n : 1.0;
            acc.total += w * p.total;
            acc.recon += w * p.recon;
            acc.kld += w * p.kld;
            acc.percep += w * p.percep;
            acc.reg += w * p.reg;

            std::vector<Tensor<float>> flat = std::move(grads.encoder);
            for (auto& t : grads.decoder) flat.push_back(std::move(t));
            adam.step(flat);
        }
        const double inv = 1.0 / static_cast<double>(items.size());
        EpochLoss e{epoch, {acc.total * inv, acc.recon * inv, acc.kld * inv, acc.percep * inv, acc.reg * inv}};
        ckpt.history.push_back(e);
        if (hyper.verbose)
            std::fprintf(stderr, "[train-gen %s] epoch %d/%d loss %.6g\n", to_string(hyper.kind).c_str(), epoch,
                         hyper.epochs, e.loss.total);
    }
    ckpt.epoch = hyper.epochs;
    g.export_to(ckpt.weights);
    return ckpt;
}

void write_history_csv(const fs::path& file, ModelKind kind, std::span<const EpochLoss> history) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    const bool vae = is_vae_family(kind);
    const bool percep = kind == ModelKind::VAEPercep;
    const bool reg = kind == ModelKind::VAEReg;
    out << "epoch,total,recon,kld,percep,reg\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << io::format_double(e.loss.total) << ',' << io::format_double(e.loss.recon) << ','
            << (vae ? io::format_double(e.loss.kld) : "") << ',' << (percep ? io::format_double(e.loss.percep) : "")
            << ',' << (reg ? io::format_double(e.loss.reg) : "") << '\n';
    }
}

void save_checkpoint(const fs::path& dir, const GeneratorCheckpoint& ckpt) {
    fs::create_directories(dir);
    const auto& h = ckpt.hyper;
    io::Meta m;
    m.put("model.kind", to_string(h.kind));
    m.put("model.height", h.arch.height);
    m.put("model.width", h.arch.width);
    m.put("model.channels", io::join(std::span<const int>(h.arch.channels)));
    m.put("model.latent", h.arch.latent);
    m.put("model.slope", io::format_double(h.arch.slope));
    m.put("normalization.vmin", io::format_double(ckpt.norm.vmin));
    m.put("normalization.vmax", io::format_double(ckpt.norm.vmax));
    m.put("train.epochs", h.epochs);
    m.put("train.batch", h.batch);
    m.put("train.lr", io::format_double(h.lr));
    m.put("train.gamma", io::format_double(h.gamma));
    m.put("train.layers", featureext::to_string(h.layers));
    m.put("train.seed", h.seed);
    m.put("extractor.widths", io::join(std::span<const int>(h.extractor.widths)));
    m.put("extractor.seed", h.extractor.seed);
    m.put("extractor.weights", h.extractor_weights.string());
    m.put("extractor.provenance", ckpt.extractor_provenance);
    m.put("state.epoch", ckpt.epoch);
    io::write_meta(dir / "header.ini", m);
    ckpt.weights.save(dir / "weights.bin");
    write_history_csv(dir / "history.csv", h.kind, ckpt.history);
}

namespace {

std::vector<EpochLoss> read_history_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::string line;
    std::getline(in, line);
    std::vector<EpochLoss> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        cells.resize(6);
        auto num = [](const std::string& s) { return s.empty() ? 0.0 : std::stod(s); };
        out.push_back({std::stoi(cells[0]), {num(cells[1]), num(cells[2]), num(cells[3]), num(cells[4]), num(cells[5])}});
    }
    return out;
}

}  // namespace

GeneratorCheckpoint load_checkpoint(const fs::path& dir) {
    if (!fs::exists(dir / "header.ini")) throw std::runtime_error("no generator checkpoint at " + dir.string());
    const io::Meta m = io::read_meta(dir / "header.ini");
    GeneratorCheckpoint c;
    auto& h = c.hyper;
    h.kind = parse_model_kind(m.get<std::string>("model.kind"));
    h.arch.height = m.get<int>("model.height");
    h.arch.width = m.get<int>("model.width");
    h.arch.channels = io::split_ints(m.get<std::string>("model.channels"));
    h.arch.latent = m.get<int>("model.latent");
    h.arch.slope = std::stod(m.get<std::string>("model.slope"));
    c.norm.vmin = std::stod(m.get<std::string>("normalization.vmin"));
    c.norm.vmax = std::stod(m.get<std::string>("normalization.vmax"));
    h.epochs = m.get<int>("train.epochs");
    h.batch = m.get<int>("train.batch");
    h.lr = std::stod(m.get<std::string>("train.lr"));
    h.gamma = std::stod(m.get<std::string>("train.gamma"));
    h.layers = featureext::parse_selection(m.get<std::string>("train.layers"));
    h.seed = m.get<std::uint64_t>("train.seed");
    h.extractor.widths = io::split_ints(m.get<std::string>("extractor.widths"));
    h.extractor.seed = m.get<std::uint64_t>("extractor.seed");
    h.extractor_weights = m.get<std::string>("extractor.weights", "");
    c.extractor_provenance = m.get<std::string>("extractor.provenance", "");
    c.epoch = m.get<int>("state.epoch");
    c.weights = io::WeightArchive::load(dir / "weights.bin");
    if (fs::exists(dir / "history.csv")) c.history = read_history_csv(dir / "history.csv");
    c.instantiate();  // validates weights against the architecture
    return c;
}

Tensor<float> reconstruct_scenario(const Generator<float>& g, const LeakageScenario& s, const Normalization& norm) {
    std::vector<Tensor<float>> out;
    const Tensor<float> x10 = to_tensor(s.maps.front(), norm), x200 = to_tensor(s.maps.back(), norm);
    for (const auto& m : s.maps) {
        if (g.kind() == ModelKind::AE) {
            const double year = m.year;
            out.push_back(ae_forward(g, x10, x200, std::span<const double>(&year, 1)));
        } else {
            out.push_back(vae_reconstruct(g, to_tensor(m, norm)));
        }
    }
    return stack<float>(out);
}

namespace {

struct SourcePair {
    int scenario = 0;  // index into the training set
    int ka = 0;        // year index weighted by alpha
    int kb = 0;
};

std::vector<SourcePair> select_pairs(std::span<const LeakageScenario> train_set, const AugmentConfig& cfg) {
    std::vector<SourcePair> all, small;
    for (int s = 0; s < static_cast<int>(train_set.size()); ++s) {
        if (cfg.mode == AlphaMode::Endpoints) {
            all.push_back({s, 0, datagen::kNumYears - 1});
            continue;
        }
        for (int k = 0; k + 1 < datagen::kNumYears; ++k) {
            all.push_back({s, k, k + 1});
            const double later = train_set[s].maps[k + 1].leak_mass;
            if (datagen::is_small_leak(datagen::classify_leak(later))) small.push_back(all.back());
        }
    }
    if (cfg.mode == AlphaMode::Adjacent && cfg.small_leak_bias && !small.empty()) return small;
    return all;
}

void check_augment(std::span<const LeakageScenario> train_set, const AugmentConfig& cfg) {
    if (cfg.count < 1) throw std::invalid_argument("augmentation count must be >= 1");
    if (train_set.empty()) throw std::invalid_argument("augmentation needs a non-empty training set");
    for (double a : cfg.alpha_grid)
        if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("alpha grid values must lie in [0, 1]");
}

template <typename Make>
std::vector<SyntheticSample> draw(std::span<const LeakageScenario> train_set, const AugmentConfig& cfg, Make&& make) {
    check_augment(train_set, cfg);
    const auto pairs = select_pairs(train_set, cfg);
    const auto grid = cfg.alpha_grid.empty() ? default_alpha_grid(cfg.mode) : cfg.alpha_grid;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1), pick_alpha(0, grid.size() - 1);
    std::vector<SyntheticSample> out;
    out.reserve(cfg.count);
    for (int i = 0; i < cfg.count; ++i) {
        const SourcePair p = pairs[pick_pair(rng)];
        const double alpha = grid[pick_alpha(rng)];
        const auto& s = train_set[p.scenario];
        const auto& a = s.maps[p.ka];
        const auto& b = s.maps[p.kb];
        SyntheticSample smp;
        smp.height = a.height;
        smp.width = a.width;
        smp.alpha = alpha;
        smp.scenario_id = s.scenario_id;
        smp.year_a = a.year;
        smp.year_b = b.year;
        smp.pseudo_year = alpha * a.year + (1.0 - alpha) * b.year;
        smp.leak_mass = alpha * a.leak_mass + (1.0 - alpha) * b.leak_mass;
        const auto m = make(s, a, b, alpha, rng);
        smp.map.assign(m.begin(), m.end());
        out.push_back(std::move(smp));
    }
    return out;
}

}  // namespace

std::vector<SyntheticSample> generate_augmentation(const GeneratorCheckpoint& ckpt,
                                                   std::span<const LeakageScenario> train_set,
                                                   const AugmentConfig& cfg) {
    check_train_set(train_set, ckpt.hyper.arch);
    const Generator<float> g = ckpt.instantiate();
    const Normalization& norm = ckpt.norm;
    const int L = g.arch().latent;
    return draw(train_set, cfg,
                [&](const LeakageScenario& s, const datagen::VelocityMap& a, const datagen::VelocityMap& b,
                    double alpha, std::mt19937_64& rng) {
                    const Tensor<float> xa = to_tensor(a, norm), xb = to_tensor(b, norm);
                    Tensor<float> xhat;
                    if (g.kind() == ModelKind::AE) {
                        const double t = alpha * a.year + (1.0 - alpha) * b.year;
                        xhat = ae_forward(g, to_tensor(s.maps.front(), norm), to_tensor(s.maps.back(), norm),
                                          std::span<const double>(&t, 1));
                    } else if (!cfg.stochastic) {
                        xhat = latent_interpolate(g, xa, xb, alpha);
                    } else {
                        auto sample = [&](const Tensor<float>& x) {
                            const auto [mu, lv] = vae_encode(g, x);
                            Tensor<float> eps(1, L, 1, 1);
                            fill_normal(eps, rng);
                            Tensor<float> z(1, L, 1, 1);
                            const auto zv = losses::reparameterize<float>(mu.data, lv.data, eps.data);
                            z.data.assign(zv.begin(), zv.end());
                            return z;
                        };
                        xhat = interpolate_with<float>(sample, [&](const Tensor<float>& z) { return vae_decode(g, z); },
                                                       xa, xb, alpha);
                    }
                    // Decoder overshoot outside the training velocity range is clipped so
                    // the synthetic maps stay physical (and within the simulator's CFL bound).
                    auto map = from_tensor(xhat, 0, norm);
                    for (auto& v : map)
                        v = std::clamp(v, static_cast<float>(norm.vmin), static_cast<float>(norm.vmax));
                    return map;
                });
}

std::vector<SyntheticSample> generate_linear_augmentation(std::span<const LeakageScenario> train_set,
                                                          const AugmentConfig& cfg) {
    return draw(train_set, cfg,
                [](const LeakageScenario&, const datagen::VelocityMap& a, const datagen::VelocityMap& b, double alpha,
                   std::mt19937_64&) {
                    Tensor<float> ta(1, 1, a.height, a.width), tb(1, 1, b.height, b.width);
                    ta.data.assign(a.grid.begin(), a.grid.end());
                    tb.data.assign(b.grid.begin(), b.grid.end());
                    return linear_interp_baseline(ta, tb, alpha).data;
                });
}

void save_augmentation(const fs::path& dir, std::span<const SyntheticSample> samples, const std::string& generator_tag) {
    if (samples.empty()) throw std::invalid_argument("no synthetic samples to save");
    fs::create_directories(dir);
    const int h = samples.front().height, w = samples.front().width;
    std::vector<float> all;
    all.reserve(samples.size() * h * w);
    std::ofstream csv(dir / "synthetic.csv");
    if (!csv) throw std::runtime_error("cannot write " + (dir / "synthetic.csv").string());
    csv << "index,scenario_id,year_a,year_b,alpha,pseudo_year,leak_mass\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.height != h || s.width != w) throw std::invalid_argument("synthetic samples differ in size");
        all.insert(all.end(), s.map.begin(), s.map.end());
        csv << i << ',' << s.scenario_id << ',' << s.year_a << ',' << s.year_b << ',' << io::format_double(s.alpha)
            << ',' << io::format_double(s.pseudo_year) << ',' << io::format_double(s.leak_mass) << '\n';
    }
    io::write_f32(dir / "synthetic.f32", all);
    io::Meta m;
    m.put("augmentation.count", samples.size());
    m.put("augmentation.height", h);
    m.put("augmentation.width", w);
    m.put("augmentation.generator", generator_tag);
    m.put("augmentation.dtype", "float32-le");
    io::write_meta(dir / "synthetic.meta", m);
}

std::vector<SyntheticSample> load_augmentation(const fs::path& dir, std::string* generator_tag) {
    const io::Meta m = io::read_meta(dir / "synthetic.meta");
    const int count = m.get<int>("augmentation.count");
    const int h = m.get<int>("augmentation.height"), w = m.get<int>("augmentation.width");
    if (generator_tag) *generator_tag = m.get<std::string>("augmentation.generator");
    const auto values = io::read_f32(dir / "synthetic.f32");
    const std::size_t per = static_cast<std::size_t>(h) * w;
    if (values.size() != per * count)
        throw std::runtime_error("synthetic.f32 holds " + std::to_string(values.size()) + " values, expected " +
                                 std::to_string(per * count));
    std::ifstream csv(dir / "synthetic.csv");
    if (!csv) throw std::runtime_error("cannot read " + (dir / "synthetic.csv").string());
    std::string line;
    std::getline(csv, line);
    std::vector<SyntheticSample> out;
    for (int i = 0; i < count; ++i) {
        if (!std::getline(csv, line)) throw std::runtime_error("synthetic.csv is shorter than the sample count");
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> c;
        while (std::getline(ss, cell, ',')) c.push_back(cell);
        if (c.size() != 7) throw std::runtime_error("malformed synthetic.csv row " + std::to_string(i));
        SyntheticSample s;
        s.height = h;
        s.width = w;
        s.scenario_id = std::stoi(c[1]);
        s.year_a = std::stoi(c[2]);
        s.year_b = std::stoi(c[3]);
        s.alpha = std::stod(c[4]);
        s.pseudo_year = std::stod(c[5]);
        s.leak_mass = std::stod(c[6]);
        s.map.assign(values.begin() + i * per, values.begin() + (i + 1) * per);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace seismo::genmodels
