#include "seismo/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "seismo/genmodels.hpp"
#include "seismo/wavesim.hpp"

namespace seismo::inversion {

namespace fs = std::filesystem;

InvArch InvArch::tiny() {
    InvArch a;
    a.shots = 1;
    a.nt = 16;
    a.receivers = 4;
    a.height = a.width = 4;
    a.encoder = {2, 2};
    a.bottleneck = 4;
    a.decoder = {2};
    return a;
}

void InvArch::validate() const {
    if (shots < 1 || nt < 1 || receivers < 1) throw std::invalid_argument("gather dimensions must be positive");
    if (encoder.empty() || decoder.empty()) throw std::invalid_argument("network needs encoder and decoder blocks");
    if (time_kernel < 1 || time_stride < 1 || bottleneck < 1) throw std::invalid_argument("invalid layer sizes");
    const int f = decoder_factor();
    if (height % f != 0 || width % f != 0 || height < f || width < f)
        throw std::invalid_argument("map size must be divisible by 2^" + std::to_string(decoder.size()));
}

nn::Sequential<float> InversionCheckpoint::instantiate() const {
    auto net = build_network<float>(hyper.arch);
    io::install_parameters(net, "net.", weights);
    return net;
}

std::string to_string(Subset s) { return s == Subset::General ? "general" : "small"; }

Subset parse_subset(const std::string& text) {
    if (text == "general") return Subset::General;
    if (text == "small") return Subset::Small;
    throw std::invalid_argument("subset must be general or small (got '" + text + "')");
}

PairSet load_real_pairs(const fs::path& dir, const fs::path& gather_dir) {
    const fs::path gdir = gather_dir.empty() ? dir : gather_dir;
    const auto ids = datagen::list_scenarios(dir);
    if (ids.empty()) throw std::runtime_error("no scenarios in " + dir.string());
    PairSet set;
    for (int id : ids) {
        const auto s = datagen::load_scenario(dir, id);
        const auto gp = wavesim::gather_path(gdir, id);
        if (!fs::exists(gp))
            throw std::runtime_error("missing gathers for scenario " + std::to_string(id) + " (run simulate on " +
                                     gdir.string() + ")");
        const auto g = wavesim::load_gathers(gp);
        if (g.maps != static_cast<int>(s.maps.size()))
            throw std::runtime_error("gathers of scenario " + std::to_string(id) + " do not match its maps");
        if (set.pairs.empty()) {
            set.shots = g.shots;
            set.receivers = g.receivers;
            set.nt = g.nt;
            set.height = s.maps.front().height;
            set.width = s.maps.front().width;
        } else if (g.shots != set.shots || g.receivers != set.receivers || g.nt != set.nt) {
            throw std::runtime_error("scenario " + std::to_string(id) + " was simulated with a different acquisition");
        }
        for (int k = 0; k < g.maps; ++k) {
            Pair p;
            const auto slice = g.map_slice(k);
            p.gather.assign(slice.begin(), slice.end());
            p.target = s.maps[k].grid;
            p.leak_mass = s.maps[k].leak_mass;
            p.scenario_id = id;
            p.year = s.maps[k].year;
            set.pairs.push_back(std::move(p));
        }
    }
    return set;
}

PairSet load_synthetic_pairs(const fs::path& dir, const fs::path& gather_dir) {
    PairSet set;
    const auto samples = genmodels::load_augmentation(dir, &set.tag);
    const auto gp = (gather_dir.empty() ? dir : gather_dir) / "gathers_synthetic.f32";
    if (!fs::exists(gp)) throw std::runtime_error("missing gathers for synthetic set (run simulate --aug " + dir.string() + ")");
    const auto g = wavesim::load_gathers(gp);
    if (g.maps != static_cast<int>(samples.size()))
        throw std::runtime_error("synthetic gathers do not match the synthetic maps");
    set.shots = g.shots;
    set.receivers = g.receivers;
    set.nt = g.nt;
    set.height = samples.front().height;
    set.width = samples.front().width;
    for (int k = 0; k < g.maps; ++k) {
        Pair p;
        const auto slice = g.map_slice(k);
        p.gather.assign(slice.begin(), slice.end());
        p.target = samples[k].map;
        p.leak_mass = samples[k].leak_mass;
        p.provenance = Provenance::Synthetic;
        p.scenario_id = samples[k].scenario_id;
        p.year = static_cast<int>(std::lround(samples[k].pseudo_year));
        p.alpha = samples[k].alpha;
        set.pairs.push_back(std::move(p));
    }
    return set;
}

TraceStats fit_trace_stats(const PairSet& set) {
    if (set.pairs.empty()) throw std::invalid_argument("cannot fit trace statistics on an empty set");
    TraceStats st;
    st.shots = set.shots;
    st.receivers = set.receivers;
    const int traces = set.shots * set.receivers;
    std::vector<double> sum(traces, 0.0), sq(traces, 0.0);
    for (const auto& p : set.pairs)
        for (int tr = 0; tr < traces; ++tr)
            for (int t = 0; t < set.nt; ++t) {
                const double v = p.gather[static_cast<std::size_t>(tr) * set.nt + t];
                sum[tr] += v;
                sq[tr] += v * v;
            }
    const double count = static_cast<double>(set.pairs.size()) * set.nt;
    for (int tr = 0; tr < traces; ++tr) {
        const double mean = sum[tr] / count;
        const double var = std::max(0.0, sq[tr] / count - mean * mean);
        const double sd = std::sqrt(var);
        st.mean.push_back(static_cast<float>(mean));
        st.stddev.push_back(static_cast<float>(sd > 0.0 ? sd : 1.0));
    }
    return st;
}

namespace {

void check_gather(std::size_t size, const InvArch& a) {
    if (size != static_cast<std::size_t>(a.shots) * a.receivers * a.nt)
        throw std::invalid_argument("gather has " + std::to_string(size) + " samples, network expects " +
                                    std::to_string(a.shots) + " shots x " + std::to_string(a.receivers) +
                                    " receivers x " + std::to_string(a.nt) + " steps");
}

void standardize_into(std::span<const float> gather, const TraceStats& st, const InvArch& a, std::span<float> dst) {
    check_gather(gather.size(), a);
    for (int s = 0; s < a.shots; ++s)
        for (int r = 0; r < a.receivers; ++r) {
            const int tr = s * a.receivers + r;
            const float mean = st.mean[tr], inv = 1.0f / st.stddev[tr];
            const float* src = gather.data() + static_cast<std::size_t>(tr) * a.nt;
            for (int t = 0; t < a.nt; ++t)
                dst[(static_cast<std::size_t>(s) * a.nt + t) * a.receivers + r] = (src[t] - mean) * inv;
        }
}

Tensor<float> target_tensor(std::span<const Pair* const> pairs, const TargetNorm& n, const InvArch& a) {
    Tensor<float> t(static_cast<int>(pairs.size()), 1, a.height, a.width);
    const double scale = 1.0 / (n.vmax - n.vmin);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i]->target.size() != static_cast<std::size_t>(a.height) * a.width)
            throw std::invalid_argument("target map size does not match the network");
        auto dst = t.sample(static_cast<int>(i));
        for (std::size_t k = 0; k < dst.size(); ++k)
            dst[k] = static_cast<float>((pairs[i]->target[k] - n.vmin) * scale);
    }
    return t;
}

void check_set(const PairSet& set, const InvArch& a, const char* what) {
    if (set.pairs.empty()) return;
    if (set.shots != a.shots || set.receivers != a.receivers || set.nt != a.nt || set.height != a.height ||
        set.width != a.width)
        throw std::invalid_argument(std::string(what) + " set dimensions (" + std::to_string(set.shots) + " shots, " +
                                    std::to_string(set.receivers) + " receivers, " + std::to_string(set.nt) +
                                    " steps, " + std::to_string(set.height) + "x" + std::to_string(set.width) +
                                    ") do not match the network configuration");
}

}  // namespace

Tensor<float> make_input(std::span<const Pair* const> pairs, const TraceStats& stats, const InvArch& arch) {
    Tensor<float> x(static_cast<int>(pairs.size()), arch.shots, arch.nt, arch.receivers);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        standardize_into(pairs[i]->gather, stats, arch, x.sample(static_cast<int>(i)));
    return x;
}

InversionCheckpoint train_inversion(const PairSet& real, const PairSet& synthetic, const InvHyper& hyper) {
    const InvArch& a = hyper.arch;
    a.validate();
    if (hyper.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (hyper.batch < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(hyper.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (real.pairs.empty()) throw std::invalid_argument("inversion training needs real pairs");
    check_set(real, a, "training");
    check_set(synthetic, a, "synthetic");

    InversionCheckpoint ckpt;
    ckpt.hyper = hyper;
    ckpt.augmentation = synthetic.pairs.empty() ? "none" : synthetic.tag;
    ckpt.real_pairs = static_cast<int>(real.pairs.size());
    ckpt.synthetic_pairs = static_cast<int>(synthetic.pairs.size());
    ckpt.stats = fit_trace_stats(real);
    {
        double lo = real.pairs.front().target.front(), hi = lo;
        for (const auto& p : real.pairs)
            for (float v : p.target) {
                lo = std::min(lo, static_cast<double>(v));
                hi = std::max(hi, static_cast<double>(v));
            }
        if (!(hi > lo)) throw std::invalid_argument("training targets are constant");
        ckpt.norm = {lo, hi};
    }

    std::vector<const Pair*> items;
    for (const auto& p : real.pairs) items.push_back(&p);
    for (const auto& p : synthetic.pairs) items.push_back(&p);

    // Inputs and targets are prepared once; batches are assembled by copy.
    const std::size_t in_size = static_cast<std::size_t>(a.shots) * a.nt * a.receivers;
    const Tensor<float> inputs = make_input(items, ckpt.stats, a);
    const Tensor<float> targets = target_tensor(items, ckpt.norm, a);

    auto net = build_network<float>(a);
    std::mt19937_64 rng(hyper.seed);
    nn::he_init(net, rng);
    nn::Adam<float> adam(net.parameters(), {.lr = hyper.lr, .weight_decay = hyper.weight_decay});

    std::vector<int> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double acc = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const int n = static_cast<int>(std::min(order.size() - start, static_cast<std::size_t>(hyper.batch)));
            Tensor<float> x(n, a.shots, a.nt, a.receivers), y(n, 1, a.height, a.width);
            for (int i = 0; i < n; ++i) {
                const int j = order[start + i];
                std::copy_n(inputs.sample(j).begin(), in_size, x.sample(i).begin());
                std::copy_n(targets.sample(j).begin(), y.sample_size(), y.sample(i).begin());
            }
            const auto acts = net.forward_trace(x);
            Tensor<float> dpred;
            const double loss = invnet_loss(acts.back(), y, &dpred);
            if (!std::isfinite(loss))
                throw TrainingError("inversion training diverged (non-finite loss) at epoch " + std::to_string(epoch),
                                    epoch);
            acc += loss * n;
            auto grads = net.zero_grads();
            net.backward(acts, dpred, grads, false);
            adam.step(grads);
        }
        ckpt.history.push_back({epoch, acc / static_cast<double>(order.size())});
        if (hyper.verbose)
            std::fprintf(stderr, "[train-inv %s] epoch %d/%d loss %.6g\n", ckpt.augmentation.c_str(), epoch,
                         hyper.epochs, ckpt.history.back().train_loss);
    }
    ckpt.epoch = hyper.epochs;
    io::export_parameters(net, "net.", ckpt.weights);
    return ckpt;
}

namespace {

// Normalized predictions for `pairs`, evaluated in chunks.
Tensor<float> predict(const nn::Sequential<float>& net, const InversionCheckpoint& ckpt,
                      std::span<const Pair* const> pairs) {
    const InvArch& a = ckpt.hyper.arch;
    Tensor<float> out(static_cast<int>(pairs.size()), 1, a.height, a.width);
    constexpr std::size_t kChunk = 32;
    for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
        const auto part = pairs.subspan(start, std::min(kChunk, pairs.size() - start));
        const Tensor<float> y = net.forward(make_input(part, ckpt.stats, a));
        std::copy(y.data.begin(), y.data.end(), out.data.begin() + start * out.sample_size());
    }
    return out;
}

}  // namespace

std::vector<std::vector<float>> invnet_forward(const InversionCheckpoint& ckpt,
                                               std::span<const std::vector<float>> gathers) {
    const auto net = ckpt.instantiate();
    std::vector<Pair> tmp(gathers.size());
    std::vector<const Pair*> ptrs;
    for (std::size_t i = 0; i < gathers.size(); ++i) {
        check_gather(gathers[i].size(), ckpt.hyper.arch);
        tmp[i].gather = gathers[i];
        ptrs.push_back(&tmp[i]);
    }
    const Tensor<float> y = predict(net, ckpt, ptrs);
    std::vector<std::vector<float>> maps;
    const double span = ckpt.norm.vmax - ckpt.norm.vmin;
    for (int i = 0; i < y.n; ++i) {
        std::vector<float> m(y.sample_size());
        auto s = y.sample(i);
        for (std::size_t k = 0; k < m.size(); ++k) m[k] = static_cast<float>(ckpt.norm.vmin + s[k] * span);
        maps.push_back(std::move(m));
    }
    return maps;
}

TestReport test_inversion(const InversionCheckpoint& ckpt, const PairSet& test, Subset subset, bool keep_predictions) {
    const InvArch& a = ckpt.hyper.arch;
    check_set(test, a, "test");
    std::vector<const Pair*> chosen;
    std::vector<int> index;
    for (std::size_t i = 0; i < test.pairs.size(); ++i) {
        const auto c = datagen::classify_leak(test.pairs[i].leak_mass);
        if (subset == Subset::General || datagen::is_small_leak(c)) {
            chosen.push_back(&test.pairs[i]);
            index.push_back(static_cast<int>(i));
        }
    }
    if (chosen.empty()) throw std::invalid_argument("test subset '" + to_string(subset) + "' is empty");

    const auto net = ckpt.instantiate();
    const Tensor<float> pred = predict(net, ckpt, chosen);
    const double span = ckpt.norm.vmax - ckpt.norm.vmin;

    TestReport r;
    r.subset = subset;
    double total = 0.0;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        const Pair& p = *chosen[i];
        auto s = pred.sample(static_cast<int>(i));
        double acc = 0.0;
        std::vector<float> phys;
        if (keep_predictions) phys.resize(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double truth = (p.target[k] - ckpt.norm.vmin) / span;
            acc += std::abs(static_cast<double>(s[k]) - truth);
            if (keep_predictions) phys[k] = static_cast<float>(ckpt.norm.vmin + s[k] * span);
        }
        SampleError e;
        e.index = index[i];
        e.scenario_id = p.scenario_id;
        e.year = p.year;
        e.leak_class = datagen::classify_leak(p.leak_mass);
        e.mae = acc / static_cast<double>(s.size());
        e.mae_mps = e.mae * span;
        total += e.mae;
        r.samples.push_back(e);
        if (keep_predictions) r.predictions.push_back(std::move(phys));
    }
    r.loss = total / static_cast<double>(chosen.size());
    return r;
}

void write_report_csv(const fs::path& file, const TestReport& r) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "index,scenario_id,year,leak_class,mae,mae_mps\n";
    for (const auto& e : r.samples)
        out << e.index << ',' << e.scenario_id << ',' << e.year << ',' << datagen::to_string(e.leak_class) << ','
            << io::format_double(e.mae) << ',' << io::format_double(e.mae_mps) << '\n';
}

void write_history_csv(const fs::path& file, std::span<const InvEpoch> history) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "epoch,train_loss\n";
    for (const auto& e : history) out << e.epoch << ',' << io::format_double(e.train_loss) << '\n';
}

void save_checkpoint(const fs::path& dir, const InversionCheckpoint& ckpt) {
    fs::create_directories(dir);
    const auto& h = ckpt.hyper;
    const auto& a = h.arch;
    io::Meta m;
    m.put("network.shots", a.shots);
    m.put("network.nt", a.nt);
    m.put("network.receivers", a.receivers);
    m.put("network.height", a.height);
    m.put("network.width", a.width);
    m.put("network.encoder", io::join(std::span<const int>(a.encoder)));
    m.put("network.time_kernel", a.time_kernel);
    m.put("network.time_stride", a.time_stride);
    m.put("network.bottleneck", a.bottleneck);
    m.put("network.decoder", io::join(std::span<const int>(a.decoder)));
    m.put("network.slope", io::format_double(a.slope));
    m.put("train.epochs", h.epochs);
    m.put("train.batch", h.batch);
    m.put("train.lr", io::format_double(h.lr));
    m.put("train.weight_decay", io::format_double(h.weight_decay));
    m.put("train.seed", h.seed);
    m.put("train.augmentation", ckpt.augmentation);
    m.put("train.real_pairs", ckpt.real_pairs);
    m.put("train.synthetic_pairs", ckpt.synthetic_pairs);
    m.put("normalization.vmin", io::format_double(ckpt.norm.vmin));
    m.put("normalization.vmax", io::format_double(ckpt.norm.vmax));
    m.put("state.epoch", ckpt.epoch);
    io::write_meta(dir / "header.ini", m);

    io::WeightArchive w = ckpt.weights;
    w.add({"stats.mean", {ckpt.stats.shots, ckpt.stats.receivers, 1, 1}, ckpt.stats.mean});
    w.add({"stats.std", {ckpt.stats.shots, ckpt.stats.receivers, 1, 1}, ckpt.stats.stddev});
    w.save(dir / "weights.bin");
    write_history_csv(dir / "history.csv", ckpt.history);
}

InversionCheckpoint load_checkpoint(const fs::path& dir) {
    if (!fs::exists(dir / "header.ini")) throw std::runtime_error("no inversion checkpoint at " + dir.string());
    const io::Meta m = io::read_meta(dir / "header.ini");
    InversionCheckpoint c;
    auto& h = c.hyper;
    auto& a = h.arch;
    a.shots = m.get<int>("network.shots");
    a.nt = m.get<int>("network.nt");
    a.receivers = m.get<int>("network.receivers");
    a.height = m.get<int>("network.height");
    a.width = m.get<int>("network.width");
    a.encoder = io::split_ints(m.get<std::string>("network.encoder"));
    a.time_kernel = m.get<int>("network.time_kernel");
    a.time_stride = m.get<int>("network.time_stride");
    a.bottleneck = m.get<int>("network.bottleneck");
    a.decoder = io::split_ints(m.get<std::string>("network.decoder"));
    a.slope = std::stod(m.get<std::string>("network.slope"));
    h.epochs = m.get<int>("train.epochs");
    h.batch = m.get<int>("train.batch");
    h.lr = std::stod(m.get<std::string>("train.lr"));
    h.weight_decay = std::stod(m.get<std::string>("train.weight_decay"));
    h.seed = m.get<std::uint64_t>("train.seed");
    c.augmentation = m.get<std::string>("train.augmentation");
    c.real_pairs = m.get<int>("train.real_pairs");
    c.synthetic_pairs = m.get<int>("train.synthetic_pairs");
    c.norm.vmin = std::stod(m.get<std::string>("normalization.vmin"));
    c.norm.vmax = std::stod(m.get<std::string>("normalization.vmax"));
    c.epoch = m.get<int>("state.epoch");

    const auto all = io::WeightArchive::load(dir / "weights.bin");
    const auto* mean = all.find("stats.mean");
    const auto* sd = all.find("stats.std");
    if (!mean || !sd)
        throw io::WeightFileError(io::WeightFileError::Kind::MissingLayer, "missing layer stats.mean / stats.std");
    c.stats.shots = a.shots;
    c.stats.receivers = a.receivers;
    c.stats.mean = mean->values;
    c.stats.stddev = sd->values;
    if (c.stats.mean.size() != static_cast<std::size_t>(a.shots) * a.receivers || c.stats.stddev.size() != c.stats.mean.size())
        throw io::WeightFileError(io::WeightFileError::Kind::ShapeMismatch, "shape mismatch for layer stats.mean");
    for (const auto& arr : all.arrays())
        if (arr.name.starts_with("net.")) c.weights.add(arr);

    if (fs::exists(dir / "history.csv")) {
        std::ifstream in(dir / "history.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            c.history.push_back({std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        }
    }
    c.instantiate();
    return c;
}

}  // namespace seismo::inversion
