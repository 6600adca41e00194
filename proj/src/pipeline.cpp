#include "seismo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "seismo/datagen.hpp"
#include "seismo/plot.hpp"

namespace seismo::pipeline {

namespace fs = std::filesystem;

namespace {

struct Field {
    const char* section;
    const char* key;
    bool affects_results;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string str(int v) { return std::to_string(v); }
std::string str(std::uint64_t v) { return std::to_string(v); }
std::string str(double v) { return io::format_double(v); }
std::string str(bool v) { return v ? "true" : "false"; }

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string w;
    while (std::getline(ss, w, ',')) {
        w.erase(0, w.find_first_not_of(" \t"));
        w.erase(w.find_last_not_of(" \t") + 1);
        if (!w.empty()) out.push_back(w);
    }
    return out;
}

std::string join_words(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

std::vector<std::uint64_t> split_u64(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const auto& w : split_words(s)) out.push_back(std::stoull(w));
    return out;
}

std::string join_u64(const std::vector<std::uint64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

#define SEISMO_INT(sec, name, member, affects)                                                  \
    Field{sec, name, affects, [](const ExperimentConfig& c) { return str(c.member); },         \
          [](ExperimentConfig& c, const std::string& v) { c.member = std::stoi(v); }}
#define SEISMO_U64(sec, name, member, affects)                                                  \
    Field{sec, name, affects, [](const ExperimentConfig& c) { return str(c.member); },         \
          [](ExperimentConfig& c, const std::string& v) { c.member = std::stoull(v); }}
#define SEISMO_DBL(sec, name, member, affects)                                                  \
    Field{sec, name, affects, [](const ExperimentConfig& c) { return str(c.member); },         \
          [](ExperimentConfig& c, const std::string& v) { c.member = std::stod(v); }}
#define SEISMO_BOOL(sec, name, member, affects)                                                 \
    Field{sec, name, affects, [](const ExperimentConfig& c) { return str(c.member); },         \
          [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(v); }}
#define SEISMO_STR(sec, name, member, affects)                                                  \
    Field{sec, name, affects, [](const ExperimentConfig& c) { return std::string(c.member); }, \
          [](ExperimentConfig& c, const std::string& v) { c.member = v; }}
#define SEISMO_INTS(sec, name, member, affects)                                                         \
    Field{sec, name, affects, [](const ExperimentConfig& c) { return io::join(std::span<const int>(c.member)); }, \
          [](ExperimentConfig& c, const std::string& v) { c.member = io::split_ints(v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        SEISMO_STR("run", "profile", profile, false),
        SEISMO_INT("data", "scenarios", scenarios, true),
        SEISMO_INT("data", "height", height, true),
        SEISMO_INT("data", "width", width, true),
        SEISMO_U64("data", "seed", data_seed, true),
        SEISMO_DBL("data", "train_fraction", train_fraction, true),
        SEISMO_U64("data", "split_seed", split_seed, true),
        SEISMO_DBL("sim", "dx", dx, true),
        SEISMO_DBL("sim", "dt", dt, true),
        SEISMO_INT("sim", "nt", nt, true),
        SEISMO_DBL("sim", "peak_frequency", peak_frequency, true),
        SEISMO_INT("sim", "shots", shots, true),
        SEISMO_INT("sim", "boundary_width", boundary_width, true),
        Field{"generator", "models", true, [](const ExperimentConfig& c) { return join_words(c.models); },
              [](ExperimentConfig& c, const std::string& v) { c.models = split_words(v); }},
        SEISMO_INT("generator", "epochs", gen_epochs, true),
        SEISMO_INT("generator", "batch", gen_batch, true),
        SEISMO_DBL("generator", "lr", gen_lr, true),
        SEISMO_DBL("generator", "gamma", gamma, true),
        SEISMO_STR("generator", "layers", layers, true),
        SEISMO_INTS("generator", "channels", gen_channels, true),
        SEISMO_INT("generator", "latent", latent, true),
        SEISMO_U64("generator", "seed", gen_seed, true),
        SEISMO_INTS("generator", "extractor_widths", extractor_widths, true),
        SEISMO_INT("inversion", "epochs", inv_epochs, true),
        SEISMO_INT("inversion", "batch", inv_batch, true),
        SEISMO_DBL("inversion", "lr", inv_lr, true),
        SEISMO_DBL("inversion", "weight_decay", weight_decay, true),
        SEISMO_INTS("inversion", "encoder", inv_encoder, true),
        SEISMO_INTS("inversion", "decoder", inv_decoder, true),
        SEISMO_INT("inversion", "bottleneck", bottleneck, true),
        SEISMO_INT("augmentation", "count", aug_count, true),
        SEISMO_STR("augmentation", "alpha_mode", alpha_mode, true),
        SEISMO_BOOL("augmentation", "small_leak_bias", small_leak_bias, true),
        SEISMO_BOOL("augmentation", "stochastic", stochastic, true),
        Field{"run", "seeds", true, [](const ExperimentConfig& c) { return join_u64(c.seeds); },
              [](ExperimentConfig& c, const std::string& v) { c.seeds = split_u64(v); }},
        Field{"run", "output", false, [](const ExperimentConfig& c) { return c.output.string(); },
              [](ExperimentConfig& c, const std::string& v) { c.output = v; }},
        Field{"run", "cache", false, [](const ExperimentConfig& c) { return c.cache.string(); },
              [](ExperimentConfig& c, const std::string& v) { c.cache = v; }},
        SEISMO_BOOL("run", "verbose", verbose, false),
    };
    return f;
}

#undef SEISMO_INT
#undef SEISMO_U64
#undef SEISMO_DBL
#undef SEISMO_BOOL
#undef SEISMO_STR
#undef SEISMO_INTS

// "section.key=value" lines of the result-affecting fields in the given sections.
std::string key_text(const ExperimentConfig& c, std::initializer_list<const char*> sections,
                     std::initializer_list<const char*> skip = {}) {
    std::string out;
    for (const auto& f : fields()) {
        if (!f.affects_results) continue;
        if (std::none_of(sections.begin(), sections.end(), [&](const char* s) { return std::string(s) == f.section; }))
            continue;
        const std::string name = std::string(f.section) + "." + f.key;
        if (std::any_of(skip.begin(), skip.end(), [&](const char* s) { return name == s; })) continue;
        out += name + "=" + f.get(c) + "\n";
    }
    return out;
}

std::string short_hash(const std::string& text) { return io::sha256_text(text).substr(0, 16); }

void log(const ExperimentConfig& cfg, const std::string& msg) {
    if (cfg.verbose) std::fprintf(stderr, "[seismo] %s\n", msg.c_str());
}

// Build a stage into DIR.partial and publish it by renaming; an existing
// complete stage (stage.ini present) is reused.
template <typename Build>
fs::path cached_stage(const ExperimentConfig& cfg, const std::string& stage, const std::string& key, Build&& build) {
    const fs::path dir = cfg.cache_root() / (stage + "_" + short_hash(key));
    if (fs::exists(dir / "stage.ini")) {
        log(cfg, "reuse " + dir.string());
        return dir;
    }
    fs::path tmp = dir;
    tmp += ".partial";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    log(cfg, "build " + dir.string());
    build(tmp);
    std::ofstream(tmp / "stage.ini") << "[stage]\nname = " << stage << "\nkey = " << io::sha256_text(key) << "\n\n"
                                     << "; inputs\n; " << [&] {
                                            std::string k = key;
                                            for (std::size_t p = 0; (p = k.find('\n', p)) != std::string::npos && p + 1 < k.size(); p += 3)
                                                k.replace(p, 1, "\n; ");
                                            return k;
                                        }();
    fs::remove_all(dir);
    fs::rename(tmp, dir);
    return dir;
}

std::vector<datagen::LeakageScenario> load_all(const fs::path& dir) {
    std::vector<datagen::LeakageScenario> out;
    for (int id : datagen::list_scenarios(dir)) out.push_back(datagen::load_scenario(dir, id));
    return out;
}

// Digest of every regular file below `dir` (relative path + content hash).
std::string dir_digest(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string text;
    for (const auto& f : files) text += fs::relative(f, dir).generic_string() + ":" + io::sha256_file(f) + "\n";
    return io::sha256_text(text);
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

// ---- configuration ----------------------------------------------------------

ExperimentConfig ExperimentConfig::for_profile(const std::string& name) {
    ExperimentConfig c;
    c.profile = name;
    if (name == "desk") return c;
    if (name == "paper") {
        c.scenarios = 991;
        c.train_fraction = 800.0 / 991.0;  // 800 training scenarios
        c.models = {"ae", "vae", "vae_percep", "vae_reg"};
        c.gen_epochs = 100;
        c.inv_epochs = 80;
        c.aug_count = 3000;
        c.seeds = {0, 1, 2, 3, 4};
        return c;
    }
    if (name == "smoke") {
        c.scenarios = 8;
        c.height = c.width = 32;
        c.nt = 200;
        c.boundary_width = 12;
        c.gen_epochs = 2;
        c.gen_channels = {4, 8, 8, 16};
        c.latent = 8;
        c.extractor_widths = {8, 16, 16, 32, 32};
        c.inv_epochs = 2;
        c.inv_encoder = {4, 8, 8, 8, 16};
        c.inv_decoder = {8, 8, 4, 4};
        c.bottleneck = 32;
        c.aug_count = 20;
        c.seeds = {0};
        return c;
    }
    throw std::invalid_argument("unknown profile '" + name + "' (desk, paper, smoke)");
}

void ExperimentConfig::apply(const io::Meta& m) {
    std::set<std::string> known;
    for (const auto& f : fields()) known.insert(std::string(f.section) + "." + f.key);
    for (const auto& [section, tree] : m) {
        if (tree.empty()) throw std::invalid_argument("config key '" + section + "' must be inside a [section]");
        for (const auto& [key, value] : tree) {
            const std::string name = section + "." + key;
            if (!known.contains(name)) throw std::invalid_argument("unknown config key '" + name + "'");
        }
    }
    for (const auto& f : fields()) {
        const auto v = m.get_optional<std::string>(std::string(f.section) + "." + f.key);
        if (!v) continue;
        try {
            f.set(*this, *v);
        } catch (const std::exception& e) {
            throw std::invalid_argument("config key '" + std::string(f.section) + "." + f.key + "': " + e.what());
        }
    }
}

ExperimentConfig ExperimentConfig::load(const fs::path& file, const std::string& profile_override) {
    const io::Meta m = io::read_meta(file);
    const std::string profile =
        profile_override.empty() ? m.get<std::string>("run.profile", "desk") : profile_override;
    ExperimentConfig c = for_profile(profile);
    c.apply(m);
    c.profile = profile;
    c.validate();
    return c;
}

io::Meta ExperimentConfig::to_meta() const {
    io::Meta m;
    for (const auto& f : fields()) m.put(std::string(f.section) + "." + f.key, f.get(*this));
    return m;
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& f : fields())
        if (f.affects_results) out += std::string(f.section) + "." + f.key + "=" + f.get(*this) + "\n";
    return out;
}

std::string ExperimentConfig::hash() const { return io::sha256_text(canonical()); }

void ExperimentConfig::validate() const {
    if (scenarios < 2) throw std::invalid_argument("need at least 2 scenarios");
    if (seeds.empty()) throw std::invalid_argument("seed list must not be empty");
    if (models.empty()) throw std::invalid_argument("generator model list must not be empty");
    for (const auto& m : models)
        if (m != "linear") genmodels::parse_model_kind(m);
    featureext::parse_selection(layers);
    genmodels::parse_alpha_mode(alpha_mode);
    if (aug_count < 0) throw std::invalid_argument("augmentation count must be >= 0");
    if (shots < 1) throw std::invalid_argument("need at least one shot");
    sim_config();
    gen_hyper(models.front() == "linear" ? "vae_reg" : models.front()).arch.validate();
    inv_hyper(0).arch.validate();
}

fs::path ExperimentConfig::cache_root() const {
    if (const char* env = std::getenv("SEISMO_CACHE"); env && *env) return env;
    return cache.empty() ? output / "cache" : cache;
}

wavesim::SimConfig ExperimentConfig::sim_config() const {
    auto s = wavesim::SimConfig::surface_acquisition(height, width, shots);
    s.dx = dx;
    s.dt = dt;
    s.nt = nt;
    s.peak_frequency = peak_frequency;
    s.boundary_width = boundary_width;
    return s;
}

genmodels::GenHyper ExperimentConfig::gen_hyper(const std::string& model) const {
    genmodels::GenHyper h;
    h.kind = genmodels::parse_model_kind(model);
    h.epochs = gen_epochs;
    h.batch = gen_batch;
    h.lr = gen_lr;
    h.gamma = gamma;
    h.layers = featureext::parse_selection(layers);
    h.seed = gen_seed;
    h.arch.height = height;
    h.arch.width = width;
    h.arch.channels = gen_channels;
    h.arch.latent = latent;
    h.extractor.widths = extractor_widths;
    h.verbose = verbose;
    return h;
}

inversion::InvHyper ExperimentConfig::inv_hyper(std::uint64_t seed) const {
    inversion::InvHyper h;
    h.epochs = inv_epochs;
    h.batch = inv_batch;
    h.lr = inv_lr;
    h.weight_decay = weight_decay;
    h.seed = seed;
    h.arch.shots = shots;
    h.arch.nt = nt;
    h.arch.receivers = width;
    h.arch.height = height;
    h.arch.width = width;
    h.arch.encoder = inv_encoder;
    h.arch.decoder = inv_decoder;
    h.arch.bottleneck = bottleneck;
    h.verbose = verbose;
    return h;
}

genmodels::AugmentConfig ExperimentConfig::augment_config(int count, std::uint64_t seed) const {
    genmodels::AugmentConfig a;
    a.count = count;
    a.mode = genmodels::parse_alpha_mode(alpha_mode);
    a.small_leak_bias = small_leak_bias;
    a.stochastic = stochastic;
    a.seed = seed;
    return a;
}

// ---- stages -------------------------------------------------------------------

void generate_dataset(const ExperimentConfig& cfg, const fs::path& out) {
    datagen::GeneratorConfig gc;
    gc.height = cfg.height;
    gc.width = cfg.width;
    gc.layer_top = {static_cast<int>(std::lround(cfg.height * 22.0 / 64.0)),
                    static_cast<int>(std::lround(cfg.height * 43.0 / 64.0))};
    const auto baseline = datagen::generate_baseline(gc);
    std::vector<datagen::LeakageScenario> all;
    std::vector<int> ids;
    for (int i = 0; i < cfg.scenarios; ++i) {
        all.push_back(datagen::generate_scenario(cfg.data_seed + i, baseline, gc, i));
        ids.push_back(i);
    }
    const auto split = datagen::split_dataset(ids, cfg.train_fraction, cfg.split_seed);
    fs::create_directories(out / "train");
    fs::create_directories(out / "test");
    for (int id : split.train_ids) datagen::save_scenario(out / "train", all[id]);
    for (int id : split.test_ids) datagen::save_scenario(out / "test", all[id]);
    datagen::save_baseline(out / "baseline.f32", baseline);
    datagen::write_histogram_csv(out / "mass_histogram.csv", datagen::mass_histogram(all, 20));
}

void simulate_dataset(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
    const auto sim = cfg.sim_config();
    fs::create_directories(out_dir / "train");
    fs::create_directories(out_dir / "test");
    wavesim::forward_dataset(data_dir / "train", out_dir / "train", sim);
    wavesim::forward_dataset(data_dir / "test", out_dir / "test", sim);
}

void simulate_augmentation(const ExperimentConfig& cfg, const fs::path& aug_dir) {
    const auto samples = genmodels::load_augmentation(aug_dir);
    std::vector<std::vector<float>> maps;
    for (const auto& s : samples) maps.push_back(s.map);
    const auto sim = cfg.sim_config();
    const auto g = wavesim::simulate_maps(maps, cfg.height, cfg.width, sim, "synthetic set");
    wavesim::save_gathers(aug_dir / "gathers_synthetic.f32", g, sim, "synthetic", 0);
}

DataStage prepare_data(const ExperimentConfig& cfg) {
    DataStage d;
    d.dir = cached_stage(cfg, "data", key_text(cfg, {"data"}), [&](const fs::path& out) { generate_dataset(cfg, out); });
    d.gather_dir = cached_stage(cfg, "gathers", key_text(cfg, {"data", "sim"}),
                                [&](const fs::path& out) { simulate_dataset(cfg, d.dir, out); });
    return d;
}

namespace {

std::string generator_key(const ExperimentConfig& cfg, const std::string& model) {
    if (model == "linear") return key_text(cfg, {"data"}) + "model=linear\n";
    return key_text(cfg, {"data", "generator"}, {"generator.models"}) + "model=" + model + "\n";
}

std::string augmentation_key(const ExperimentConfig& cfg, const std::string& model, int count, std::uint64_t seed) {
    return generator_key(cfg, model) + key_text(cfg, {"sim", "augmentation"}, {"augmentation.count"}) +
           "count=" + std::to_string(count) + "\nseed=" + std::to_string(seed) + "\n";
}

}  // namespace

fs::path prepare_generator(const ExperimentConfig& cfg, const DataStage& data, const std::string& model) {
    if (model == "linear") throw std::invalid_argument("linear interpolation has no generator to train");
    return cached_stage(cfg, "generator", generator_key(cfg, model), [&](const fs::path& out) {
        const auto train = load_all(data.train());
        const auto ckpt = genmodels::train_generative(train, cfg.gen_hyper(model));
        genmodels::save_checkpoint(out, ckpt);
    });
}

fs::path prepare_augmentation(const ExperimentConfig& cfg, const DataStage& data, const std::string& model, int count,
                              std::uint64_t seed) {
    fs::path gen_dir;
    if (model != "linear") gen_dir = prepare_generator(cfg, data, model);
    return cached_stage(cfg, "augment", augmentation_key(cfg, model, count, seed), [&](const fs::path& out) {
        const auto train = load_all(data.train());
        const auto ac = cfg.augment_config(count, seed);
        std::vector<genmodels::SyntheticSample> samples;
        std::string tag = model;
        if (model == "linear") {
            samples = genmodels::generate_linear_augmentation(train, ac);
        } else {
            const auto ckpt = genmodels::load_checkpoint(gen_dir);
            tag = genmodels::to_string(ckpt.kind());
            samples = genmodels::generate_augmentation(ckpt, train, ac);
        }
        genmodels::save_augmentation(out, samples, tag);
        simulate_augmentation(cfg, out);
    });
}

fs::path prepare_inversion(const ExperimentConfig& cfg, const DataStage& data, const fs::path& aug_dir,
                           std::uint64_t seed) {
    const std::string key = key_text(cfg, {"data", "sim", "inversion"}) + "augmentation=" +
                            (aug_dir.empty() ? std::string("none") : aug_dir.filename().string()) +
                            "\nseed=" + std::to_string(seed) + "\n";
    return cached_stage(cfg, "inversion", key, [&](const fs::path& out) {
        const auto real = inversion::load_real_pairs(data.train(), data.train_gathers());
        inversion::PairSet synthetic;
        if (!aug_dir.empty()) synthetic = inversion::load_synthetic_pairs(aug_dir);
        const auto ckpt = inversion::train_inversion(real, synthetic, cfg.inv_hyper(seed));
        inversion::save_checkpoint(out, ckpt);
    });
}

// ---- experiments ----------------------------------------------------------------

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of an empty list");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

std::ofstream open_csv(const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    return out;
}

struct Tested {
    double general = 0.0;
    double small = 0.0;
};

Tested test_both(const fs::path& ckpt_dir, const inversion::PairSet& test) {
    const auto ckpt = inversion::load_checkpoint(ckpt_dir);
    return {inversion::test_inversion(ckpt, test, inversion::Subset::General).loss,
            inversion::test_inversion(ckpt, test, inversion::Subset::Small).loss};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    RunResult result;
    result.dir = cfg.output / ("run_" + cfg.hash().substr(0, 12));
    fs::create_directories(result.dir);

    io::Meta manifest;
    manifest.put("run.config_hash", cfg.hash());
    manifest.put("run.profile", cfg.profile);
    manifest.put("run.seeds", join_u64(cfg.seeds));
    manifest.put("run.models", join_words(cfg.models));
    std::vector<std::pair<std::string, fs::path>> artifacts;
    std::string stage = "data";
    Stopwatch total;

    auto timed = [&](const std::string& name, auto&& fn) {
        stage = name;
        Stopwatch sw;
        auto r = fn();
        manifest.put("timing." + name + "_seconds", io::format_double(std::round(sw.seconds() * 1000.0) / 1000.0));
        return r;
    };

    try {
        const DataStage data = timed("data_and_gathers", [&] { return prepare_data(cfg); });
        artifacts.emplace_back("data", data.dir);
        artifacts.emplace_back("gathers", data.gather_dir);
        const auto test = timed("load_test", [&] { return inversion::load_real_pairs(data.test(), data.test_gathers()); });

        for (const auto& model : cfg.models)
            if (model != "linear") {
                const auto dir = timed("generator_" + model, [&] { return prepare_generator(cfg, data, model); });
                artifacts.emplace_back("generator_" + model, dir);
            }
        for (std::uint64_t seed : cfg.seeds) {
            const std::string s = std::to_string(seed);
            const auto base = timed("inversion_baseline_seed" + s, [&] { return prepare_inversion(cfg, data, {}, seed); });
            artifacts.emplace_back("inversion_baseline_seed" + s, base);
            const Tested tb = test_both(base, test);
            result.rows.push_back({"baseline", seed, tb.general, tb.small});
            for (const auto& model : cfg.models) {
                fs::path aug;
                if (cfg.aug_count > 0) {
                    aug = timed("augment_" + model + "_seed" + s,
                                [&] { return prepare_augmentation(cfg, data, model, cfg.aug_count, seed); });
                    artifacts.emplace_back("augment_" + model + "_seed" + s, aug);
                }
                const auto inv = timed("inversion_" + model + "_seed" + s,
                                       [&] { return prepare_inversion(cfg, data, aug, seed); });
                artifacts.emplace_back("inversion_" + model + "_seed" + s, inv);
                const Tested t = test_both(inv, test);
                result.rows.push_back({model, seed, t.general, t.small});
            }
        }
        stage = "report";

        auto csv = open_csv(result.dir / "results.csv");
        csv << "model,seed,general,small\n";
        for (const auto& r : result.rows)
            csv << r.model << ',' << r.seed << ',' << io::format_double(r.general) << ',' << io::format_double(r.small)
                << '\n';
        csv.close();

        std::vector<std::string> columns{"baseline"};
        for (const auto& m : cfg.models) columns.push_back(m);
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_model;
        for (const auto& r : result.rows) {
            by_model[r.model].first.push_back(r.general);
            by_model[r.model].second.push_back(r.small);
        }
        auto table = open_csv(result.dir / "table.csv");
        table << "subset";
        for (const auto& c : columns) table << ',' << c;
        for (std::size_t i = 1; i < columns.size(); ++i) table << ",improvement_" << columns[i] << "_pct";
        table << '\n';
        for (int subset = 0; subset < 2; ++subset) {
            table << (subset == 0 ? "general" : "small");
            auto col = [&](const std::string& m) {
                return mean_of(subset == 0 ? by_model[m].first : by_model[m].second);
            };
            const double base = col("baseline");
            for (const auto& c : columns) table << ',' << io::format_double(col(c));
            for (std::size_t i = 1; i < columns.size(); ++i)
                table << ',' << io::format_double((base - col(columns[i])) / base * 100.0);
            table << '\n';
        }
        table.close();
        artifacts.emplace_back("results_csv", result.dir / "results.csv");
        artifacts.emplace_back("table_csv", result.dir / "table.csv");
        manifest.put("run.status", "ok");
    } catch (const std::exception& e) {
        result.ok = false;
        manifest.put("run.status", "failed");
        manifest.put("failure.stage", stage);
        manifest.put("failure.message", e.what());
    }
    manifest.put("timing.total_seconds", io::format_double(std::round(total.seconds() * 1000.0) / 1000.0));
    for (const auto& [name, path] : artifacts)
        manifest.put("artifacts." + name, fs::is_directory(path) ? dir_digest(path) : io::sha256_file(path));
    io::write_meta(result.dir / "manifest.ini", manifest);
    io::write_meta(result.dir / "config.ini", cfg.to_meta());
    if (!result.ok)
        throw std::runtime_error("run failed at stage " + stage + ": " + manifest.get<std::string>("failure.message") +
                                 " (manifest: " + (result.dir / "manifest.ini").string() + ")");
    return result;
}

std::vector<SweepRow> summarize(const std::vector<std::pair<int, double>>& size_losses) {
    std::map<int, std::vector<double>> groups;
    for (auto [size, loss] : size_losses) groups[size].push_back(loss);
    std::vector<SweepRow> rows;
    for (const auto& [size, v] : groups)
        rows.push_back({size, static_cast<long>(v.size()), mean_of(v), sample_std(v)});
    return rows;
}

std::vector<SweepRow> sweep_size(const ExperimentConfig& cfg, std::vector<int> sizes, int seed_groups) {
    cfg.validate();
    if (sizes.empty()) throw std::invalid_argument("sweep needs at least one size");
    for (int s : sizes)
        if (s < 1) throw std::invalid_argument("sweep sizes must be >= 1");
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seed_groups > 0) {
        seeds.clear();
        for (int i = 0; i < seed_groups; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
    }
    const std::string model = cfg.models.front();
    const fs::path dir = cfg.output / ("sweep_" + cfg.hash().substr(0, 12));
    fs::create_directories(dir);

    const DataStage data = prepare_data(cfg);
    const auto test = inversion::load_real_pairs(data.test(), data.test_gathers());
    std::vector<std::pair<int, double>> losses;
    auto runs = open_csv(dir / "runs.csv");
    runs << "size,seed,small\n";
    for (int size : sizes)
        for (std::uint64_t seed : seeds) {
            const auto aug = prepare_augmentation(cfg, data, model, size, seed);
            const auto inv = prepare_inversion(cfg, data, aug, seed);
            const double loss = test_both(inv, test).small;
            losses.emplace_back(size, loss);
            runs << size << ',' << seed << ',' << io::format_double(loss) << '\n';
        }
    runs.close();
    const auto rows = summarize(losses);
    auto csv = open_csv(dir / "sweep.csv");
    csv << "size,n,mean,std\n";
    plot::Series curve;
    for (const auto& r : rows) {
        csv << r.size << ',' << r.n << ',' << io::format_double(r.mean) << ',' << io::format_double(r.stddev) << '\n';
        curve.emplace_back(r.size, r.mean);
    }
    csv.close();
    const std::vector<plot::Series> curves{curve};
    plot::line_chart(dir / "sweep.png", curves);
    io::write_meta(dir / "config.ini", cfg.to_meta());
    return rows;
}

std::vector<GridRow> grid_search(const ExperimentConfig& cfg, const std::string& param,
                                 std::vector<std::string> values) {
    cfg.validate();
    if (param != "layers" && param != "gamma") throw std::invalid_argument("grid parameter must be layers or gamma");
    if (values.empty()) {
        if (param == "layers")
            values = {"A", "B", "C", "D"};
        else
            for (int e = -3; e <= 3; ++e) values.push_back(io::format_double(std::pow(10.0, e)));
    }
    const std::string model = param == "layers" ? "vae_percep" : "vae_reg";
    const fs::path dir = cfg.output / ("grid_" + param + "_" + cfg.hash().substr(0, 12));
    fs::create_directories(dir);

    const DataStage data = prepare_data(cfg);
    const auto test = inversion::load_real_pairs(data.test(), data.test_gathers());
    std::vector<GridRow> rows;
    auto runs = open_csv(dir / "grid_runs.csv");
    runs << "param,value,seed,small,general\n";
    plot::Series curve;
    for (const auto& value : values) {
        ExperimentConfig c = cfg;
        if (param == "layers") {
            featureext::parse_selection(value);
            c.layers = value;
        } else {
            c.gamma = std::stod(value);
            if (c.gamma < 0.0) throw std::invalid_argument("gamma must be non-negative");
        }
        std::vector<double> small, general;
        for (std::uint64_t seed : c.seeds) {
            const auto aug = prepare_augmentation(c, data, model, c.aug_count, seed);
            const auto inv = prepare_inversion(c, data, aug, seed);
            const Tested t = test_both(inv, test);
            small.push_back(t.small);
            general.push_back(t.general);
            runs << param << ',' << value << ',' << seed << ',' << io::format_double(t.small) << ','
                 << io::format_double(t.general) << '\n';
        }
        rows.push_back({value, static_cast<long>(small.size()), mean_of(small), sample_std(small), mean_of(general)});
        curve.emplace_back(static_cast<double>(rows.size()), rows.back().mean_small);
    }
    runs.close();
    auto csv = open_csv(dir / "grid.csv");
    csv << "param,value,n,mean_small,std_small,mean_general\n";
    for (const auto& r : rows)
        csv << param << ',' << r.value << ',' << r.n << ',' << io::format_double(r.mean_small) << ','
            << io::format_double(r.std_small) << ',' << io::format_double(r.mean_general) << '\n';
    csv.close();
    const std::vector<plot::Series> curves{curve};
    plot::line_chart(dir / "grid.png", curves);
    io::write_meta(dir / "config.ini", cfg.to_meta());
    return rows;
}

}  // namespace seismo::pipeline
