// seismo: data generation, simulation, generative augmentation and inversion.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "seismo/evaluate.hpp"
#include "seismo/pipeline.hpp"

namespace fs = std::filesystem;
using namespace seismo;

namespace {

// Options shared by every subcommand: a config file, a profile and
// `--set section.key=value` overrides, applied in that order.
struct Common {
    std::string config;
    std::string profile;
    std::vector<std::string> sets;
    bool verbose = false;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "INI experiment config")->check(CLI::ExistingFile);
        app->add_option("-p,--profile", profile, "desk, paper or smoke (default: config value, else desk)");
        app->add_option("--set", sets, "override, e.g. --set generator.gamma=10")->allow_extra_args(false);
        app->add_flag("-v,--verbose", verbose, "progress on stderr");
    }

    pipeline::ExperimentConfig resolve() const {
        auto cfg = config.empty() ? pipeline::ExperimentConfig::for_profile(profile.empty() ? "desk" : profile)
                                  : pipeline::ExperimentConfig::load(config, profile);
        io::Meta m;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || s.find('.') > eq)
                throw std::invalid_argument("--set expects section.key=value, got '" + s + "'");
            m.put(s.substr(0, eq), s.substr(eq + 1));
        }
        cfg.apply(m);
        if (verbose) cfg.verbose = true;
        cfg.validate();
        return cfg;
    }
};

std::vector<datagen::LeakageScenario> load_dir(const fs::path& dir) {
    std::vector<datagen::LeakageScenario> out;
    for (int id : datagen::list_scenarios(dir)) out.push_back(datagen::load_scenario(dir, id));
    if (out.empty()) throw std::runtime_error("no scenarios in " + dir.string());
    return out;
}

void print_table(const fs::path& csv) {
    std::ifstream in(csv);
    std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CO2 leakage monitoring: generative augmentation for seismic inversion"};
    app.require_subcommand(1);

    Common common;

    // gen-data
    auto* gen_data = app.add_subcommand("gen-data", "generate leakage scenarios and a train/test split");
    fs::path gd_out;
    gen_data->add_option("-o,--out", gd_out, "output directory")->required();
    common.attach(gen_data);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "forward-model seismic gathers");
    fs::path sim_data, sim_aug, sim_out;
    auto* opt_data = simulate->add_option("--data", sim_data, "dataset directory (train/ and test/)")
                         ->check(CLI::ExistingDirectory);
    auto* opt_aug = simulate->add_option("--aug", sim_aug, "augmentation directory")->check(CLI::ExistingDirectory);
    opt_data->excludes(opt_aug);
    simulate->add_option("-o,--out", sim_out, "gather directory for --data (default: alongside the scenarios)");
    common.attach(simulate);

    // train-gen
    auto* train_gen = app.add_subcommand("train-gen", "train a generative model on the training maps");
    fs::path tg_data, tg_out, tg_extractor;
    std::string tg_model = "vae_reg";
    train_gen->add_option("--data", tg_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    train_gen->add_option("-m,--model", tg_model, "ae, vae, vae_percep or vae_reg");
    train_gen->add_option("-o,--out", tg_out, "checkpoint directory")->required();
    train_gen->add_option("--extractor-weights", tg_extractor, "pretrained feature extractor weights")
        ->check(CLI::ExistingFile);
    common.attach(train_gen);

    // augment
    auto* augment = app.add_subcommand("augment", "sample synthetic maps by latent interpolation");
    fs::path au_ckpt, au_data, au_out;
    int au_count = -1;
    std::uint64_t au_seed = 0;
    bool au_linear = false, au_simulate = false;
    auto* opt_ckpt = augment->add_option("--ckpt", au_ckpt, "generator checkpoint")->check(CLI::ExistingDirectory);
    auto* opt_linear = augment->add_flag("--linear", au_linear, "pixel-space interpolation, no generator");
    opt_ckpt->excludes(opt_linear);
    augment->add_option("--data", au_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    augment->add_option("-n,--count", au_count, "number of synthetic maps (default: config)");
    augment->add_option("--seed", au_seed, "sampling seed");
    augment->add_option("-o,--out", au_out, "output directory")->required();
    augment->add_flag("--simulate", au_simulate, "also forward-model the synthetic gathers");
    common.attach(augment);

    // train-inv
    auto* train_inv = app.add_subcommand("train-inv", "train the inversion network");
    fs::path ti_data, ti_aug, ti_out;
    std::uint64_t ti_seed = 0;
    train_inv->add_option("--data", ti_data, "dataset directory with simulated gathers")
        ->required()
        ->check(CLI::ExistingDirectory);
    train_inv->add_option("--aug", ti_aug, "augmentation directory with simulated gathers")
        ->check(CLI::ExistingDirectory);
    train_inv->add_option("--seed", ti_seed, "initialization and shuffling seed");
    train_inv->add_option("-o,--out", ti_out, "checkpoint directory")->required();
    common.attach(train_inv);

    // test-inv
    auto* test_inv = app.add_subcommand("test-inv", "test loss of an inversion checkpoint");
    fs::path te_ckpt, te_data, te_report;
    std::string te_subset = "general";
    test_inv->add_option("--ckpt", te_ckpt, "inversion checkpoint")->required()->check(CLI::ExistingDirectory);
    test_inv->add_option("--data", te_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    test_inv->add_option("--subset", te_subset, "general or small")->check(CLI::IsMember({"general", "small"}));
    test_inv->add_option("--report", te_report, "per-sample CSV");

    // eval
    auto* eval = app.add_subcommand("eval", "generation quality and inversion metrics with plots");
    fs::path ev_data, ev_gen, ev_out;
    std::vector<fs::path> ev_inv;
    std::uint64_t ev_seed = 11;
    eval->add_option("--data", ev_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--gen", ev_gen, "generator checkpoint")->check(CLI::ExistingDirectory);
    eval->add_option("--inv", ev_inv, "inversion checkpoints")->check(CLI::ExistingDirectory);
    eval->add_option("--seed", ev_seed, "sampling seed for generated maps");
    eval->add_option("-o,--out", ev_out, "output directory")->required();

    // run
    auto* run = app.add_subcommand("run", "full experiment: baseline vs augmented inversion over seeds");
    common.attach(run);

    // sweep-size
    auto* sweep = app.add_subcommand("sweep-size", "small-leak test loss against augmentation size");
    std::vector<int> sw_sizes{100, 300, 1000, 3000};
    int sw_groups = 0;
    sweep->add_option("--sizes", sw_sizes, "augmentation sizes")->delimiter(',');
    sweep->add_option("--seed-groups", sw_groups, "seeds 0..N-1 per size (default: config seeds)");
    common.attach(sweep);

    // grid-search
    auto* grid = app.add_subcommand("grid-search", "feature layer or gamma grid");
    std::string gr_param = "gamma";
    std::vector<std::string> gr_values;
    grid->add_option("--param", gr_param, "layers or gamma")->check(CLI::IsMember({"layers", "gamma"}));
    grid->add_option("--values", gr_values, "grid values (default: A..D or 1e-3..1e3)")->delimiter(',');
    common.attach(grid);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_data) {
            const auto cfg = common.resolve();
            pipeline::generate_dataset(cfg, gd_out);
            std::printf("wrote %s\n", gd_out.c_str());
        } else if (*simulate) {
            const auto cfg = common.resolve();
            if (!sim_aug.empty()) {
                pipeline::simulate_augmentation(cfg, sim_aug);
            } else if (!sim_data.empty()) {
                pipeline::simulate_dataset(cfg, sim_data, sim_out.empty() ? sim_data : sim_out);
            } else {
                throw std::invalid_argument("simulate needs --data or --aug");
            }
        } else if (*train_gen) {
            const auto cfg = common.resolve();
            auto hyper = cfg.gen_hyper(tg_model);
            hyper.extractor_weights = tg_extractor;
            const auto ckpt = genmodels::train_generative(load_dir(tg_data / "train"), hyper);
            fs::create_directories(tg_out);
            genmodels::save_checkpoint(tg_out, ckpt);
            std::printf("final loss %s\n", io::format_double(ckpt.history.back().loss.total).c_str());
        } else if (*augment) {
            const auto cfg = common.resolve();
            if (!au_linear && au_ckpt.empty()) throw std::invalid_argument("augment needs --ckpt or --linear");
            const auto ac = cfg.augment_config(au_count < 0 ? cfg.aug_count : au_count, au_seed);
            const auto train = load_dir(au_data / "train");
            fs::create_directories(au_out);
            if (au_linear) {
                genmodels::save_augmentation(au_out, genmodels::generate_linear_augmentation(train, ac), "linear");
            } else {
                const auto ckpt = genmodels::load_checkpoint(au_ckpt);
                genmodels::save_augmentation(au_out, genmodels::generate_augmentation(ckpt, train, ac),
                                             genmodels::to_string(ckpt.kind()));
            }
            if (au_simulate) pipeline::simulate_augmentation(cfg, au_out);
        } else if (*train_inv) {
            const auto cfg = common.resolve();
            const auto real = inversion::load_real_pairs(ti_data / "train");
            inversion::PairSet synthetic;
            if (!ti_aug.empty()) synthetic = inversion::load_synthetic_pairs(ti_aug);
            const auto ckpt = inversion::train_inversion(real, synthetic, cfg.inv_hyper(ti_seed));
            fs::create_directories(ti_out);
            inversion::save_checkpoint(ti_out, ckpt);
            std::printf("final train loss %s\n", io::format_double(ckpt.history.back().train_loss).c_str());
        } else if (*test_inv) {
            const auto ckpt = inversion::load_checkpoint(te_ckpt);
            const auto test = inversion::load_real_pairs(te_data / "test");
            const auto report = inversion::test_inversion(ckpt, test, inversion::parse_subset(te_subset));
            if (!te_report.empty()) inversion::write_report_csv(te_report, report);
            std::printf("%s test loss %s over %zu maps\n", te_subset.c_str(), io::format_double(report.loss).c_str(),
                        report.samples.size());
        } else if (*eval) {
            evaluate::EvalInputs in;
            in.test_dir = ev_data / "test";
            in.baseline_file = ev_data / "baseline.f32";
            in.out_dir = ev_out;
            if (!ev_gen.empty()) in.generator_ckpt = ev_gen;
            in.inversion_ckpts = ev_inv;
            in.seed = ev_seed;
            fs::create_directories(ev_out);
            const auto summary = evaluate::run_evaluation(in);
            for (const auto& [k, v] : summary.scalars) std::printf("%s %s\n", k.c_str(), io::format_double(v).c_str());
        } else if (*run) {
            const auto result = pipeline::run_experiment(common.resolve());
            print_table(result.dir / "table.csv");
            std::printf("results in %s\n", result.dir.c_str());
        } else if (*sweep) {
            const auto rows = pipeline::sweep_size(common.resolve(), sw_sizes, sw_groups);
            std::printf("size,n,mean,std\n");
            for (const auto& r : rows)
                std::printf("%d,%ld,%s,%s\n", r.size, r.n, io::format_double(r.mean).c_str(),
                            io::format_double(r.stddev).c_str());
        } else if (*grid) {
            const auto rows = pipeline::grid_search(common.resolve(), gr_param, gr_values);
            std::printf("value,n,mean_small,std_small,mean_general\n");
            for (const auto& r : rows)
                std::printf("%s,%ld,%s,%s,%s\n", r.value.c_str(), r.n, io::format_double(r.mean_small).c_str(),
                            io::format_double(r.std_small).c_str(), io::format_double(r.mean_general).c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
