#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "seismo/datagen.hpp"
#include "seismo/evaluate.hpp"
#include "seismo/genmodels.hpp"
#include "seismo/inversion.hpp"
#include "seismo/io.hpp"
#include "seismo/pipeline.hpp"
#include "seismo/wavesim.hpp"

namespace fs = std::filesystem;
using namespace seismo;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("seismo_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

datagen::GeneratorConfig small_grid() {
    datagen::GeneratorConfig g;
    g.height = g.width = 16;
    g.layer_top = {5, 11};
    return g;
}

}  // namespace

TEST_SUITE("io") {
    TEST_CASE("sha256 of a known string") {
        CHECK(io::sha256_text("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    TEST_CASE("format_double round-trips") {
        for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456.789}) CHECK(std::stod(io::format_double(v)) == v);
    }

    TEST_CASE("f32 and meta files round-trip") {
        const auto dir = scratch("io");
        const std::vector<float> v{1.5f, -2.0f, 3.25f};
        io::write_f32(dir / "a.f32", v);
        CHECK(io::read_f32(dir / "a.f32") == v);
        io::Meta m;
        m.put("run.seed", "7");
        m.put("sim.dx", "10");
        io::write_meta(dir / "a.meta", m);
        const auto r = io::read_meta(dir / "a.meta");
        CHECK(r.get<int>("run.seed") == 7);
        CHECK(r.get<double>("sim.dx") == 10.0);
    }
}

TEST_SUITE("datagen") {
    TEST_CASE("leak classes follow the mass bounds") {
        CHECK(datagen::classify_leak(0.0) == datagen::LeakClass::Tiny);
        CHECK(datagen::classify_leak(9.10e6) == datagen::LeakClass::Small);
        CHECK(datagen::classify_leak(5e7) == datagen::LeakClass::Medium);
        CHECK(datagen::classify_leak(8.05e7) == datagen::LeakClass::Large);
        CHECK(datagen::is_small_leak(datagen::LeakClass::Small));
        CHECK_FALSE(datagen::is_small_leak(datagen::LeakClass::Medium));
        CHECK_THROWS(datagen::classify_leak(-1.0));
    }

    TEST_CASE("split is a deterministic partition") {
        std::vector<int> ids(50);
        for (int i = 0; i < 50; ++i) ids[i] = 3 * i;
        const auto a = datagen::split_dataset(ids, 0.8, 2021);
        const auto b = datagen::split_dataset(ids, 0.8, 2021);
        CHECK(a.train_ids == b.train_ids);
        CHECK(a.train_ids.size() == 40);
        CHECK(a.test_ids.size() == 10);
        std::vector<int> all = a.train_ids;
        all.insert(all.end(), a.test_ids.begin(), a.test_ids.end());
        std::sort(all.begin(), all.end());
        CHECK(all == ids);
        CHECK(datagen::split_dataset(ids, 0.8, 7).train_ids != a.train_ids);
    }

    TEST_CASE("scenarios are reproducible, monotone in mass and survive save/load") {
        const auto cfg = small_grid();
        const auto base = datagen::generate_baseline(cfg);
        const auto s = datagen::generate_scenario(42, base, cfg, 5);
        const auto t = datagen::generate_scenario(42, base, cfg, 5);
        REQUIRE(s.maps.size() == datagen::kNumYears);
        for (int y = 0; y < datagen::kNumYears; ++y) CHECK(s.maps[y].grid == t.maps[y].grid);
        for (int y = 1; y < datagen::kNumYears; ++y) CHECK(s.mass_trajectory[y] >= s.mass_trajectory[y - 1]);

        const auto dir = scratch("datagen");
        datagen::save_scenario(dir, s);
        const auto r = datagen::load_scenario(dir, 5);
        CHECK(r.maps.back().grid == s.maps.back().grid);
        CHECK(r.maps.back().year == datagen::kLastYear);
        CHECK(datagen::list_scenarios(dir) == std::vector<int>{5});
    }
}

TEST_SUITE("wavesim") {
    TEST_CASE("Ricker wavelet peaks at its delay") {
        const double f = 15.0, dt = 1e-3;
        const auto w = wavesim::ricker_wavelet(f, dt, 300);
        const auto peak = std::max_element(w.begin(), w.end()) - w.begin();
        CHECK(peak == static_cast<long>(std::lround(1.5 / f / dt)));
        CHECK(w[peak] == doctest::Approx(1.0));
    }

    TEST_CASE("stability bound scales with the fastest velocity") {
        wavesim::SimConfig c;
        c.dx = 10.0;
        c.dt = 1e-3;
        const std::vector<float> v{1500.f, 4000.f};
        const auto r = wavesim::cfl_check(c, v);
        CHECK(r.v_max == 4000.0);
        CHECK(r.max_stable_dt == doctest::Approx(c.cfl_coeff * 10.0 / 4000.0));
        CHECK(r.pass);
    }

    TEST_CASE("receivers outside the grid are rejected") {
        wavesim::SimConfig c;
        c.nt = 10;
        c.sources = {{1, 1}};
        c.receivers = {{50, 1}};
        const std::vector<float> v(16 * 16, 2000.f);
        CHECK_THROWS(wavesim::propagate(16, 16, v, c));
    }
}

TEST_SUITE("genmodels") {
    TEST_CASE("batch kind must match the model") {
        const auto arch = genmodels::Architecture::tiny();
        genmodels::Generator<double> g(genmodels::ModelKind::VAE, arch);
        g.init(1);
        genmodels::TripleBatch<double> tb{Tensor<double>(1, 1, 8, 8), Tensor<double>(1, 1, 8, 8), {50.0},
                                          Tensor<double>(1, 1, 8, 8)};
        CHECK_THROWS_AS(genmodels::compute_loss<double>(g, tb, {}, nullptr), std::invalid_argument);
        genmodels::Generator<double> p(genmodels::ModelKind::VAEPercep, arch);
        genmodels::MapBatch<double> mb{Tensor<double>(1, 1, 8, 8), Tensor<double>(1, 4, 1, 1)};
        CHECK_THROWS_AS(genmodels::compute_loss<double>(p, mb, {}, nullptr), std::invalid_argument);
    }

    TEST_CASE("weights survive an archive round trip") {
        const auto arch = genmodels::Architecture::tiny();
        genmodels::Generator<float> g(genmodels::ModelKind::VAEReg, arch);
        g.init(11);
        io::WeightArchive a;
        g.export_to(a);
        const auto dir = scratch("weights");
        a.save(dir / "w.bin");
        const auto b = io::WeightArchive::load(dir / "w.bin");
        CHECK(a == b);
        genmodels::Generator<float> h(genmodels::ModelKind::VAEReg, arch);
        h.install_from(b);
        Tensor<float> x(1, 1, 8, 8, 0.5f);
        CHECK(genmodels::vae_reconstruct(g, x).data == genmodels::vae_reconstruct(h, x).data);
    }

    TEST_CASE("linear augmentation is seeded and stays between its endpoints") {
        const auto cfg = small_grid();
        const auto base = datagen::generate_baseline(cfg);
        std::vector<datagen::LeakageScenario> train;
        for (int i = 0; i < 3; ++i) train.push_back(datagen::generate_scenario(100 + i, base, cfg, i));
        genmodels::AugmentConfig ac;
        ac.count = 12;
        ac.seed = 5;
        const auto a = genmodels::generate_linear_augmentation(train, ac);
        const auto b = genmodels::generate_linear_augmentation(train, ac);
        REQUIRE(a.size() == 12);
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k].map == b[k].map);
            const auto& s = train[a[k].scenario_id];
            const auto& xa = s.maps[datagen::year_index(a[k].year_a)].grid;
            const auto& xb = s.maps[datagen::year_index(a[k].year_b)].grid;
            for (std::size_t p = 0; p < xa.size(); ++p) {
                CHECK(a[k].map[p] >= std::min(xa[p], xb[p]) - 1e-3f);
                CHECK(a[k].map[p] <= std::max(xa[p], xb[p]) + 1e-3f);
            }
        }
        CHECK_THROWS(genmodels::linear_interp_baseline(Tensor<float>(1, 1, 2, 2), Tensor<float>(1, 1, 2, 2), 1.5));
    }
}

TEST_SUITE("inversion") {
    TEST_CASE("tiny network maps gathers to velocity maps") {
        const auto arch = inversion::InvArch::tiny();
        auto net = inversion::build_network<float>(arch);
        const auto y = net.forward(Tensor<float>(3, arch.shots, arch.nt, arch.receivers, 0.1f));
        CHECK(y.n == 3);
        CHECK(y.c == 1);
        CHECK(y.h == arch.height);
        CHECK(y.w == arch.width);
    }

    TEST_CASE("subset names parse") {
        CHECK(inversion::parse_subset("small") == inversion::Subset::Small);
        CHECK(inversion::to_string(inversion::Subset::General) == "general");
        CHECK_THROWS(inversion::parse_subset("medium"));
    }
}

TEST_SUITE("evaluate") {
    TEST_CASE("box statistics flag outliers") {
        const std::vector<double> v{1, 2, 3, 4, 100};
        const auto b = evaluate::boxplot_stats(v);
        REQUIRE(b.outliers.size() == 1);
        CHECK(b.outliers[0] == 100.0);
        CHECK(b.whisker_hi == 4.0);
    }
}

TEST_SUITE("pipeline") {
    TEST_CASE("config files override the profile and reject unknown keys") {
        const auto dir = scratch("config");
        {
            std::ofstream f(dir / "exp.ini");
            f << "[run]\nprofile = smoke\nseeds = 3,4\n[generator]\ngamma = 10\n";
        }
        const auto c = pipeline::ExperimentConfig::load(dir / "exp.ini");
        CHECK(c.profile == "smoke");
        CHECK(c.height == 32);
        CHECK(c.gamma == 10.0);
        CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
        {
            std::ofstream f(dir / "bad.ini");
            f << "[generator]\ngama = 10\n";
        }
        CHECK_THROWS_AS(pipeline::ExperimentConfig::load(dir / "bad.ini"), std::invalid_argument);
        CHECK_THROWS(pipeline::ExperimentConfig::for_profile("huge"));
    }

    TEST_CASE("hash covers result settings only") {
        auto a = pipeline::ExperimentConfig::for_profile("desk");
        auto b = a;
        b.output = "elsewhere";
        b.verbose = true;
        CHECK(a.hash() == b.hash());
        b.gamma = 1.0;
        CHECK(a.hash() != b.hash());
        CHECK(a.hash() == pipeline::ExperimentConfig::for_profile("desk").hash());
    }

    TEST_CASE("summaries use the sample standard deviation") {
        const auto rows = pipeline::summarize({{300, 2.0}, {100, 1.0}, {100, 3.0}, {300, 2.0}});
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].size == 100);
        CHECK(rows[0].n == 2);
        CHECK(rows[0].mean == 2.0);
        CHECK(rows[0].stddev == doctest::Approx(std::sqrt(2.0)));
        CHECK(rows[1].stddev == 0.0);
        CHECK(pipeline::sample_std({5.0}) == 0.0);
        CHECK_THROWS(pipeline::mean_of({}));
    }
}
