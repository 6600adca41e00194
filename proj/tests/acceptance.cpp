// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,3,7] [--work DIR]
//
// Criteria 7-9 train real models and write under DIR (default: ./acceptance_work).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "checks.hpp"
#include "seismo/io.hpp"
#include "seismo/pipeline.hpp"

namespace fs = std::filesystem;
using namespace seismo;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome from_checks(const checks::Results& r, double secs = -1.0, double limit = -1.0) {
    Outcome o;
    o.pass = checks::all_pass(r) && (limit < 0.0 || secs <= limit);
    for (const auto& x : r) std::cout << "    [" << (x.pass ? "ok" : "FAILED") << "] " << x.name << ": " << x.detail << "\n";
    std::ostringstream d;
    d << std::count_if(r.begin(), r.end(), [](const checks::Result& x) { return x.pass; }) << "/" << r.size()
      << " checks";
    if (secs >= 0.0) d << ", " << std::round(secs * 10.0) / 10.0 << " s";
    if (limit >= 0.0 && secs > limit) d << " (over the " << limit << " s budget)";
    o.detail = d.str();
    return o;
}

// ---- CSV helpers --------------------------------------------------------------------

using Table = std::vector<std::vector<std::string>>;

Table read_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("missing " + file.string());
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        t.push_back(row);
    }
    return t;
}

double parse_number(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::runtime_error("not a finite number: " + s);
    return v;
}

void require_header(const Table& t, const std::vector<std::string>& header, const std::string& what) {
    if (t.empty() || t[0] != header) throw std::runtime_error(what + ": unexpected header");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i].size() != header.size()) throw std::runtime_error(what + ": ragged row " + std::to_string(i));
}

// Two-pass mean and n-1 standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& v) {
    long double s = 0.0L;
    for (double x : v) s += x;
    const double mean = static_cast<double>(s / v.size());
    if (v.size() < 2) return {mean, 0.0};
    long double q = 0.0L;
    for (double x : v) q += (x - mean) * (x - mean);
    return {mean, static_cast<double>(std::sqrt(q / (v.size() - 1)))};
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

fs::path only_subdir(const fs::path& dir, const std::string& prefix) {
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && e.path().filename().string().starts_with(prefix)) return e.path();
    throw std::runtime_error("no " + prefix + "* directory under " + dir.string());
}

// ---- criteria -------------------------------------------------------------------------

Outcome criterion_desk(const fs::path& work) {
    const fs::path dir = work / "desk";
    fs::remove_all(dir);
    auto cfg = pipeline::ExperimentConfig::for_profile("desk");
    cfg.output = dir;
    cfg.cache = dir / "cache";
    cfg.verbose = std::getenv("SEISMO_ACCEPTANCE_VERBOSE") != nullptr;
    if (std::find(cfg.models.begin(), cfg.models.end(), "vae_reg") == cfg.models.end()) cfg.models.push_back("vae_reg");
    const auto t0 = Clock::now();
    const auto r = pipeline::run_experiment(cfg);
    const double secs = seconds_since(t0);
    if (!r.ok) return {false, "run failed, see " + r.dir.string() + "/manifest.ini"};

    std::vector<double> base, aug;
    for (const auto& row : r.rows) {
        std::cout << "    " << row.model << " seed " << row.seed << ": small " << row.small << ", general "
                  << row.general << "\n";
        if (row.model == "baseline") base.push_back(row.small);
        if (row.model == "vae_reg") aug.push_back(row.small);
    }
    if (base.size() < 2 || aug.size() != base.size()) return {false, "expected >= 2 seeds per model"};
    const double mb = mean_std(base).first, ma = mean_std(aug).first;
    std::ostringstream d;
    d << base.size() << " seeds, small-leak MAE baseline " << mb << " vs vae_reg " << ma << ", " << std::round(secs)
      << " s";
    return {ma <= mb && secs <= 1800.0, d.str()};
}

Outcome criterion_sweeps(const fs::path& work) {
    const fs::path dir = work / "sweeps";
    fs::remove_all(dir);
    auto cfg = pipeline::ExperimentConfig::for_profile("smoke");
    cfg.output = dir;
    cfg.cache = dir / "cache";
    cfg.seeds = {0, 1};
    cfg.models = {"vae_reg"};
    pipeline::sweep_size(cfg, {100, 300});
    pipeline::grid_search(cfg, "gamma", {"1", "100"});

    double worst = 0.0;
    auto check = [&](double got, double want) {
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
        return close(got, want, 1e-12);
    };
    bool ok = true;

    const fs::path sweep = only_subdir(dir, "sweep_");
    const auto runs = read_csv(sweep / "runs.csv");
    const auto summary = read_csv(sweep / "sweep.csv");
    require_header(runs, {"size", "seed", "small"}, "runs.csv");
    require_header(summary, {"size", "n", "mean", "std"}, "sweep.csv");
    std::map<int, std::vector<double>> by_size;
    for (std::size_t i = 1; i < runs.size(); ++i) by_size[std::stoi(runs[i][0])].push_back(parse_number(runs[i][2]));
    ok = ok && by_size.size() == 2 && by_size.count(100) && by_size.count(300) && summary.size() == 3;
    for (std::size_t i = 1; i < summary.size(); ++i) {
        const auto& v = by_size[std::stoi(summary[i][0])];
        const auto [m, s] = mean_std(v);
        ok = ok && std::stol(summary[i][1]) == static_cast<long>(v.size()) && v.size() == 2;
        ok = check(parse_number(summary[i][2]), m) && ok;
        ok = check(parse_number(summary[i][3]), s) && ok;
    }

    const fs::path grid = only_subdir(dir, "grid_gamma_");
    const auto gruns = read_csv(grid / "grid_runs.csv");
    const auto gsum = read_csv(grid / "grid.csv");
    require_header(gruns, {"param", "value", "seed", "small", "general"}, "grid_runs.csv");
    require_header(gsum, {"param", "value", "n", "mean_small", "std_small", "mean_general"}, "grid.csv");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_value;
    for (std::size_t i = 1; i < gruns.size(); ++i) {
        ok = ok && gruns[i][0] == "gamma";
        by_value[gruns[i][1]].first.push_back(parse_number(gruns[i][3]));
        by_value[gruns[i][1]].second.push_back(parse_number(gruns[i][4]));
    }
    ok = ok && by_value.size() == 2 && gsum.size() == 3;
    for (std::size_t i = 1; i < gsum.size(); ++i) {
        const auto& [small, general] = by_value[gsum[i][1]];
        ok = ok && parse_number(gsum[i][1]) == (i == 1 ? 1.0 : 100.0) && small.size() == 2;
        ok = ok && std::stol(gsum[i][2]) == static_cast<long>(small.size());
        const auto [ms, ss] = mean_std(small);
        ok = check(parse_number(gsum[i][3]), ms) && ok;
        ok = check(parse_number(gsum[i][4]), ss) && ok;
        ok = check(parse_number(gsum[i][5]), mean_std(general).first) && ok;
    }
    ok = ok && fs::exists(sweep / "sweep.png") && fs::exists(grid / "grid.png");
    std::ostringstream d;
    d << "sizes {100, 300}, gamma {1, 1e2}, 2 seeds; worst summary mismatch " << worst;
    return {ok, d.str()};
}

// Every regular file under `root`, keyed by relative path.
std::map<std::string, fs::path> files_under(const fs::path& root) {
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = e.path();
    return out;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    return std::equal(std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>(),
                      std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>());
}

// manifest.ini records wall-clock timings; everything else must repeat exactly.
bool compared(const std::string& rel) { return fs::path(rel).filename() != "manifest.ini"; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// config.ini echoes the output and cache paths, which differ between the two roots.
bool same_config(const fs::path& a, const fs::path& ra, const fs::path& b, const fs::path& rb) {
    auto strip = [](std::string text, const std::string& root) {
        for (std::size_t p; (p = text.find(root)) != std::string::npos;) text.replace(p, root.size(), "ROOT");
        return text;
    };
    return strip(slurp(a), ra.string()) == strip(slurp(b), rb.string());
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" SEISMO_CLI "\" " + args + " >> \"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

Outcome criterion_determinism(const fs::path& work) {
    const std::vector<std::string> steps{
        "gen-data -p smoke -o R/data",
        "simulate -p smoke --data R/data",
        "train-gen -p smoke --data R/data -m vae_reg -o R/gen",
        "augment -p smoke --ckpt R/gen --data R/data -n 16 --seed 3 -o R/aug --simulate",
        "augment -p smoke --linear --data R/data -n 16 --seed 3 -o R/linear",
        "train-inv -p smoke --data R/data --aug R/aug --seed 0 -o R/inv",
        "test-inv --ckpt R/inv --data R/data --subset small --report R/test_small.csv",
        "eval --data R/data --gen R/gen --inv R/inv --seed 0 -o R/eval",
        "run -p smoke --set run.output=R/run --set run.cache=R/cache",
        "sweep-size -p smoke --sizes 10,20 --set run.output=R/sweep --set run.cache=R/cache",
        "grid-search -p smoke --param gamma --values 1,100 --set run.output=R/grid --set run.cache=R/cache",
    };
    std::vector<fs::path> roots;
    for (const char* name : {"repeat_a", "repeat_b"}) {
        const fs::path root = fs::absolute(work / name);
        fs::remove_all(root);
        fs::create_directories(root);
        for (const auto& s : steps) {
            std::string args = s;
            for (std::size_t p; (p = args.find("R/")) != std::string::npos;)
                args.replace(p, 2, "\"" + root.string() + "\"/");
            if (run_cli(args, root.parent_path() / (std::string(name) + ".log")) != 0)
                return {false, "command failed: seismo " + s + " (see " + name + ".log)"};
        }
        roots.push_back(root);
    }
    const auto a = files_under(roots[0]), b = files_under(roots[1]);
    std::vector<std::string> differ;
    long checked = 0;
    std::set<std::string> names;
    for (const auto& [k, v] : a) names.insert(k);
    for (const auto& [k, v] : b) names.insert(k);
    for (const auto& k : names) {
        if (!compared(k)) continue;
        ++checked;
        if (!a.count(k) || !b.count(k)) {
            differ.push_back(k);
            continue;
        }
        const bool same = fs::path(k).filename() == "config.ini"
                              ? same_config(a.at(k), roots[0], b.at(k), roots[1])
                              : same_bytes(a.at(k), b.at(k));
        if (!same) differ.push_back(k);
    }
    std::ostringstream d;
    d << steps.size() << " commands run twice, " << checked << " files compared";
    if (!differ.empty()) {
        d << ", " << differ.size() << " differ (first: " << differ.front() << ")";
        for (const auto& k : differ) std::cout << "    differs: " << k << "\n";
    }
    return {differ.empty() && checked > 0, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    fs::path work = "acceptance_work";
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--work", work, "scratch directory for criteria 7-9");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);

    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "loss gradients match central differences",
         [] {
             const auto t0 = Clock::now();
             const auto r = checks::gradient_suite();
             return from_checks(r, seconds_since(t0), 120.0);
         }},
        {2, "components match independent oracles", [] { return from_checks(checks::component_oracles()); }},
        {3, "closed-form identities", [] { return from_checks(checks::closed_forms()); }},
        {4, "latent interpolation endpoints and midpoint",
         [] { return from_checks(checks::interpolation_identities()); }},
        {5, "wave solver physics",
         [] {
             const auto t0 = Clock::now();
             const auto r = checks::wave_solver();
             return from_checks(r, seconds_since(t0), 300.0);
         }},
        {6, "evaluation metrics", [] { return from_checks(checks::metrics()); }},
        {7, "desk profile: vae_reg augmentation does not hurt small-leak MAE", [&] { return criterion_desk(work); }},
        {8, "size sweep and gamma grid summaries", [&] { return criterion_sweeps(work); }},
        {9, "CLI reruns are byte-identical", [&] { return criterion_determinism(work); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        std::cout << "criterion " << c.id << ": " << c.name << std::endl;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " (" << o.detail << ")"
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
