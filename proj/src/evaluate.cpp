#include "seismo/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include <fftw3.h>

#include "seismo/genmodels.hpp"
#include "seismo/inversion.hpp"
#include "seismo/io.hpp"
#include "seismo/plot.hpp"

namespace seismo::evaluate {

namespace fs = std::filesystem;

double mae(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("mae: size mismatch");
    if (a.empty()) throw std::invalid_argument("mae: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    return acc / static_cast<double>(a.size());
}

double ssim(std::span<const float> a, std::span<const float> b, int height, int width, const SsimConfig& cfg) {
    if (a.size() != b.size() || a.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("ssim: size mismatch");
    if (cfg.window < 1 || cfg.window > height || cfg.window > width)
        throw std::invalid_argument("ssim: window " + std::to_string(cfg.window) + " larger than image " +
                                    std::to_string(height) + "x" + std::to_string(width));
    if (!(cfg.dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");
    const int n = cfg.window;
    std::vector<double> g(n);
    const double c = (n - 1) / 2.0;
    double gs = 0.0;
    for (int i = 0; i < n; ++i) gs += g[i] = std::exp(-(i - c) * (i - c) / (2.0 * cfg.sigma * cfg.sigma));
    std::vector<double> wts(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) wts[i * n + j] = g[i] * g[j] / (gs * gs);
    const double c1 = std::pow(cfg.k1 * cfg.dynamic_range, 2), c2 = std::pow(cfg.k2 * cfg.dynamic_range, 2);

    double total = 0.0;
    long windows = 0;
    for (int y0 = 0; y0 + n <= height; ++y0)
        for (int x0 = 0; x0 + n <= width; ++x0) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const std::size_t k = static_cast<std::size_t>(y0 + i) * width + x0 + j;
                    const double w = wts[i * n + j], va = a[k], vb = b[k];
                    ma += w * va;
                    mb += w * vb;
                    saa += w * va * va;
                    sbb += w * vb * vb;
                    sab += w * va * vb;
                }
            const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            ++windows;
        }
    return total / static_cast<double>(windows);
}

std::vector<YearRow> per_year_loss_curve(std::span<const std::pair<int, double>> year_losses) {
    std::vector<YearRow> rows(datagen::kNumYears);
    for (int k = 0; k < datagen::kNumYears; ++k) rows[k].year = datagen::year_at(k);
    std::vector<double> sums(datagen::kNumYears, 0.0);
    for (auto [year, loss] : year_losses) {
        if (!datagen::is_valid_year(year)) throw std::invalid_argument("invalid year " + std::to_string(year));
        const int k = datagen::year_index(year);
        sums[k] += loss;
        rows[k].count++;
    }
    for (int k = 0; k < datagen::kNumYears; ++k)
        rows[k].mean = rows[k].count > 0 ? sums[k] / rows[k].count : std::nan("");
    return rows;
}

std::vector<std::pair<int, double>> reconstruction_losses(const fs::path& generator_ckpt,
                                                          std::span<const datagen::LeakageScenario> test_set) {
    const auto ckpt = genmodels::load_checkpoint(generator_ckpt);
    const auto g = ckpt.instantiate();
    std::vector<std::pair<int, double>> out;
    for (const auto& s : test_set) {
        const Tensor<float> rec = genmodels::reconstruct_scenario(g, s, ckpt.norm);
        for (std::size_t k = 0; k < s.maps.size(); ++k) {
            const Tensor<float> truth = genmodels::to_tensor(s.maps[k], ckpt.norm);
            const Tensor<float> pred = slice(rec, static_cast<int>(k), static_cast<int>(k) + 1);
            out.emplace_back(s.maps[k].year, losses::mse(truth, pred));
        }
    }
    return out;
}

std::string to_string(Projection p) { return p == Projection::PCA ? "pca" : "nmf"; }

Projection parse_projection(const std::string& text) {
    if (text == "pca") return Projection::PCA;
    if (text == "nmf") return Projection::NMF;
    throw std::invalid_argument("projection must be pca or nmf (got '" + text + "')");
}

PcaModel pca_fit(const Eigen::MatrixXd& x, int k) {
    if (x.rows() < 2 || k < 1 || k > std::min<Eigen::Index>(x.rows(), x.cols()))
        throw std::invalid_argument("pca: need at least 2 samples and 1 <= k <= min(samples, features)");
    PcaModel m;
    m.mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - m.mean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    m.components = svd.matrixV().leftCols(k).transpose();
    m.explained = svd.singularValues().head(k).array().square() / static_cast<double>(x.rows() - 1);
    return m;
}

Eigen::MatrixXd pca_transform(const PcaModel& m, const Eigen::MatrixXd& x) {
    return (x.rowwise() - m.mean) * m.components.transpose();
}

Eigen::MatrixXd pca_inverse(const PcaModel& m, const Eigen::MatrixXd& scores) {
    return (scores * m.components).rowwise() + m.mean;
}

NmfModel nmf_fit(const Eigen::MatrixXd& x, int k, int iterations, std::uint64_t seed) {
    if (x.rows() < k || x.cols() < k || k < 1) throw std::invalid_argument("nmf: fewer samples than components");
    if ((x.array() < 0.0).any()) throw std::invalid_argument("nmf: input must be non-negative");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    const double scale = std::sqrt(std::max(x.mean(), 1e-12) / k);
    NmfModel m;
    m.w.resize(x.rows(), k);
    m.h.resize(k, x.cols());
    for (Eigen::Index i = 0; i < m.w.size(); ++i) m.w.data()[i] = scale * u(rng);
    for (Eigen::Index i = 0; i < m.h.size(); ++i) m.h.data()[i] = scale * u(rng);
    constexpr double kTiny = 1e-12;
    for (int it = 0; it < iterations; ++it) {
        const Eigen::MatrixXd wt = m.w.transpose();
        m.h.array() *= (wt * x).array() / ((wt * m.w) * m.h).array().max(kTiny);
        const Eigen::MatrixXd ht = m.h.transpose();
        m.w.array() *= (x * ht).array() / (m.w * (m.h * ht)).array().max(kTiny);
    }
    return m;
}

double overlap_score(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int bins) {
    if (a.rows() == 0 || b.rows() == 0 || a.cols() != 2 || b.cols() != 2)
        throw std::invalid_argument("overlap_score: need non-empty 2-D point sets");
    Eigen::Vector2d lo, hi;
    for (int d = 0; d < 2; ++d) {
        lo[d] = std::min(a.col(d).minCoeff(), b.col(d).minCoeff());
        hi[d] = std::max(a.col(d).maxCoeff(), b.col(d).maxCoeff());
    }
    auto hist = [&](const Eigen::MatrixXd& p) {
        std::vector<long> h(static_cast<std::size_t>(bins) * bins, 0);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            int idx[2];
            for (int d = 0; d < 2; ++d) {
                const double span = hi[d] - lo[d];
                const int v = span > 0.0 ? static_cast<int>((p(i, d) - lo[d]) / span * bins) : 0;
                idx[d] = std::clamp(v, 0, bins - 1);
            }
            h[idx[0] * bins + idx[1]]++;
        }
        return h;
    };
    const auto ha = hist(a), hb = hist(b);
    const long na = a.rows(), nb = b.rows();
    long long inter = 0;
    for (std::size_t i = 0; i < ha.size(); ++i) inter += std::min<long long>(ha[i] * nb, hb[i] * na);
    return static_cast<double>(inter) / (static_cast<double>(na) * nb);
}

Projection2d project_2d(const Eigen::MatrixXd& true_maps, const Eigen::MatrixXd& generated_maps, Projection method) {
    if (true_maps.cols() != generated_maps.cols()) throw std::invalid_argument("project_2d: map sizes differ");
    const Eigen::Index n = true_maps.rows() + generated_maps.rows();
    if (n < 2 || true_maps.rows() == 0 || generated_maps.rows() == 0)
        throw std::invalid_argument("project_2d: fewer samples than components");
    Eigen::MatrixXd all(n, true_maps.cols());
    all << true_maps, generated_maps;
    Eigen::MatrixXd pts;
    if (method == Projection::PCA) {
        pts = pca_transform(pca_fit(all, 2), all);
    } else {
        pts = nmf_fit(all, 2).w;
    }
    Projection2d p;
    p.method = method;
    p.true_points = pts.topRows(true_maps.rows());
    p.generated_points = pts.bottomRows(generated_maps.rows());
    p.overlap = overlap_score(p.true_points, p.generated_points);
    return p;
}

std::vector<double> kz_spectrum(std::span<const float> map, std::span<const float> baseline, int height, int width) {
    if (map.size() != baseline.size() || map.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("kz_spectrum: size mismatch");
    std::vector<std::complex<double>> in(height), out(height);
    fftw_plan plan = fftw_plan_dft_1d(height, reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
    std::vector<double> power(height, 0.0);
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) {
            const std::size_t k = static_cast<std::size_t>(r) * width + c;
            in[r] = static_cast<double>(map[k]) - static_cast<double>(baseline[k]);
        }
        fftw_execute(plan);
        for (int k = 0; k < height; ++k) power[k] += std::norm(out[k]);
    }
    fftw_destroy_plan(plan);
    std::vector<double> s(height);
    for (int k = 0; k < height; ++k) s[k] = std::sqrt(power[k] / (static_cast<double>(width) * height));
    return s;
}

namespace {

double median_sorted(std::span<const double> v) {
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BoxStats boxplot_stats(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("boxplot_stats: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size(), half = (n + 1) / 2;
    BoxStats b;
    b.median = median_sorted(v);
    b.q1 = median_sorted(std::span<const double>(v.data(), half));
    b.q3 = median_sorted(std::span<const double>(v.data() + n - half, half));
    const double iqr = b.q3 - b.q1, lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
    b.whisker_lo = b.q1;
    b.whisker_hi = b.q3;
    bool lo_set = false;
    for (double x : v) {
        if (x < lo || x > hi) {
            b.outliers.push_back(x);
            continue;
        }
        if (!lo_set) {
            b.whisker_lo = x;
            lo_set = true;
        }
        b.whisker_hi = x;
    }
    return b;
}

// ---- report ---------------------------------------------------------------

namespace {

struct MetricRow {
    std::string model;
    int index = 0;
    int scenario_id = 0;
    int year = 0;
    datagen::LeakClass leak_class = datagen::LeakClass::Tiny;
    double mae = 0.0;  // m/s
    double ssim = 0.0;
};

std::ofstream open_csv(const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    return out;
}

Eigen::MatrixXd rows_of(std::span<const std::vector<float>> maps) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(maps.size()), static_cast<Eigen::Index>(maps.front().size()));
    for (std::size_t i = 0; i < maps.size(); ++i)
        for (std::size_t k = 0; k < maps[i].size(); ++k) m(i, k) = maps[i][k];
    return m;
}

}  // namespace

EvalSummary run_evaluation(const EvalInputs& in) {
    fs::create_directories(in.out_dir);
    std::vector<datagen::LeakageScenario> test;
    for (int id : datagen::list_scenarios(in.test_dir)) test.push_back(datagen::load_scenario(in.test_dir, id));
    if (test.empty()) throw std::runtime_error("no test scenarios in " + in.test_dir.string());
    const auto baseline = datagen::load_baseline(in.baseline_file);
    const int H = test.front().maps.front().height, W = test.front().maps.front().width;
    if (baseline.height != H || baseline.width != W) throw std::runtime_error("baseline size differs from test maps");

    EvalSummary summary;
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    std::vector<std::vector<float>> truth_maps;
    std::vector<const datagen::VelocityMap*> truth_refs;
    for (const auto& s : test)
        for (const auto& m : s.maps) {
            for (float v : m.grid) {
                vmin = std::min(vmin, static_cast<double>(v));
                vmax = std::max(vmax, static_cast<double>(v));
            }
            truth_maps.push_back(m.grid);
            truth_refs.push_back(&m);
        }
    SsimConfig sc;
    sc.dynamic_range = vmax - vmin;
    summary.ssim_range = sc.dynamic_range;
    summary.scalars.emplace_back("ssim_dynamic_range", sc.dynamic_range);
    summary.scalars.emplace_back("test_maps", static_cast<double>(truth_maps.size()));

    std::vector<MetricRow> metrics;
    std::map<std::string, std::vector<std::vector<float>>> predictions;  // model -> maps aligned with truth_maps

    if (in.generator_ckpt) {
        const auto ckpt = genmodels::load_checkpoint(*in.generator_ckpt);
        const auto g = ckpt.instantiate();
        const std::string model = "gen_" + genmodels::to_string(ckpt.kind());
        std::vector<std::pair<int, double>> year_losses;
        auto& preds = predictions[model];
        for (const auto& s : test) {
            const Tensor<float> rec = genmodels::reconstruct_scenario(g, s, ckpt.norm);
            for (std::size_t k = 0; k < s.maps.size(); ++k) {
                const Tensor<float> truth = genmodels::to_tensor(s.maps[k], ckpt.norm);
                const Tensor<float> pred = slice(rec, static_cast<int>(k), static_cast<int>(k) + 1);
                year_losses.emplace_back(s.maps[k].year, losses::mse(truth, pred));
                preds.push_back(genmodels::from_tensor(rec, static_cast<int>(k), ckpt.norm));
            }
        }
        const auto rows = per_year_loss_curve(year_losses);
        auto csv = open_csv(in.out_dir / "per_year.csv");
        csv << "year,mean_loss,count\n";
        plot::Series curve;
        for (const auto& r : rows) {
            csv << r.year << ',' << (r.count > 0 ? io::format_double(r.mean) : "") << ',' << r.count << '\n';
            if (r.count > 0) curve.emplace_back(r.year, r.mean);
        }
        const std::vector<plot::Series> curves{curve};
        plot::line_chart(in.out_dir / "per_year.png", curves);

        // Generated-versus-true distribution on the test scenarios.
        genmodels::AugmentConfig ac;
        ac.count = static_cast<int>(std::min<std::size_t>(truth_maps.size(), 400));
        ac.small_leak_bias = false;
        ac.seed = in.seed;
        const auto synth = genmodels::generate_augmentation(ckpt, test, ac);
        std::vector<std::vector<float>> gen_maps, true_subset;
        for (const auto& s : synth) gen_maps.push_back(s.map);
        const std::size_t stride = std::max<std::size_t>(1, truth_maps.size() / gen_maps.size());
        for (std::size_t i = 0; i < truth_maps.size() && true_subset.size() < gen_maps.size(); i += stride)
            true_subset.push_back(truth_maps[i]);
        auto pcsv = open_csv(in.out_dir / "projections.csv");
        pcsv << "method,set,index,c1,c2\n";
        for (Projection method : {Projection::PCA, Projection::NMF}) {
            const auto p = project_2d(rows_of(true_subset), rows_of(gen_maps), method);
            summary.scalars.emplace_back("overlap_" + to_string(method), p.overlap);
            plot::Series ts, gs;
            for (Eigen::Index i = 0; i < p.true_points.rows(); ++i) {
                pcsv << to_string(method) << ",true," << i << ',' << io::format_double(p.true_points(i, 0)) << ','
                     << io::format_double(p.true_points(i, 1)) << '\n';
                ts.emplace_back(p.true_points(i, 0), p.true_points(i, 1));
            }
            for (Eigen::Index i = 0; i < p.generated_points.rows(); ++i) {
                pcsv << to_string(method) << ",generated," << i << ',' << io::format_double(p.generated_points(i, 0))
                     << ',' << io::format_double(p.generated_points(i, 1)) << '\n';
                gs.emplace_back(p.generated_points(i, 0), p.generated_points(i, 1));
            }
            const std::vector<plot::Series> sets{ts, gs};
            plot::scatter_chart(in.out_dir / ("projections_" + to_string(method) + ".png"), sets);
        }
    }

    if (!in.inversion_ckpts.empty()) {
        const auto pairs = inversion::load_real_pairs(in.test_dir, in.test_gathers);
        if (pairs.pairs.size() != truth_maps.size()) throw std::runtime_error("test gathers do not cover every map");
        for (std::size_t c = 0; c < in.inversion_ckpts.size(); ++c) {
            const auto ckpt = inversion::load_checkpoint(in.inversion_ckpts[c]);
            std::string model = "inv_" + ckpt.augmentation;
            while (predictions.contains(model)) model += "'";
            const auto r = inversion::test_inversion(ckpt, pairs, inversion::Subset::General, true);
            predictions[model] = r.predictions;
            summary.scalars.emplace_back("test_loss_general_" + model, r.loss);
            summary.scalars.emplace_back("test_loss_small_" + model,
                                         inversion::test_inversion(ckpt, pairs, inversion::Subset::Small).loss);
        }
    }

    // Per-sample metrics of every model against the truth.
    for (const auto& [model, preds] : predictions)
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const auto& t = *truth_refs[i];
            metrics.push_back({model, static_cast<int>(i), t.scenario_id, t.year, datagen::classify_leak(t.leak_mass),
                               mae(t.grid, preds[i]), ssim(t.grid, preds[i], H, W, sc)});
        }
    {
        auto csv = open_csv(in.out_dir / "metrics.csv");
        csv << "model,index,scenario_id,year,leak_class,mae,ssim\n";
        for (const auto& m : metrics)
            csv << m.model << ',' << m.index << ',' << m.scenario_id << ',' << m.year << ','
                << datagen::to_string(m.leak_class) << ',' << io::format_double(m.mae) << ','
                << io::format_double(m.ssim) << '\n';
    }

    // Box plots of per-sample MAE on the small-leak and general subsets.
    {
        auto csv = open_csv(in.out_dir / "boxplot.csv");
        csv << "model,subset,n,median,q1,q3,whisker_lo,whisker_hi,outliers\n";
        std::vector<std::array<double, 5>> boxes;
        for (const auto& [model, preds] : predictions) {
            (void)preds;
            for (const std::string subset : {"small", "general"}) {
                std::vector<double> v;
                for (const auto& m : metrics)
                    if (m.model == model && (subset == "general" || datagen::is_small_leak(m.leak_class)))
                        v.push_back(m.mae);
                if (v.empty()) continue;
                const auto b = boxplot_stats(v);
                csv << model << ',' << subset << ',' << v.size() << ',' << io::format_double(b.median) << ','
                    << io::format_double(b.q1) << ',' << io::format_double(b.q3) << ','
                    << io::format_double(b.whisker_lo) << ',' << io::format_double(b.whisker_hi) << ','
                    << b.outliers.size() << '\n';
                if (subset == "small") boxes.push_back({b.q1, b.median, b.q3, b.whisker_lo, b.whisker_hi});
                double mean_ssim = 0.0;
                long cnt = 0;
                for (const auto& m : metrics)
                    if (m.model == model && (subset == "general" || datagen::is_small_leak(m.leak_class))) {
                        mean_ssim += m.ssim;
                        ++cnt;
                    }
                summary.scalars.emplace_back("mean_mae_" + subset + "_" + model, [&] {
                    double s = 0.0;
                    for (double x : v) s += x;
                    return s / v.size();
                }());
                summary.scalars.emplace_back("mean_ssim_" + subset + "_" + model, mean_ssim / cnt);
            }
        }
        plot::box_chart(in.out_dir / "boxplot.png", boxes);
    }

    // Kz spectra averaged over the small-leak test maps (all maps if none are small).
    {
        std::vector<std::size_t> chosen;
        for (std::size_t i = 0; i < truth_refs.size(); ++i)
            if (datagen::is_small_leak(datagen::classify_leak(truth_refs[i]->leak_mass))) chosen.push_back(i);
        if (chosen.empty())
            for (std::size_t i = 0; i < truth_refs.size(); ++i) chosen.push_back(i);
        auto mean_spectrum = [&](const std::vector<std::vector<float>>& maps) {
            std::vector<double> acc(H / 2 + 1, 0.0);
            for (std::size_t i : chosen) {
                const auto s = kz_spectrum(maps[i], baseline.grid, H, W);
                for (int k = 0; k <= H / 2; ++k) acc[k] += s[k] / chosen.size();
            }
            return acc;
        };
        auto csv = open_csv(in.out_dir / "kz.csv");
        csv << "source,k,amplitude\n";
        std::vector<plot::Series> curves;
        auto emit = [&](const std::string& name, const std::vector<double>& s) {
            plot::Series curve;
            for (std::size_t k = 0; k < s.size(); ++k) {
                csv << name << ',' << k << ',' << io::format_double(s[k]) << '\n';
                curve.emplace_back(static_cast<double>(k), s[k]);
            }
            curves.push_back(std::move(curve));
        };
        emit("truth", mean_spectrum(truth_maps));
        for (const auto& [model, preds] : predictions) emit(model, mean_spectrum(preds));
        plot::line_chart(in.out_dir / "kz.png", curves);

        std::vector<std::vector<float>> show{truth_maps[chosen.back()]};
        for (const auto& [model, preds] : predictions) show.push_back(preds[chosen.back()]);
        plot::heatmaps(in.out_dir / "maps.png", show, H, W, vmin, vmax);
    }

    auto csv = open_csv(in.out_dir / "summary.csv");
    csv << "key,value\n";
    for (const auto& [k, v] : summary.scalars) csv << k << ',' << io::format_double(v) << '\n';
    return summary;
}

}  // namespace seismo::evaluate
