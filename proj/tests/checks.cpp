#include "checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "seismo/evaluate.hpp"
#include "seismo/genmodels.hpp"
#include "seismo/inversion.hpp"
#include "seismo/losses.hpp"
#include "seismo/wavesim.hpp"

namespace seismo::checks {

namespace {

using Rng = std::mt19937_64;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

Result make(std::string name, bool pass, std::string detail) { return {std::move(name), pass, std::move(detail)}; }

Result bound(std::string name, double err, double tol) {
    return make(std::move(name), err < tol, "error " + fmt(err) + " (limit " + fmt(tol) + ")");
}

Tensor<double> uniform(int n, int c, int h, int w, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(n, c, h, w);
    for (auto& v : t.data) v = u(rng);
    return t;
}

Tensor<double> normal(int n, int c, int h, int w, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Tensor<double> t(n, c, h, w);
    for (auto& v : t.data) v = d(rng);
    return t;
}

// He weights plus small random biases so bias gradients are exercised too.
void randomize(std::vector<Tensor<double>*> params, const std::vector<std::string>& names, Rng& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        const bool bias = names[i].ends_with(".bias");
        const double sd = bias ? 0.1 : std::sqrt(2.0 / (static_cast<double>(p.c) * p.h * p.w));
        for (auto& v : p.data) v = sd * d(rng);
    }
}

template <typename T>
std::vector<std::string> generator_names(const genmodels::Generator<T>& g) {
    auto n = g.encoder().parameter_names();
    for (auto& s : g.decoder().parameter_names()) n.push_back(s);
    return n;
}

std::vector<double> flatten(const std::vector<Tensor<double>>& a, const std::vector<Tensor<double>>& b = {}) {
    std::vector<double> out;
    for (const auto& t : a) out.insert(out.end(), t.data.begin(), t.data.end());
    for (const auto& t : b) out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

}  // namespace

bool all_pass(const Results& r) {
    return std::all_of(r.begin(), r.end(), [](const Result& x) { return x.pass; });
}

std::string describe_failures(const Results& r) {
    std::string out;
    for (const auto& x : r)
        if (!x.pass) out += x.name + ": " + x.detail + "\n";
    return out;
}

double max_relative(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return INFINITY;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    if (num == 0.0) return 0.0;
    return den == 0.0 ? INFINITY : num / den;
}

double scalar_relative(double a, double b) {
    if (a == b) return 0.0;
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

double gradient_error(const std::vector<Tensor<double>*>& params, const std::function<double()>& loss,
                      const std::vector<double>& analytic, double h) {
    std::vector<double> fd;
    for (auto* p : params)
        for (auto& v : p->data) {
            const double keep = v;
            const double step = h * std::max(1.0, std::abs(keep));
            v = keep + step;
            const double lp = loss();
            v = keep - step;
            const double lm = loss();
            v = keep;
            fd.push_back((lp - lm) / (2.0 * step));
        }
    if (fd.size() != analytic.size()) return INFINITY;
    double diff = 0.0, na = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        diff += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
        na += analytic[i] * analytic[i];
        nf += fd[i] * fd[i];
    }
    const double scale = std::sqrt(std::max(na, nf));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// ---- gradients ------------------------------------------------------------------

Results gradient_suite() {
    Results out;
    constexpr double kTol = 1e-4;
    Rng rng(20240611);

    {
        const auto arch = inversion::InvArch::tiny();
        auto net = inversion::build_network<double>(arch);
        randomize(net.parameters(), net.parameter_names(), rng);
        const auto x = normal(2, arch.shots, arch.nt, arch.receivers, rng);
        const auto truth = uniform(2, 1, arch.height, arch.width, rng);
        auto grads = net.zero_grads();
        const auto acts = net.forward_trace(x);
        Tensor<double> dpred;
        inversion::invnet_loss(acts.back(), truth, &dpred);
        net.backward(acts, dpred, grads);
        const double err = gradient_error(
            net.parameters(), [&] { return inversion::invnet_loss(net.forward(x), truth); }, flatten(grads));
        out.push_back(bound("invnet MAE", err, kTol));
    }

    const auto arch = genmodels::Architecture::tiny();
    const int H = arch.height, W = arch.width, L = arch.latent;
    genmodels::LossContext ctx;
    featureext::FeatureExtractor<double> extractor({{3, 4}, 3, 5});
    ctx.layers = featureext::LayerSelection::A;

    auto check_generator = [&](genmodels::ModelKind kind, const genmodels::Batch<double>& batch, const char* name) {
        genmodels::Generator<double> g(kind, arch);
        randomize(g.parameters(), generator_names(g), rng);
        auto grads = g.zero_grads();
        genmodels::compute_loss(g, batch, ctx, &extractor, &grads);
        const double err = gradient_error(
            g.parameters(), [&] { return genmodels::compute_loss(g, batch, ctx, &extractor).total; },
            flatten(grads.encoder, grads.decoder));
        out.push_back(bound(name, err, kTol));
    };

    genmodels::TripleBatch<double> tb{uniform(2, 1, H, W, rng), uniform(2, 1, H, W, rng), {50.0, 120.0},
                                      uniform(2, 1, H, W, rng)};
    check_generator(genmodels::ModelKind::AE, tb, "AE MSE");

    genmodels::MapBatch<double> mb{uniform(2, 1, H, W, rng), normal(2, L, 1, 1, rng)};
    check_generator(genmodels::ModelKind::VAE, mb, "VAE recon + KLD");
    check_generator(genmodels::ModelKind::VAEPercep, mb, "VAE + perception");

    genmodels::PairBatch<double> pb{uniform(2, 1, H, W, rng), uniform(2, 1, H, W, rng), normal(2, L, 1, 1, rng),
                                    normal(2, L, 1, 1, rng), {20, 110}, {10, 100}};
    check_generator(genmodels::ModelKind::VAEReg, pb, "VAE + temporal regularization");
    return out;
}

// ---- component oracles --------------------------------------------------------------

namespace {

double naive_conv_check(Rng& rng) {
    std::uniform_int_distribution<int> pick(1, 3);
    nn::ConvShape s;
    s.in_channels = pick(rng);
    s.out_channels = pick(rng);
    s.kernel_h = 2 * pick(rng) - 1;
    s.kernel_w = pick(rng);
    s.stride_h = pick(rng);
    s.stride_w = pick(rng);
    s.pad_h = pick(rng) - 1;
    s.pad_w = pick(rng) - 1;
    nn::Conv2d<double> conv(s);
    for (auto& p : conv.params())
        for (auto& v : p.data) v = std::normal_distribution<double>()(rng);
    const int h = 6 + pick(rng), w = 5 + pick(rng);
    const auto x = normal(2, s.in_channels, h, w, rng);
    const auto y = conv.forward(x);
    const auto dy = normal(y.n, y.c, y.h, y.w, rng);
    std::vector<Tensor<double>> grads{Tensor<double>(s.out_channels, s.in_channels, s.kernel_h, s.kernel_w),
                                      Tensor<double>(s.out_channels, 1, 1, 1)};
    const auto dx = conv.backward(x, y, dy, grads);

    const auto& wt = conv.params()[0];
    const auto& b = conv.params()[1];
    Tensor<double> ry(y.n, y.c, y.h, y.w), rdx(x.n, x.c, x.h, x.w);
    Tensor<double> rdw(wt.n, wt.c, wt.h, wt.w), rdb(b.n, 1, 1, 1);
    for (int i = 0; i < x.n; ++i)
        for (int o = 0; o < s.out_channels; ++o)
            for (int oy = 0; oy < y.h; ++oy)
                for (int ox = 0; ox < y.w; ++ox) {
                    double acc = b.data[o];
                    const double g = dy(i, o, oy, ox);
                    rdb.data[o] += g;
                    for (int ci = 0; ci < s.in_channels; ++ci)
                        for (int ky = 0; ky < s.kernel_h; ++ky)
                            for (int kx = 0; kx < s.kernel_w; ++kx) {
                                const int iy = oy * s.stride_h - s.pad_h + ky, ix = ox * s.stride_w - s.pad_w + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += wt(o, ci, ky, kx) * x(i, ci, iy, ix);
                                rdw(o, ci, ky, kx) += g * x(i, ci, iy, ix);
                                rdx(i, ci, iy, ix) += g * wt(o, ci, ky, kx);
                            }
                    ry(i, o, oy, ox) = acc;
                }
    return std::max({max_relative(y.data, ry.data), max_relative(dx.data, rdx.data),
                     max_relative(grads[0].data, rdw.data), max_relative(grads[1].data, rdb.data)});
}

double naive_dense_check(Rng& rng) {
    std::uniform_int_distribution<int> pick(1, 9);
    const int in = pick(rng), outn = pick(rng), n = pick(rng);
    nn::Dense<double> d(in, outn);
    for (auto& p : d.params())
        for (auto& v : p.data) v = std::normal_distribution<double>()(rng);
    const auto x = normal(n, in, 1, 1, rng);
    const auto y = d.forward(x);
    const auto& w = d.params()[0];
    std::vector<double> ref(static_cast<std::size_t>(n) * outn);
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < outn; ++o) {
            double acc = d.params()[1].data[o];
            for (int k = 0; k < in; ++k) acc += w.data[o * in + k] * x.data[i * in + k];
            ref[i * outn + o] = acc;
        }
    return max_relative(y.data, ref);
}

double naive_pointwise_check(Rng& rng) {
    const auto x = normal(2, 3, 6, 4, rng);
    const nn::LeakyRelu<double> act(0.2);
    const nn::AvgPool2<double> pool;
    const nn::Upsample2<double> up;
    const auto a = act.forward(x), p = pool.forward(x), u = up.forward(x);
    std::vector<double> ra(x.size()), rp(p.size()), ru(u.size());
    for (std::size_t k = 0; k < x.size(); ++k) ra[k] = std::max(x.data[k], 0.0) + 0.2 * std::min(x.data[k], 0.0);
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 6; ++r)
                for (int q = 0; q < 4; ++q) {
                    rp[((i * 3 + c) * 3 + r / 2) * 2 + q / 2] += x(i, c, r, q) / 4.0;
                    for (int dr = 0; dr < 2; ++dr)
                        for (int dq = 0; dq < 2; ++dq) ru[((i * 3 + c) * 12 + 2 * r + dr) * 8 + 2 * q + dq] = x(i, c, r, q);
                }
    return std::max({max_relative(a.data, ra), max_relative(p.data, rp), max_relative(u.data, ru)});
}

// Gram entries by explicit summation.
std::vector<double> naive_gram(std::span<const double> f, int n, int m) {
    std::vector<double> g(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            long double acc = 0.0L;
            for (int k = 0; k < m; ++k) acc += static_cast<long double>(f[i * m + k]) * f[j * m + k];
            g[i * n + j] = static_cast<double>(acc);
        }
    return g;
}

}  // namespace

Results component_oracles() {
    Results out;
    Rng rng(77);
    constexpr int kTrials = 50;
    double e_mse = 0, e_sse = 0, e_mae = 0, e_kld = 0, e_reg = 0, e_rep = 0, e_gram = 0, e_percep = 0;
    double e_conv = 0, e_dense = 0, e_point = 0;
    featureext::FeatureExtractor<double> extractor({{3, 5, 4}, 3, 9});
    std::uniform_int_distribution<int> sz(1, 12);

    for (int t = 0; t < kTrials; ++t) {
        const int n = sz(rng), h = sz(rng), w = sz(rng);
        const auto a = normal(n, 1, h, w, rng), b = normal(n, 1, h, w, rng);
        const auto c = normal(n, 1, h, w, rng), d = normal(n, 1, h, w, rng);
        long double sq = 0, ab = 0, reg = 0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const long double diff = static_cast<long double>(b.data[k]) - a.data[k];
            sq += diff * diff;
            ab += std::fabs(diff);
            reg += std::fabs((static_cast<long double>(a.data[k]) - b.data[k]) -
                             (static_cast<long double>(c.data[k]) - d.data[k]));
        }
        const double count = static_cast<double>(a.size());
        e_sse = std::max(e_sse, scalar_relative(losses::sse(a, b), static_cast<double>(sq)));
        e_mse = std::max(e_mse, scalar_relative(losses::mse(a, b), static_cast<double>(sq / count)));
        e_mae = std::max(e_mae, scalar_relative(losses::mae(a, b), static_cast<double>(ab / count)));
        e_reg = std::max(e_reg, scalar_relative(losses::temporal_reg(a, b, c, d), static_cast<double>(reg)));

        long double kl = 0;
        std::vector<double> z_ref(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            const long double m = a.data[k], v = 0.5L * b.data[k];
            kl += 0.5L * (m * m + std::exp(v) - 1.0L - v);
            z_ref[k] = a.data[k] + std::sqrt(std::exp(0.5 * b.data[k])) * c.data[k];
        }
        std::vector<double> lv(b.data.begin(), b.data.end());
        for (auto& v : lv) v *= 0.5;
        e_kld = std::max(e_kld, scalar_relative(losses::kld<double>(a.data, lv), static_cast<double>(kl)));
        e_rep = std::max(e_rep, max_relative(losses::reparameterize<double>(a.data, lv, c.data), z_ref));

        const int ch = sz(rng), pos = sz(rng);
        const auto f = normal(1, ch, 1, pos, rng);
        const auto g = losses::gram<double>(f.data, ch, pos);
        std::vector<double> gv(g.data(), g.data() + g.size());  // symmetric, so layout does not matter
        e_gram = std::max(e_gram, max_relative(gv, naive_gram(f.data, ch, pos)));

        e_conv = std::max(e_conv, naive_conv_check(rng));
        e_dense = std::max(e_dense, naive_dense_check(rng));
        e_point = std::max(e_point, naive_pointwise_check(rng));
    }
    for (int t = 0; t < kTrials; ++t) {
        const int n = 1 + t % 2, side = 8 + 4 * (t % 3);
        const auto x = uniform(n, 1, side, side, rng), y = uniform(n, 1, side, side, rng);
        const auto sel = t % 2 ? featureext::LayerSelection::B : featureext::LayerSelection::A;
        const double got = losses::perception_loss(extractor, x, y, sel);
        const auto fx = extractor.features(x, featureext::block_count(sel));
        const auto fy = extractor.features(y, featureext::block_count(sel));
        long double ref = 0;
        for (std::size_t l = 0; l < fx.size(); ++l) {
            const int nl = fx[l].c, ml = fx[l].h * fx[l].w;
            const long double lambda = 1.0L / (4.0L * nl * nl * static_cast<long double>(ml) * ml);
            for (int i = 0; i < n; ++i) {
                const auto gx = naive_gram(fx[l].sample(i), nl, ml), gy = naive_gram(fy[l].sample(i), nl, ml);
                for (std::size_t k = 0; k < gx.size(); ++k) ref += lambda * (gx[k] - gy[k]) * (gx[k] - gy[k]);
            }
        }
        e_percep = std::max(e_percep, scalar_relative(got, static_cast<double>(ref)));
    }

    out.push_back(bound("mse vs direct sum", e_mse, 1e-12));
    out.push_back(bound("sse vs direct sum", e_sse, 1e-12));
    out.push_back(bound("mae vs direct sum", e_mae, 1e-12));
    out.push_back(bound("kld vs closed form", e_kld, 1e-12));
    out.push_back(bound("temporal_reg vs direct sum", e_reg, 1e-12));
    out.push_back(bound("reparameterize vs formula", e_rep, 1e-12));
    out.push_back(bound("gram vs triple loop", e_gram, 1e-10));
    out.push_back(bound("perception_loss vs explicit Gram sum", e_percep, 1e-10));
    out.push_back(bound("Conv2d forward/backward vs direct loops", e_conv, 1e-10));
    out.push_back(bound("Dense vs direct loops", e_dense, 1e-10));
    out.push_back(bound("LeakyRelu / AvgPool2 / Upsample2 vs definitions", e_point, 1e-10));
    return out;
}

// ---- closed forms ---------------------------------------------------------------------

Results closed_forms() {
    Results out;
    {
        const std::vector<double> zero(16, 0.0);
        const double k = losses::kld<double>(zero, zero);
        out.push_back(make("kld(0, 0) == 0", k == 0.0, "kld = " + fmt(k)));
    }
    {
        // KL(q || p) = E_q[log q(z) - log p(z)] estimated with 1e6 samples per dimension.
        const std::vector<double> mu{0.8, -0.4, 1.5}, lv{0.5, -1.0, 0.2};
        Rng rng(4242);
        std::normal_distribution<double> nd;
        double mc = 0.0;
        constexpr int kSamples = 1'000'000;
        for (std::size_t d = 0; d < mu.size(); ++d) {
            const double sd = std::exp(0.5 * lv[d]);
            double acc = 0.0;
            for (int s = 0; s < kSamples; ++s) {
                const double e = nd(rng), z = mu[d] + sd * e;
                acc += (-0.5 * e * e - 0.5 * lv[d]) - (-0.5 * z * z);
            }
            mc += acc / kSamples;
        }
        const double exact = losses::kld<double>(mu, lv);
        const double rel = std::abs(mc - exact) / exact;
        out.push_back(make("kld matches Monte-Carlo estimate (1e6 samples)", rel < 0.01,
                           "closed form " + fmt(exact) + ", MC " + fmt(mc) + ", relative " + fmt(rel)));
    }
    {
        Rng rng(31);
        std::uniform_int_distribution<int> sz(1, 16);
        bool sym = true, psd = true;
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const int n = sz(rng), m = sz(rng);
            const auto f = normal(1, n, 1, m, rng);
            const auto g = losses::gram<double>(f.data, n, m);
            sym = sym && g == g.transpose();
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            const double lo = es.eigenvalues().minCoeff(), hi = std::max(es.eigenvalues().maxCoeff(), 1.0);
            worst = std::min(worst, lo / hi);
            psd = psd && lo >= -1e-12 * hi;
        }
        out.push_back(make("gram symmetric on 100 feature maps", sym, sym ? "exact symmetry" : "asymmetric entry"));
        out.push_back(make("gram positive semi-definite on 100 feature maps", psd,
                           "min eigenvalue / max = " + fmt(worst)));
    }
    {
        Rng rng(5);
        featureext::FeatureExtractor<double> ex({{4, 6, 6, 8}, 3, 2});
        const auto x = uniform(2, 1, 16, 16, rng);
        const double p = losses::perception_loss(ex, x, x, featureext::LayerSelection::C);
        out.push_back(make("perception_loss(x, x) == 0", p == 0.0, "value " + fmt(p)));

        bool exact = true;
        for (int n : {1, 3, 64, 512})
            for (long m : {1L, 7L, 4096L, 65536L}) {
                const double ref = 1.0 / (4.0 * n * n * static_cast<double>(m) * static_cast<double>(m));
                exact = exact && losses::perception_weight(n, m) == ref;
            }
        out.push_back(make("perception lambda = 1 / (4 N^2 M^2)", exact, exact ? "bit-exact" : "mismatch"));
    }
    {
        // Dyadic values keep every subtraction exact.
        Rng rng(17);
        std::uniform_int_distribution<int> ints(-4096, 4096);
        const int n = 3, h = 9, w = 7;
        Tensor<double> x1(n, 1, h, w), x2(n, 1, h, w), y1(n, 1, h, w);
        for (std::size_t k = 0; k < x1.size(); ++k) {
            x1.data[k] = ints(rng) / 64.0;
            x2.data[k] = ints(rng) / 64.0;
        }
        bool ok = true;
        std::string detail;
        for (double c : {0.25, -1.5, 3.0}) {
            for (std::size_t k = 0; k < x1.size(); ++k) y1.data[k] = x1.data[k] + c;
            const double r = losses::temporal_reg(x1, x2, y1, x2);
            const double expect = static_cast<double>(x1.size()) * std::abs(c);
            ok = ok && r == expect;
            detail += "c=" + fmt(c) + ": " + fmt(r) + " vs " + fmt(expect) + "; ";
        }
        out.push_back(make("temporal_reg constant shift == P |c|", ok, detail));
    }
    return out;
}

// ---- interpolation ----------------------------------------------------------------

Results interpolation_identities() {
    Results out;
    const auto arch = genmodels::Architecture::tiny();
    genmodels::Generator<float> g(genmodels::ModelKind::VAEReg, arch);
    g.init(3);
    Rng rng(99);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    Tensor<float> xa(1, 1, arch.height, arch.width), xb(1, 1, arch.height, arch.width);
    for (auto& v : xa.data) v = u(rng);
    for (auto& v : xb.data) v = u(rng);
    const auto ra = genmodels::vae_reconstruct(g, xa), rb = genmodels::vae_reconstruct(g, xb);
    const auto i1 = genmodels::latent_interpolate(g, xa, xb, 1.0), i0 = genmodels::latent_interpolate(g, xa, xb, 0.0);
    out.push_back(make("alpha = 1 reproduces reconstruction of x_a", i1.data == ra.data, "bitwise comparison"));
    out.push_back(make("alpha = 0 reproduces reconstruction of x_b", i0.data == rb.data, "bitwise comparison"));

    Tensor<double> da(2, 1, 5, 6), db(2, 1, 5, 6);
    Rng r2(100);
    std::normal_distribution<double> nd;
    for (auto& v : da.data) v = nd(r2);
    for (auto& v : db.data) v = nd(r2);
    auto id = [](const Tensor<double>& t) { return t; };
    const auto mid = genmodels::interpolate_with<double>(id, id, da, db, 0.5);
    std::vector<double> mean(da.size());
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = (da.data[k] + db.data[k]) / 2.0;
    double err = 0.0;
    for (std::size_t k = 0; k < mean.size(); ++k) err = std::max(err, std::abs(mid.data[k] - mean[k]));
    out.push_back(bound("identity stubs at alpha = 0.5 give the pixel mean", err, 1e-12));
    return out;
}

// ---- wave solver ----------------------------------------------------------------------

namespace {

// Lens model for the refinement study; returns the receiver trace.
std::vector<float> lens_trace(double dx) {
    constexpr double L = 1280.0;
    const int n = static_cast<int>(L / dx) + 1;
    std::vector<float> v(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double z = i * dx - L / 2 - 80.0, x = j * dx - L / 2;
            v[static_cast<std::size_t>(i) * n + j] =
                static_cast<float>(2000.0 + 400.0 * std::exp(-(x * x + z * z) / (2.0 * 80.0 * 80.0)));
        }
    wavesim::SimConfig c;
    c.dx = dx;
    c.dt = 2e-4;
    c.nt = 2250;
    c.peak_frequency = 10.0;
    c.source_radius = 30.0;
    c.boundary_width = static_cast<int>(160.0 / dx);
    const int mid = static_cast<int>(L / 2 / dx);
    c.sources = {{static_cast<int>((L / 2 - 160.0) / dx), mid}};
    c.receivers = {{static_cast<int>((L / 2 + 160.0) / dx), mid}};
    return wavesim::propagate(n, n, v, c)[0].gather.traces;
}

}  // namespace

Results wave_solver() {
    Results out;
    {
        const int H = 120, W = 120;
        std::vector<float> v(H * W, 2000.f);
        wavesim::SimConfig c;
        c.dx = 5.0;
        c.dt = 5e-4;
        c.nt = 700;
        c.peak_frequency = 15.0;
        c.sources = {{60, 20}};
        c.receivers = {{60, 100}};
        const auto tr = wavesim::propagate(H, W, v, c)[0].gather.traces;
        const auto wl = wavesim::ricker_wavelet(c.peak_frequency, c.dt, c.nt);
        float peak = 0.f;
        for (float s : tr) peak = std::max(peak, std::abs(s));
        double wpeak = 0.0;
        for (double s : wl) wpeak = std::max(wpeak, std::abs(s));
        // Onset at 2% of peak, measured relative to the source wavelet's own onset.
        int it = 0, iw = 0;
        while (it < c.nt && std::abs(tr[it]) < 0.02f * peak) ++it;
        while (iw < c.nt && std::abs(wl[iw]) < 0.02 * wpeak) ++iw;
        const double arrival = (it - iw) * c.dt, expect = 80 * c.dx / 2000.0;
        const double rel = std::abs(arrival - expect) / expect;
        out.push_back(make("homogeneous first arrival within 2% of d/v", rel < 0.02,
                           "picked " + fmt(arrival) + " s, d/v " + fmt(expect) + " s, relative " + fmt(rel)));
    }
    {
        const int H = 120, W = 120;
        std::vector<float> v(H * W);
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j)
                v[i * W + j] = static_cast<float>(
                    2000.0 + 500.0 * std::exp(-((i - 50) * (i - 50) + (j - 70) * (j - 70)) / 200.0));
        wavesim::SimConfig c;
        c.dx = 5.0;
        c.dt = 5e-4;
        c.nt = 700;
        c.sources = {{30, 20}};
        c.receivers = {{80, 95}};
        const auto a = wavesim::propagate(H, W, v, c)[0].gather.traces;
        std::swap(c.sources, c.receivers);
        const auto b = wavesim::propagate(H, W, v, c)[0].gather.traces;
        std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
        out.push_back(bound("reciprocity (source/receiver swap)", max_relative(da, db), 1e-6));
    }
    {
        const auto ref = lens_trace(5.0);
        double peak = 0.0;
        for (float s : ref) peak = std::max(peak, static_cast<double>(std::abs(s)));
        std::vector<double> errs;
        for (double dx : {40.0, 20.0, 10.0}) {
            const auto t = lens_trace(dx);
            double e = 0.0;
            for (std::size_t i = 0; i < ref.size(); ++i) e = std::max(e, static_cast<double>(std::abs(t[i] - ref[i])));
            errs.push_back(e / peak);
        }
        bool monotone = true;
        double min_order = INFINITY;
        std::string detail = "errors";
        for (double e : errs) detail += " " + fmt(e);
        detail += "; orders";
        for (std::size_t k = 1; k < errs.size(); ++k) {
            monotone = monotone && errs[k] < errs[k - 1];
            const double order = std::log2(errs[k - 1] / errs[k]);
            min_order = std::min(min_order, order);
            detail += " " + fmt(order);
        }
        out.push_back(make("grid refinement: monotone error decrease, order >= 4", monotone && min_order >= 4.0,
                           detail));
    }
    {
        const int H = 40, W = 40;
        std::vector<float> v(H * W, 3000.f);
        wavesim::SimConfig c;
        c.dx = 10.0;
        c.dt = 2e-3;  // bound is 0.5 * 10 / 3000 = 1.67e-3
        c.nt = 2'000'000;
        c.sources = {{10, 10}};
        c.receivers = {{20, 20}};
        const auto t0 = std::chrono::steady_clock::now();
        bool threw = false;
        std::string msg;
        try {
            wavesim::propagate(H, W, v, c);
        } catch (const wavesim::SimulationError& e) {
            threw = true;
            msg = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // Two million steps would take far longer than this if any were taken.
        out.push_back(make("CFL violation raises before stepping", threw && secs < 0.5 && !wavesim::cfl_check(c, v).pass,
                           (threw ? msg : std::string("no error")) + " after " + fmt(secs) + " s"));
    }
    return out;
}

// ---- metrics ------------------------------------------------------------------------------

namespace {

double ssim_oracle(std::span<const float> a, std::span<const float> b, int H, int W, double range) {
    const int n = 11;
    const double sigma = 1.5, c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
    std::vector<double> w(n * n);
    double ws = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) ws += w[i * n + j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2 * sigma * sigma));
    for (auto& x : w) x /= ws;
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + n <= H; ++y)
        for (int x = 0; x + n <= W; ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    ma += w[i * n + j] * a[(y + i) * W + x + j];
                    mb += w[i * n + j] * b[(y + i) * W + x + j];
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double da = a[(y + i) * W + x + j] - ma, db = b[(y + i) * W + x + j] - mb;
                    va += w[i * n + j] * da * da;
                    vb += w[i * n + j] * db * db;
                    cov += w[i * n + j] * da * db;
                }
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

}  // namespace

Results metrics() {
    Results out;
    Rng rng(123);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    std::uniform_int_distribution<int> sz(11, 30);
    {
        const int H = 24, W = 20;
        std::vector<float> x(H * W);
        for (auto& v : x) v = 1500.f + 1500.f * u(rng);
        evaluate::SsimConfig cfg;
        cfg.dynamic_range = 1500.0;
        const double s = evaluate::ssim(x, x, H, W, cfg);
        const double m = evaluate::mae(x, x);
        out.push_back(make("ssim(x, x) == 1", s == 1.0, "value " + fmt(s)));
        out.push_back(make("mae(x, x) == 0", m == 0.0, "value " + fmt(m)));
    }
    {
        double e_ssim = 0.0, e_mae = 0.0;
        for (int t = 0; t < 100; ++t) {
            const int H = sz(rng), W = sz(rng);
            std::vector<float> a(H * W), b(H * W);
            for (auto& v : a) v = u(rng);
            for (std::size_t k = 0; k < b.size(); ++k) b[k] = t % 2 ? u(rng) : a[k] + 0.1f * (u(rng) - 0.5f);
            evaluate::SsimConfig cfg;
            e_ssim = std::max(e_ssim, scalar_relative(evaluate::ssim(a, b, H, W, cfg), ssim_oracle(a, b, H, W, 1.0)));
            double ref = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) ref += std::abs(static_cast<double>(a[k]) - b[k]);
            e_mae = std::max(e_mae, scalar_relative(evaluate::mae(a, b), ref / a.size()));
        }
        out.push_back(bound("ssim vs direct formula on 100 pairs", e_ssim, 1e-6));
        out.push_back(bound("mae vs direct formula on 100 pairs", e_mae, 1e-6));
    }
    {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const int H = sz(rng), W = sz(rng);
            std::vector<float> m(H * W), b(H * W);
            for (std::size_t k = 0; k < m.size(); ++k) {
                b[k] = 2000.f + 500.f * u(rng);
                m[k] = b[k] - 200.f * u(rng);
            }
            const auto s = evaluate::kz_spectrum(m, b, H, W);
            double lhs = 0.0, rhs = 0.0;
            for (double v : s) lhs += v * v;
            for (std::size_t k = 0; k < m.size(); ++k) {
                const double d = static_cast<double>(m[k]) - b[k];
                rhs += d * d;
            }
            worst = std::max(worst, scalar_relative(lhs, rhs / W));
        }
        out.push_back(bound("Kz spectrum Parseval identity", worst, 1e-6));
    }
    {
        const std::vector<double> v{1, 2, 3, 4, 5};
        const auto b = evaluate::boxplot_stats(v);
        const bool ok = b.median == 3.0 && b.q1 == 2.0 && b.q3 == 4.0 && b.outliers.empty() && b.whisker_lo == 1.0 &&
                        b.whisker_hi == 5.0;
        out.push_back(make("boxplot_stats([1..5]) = median 3, q1 2, q3 4, no outliers", ok,
                           "median " + fmt(b.median) + " q1 " + fmt(b.q1) + " q3 " + fmt(b.q3) + " outliers " +
                               std::to_string(b.outliers.size())));
    }
    return out;
}

}  // namespace seismo::checks
