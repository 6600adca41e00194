#pragma once

// Minimal feed-forward layer stack with hand-written backward passes.
//
// Layers are stateless with respect to a forward call: backward receives the
// layer input and output recorded by Sequential::forward_trace, so one network
// may be evaluated from several threads and the same layer can appear twice
// in a computation (e.g. the two maps of an adjacent-year pair).

#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seismo/tensor.hpp"

namespace seismo::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor<T> forward(const Tensor<T>& x) const = 0;

    // Returns dL/dx. When `grads` is non-empty it holds one slot per entry of
    // params() and parameter gradients are accumulated into it.
    virtual Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                               std::span<Tensor<T>> grads) const = 0;

    // Parameter gradients only; layers may skip the input gradient.
    virtual void backward_params(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                                 std::span<Tensor<T>> grads) const {
        backward(x, y, dy, grads);
    }
    virtual std::vector<Tensor<T>>& params() { return no_params_; }
    virtual const std::vector<Tensor<T>>& params() const { return no_params_; }
    virtual std::vector<std::string> param_suffixes() const { return {}; }

private:
    std::vector<Tensor<T>> no_params_;
};

struct ConvShape {
    int in_channels = 1;
    int out_channels = 1;
    int kernel_h = 3;
    int kernel_w = 3;
    int stride_h = 1;
    int stride_w = 1;
    int pad_h = 1;
    int pad_w = 1;
};

template <typename T>
class Conv2d final : public Layer<T> {
public:
    explicit Conv2d(ConvShape s) : s_(s) {
        params_.emplace_back(s.out_channels, s.in_channels, s.kernel_h, s.kernel_w);
        params_.emplace_back(s.out_channels, 1, 1, 1);
    }

    const ConvShape& shape() const { return s_; }
    int out_h(int h) const { return (h + 2 * s_.pad_h - s_.kernel_h) / s_.stride_h + 1; }
    int out_w(int w) const { return (w + 2 * s_.pad_w - s_.kernel_w) / s_.stride_w + 1; }

    Tensor<T> forward(const Tensor<T>& x) const override {
        check_input(x);
        const int ho = out_h(x.h), wo = out_w(x.w);
        Tensor<T> y(x.n, s_.out_channels, ho, wo);
        const int k = patch_size();
        RowMat<T> cols(k, ho * wo);
        ConstMatMap<T> wmat(params_[0].data.data(), s_.out_channels, k);
        for (int i = 0; i < x.n; ++i) {
            im2col(x, i, ho, wo, cols);
            MatMap<T> out(y.sample(i).data(), s_.out_channels, ho * wo);
            out.noalias() = wmat * cols;
            for (int o = 0; o < s_.out_channels; ++o) out.row(o).array() += params_[1].data[o];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                       std::span<Tensor<T>> grads) const override {
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        backward_impl(x, y, dy, grads, &dx);
        return dx;
    }

    void backward_params(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                         std::span<Tensor<T>> grads) const override {
        backward_impl(x, y, dy, grads, nullptr);
    }

    std::vector<Tensor<T>>& params() override { return params_; }
    const std::vector<Tensor<T>>& params() const override { return params_; }
    std::vector<std::string> param_suffixes() const override { return {"weight", "bias"}; }

private:
    void backward_impl(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy, std::span<Tensor<T>> grads,
                       Tensor<T>* dx) const {
        const int ho = y.h, wo = y.w;
        const int k = patch_size();
        RowMat<T> cols(k, ho * wo);
        RowMat<T> dcols(dx ? k : 0, ho * wo);
        ConstMatMap<T> wmat(params_[0].data.data(), s_.out_channels, k);
        for (int i = 0; i < x.n; ++i) {
            ConstMatMap<T> g(dy.sample(i).data(), s_.out_channels, ho * wo);
            if (!grads.empty()) {
                im2col(x, i, ho, wo, cols);
                MatMap<T> dw(grads[0].data.data(), s_.out_channels, k);
                dw.noalias() += g * cols.transpose();
                for (int o = 0; o < s_.out_channels; ++o) grads[1].data[o] += g.row(o).sum();
            }
            if (dx) {
                dcols.noalias() = wmat.transpose() * g;
                col2im(dcols, i, ho, wo, *dx);
            }
        }
    }

    int patch_size() const { return s_.in_channels * s_.kernel_h * s_.kernel_w; }

    void check_input(const Tensor<T>& x) const {
        if (x.c != s_.in_channels)
            throw std::invalid_argument("Conv2d: expected " + std::to_string(s_.in_channels) + " channels, got " +
                                        std::to_string(x.c));
        if (out_h(x.h) < 1 || out_w(x.w) < 1) throw std::invalid_argument("Conv2d: input smaller than kernel");
    }

    // Output columns [lo, hi) whose input column lies inside the image.
    std::pair<int, int> valid_columns(int kx, int wo, int width) const {
        const int off = kx - s_.pad_w;
        int lo = off >= 0 ? 0 : (-off + s_.stride_w - 1) / s_.stride_w;
        int hi = width - 1 - off < 0 ? 0 : (width - 1 - off) / s_.stride_w + 1;
        lo = std::min(lo, wo);
        hi = std::clamp(hi, lo, wo);
        return {lo, hi};
    }

    void im2col(const Tensor<T>& x, int i, int ho, int wo, RowMat<T>& cols) const {
        const T* src = x.sample(i).data();
        for (int ci = 0; ci < s_.in_channels; ++ci)
            for (int ky = 0; ky < s_.kernel_h; ++ky)
                for (int kx = 0; kx < s_.kernel_w; ++kx) {
                    T* row = cols.row((ci * s_.kernel_h + ky) * s_.kernel_w + kx).data();
                    const auto [lo, hi] = valid_columns(kx, wo, x.w);
                    const int off = kx - s_.pad_w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s_.stride_h - s_.pad_h + ky;
                        T* dst = row + oy * wo;
                        if (iy < 0 || iy >= x.h) {
                            std::fill(dst, dst + wo, T(0));
                            continue;
                        }
                        const T* line = src + (ci * x.h + iy) * x.w + off;
                        std::fill(dst, dst + lo, T(0));
                        if (s_.stride_w == 1)
                            std::copy(line + lo, line + hi, dst + lo);
                        else
                            for (int ox = lo; ox < hi; ++ox) dst[ox] = line[ox * s_.stride_w];
                        std::fill(dst + hi, dst + wo, T(0));
                    }
                }
    }

    void col2im(const RowMat<T>& cols, int i, int ho, int wo, Tensor<T>& dx) const {
        T* dst = dx.sample(i).data();
        for (int ci = 0; ci < s_.in_channels; ++ci)
            for (int ky = 0; ky < s_.kernel_h; ++ky)
                for (int kx = 0; kx < s_.kernel_w; ++kx) {
                    const T* row = cols.row((ci * s_.kernel_h + ky) * s_.kernel_w + kx).data();
                    const auto [lo, hi] = valid_columns(kx, wo, dx.w);
                    const int off = kx - s_.pad_w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s_.stride_h - s_.pad_h + ky;
                        if (iy < 0 || iy >= dx.h) continue;
                        T* line = dst + (ci * dx.h + iy) * dx.w + off;
                        const T* r = row + oy * wo;
                        if (s_.stride_w == 1)
                            for (int ox = lo; ox < hi; ++ox) line[ox] += r[ox];
                        else
                            for (int ox = lo; ox < hi; ++ox) line[ox * s_.stride_w] += r[ox];
                    }
                }
    }

    ConvShape s_;
    std::vector<Tensor<T>> params_;
};

// Fully connected layer over the flattened sample; output shape (N, out, 1, 1).
template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(int in, int out) : in_(in), out_(out) {
        params_.emplace_back(out, in, 1, 1);
        params_.emplace_back(out, 1, 1, 1);
    }

    Tensor<T> forward(const Tensor<T>& x) const override {
        if (static_cast<int>(x.sample_size()) != in_)
            throw std::invalid_argument("Dense: expected " + std::to_string(in_) + " inputs, got " +
                                        std::to_string(x.sample_size()));
        Tensor<T> y(x.n, out_, 1, 1);
        ConstMatMap<T> xm(x.data.data(), x.n, in_);
        ConstMatMap<T> wm(params_[0].data.data(), out_, in_);
        MatMap<T> ym(y.data.data(), x.n, out_);
        ym.noalias() = xm * wm.transpose();
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(params_[1].data.data(), out_);
        ym.rowwise() += b;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy,
                       std::span<Tensor<T>> grads) const override {
        ConstMatMap<T> xm(x.data.data(), x.n, in_);
        ConstMatMap<T> wm(params_[0].data.data(), out_, in_);
        ConstMatMap<T> g(dy.data.data(), x.n, out_);
        if (!grads.empty()) {
            MatMap<T> dw(grads[0].data.data(), out_, in_);
            dw.noalias() += g.transpose() * xm;
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(grads[1].data.data(), out_);
            db += g.colwise().sum();
        }
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        MatMap<T> dxm(dx.data.data(), x.n, in_);
        dxm.noalias() = g * wm;
        return dx;
    }

    std::vector<Tensor<T>>& params() override { return params_; }
    const std::vector<Tensor<T>>& params() const override { return params_; }
    std::vector<std::string> param_suffixes() const override { return {"weight", "bias"}; }

private:
    int in_;
    int out_;
    std::vector<Tensor<T>> params_;
};

// slope 0 gives a plain ReLU.
template <typename T>
class LeakyRelu final : public Layer<T> {
public:
    explicit LeakyRelu(T slope = T(0.2)) : slope_(slope) {}

    Tensor<T> forward(const Tensor<T>& x) const override {
        Tensor<T> y = x;
        for (auto& v : y.data) v = v < T(0) ? v * slope_ : v;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy,
                       std::span<Tensor<T>>) const override {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] = x.data[i] < T(0) ? dx.data[i] * slope_ : dx.data[i];
        return dx;
    }

private:
    T slope_;
};

template <typename T>
class AvgPool2 final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) const override {
        Tensor<T> y(x.n, x.c, x.h / 2, x.w / 2);
        for (int i = 0; i < x.n; ++i)
            for (int ch = 0; ch < x.c; ++ch)
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx)
                        y(i, ch, yy, xx) = T(0.25) * (x(i, ch, 2 * yy, 2 * xx) + x(i, ch, 2 * yy, 2 * xx + 1) +
                                                      x(i, ch, 2 * yy + 1, 2 * xx) + x(i, ch, 2 * yy + 1, 2 * xx + 1));
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                       std::span<Tensor<T>>) const override {
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        for (int i = 0; i < x.n; ++i)
            for (int ch = 0; ch < x.c; ++ch)
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx) {
                        const T g = T(0.25) * dy(i, ch, yy, xx);
                        dx(i, ch, 2 * yy, 2 * xx) += g;
                        dx(i, ch, 2 * yy, 2 * xx + 1) += g;
                        dx(i, ch, 2 * yy + 1, 2 * xx) += g;
                        dx(i, ch, 2 * yy + 1, 2 * xx + 1) += g;
                    }
        return dx;
    }
};

// Nearest-neighbour 2x upsampling.
template <typename T>
class Upsample2 final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) const override {
        Tensor<T> y(x.n, x.c, x.h * 2, x.w * 2);
        for (int i = 0; i < x.n; ++i)
            for (int ch = 0; ch < x.c; ++ch)
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx) y(i, ch, yy, xx) = x(i, ch, yy / 2, xx / 2);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                       std::span<Tensor<T>>) const override {
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        for (int i = 0; i < x.n; ++i)
            for (int ch = 0; ch < x.c; ++ch)
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx) dx(i, ch, yy / 2, xx / 2) += dy(i, ch, yy, xx);
        return dx;
    }
};

template <typename T>
class Reshape final : public Layer<T> {
public:
    Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}

    Tensor<T> forward(const Tensor<T>& x) const override {
        if (x.sample_size() != static_cast<std::size_t>(c_) * h_ * w_)
            throw std::invalid_argument("Reshape: element count mismatch");
        Tensor<T> y = x;
        y.c = c_;
        y.h = h_;
        y.w = w_;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy,
                       std::span<Tensor<T>>) const override {
        Tensor<T> dx = dy;
        dx.c = x.c;
        dx.h = x.h;
        dx.w = x.w;
        return dx;
    }

private:
    int c_, h_, w_;
};

// Repeats a single input channel `copies` times.
template <typename T>
class ReplicateChannel final : public Layer<T> {
public:
    explicit ReplicateChannel(int copies) : copies_(copies) {}

    Tensor<T> forward(const Tensor<T>& x) const override {
        if (x.c != 1) throw std::invalid_argument("ReplicateChannel: expected a single channel");
        Tensor<T> y(x.n, copies_, x.h, x.w);
        for (int i = 0; i < x.n; ++i)
            for (int k = 0; k < copies_; ++k)
                std::copy(x.sample(i).begin(), x.sample(i).end(), y.sample(i).begin() + k * x.h * x.w);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy,
                       std::span<Tensor<T>>) const override {
        Tensor<T> dx(x.n, 1, x.h, x.w);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int i = 0; i < x.n; ++i)
            for (int k = 0; k < copies_; ++k)
                for (std::size_t p = 0; p < plane; ++p) dx.sample(i)[p] += dy.sample(i)[k * plane + p];
        return dx;
    }

private:
    int copies_;
};

template <typename T>
class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    template <typename L>
    L& add(std::string name, L layer) {
        auto ptr = std::make_unique<L>(std::move(layer));
        L& ref = *ptr;
        names_.push_back(std::move(name));
        layers_.push_back(std::move(ptr));
        return ref;
    }

    std::size_t size() const { return layers_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Layer<T>& layer(std::size_t i) { return *layers_[i]; }
    const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }

    Tensor<T> forward(const Tensor<T>& x) const {
        Tensor<T> cur = x;
        for (const auto& l : layers_) cur = l->forward(cur);
        return cur;
    }

    // acts[0] = x, acts[i + 1] = output of layer i.
    std::vector<Tensor<T>> forward_trace(const Tensor<T>& x) const {
        std::vector<Tensor<T>> acts;
        acts.reserve(layers_.size() + 1);
        acts.push_back(x);
        for (const auto& l : layers_) acts.push_back(l->forward(acts.back()));
        return acts;
    }

    // `grads` is laid out like parameters(); pass an empty span to skip
    // parameter gradients.
    // With input_grad = false the first layer only fills its parameter
    // gradients and an empty tensor is returned.
    Tensor<T> backward(const std::vector<Tensor<T>>& acts, const Tensor<T>& dy, std::span<Tensor<T>> grads,
                       bool input_grad = true) const {
        Tensor<T> g = dy;
        std::size_t offset = parameter_count_tensors();
        for (std::size_t i = layers_.size(); i-- > 0;) {
            const std::size_t np = layers_[i]->params().size();
            offset -= np;
            std::span<Tensor<T>> slot = grads.empty() ? std::span<Tensor<T>>{} : grads.subspan(offset, np);
            if (i == 0 && !input_grad) {
                if (np > 0 && !grads.empty()) layers_[0]->backward_params(acts[0], acts[1], g, slot);
                return {};
            }
            g = layers_[i]->backward(acts[i], acts[i + 1], g, slot);
        }
        return g;
    }

    std::size_t parameter_count_tensors() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l->params().size();
        return n;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_)
            for (const auto& p : l->params()) n += p.size();
        return n;
    }

    std::vector<Tensor<T>*> parameters() {
        std::vector<Tensor<T>*> out;
        for (auto& l : layers_)
            for (auto& p : l->params()) out.push_back(&p);
        return out;
    }

    std::vector<const Tensor<T>*> parameters() const {
        std::vector<const Tensor<T>*> out;
        for (const auto& l : layers_)
            for (const auto& p : l->params()) out.push_back(&p);
        return out;
    }

    std::vector<std::string> parameter_names() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            for (const auto& s : layers_[i]->param_suffixes()) out.push_back(names_[i] + "." + s);
        return out;
    }

    // Zero-filled tensors shaped like parameters().
    std::vector<Tensor<T>> zero_grads() const {
        std::vector<Tensor<T>> g;
        for (const auto& l : layers_)
            for (const auto& p : l->params()) g.emplace_back(p.n, p.c, p.h, p.w);
        return g;
    }

private:
    std::vector<std::string> names_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// He (fan-in) normal initialization for weights, zero biases.
template <typename T>
void he_init(Sequential<T>& net, std::mt19937_64& rng) {
    auto names = net.parameter_names();
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = *params[i];
        if (names[i].ends_with(".bias")) {
            std::fill(p.data.begin(), p.data.end(), T(0));
            continue;
        }
        const double fan_in = static_cast<double>(p.c) * p.h * p.w;
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (auto& v : p.data) v = static_cast<T>(dist(rng));
    }
}

// Copy parameters between networks of identical topology and possibly
// different scalar types.
template <typename To, typename From>
void copy_parameters(Sequential<To>& dst, const Sequential<From>& src) {
    auto d = dst.parameters();
    auto s = src.parameters();
    if (d.size() != s.size()) throw std::invalid_argument("copy_parameters: topology mismatch");
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i]->size() != s[i]->size()) throw std::invalid_argument("copy_parameters: size mismatch");
        for (std::size_t k = 0; k < d[i]->size(); ++k) d[i]->data[k] = static_cast<To>(s[i]->data[k]);
    }
}

}  // namespace seismo::nn
