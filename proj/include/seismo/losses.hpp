#pragma once

// Loss terms of the generative and inversion models. Each function returns
// the scalar loss and, when a gradient pointer is supplied, writes the
// gradient with respect to the prediction.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "seismo/featureext.hpp"
#include "seismo/tensor.hpp"

namespace seismo::losses {

// Mean over batch and pixels of (x - xhat)^2.
template <typename T>
double mse(const Tensor<T>& truth, const Tensor<T>& pred, Tensor<T>* grad_pred = nullptr) {
    require_same_shape(truth, pred, "mse");
    if (truth.empty()) throw std::invalid_argument("mse: empty batch");
    const double scale = 1.0 / static_cast<double>(truth.size());
    double acc = 0.0;
    if (grad_pred) *grad_pred = Tensor<T>(pred.n, pred.c, pred.h, pred.w);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(truth.data[i]);
        acc += d * d;
        if (grad_pred) grad_pred->data[i] = static_cast<T>(2.0 * d * scale);
    }
    return acc * scale;
}

// Sum over batch and pixels of (x - xhat)^2.
template <typename T>
double sse(const Tensor<T>& truth, const Tensor<T>& pred, Tensor<T>* grad_pred = nullptr) {
    require_same_shape(truth, pred, "sse");
    if (truth.empty()) throw std::invalid_argument("sse: empty batch");
    double acc = 0.0;
    if (grad_pred) *grad_pred = Tensor<T>(pred.n, pred.c, pred.h, pred.w);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(truth.data[i]);
        acc += d * d;
        if (grad_pred) grad_pred->data[i] = static_cast<T>(2.0 * d);
    }
    return acc;
}

// Mean over batch and pixels of |x - xhat|.
template <typename T>
double mae(const Tensor<T>& truth, const Tensor<T>& pred, Tensor<T>* grad_pred = nullptr) {
    require_same_shape(truth, pred, "mae");
    if (truth.empty()) throw std::invalid_argument("mae: empty batch");
    const double scale = 1.0 / static_cast<double>(truth.size());
    double acc = 0.0;
    if (grad_pred) *grad_pred = Tensor<T>(pred.n, pred.c, pred.h, pred.w);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(truth.data[i]);
        acc += std::abs(d);
        if (grad_pred) grad_pred->data[i] = static_cast<T>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * scale);
    }
    return acc * scale;
}

// z = mu + exp(log_var / 2) * eps.
template <typename T>
std::vector<T> reparameterize(std::span<const T> mu, std::span<const T> log_var, std::span<const T> eps) {
    if (mu.size() != log_var.size() || mu.size() != eps.size())
        throw std::invalid_argument("reparameterize: length mismatch");
    std::vector<T> z(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(log_var[i] / T(2)) * eps[i];
    return z;
}

// KL(N(mu, exp(log_var)) || N(0, I)) = 0.5 * sum(mu^2 + exp(log_var) - 1 - log_var).
template <typename T>
double kld(std::span<const T> mu, std::span<const T> log_var, std::span<T> grad_mu = {},
           std::span<T> grad_log_var = {}) {
    if (mu.size() != log_var.size()) throw std::invalid_argument("kld: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double m = mu[i], v = log_var[i];
        acc += 0.5 * (m * m + std::exp(v) - 1.0 - v);
        if (!grad_mu.empty()) grad_mu[i] += static_cast<T>(m);
        if (!grad_log_var.empty()) grad_log_var[i] += static_cast<T>(0.5 * (std::exp(v) - 1.0));
    }
    return acc;
}

// G_ij = sum_k F_ik F_jk for a feature map given as rows = channels, cols = positions.
template <typename T>
Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> gram(std::span<const T> features, int channels, int positions) {
    if (channels < 1 || positions < 1) throw std::invalid_argument("gram: empty feature map");
    if (features.size() != static_cast<std::size_t>(channels) * positions)
        throw std::invalid_argument("gram: size mismatch");
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> f(features.data(), channels,
                                                                                          positions);
    const Eigen::MatrixXd fd = f.template cast<double>();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(channels, channels);
    g.selfadjointView<Eigen::Lower>().rankUpdate(fd);
    return g.selfadjointView<Eigen::Lower>();
}

inline double perception_weight(int channels, long positions) {
    const double n = channels, m = static_cast<double>(positions);
    return 1.0 / (4.0 * n * n * m * m);
}

// sum_l lambda_l sum_ij (G^l_ij - A^l_ij)^2, G from `truth`, A from `pred`,
// summed over the batch.
template <typename T>
double perception_loss(const featureext::FeatureExtractor<T>& extractor, const Tensor<T>& truth, const Tensor<T>& pred,
                       featureext::LayerSelection layers, Tensor<T>* grad_pred = nullptr,
                       std::vector<double>* per_layer = nullptr) {
    require_same_shape(truth, pred, "perception_loss");
    const int blocks = featureext::block_count(layers);
    const auto f_true = extractor.features(truth, blocks);
    typename featureext::FeatureExtractor<T>::Trace trace;
    const auto f_pred = extractor.features(pred, blocks, grad_pred ? &trace : nullptr);

    double total = 0.0;
    if (per_layer) per_layer->assign(blocks, 0.0);
    std::vector<Tensor<T>> grads;
    for (int l = 0; l < blocks; ++l) {
        const auto& ft = f_true[l];
        const auto& fp = f_pred[l];
        const int n_l = ft.c;
        const long m_l = static_cast<long>(ft.h) * ft.w;
        const double lambda = perception_weight(n_l, m_l);
        if (grad_pred) grads.emplace_back(fp.n, fp.c, fp.h, fp.w);
        for (int i = 0; i < ft.n; ++i) {
            const auto g = gram<T>(ft.sample(i), n_l, static_cast<int>(m_l));
            const auto a = gram<T>(fp.sample(i), n_l, static_cast<int>(m_l));
            const Eigen::MatrixXd diff = g - a;
            const double term = lambda * diff.squaredNorm();
            total += term;
            if (per_layer) (*per_layer)[l] += term;
            if (grad_pred) {
                // d/dF of lambda * ||G - F F^T||^2 = -4 lambda (G - A) F, using symmetry of G - A.
                Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> f(
                    fp.sample(i).data(), n_l, m_l);
                const Eigen::MatrixXd dF = -4.0 * lambda * diff * f.template cast<double>();
                auto dst = grads.back().sample(i);
                for (int r = 0; r < n_l; ++r)
                    for (long c = 0; c < m_l; ++c) dst[r * m_l + c] = static_cast<T>(dF(r, c));
            }
        }
    }
    if (grad_pred) *grad_pred = extractor.backward(trace, grads);
    return total;
}

// || (x_t1 - x_t2) - (xhat_t1 - xhat_t2) ||_1 summed over pixels (and batch).
// Gradients are with respect to xhat_t1 and xhat_t2.
template <typename T>
double temporal_reg(const Tensor<T>& x_t1, const Tensor<T>& x_t2, const Tensor<T>& xhat_t1, const Tensor<T>& xhat_t2,
                    Tensor<T>* grad_t1 = nullptr, Tensor<T>* grad_t2 = nullptr) {
    require_same_shape(x_t1, x_t2, "temporal_reg");
    require_same_shape(x_t1, xhat_t1, "temporal_reg");
    require_same_shape(x_t1, xhat_t2, "temporal_reg");
    if (grad_t1) *grad_t1 = Tensor<T>(x_t1.n, x_t1.c, x_t1.h, x_t1.w);
    if (grad_t2) *grad_t2 = Tensor<T>(x_t1.n, x_t1.c, x_t1.h, x_t1.w);
    double acc = 0.0;
    for (std::size_t i = 0; i < x_t1.size(); ++i) {
        const double r = (static_cast<double>(x_t1.data[i]) - static_cast<double>(x_t2.data[i])) -
                         (static_cast<double>(xhat_t1.data[i]) - static_cast<double>(xhat_t2.data[i]));
        acc += std::abs(r);
        const double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        if (grad_t1) grad_t1->data[i] = static_cast<T>(-s);
        if (grad_t2) grad_t2->data[i] = static_cast<T>(s);
    }
    return acc;
}

}  // namespace seismo::losses
