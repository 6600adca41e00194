#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "seismo/tensor.hpp"

namespace seismo::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // L2 penalty folded into the gradient
};

template <typename T>
class Adam {
public:
    Adam(std::vector<Tensor<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const auto* p : params_) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }

    void step(std::span<const Tensor<T>> grads) {
        if (grads.size() != params_.size()) throw std::invalid_argument("Adam: gradient count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i]->data;
            const auto& g = grads[i].data;
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double gk = static_cast<double>(g[k]) + cfg_.weight_decay * static_cast<double>(p[k]);
                m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
                v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
                const double mhat = m[k] / bc1;
                const double vhat = v[k] / bc2;
                p[k] = static_cast<T>(static_cast<double>(p[k]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

    long steps() const { return t_; }

private:
    std::vector<Tensor<T>*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long t_ = 0;
};

}  // namespace seismo::nn
