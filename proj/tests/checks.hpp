#pragma once

// Independent-oracle checks shared by the unit tests and the acceptance
// binary. Each returns named results with the measured error in `detail`.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seismo/tensor.hpp"

namespace seismo::checks {

struct Result {
    std::string name;
    bool pass = false;
    std::string detail;
};

using Results = std::vector<Result>;

bool all_pass(const Results& r);
std::string describe_failures(const Results& r);

// max |a - b| / max |b| (0 when both are zero).
double max_relative(std::span<const double> a, std::span<const double> b);
double scalar_relative(double a, double b);

// Central differences of `loss` over every element of `params`; compared to
// `analytic` (flattened in the same order) by ||a - fd|| / max(||a||, ||fd||).
double gradient_error(const std::vector<Tensor<double>*>& params, const std::function<double()>& loss,
                      const std::vector<double>& analytic, double h = 1e-6);

Results gradient_suite();            // five training losses on tiny networks
Results component_oracles();         // loss terms and layers against direct formulas
Results closed_forms();              // KLD, Gram, perception, temporal regularizer identities
Results interpolation_identities();  // latent interpolation endpoints
Results wave_solver();               // arrival time, reciprocity, refinement order, CFL guard
Results metrics();                   // SSIM, MAE, Kz Parseval, box statistics

}  // namespace seismo::checks
