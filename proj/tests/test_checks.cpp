#include <doctest.h>

#include "checks.hpp"

using namespace seismo;

namespace {

void expect_all(const checks::Results& r) {
    for (const auto& x : r) {
        INFO(x.name << ": " << x.detail);
        CHECK(x.pass);
    }
}

}  // namespace

TEST_CASE("loss terms and layers agree with direct formulas") { expect_all(checks::component_oracles()); }

TEST_CASE("closed-form identities of KLD, Gram and regularizer") { expect_all(checks::closed_forms()); }

TEST_CASE("latent interpolation endpoints") { expect_all(checks::interpolation_identities()); }

TEST_CASE("metric oracles") { expect_all(checks::metrics()); }

TEST_CASE("max_relative and gradient_error on a quadratic") {
    const std::vector<double> a{1.0, 2.0}, b{1.0, 2.5};
    CHECK(checks::max_relative(a, b) == doctest::Approx(0.2));
    CHECK(checks::max_relative(a, a) == 0.0);

    Tensor<double> p(1, 1, 1, 3);
    p.data = {0.5, -1.0, 2.0};
    auto loss = [&] {
        double s = 0.0;
        for (double v : p.data) s += v * v * v;
        return s;
    };
    std::vector<double> g;
    for (double v : p.data) g.push_back(3.0 * v * v);
    CHECK(checks::gradient_error({&p}, loss, g) < 1e-8);
    g[1] += 1.0;
    CHECK(checks::gradient_error({&p}, loss, g) > 1e-2);
}
