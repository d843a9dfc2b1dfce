#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bsccs/prior.hpp"
#include "bsccs/rng.hpp"

using namespace bsccs;

namespace {

PriorSpec normal_prior(double variance) {
    PriorSpec p;
    p.kind = PriorKind::normal;
    p.variance = variance;
    return p;
}

PriorSpec laplace_prior(double variance) {
    PriorSpec p;
    p.kind = PriorKind::laplace;
    p.variance = variance;
    return p;
}

// local quadratic likelihood model plus the penalty, used to probe the
// step rules by finite differences
double penalized_model(const PriorSpec& prior, double beta_j, double g,
                       double h, double delta) {
    const double likelihood = g * delta + 0.5 * h * delta * delta;
    const double x = beta_j + delta;
    switch (prior.kind) {
    case PriorKind::none:
        return likelihood;
    case PriorKind::normal:
        return likelihood - 0.5 * x * x / prior.variance;
    case PriorKind::laplace:
        return likelihood - std::abs(x) / prior.laplace_scale();
    }
    return likelihood;
}

} // namespace

TEST_CASE("log densities evaluate to their closed forms") {
    REQUIRE(log_density(normal_prior(1.0), {0.0}) ==
            Catch::Approx(-0.9189385332046727).epsilon(1e-12));
    REQUIRE(log_density(laplace_prior(2.0), {0.5}) ==
            Catch::Approx(-0.5 - std::log(2.0)).epsilon(1e-12));
    REQUIRE(log_density(PriorSpec{}, {3.0, -2.0}) == 0.0);

    // additive over coordinates
    const auto np = normal_prior(0.7);
    REQUIRE(log_density(np, {0.3, -0.4}) ==
            Catch::Approx(log_density(np, {0.3}) + log_density(np, {-0.4}))
                .epsilon(1e-12));
}

TEST_CASE("laplace variance and direct scale parameterizations coincide") {
    PriorSpec by_variance = laplace_prior(2.0); // b = 1
    PriorSpec by_scale;
    by_scale.kind = PriorKind::laplace;
    by_scale.variance = 1.0;
    by_scale.variance_is_laplace_scale = true;

    REQUIRE(by_variance.laplace_scale() == Catch::Approx(1.0).epsilon(1e-15));
    REQUIRE(by_scale.laplace_scale() == 1.0);
    REQUIRE(log_density(by_variance, {0.5}) ==
            Catch::Approx(log_density(by_scale, {0.5})).epsilon(1e-15));
    REQUIRE(penalized_step(by_variance, 0.4, -0.8, -1.5) ==
            Catch::Approx(penalized_step(by_scale, 0.4, -0.8, -1.5))
                .epsilon(1e-15));
}

TEST_CASE("bad variances are rejected, none ignores its variance") {
    REQUIRE_THROWS_AS(log_density(normal_prior(0.0), {0.0}), input_error);
    REQUIRE_THROWS_AS(log_density(normal_prior(-1.0), {0.0}), input_error);
    REQUIRE_THROWS_AS(
        log_density(laplace_prior(std::numeric_limits<double>::infinity()),
                    {0.0}),
        input_error);
    PriorSpec flat;
    flat.variance = -5.0;
    REQUIRE_NOTHROW(validate_prior(flat));
}

TEST_CASE("step examples from the three families") {
    // unpenalized Newton quotient
    REQUIRE(penalized_step(PriorSpec{}, 0.0, 0.5, -0.25) == 2.0);
    // |g| below the laplace threshold: both one-sided trials reject
    REQUIRE(penalized_step(laplace_prior(2.0), 0.0, 0.5, -0.25) == 0.0);
    // ridge shrinkage toward zero
    REQUIRE(penalized_step(normal_prior(1.0), 1.0, 0.0, -1.0) ==
            Catch::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("flat directions") {
    REQUIRE(penalized_step(PriorSpec{}, 0.0, 0.0, 0.0) == 0.0);
    REQUIRE_THROWS_AS(penalized_step(PriorSpec{}, 0.0, 0.5, 0.0),
                      numeric_error);
    // the laplace penalty still acts when the likelihood is flat
    REQUIRE(penalized_step(laplace_prior(2.0), 0.7, 0.5, 0.0) == -0.7);
    REQUIRE(penalized_step(laplace_prior(2.0), 0.0, 0.5, 0.0) == 0.0);
    // positive curvature is a caller bug
    REQUIRE_THROWS_AS(penalized_step(normal_prior(1.0), 0.0, 0.5, 1.0),
                      internal_error);
}

TEST_CASE("laplace sign rule holds against one-sided finite differences") {
    Rng rng(71);
    const double eps = 1e-7;
    for (int trial = 0; trial < 2000; ++trial) {
        const double g = rng.uniform(-4.0, 4.0);
        const double h = -std::exp(rng.uniform(-2.0, 2.0));
        const auto prior = laplace_prior(std::exp(rng.uniform(-2.0, 2.0)));
        const double step = penalized_step(prior, 0.0, g, h);

        // gain per unit length of leaving zero to either side
        const double at_zero = penalized_model(prior, 0.0, g, h, 0.0);
        const double gain_right =
            (penalized_model(prior, 0.0, g, h, eps) - at_zero) / eps;
        const double gain_left =
            (penalized_model(prior, 0.0, g, h, -eps) - at_zero) / eps;

        if (step > 0.0) {
            REQUIRE(gain_right > -1e-5);
        } else if (step < 0.0) {
            REQUIRE(gain_left > -1e-5);
        } else {
            // staying put: neither one-sided direction improves
            REQUIRE(gain_right <= 1e-5);
            REQUIRE(gain_left <= 1e-5);
        }
    }
}

TEST_CASE("laplace steps never cross zero and zeros are bitwise") {
    Rng rng(73);
    for (int trial = 0; trial < 2000; ++trial) {
        double beta = rng.uniform(-2.0, 2.0);
        if (beta == 0.0) {
            beta = 0.25;
        }
        const double g = rng.uniform(-4.0, 4.0);
        const double h = -std::exp(rng.uniform(-2.0, 2.0));
        const auto prior = laplace_prior(std::exp(rng.uniform(-2.0, 2.0)));
        const double step = penalized_step(prior, beta, g, h);
        const double landed = beta + step;
        if (landed != 0.0) {
            REQUIRE((landed > 0.0) == (beta > 0.0));
        }
    }

    // a crossing step gives back exactly -beta, so the sum is exactly 0
    const double beta = 0.3;
    const double step = penalized_step(laplace_prior(2.0), beta, -2.0, -1.0);
    REQUIRE(step == -beta);
    REQUIRE(beta + step == 0.0);
}

TEST_CASE("normal step is the stationary point of the local quadratic") {
    Rng rng(79);
    for (int trial = 0; trial < 2000; ++trial) {
        const double beta = rng.uniform(-3.0, 3.0);
        const double g = rng.uniform(-4.0, 4.0);
        const double h = -std::exp(rng.uniform(-3.0, 2.0));
        const double v = std::exp(rng.uniform(-3.0, 3.0));
        const double step = penalized_step(normal_prior(v), beta, g, h);
        // derivative of the penalized quadratic model at the landing point
        const double residual = g + h * step - (beta + step) / v;
        REQUIRE(std::abs(residual) <
                1e-10 * std::max(1.0, std::abs(g) + std::abs(h * step)));
    }
}
