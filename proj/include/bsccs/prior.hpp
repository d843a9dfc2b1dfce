#pragma once

#include <cmath>
#include <vector>

#include "common.hpp"

namespace bsccs {

enum class PriorKind { none, normal, laplace };

/// Independent, identical prior on every coefficient.  `variance` is the
/// prior variance sigma^2 for both families; the Laplace density with
/// variance sigma^2 has scale b = sqrt(sigma^2 / 2).  Tooling that quotes
/// Laplace hyperparameters as the scale itself can set
/// `variance_is_laplace_scale` and pass b directly.
struct PriorSpec {
    PriorKind kind = PriorKind::none;
    double variance = 1.0;
    bool variance_is_laplace_scale = false;

    double laplace_scale() const {
        return variance_is_laplace_scale ? variance : std::sqrt(variance / 2.0);
    }
};

inline void validate_prior(const PriorSpec& prior) {
    if (prior.kind != PriorKind::none &&
        !(prior.variance > 0.0 && std::isfinite(prior.variance))) {
        throw input_error("prior variance must be positive and finite");
    }
}

/// Log prior density at beta, summed over coordinates.  Zero for the
/// improper flat prior.
inline double log_density(const PriorSpec& prior, const std::vector<double>& beta) {
    validate_prior(prior);
    switch (prior.kind) {
    case PriorKind::none:
        return 0.0;
    case PriorKind::normal: {
        const double v = prior.variance;
        double ss = 0.0;
        for (const double b : beta) {
            ss += b * b;
        }
        const double n = static_cast<double>(beta.size());
        return -0.5 * ss / v - 0.5 * n * std::log(6.283185307179586 * v);
    }
    case PriorKind::laplace: {
        const double b = prior.laplace_scale();
        double abs_sum = 0.0;
        for (const double x : beta) {
            abs_sum += std::abs(x);
        }
        const double n = static_cast<double>(beta.size());
        return -abs_sum / b - n * std::log(2.0 * b);
    }
    }
    throw internal_error("log_density: unhandled prior kind");
}

/// One-dimensional Newton step on the penalized objective given the
/// likelihood gradient g and Hessian diagonal h (h <= 0) at the current
/// coefficient value.
///
/// The Laplace penalty is not differentiable at zero, so that family
/// follows the two-sided rule: away from zero, step against the
/// penalty's subgradient but give back exactly -beta_j if the step would
/// cross zero; at zero, try each one-sided penalty and keep a step only
/// if it leaves in the direction it assumed, else stay put.
inline double penalized_step(const PriorSpec& prior, double beta_j, double g, double h) {
    if (h > 0.0) {
        throw internal_error("penalized_step: positive likelihood curvature");
    }
    switch (prior.kind) {
    case PriorKind::none:
        if (h == 0.0) {
            if (g == 0.0) {
                // flat and stationary (a column constant within every
                // subject, before rounding enters): nothing to move
                return 0.0;
            }
            throw numeric_error(
                "undefined Newton step: flat likelihood direction with no prior");
        }
        return -g / h;
    case PriorKind::normal: {
        const double v = prior.variance;
        return -(g - beta_j / v) / (h - 1.0 / v);
    }
    case PriorKind::laplace: {
        const double b = prior.laplace_scale();
        if (beta_j != 0.0) {
            if (h == 0.0) {
                // flat likelihood: the penalty alone drives it to zero
                return -beta_j;
            }
            const double sign = beta_j > 0.0 ? 1.0 : -1.0;
            const double step = -(g - sign / b) / h;
            const double landed = beta_j + step;
            if ((beta_j > 0.0 && landed < 0.0) || (beta_j < 0.0 && landed > 0.0)) {
                return -beta_j; // zero is the constrained optimum this cycle
            }
            return step;
        }
        if (h == 0.0) {
            return 0.0; // both one-sided trials reject in the flat limit
        }
        double step = -(g - 1.0 / b) / h;
        if (step > 0.0) {
            return step;
        }
        step = -(g + 1.0 / b) / h;
        if (step < 0.0) {
            return step;
        }
        return 0.0;
    }
    }
    throw internal_error("penalized_step: unhandled prior kind");
}

} // namespace bsccs
