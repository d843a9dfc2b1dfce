#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "prior.hpp"

namespace bsccs {

/// Straight-from-the-definition evaluation of the conditional log
/// likelihood.  Rebuilds each era's exposure list from the columns on
/// every call and shares no state or kernels with the engine; it exists
/// to check the engine, so it must not reuse it.  O(num_eras * num_drugs)
/// per call; keep instances small.
inline double oracle_log_likelihood(const Dataset& ds,
                                    const std::vector<double>& beta) {
    if (beta.size() != static_cast<std::size_t>(ds.num_drugs)) {
        throw input_error("oracle_log_likelihood: coefficient count mismatch");
    }
    std::vector<std::vector<index_t>> drugs_of_row(
        static_cast<std::size_t>(ds.num_eras));
    for (index_t j = 0; j < ds.num_drugs; ++j) {
        for (const index_t k : ds.columns[static_cast<std::size_t>(j)].rows) {
            drugs_of_row[static_cast<std::size_t>(k)].push_back(j);
        }
    }

    double total = 0.0;
    for (index_t i = 0; i < ds.num_subjects; ++i) {
        const index_t lo = ds.subject_offsets[static_cast<std::size_t>(i)];
        const index_t hi = ds.subject_offsets[static_cast<std::size_t>(i) + 1];
        double linear = 0.0;
        double denominator = 0.0;
        for (index_t k = lo; k < hi; ++k) {
            const std::size_t ku = static_cast<std::size_t>(k);
            double xb = 0.0;
            for (const index_t j : drugs_of_row[ku]) {
                xb += beta[static_cast<std::size_t>(j)];
            }
            linear += static_cast<double>(ds.event_counts[ku]) * xb;
            denominator +=
                static_cast<double>(ds.era_lengths[ku]) * std::exp(xb);
        }
        total += linear -
                 static_cast<double>(
                     ds.events_per_subject[static_cast<std::size_t>(i)]) *
                     std::log(denominator);
    }
    return total;
}

/// Central finite difference of the oracle along coordinate j.
inline double oracle_gradient(const Dataset& ds,
                              std::vector<double> beta,
                              index_t j,
                              double step = 1e-5) {
    const std::size_t ju = static_cast<std::size_t>(j);
    const double center = beta[ju];
    beta[ju] = center + step;
    const double above = oracle_log_likelihood(ds, beta);
    beta[ju] = center - step;
    const double below = oracle_log_likelihood(ds, beta);
    return (above - below) / (2.0 * step);
}

/// Central second difference of the oracle along coordinate j.  The
/// default step is wider than the gradient's because the second
/// difference divides by step^2 and would otherwise sit on cancellation
/// noise.
inline double oracle_second_derivative(const Dataset& ds,
                                       std::vector<double> beta,
                                       index_t j,
                                       double step = 1e-4) {
    const std::size_t ju = static_cast<std::size_t>(j);
    const double center = beta[ju];
    const double at = oracle_log_likelihood(ds, beta);
    beta[ju] = center + step;
    const double above = oracle_log_likelihood(ds, beta);
    beta[ju] = center - step;
    const double below = oracle_log_likelihood(ds, beta);
    return (above - 2.0 * at + below) / (step * step);
}

namespace detail {

/// Bracket-then-golden-section maximizer for a concave function of one
/// variable.  Never touches derivatives, which is the point: it cannot
/// inherit a bug from the gradient code it is used to check.
inline double maximize_concave_1d(const std::function<double(double)>& f,
                                  double x0,
                                  double tol) {
    double h = 1.0;
    double a = x0 - h;
    double m = x0;
    double c = x0 + h;
    double fa = f(a);
    double fm = f(m);
    double fc = f(c);
    int guard = 0;
    while (fc > fm) {
        a = m;
        m = c;
        fm = fc;
        h *= 2.0;
        c = m + h;
        fc = f(c);
        if (++guard > 200) {
            throw numeric_error("reference maximizer: no bracket to the right "
                                "(objective may be unbounded)");
        }
    }
    while (fa > fm) {
        c = m;
        m = a;
        fm = fa;
        h *= 2.0;
        a = m - h;
        fa = f(a);
        if (++guard > 400) {
            throw numeric_error("reference maximizer: no bracket to the left "
                                "(objective may be unbounded)");
        }
    }

    constexpr double invphi = 0.6180339887498949;
    constexpr double invphi2 = 0.3819660112501051;
    double lo = a;
    double hi = c;
    double x1 = lo + invphi2 * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + invphi2 * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Slow, derivative-free maximizer of the penalized objective: coordinate
/// sweeps where each one-dimensional problem is solved by bracketing and
/// golden-section search on the oracle.  Guarded to tiny instances; this
/// is a reference for tests, not a solver.
///
/// Sweeps stop on coordinate-wise movement < tol.  Evaluation noise floors
/// the movement a derivative-free line search can reach at about
/// sqrt(eps_f / curvature), so flat directions can wobble above a tight
/// tol forever; three consecutive sweeps with no measurable objective gain
/// therefore also count as settled, and the best visited point is
/// returned.
inline std::vector<double> reference_fit(const Dataset& ds,
                                         const PriorSpec& prior,
                                         double tol = 1e-8) {
    if (ds.num_subjects > 200 || ds.num_drugs > 10) {
        throw input_error("reference_fit is restricted to tiny instances");
    }
    validate_prior(prior);
    if (!(tol > 0.0)) {
        throw input_error("reference_fit: tol must be positive");
    }

    std::vector<double> beta(static_cast<std::size_t>(ds.num_drugs), 0.0);
    const double line_tol = tol * 0.01;
    auto value = [&](const std::vector<double>& b) {
        return oracle_log_likelihood(ds, b) + log_density(prior, b);
    };
    std::vector<double> best = beta;
    double best_value = value(beta);
    double previous_value = best_value;
    int stalled = 0;
    for (int sweep = 0; sweep < 20000; ++sweep) {
        double moved = 0.0;
        for (index_t j = 0; j < ds.num_drugs; ++j) {
            const std::size_t ju = static_cast<std::size_t>(j);
            auto objective = [&](double v) {
                std::vector<double> trial = beta;
                trial[ju] = v;
                return value(trial);
            };
            const double updated =
                detail::maximize_concave_1d(objective, beta[ju], line_tol);
            moved = std::max(moved, std::abs(updated - beta[ju]));
            beta[ju] = updated;
        }
        const double now = value(beta);
        if (now > best_value) {
            best_value = now;
            best = beta;
        }
        if (moved < tol) {
            return beta;
        }
        stalled = now - previous_value < 1e-12 * (1.0 + std::abs(now))
                      ? stalled + 1
                      : 0;
        previous_value = now;
        if (stalled >= 3) {
            return best;
        }
    }
    throw numeric_error("reference_fit: coordinate sweeps did not settle");
}

} // namespace bsccs
