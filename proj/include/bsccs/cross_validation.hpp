#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "engine.hpp"
#include "prior.hpp"
#include "rng.hpp"
#include "solver.hpp"
#include "thread_pool.hpp"

namespace bsccs {

/// Thirteen points, log-uniform over [0.001, 10].
inline std::vector<double> default_variance_grid() {
    std::vector<double> grid(13);
    const double lo = std::log(0.001);
    const double hi = std::log(10.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        grid[g] = std::exp(lo + (hi - lo) * static_cast<double>(g) / 12.0);
    }
    return grid;
}

struct CVConfig {
    int folds = 10;
    std::vector<double> variance_grid = default_variance_grid();
    PriorKind prior_kind = PriorKind::laplace;
    bool variance_is_laplace_scale = false;
    std::uint64_t seed = 0;
    SolverConfig solver;

    // Start each grid point from the previous point's solution instead of
    // from zero.  The grid is walked in ascending variance order either
    // way, so warm and cold runs visit identical cells.
    bool warm_start = true;
};

struct CVCell {
    double predictive_ll = -std::numeric_limits<double>::infinity();
    int cycles = 0;
    bool converged = false;
    bool valid = false;
};

struct CVResult {
    std::vector<double> variance_grid;
    std::vector<std::vector<CVCell>> cells; // [grid point][fold]
    std::vector<double> mean_predictive_ll; // NaN where any fold is invalid
    int selected_index = -1;
    double selected_variance = 0.0;
    long total_cycles = 0;
};

/// Shuffles subjects with the seeded generator and deals them round-robin
/// into `folds` lists.  Every subject lands in exactly one fold and fold
/// sizes differ by at most one.
inline std::vector<std::vector<index_t>> kfold_split(const Dataset& ds,
                                                     int folds,
                                                     std::uint64_t seed) {
    if (folds < 2) {
        throw input_error("cross-validation needs at least 2 folds");
    }
    if (folds > ds.num_subjects) {
        throw input_error("more folds than subjects");
    }
    std::vector<index_t> order(static_cast<std::size_t>(ds.num_subjects));
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<index_t>(i);
    }
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t r = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[r]);
    }
    std::vector<std::vector<index_t>> out(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < order.size(); ++i) {
        out[i % static_cast<std::size_t>(folds)].push_back(order[i]);
    }
    return out;
}

/// Conditional log likelihood of held-out subjects at fixed coefficients.
/// Always evaluated in double, whatever precision produced the fit.
inline double predictive_log_likelihood(const std::vector<double>& beta,
                                        const Dataset& heldout) {
    EngineState<double> state = init_state<double>(heldout, beta);
    return log_likelihood(heldout, state);
}

/// K-fold grid search over the prior variance.  Within a fold the grid is
/// walked in ascending order; folds are independent and may run on the
/// pool.  A cell whose fit throws is marked invalid, and any grid point
/// with an invalid cell is excluded from selection.  Ties select the
/// smaller variance.
inline CVResult grid_search_cv(const Dataset& ds,
                               const CVConfig& cfg,
                               ThreadPool* pool = nullptr) {
    if (cfg.variance_grid.empty()) {
        throw input_error("cross-validation grid is empty");
    }
    for (const double v : cfg.variance_grid) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw input_error("cross-validation grid values must be positive");
        }
    }
    validate_config(cfg.solver);

    CVResult out;
    out.variance_grid = cfg.variance_grid;
    std::sort(out.variance_grid.begin(), out.variance_grid.end());
    for (std::size_t g = 1; g < out.variance_grid.size(); ++g) {
        if (out.variance_grid[g] == out.variance_grid[g - 1]) {
            throw input_error("cross-validation grid has a repeated value");
        }
    }
    const std::size_t points = out.variance_grid.size();
    const std::size_t folds = static_cast<std::size_t>(cfg.folds);
    out.cells.assign(points, std::vector<CVCell>(folds));

    const auto fold_subjects = kfold_split(ds, cfg.folds, cfg.seed);

    std::vector<Dataset> train(folds);
    std::vector<Dataset> heldout(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<index_t> held = fold_subjects[f];
        std::sort(held.begin(), held.end());
        std::vector<index_t> rest;
        rest.reserve(static_cast<std::size_t>(ds.num_subjects) - held.size());
        std::size_t next_held = 0;
        for (index_t i = 0; i < ds.num_subjects; ++i) {
            if (next_held < held.size() && held[next_held] == i) {
                ++next_held;
            } else {
                rest.push_back(i);
            }
        }
        train[f] = subset_dataset(ds, rest);
        heldout[f] = subset_dataset(ds, held);
    }

    auto run_fold = [&](int f) {
        const std::size_t fu = static_cast<std::size_t>(f);
        std::vector<double> carried; // last solution, for warm starts
        for (std::size_t g = 0; g < points; ++g) {
            PriorSpec prior;
            prior.kind = cfg.prior_kind;
            prior.variance = out.variance_grid[g];
            prior.variance_is_laplace_scale = cfg.variance_is_laplace_scale;
            CVCell& cell = out.cells[g][fu];
            try {
                const FitResult fitted =
                    fit(train[fu], prior, cfg.solver,
                        cfg.warm_start ? carried : std::vector<double>{});
                cell.cycles = fitted.cycles_run;
                cell.converged = fitted.converged;
                cell.predictive_ll =
                    predictive_log_likelihood(fitted.beta_map, heldout[fu]);
                cell.valid = true;
                if (cfg.warm_start) {
                    carried = fitted.beta_map;
                }
            } catch (const input_error&) {
                throw; // misconfiguration, not a numeric failure of one cell
            } catch (const std::exception&) {
                cell.valid = false;
            }
        }
    };
    if (pool != nullptr && pool->worker_count() > 0) {
        pool->run(cfg.folds, run_fold);
    } else {
        for (int f = 0; f < cfg.folds; ++f) {
            run_fold(f);
        }
    }

    out.mean_predictive_ll.assign(points,
                                  std::numeric_limits<double>::quiet_NaN());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < points; ++g) {
        double total = 0.0;
        bool usable = true;
        for (std::size_t f = 0; f < folds; ++f) {
            const CVCell& cell = out.cells[g][f];
            out.total_cycles += cell.cycles;
            if (!cell.valid) {
                usable = false;
            } else {
                total += cell.predictive_ll;
            }
        }
        if (!usable) {
            continue;
        }
        const double mean = total / static_cast<double>(folds);
        out.mean_predictive_ll[g] = mean;
        // ascending grid plus strict inequality breaks ties downward
        if (mean > best) {
            best = mean;
            out.selected_index = static_cast<int>(g);
        }
    }
    if (out.selected_index < 0) {
        throw convergence_error(
            "cross-validation: every grid point failed in some fold");
    }
    out.selected_variance =
        out.variance_grid[static_cast<std::size_t>(out.selected_index)];
    return out;
}

} // namespace bsccs
