#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "engine.hpp"
#include "prior.hpp"
#include "rng.hpp"
#include "thread_pool.hpp"

namespace bsccs {

enum class ConvergenceMode { raw_sum, normalized };
enum class UpdatePath { sparse, dense };

struct SolverConfig {
    double epsilon = 0.0005;
    int max_cycles = 1000;
    double trust_init = 1.0;
    ConvergenceMode convergence = ConvergenceMode::raw_sum;
    Precision precision = Precision::Double;
    UpdatePath path = UpdatePath::sparse;

    // Chunk count for the partitioned reductions.  Fixed by configuration,
    // not by thread availability, so the arithmetic (and hence the fit) is
    // reproducible for a given value whether or not a pool is supplied.
    int partitions = 1;

    // Full O(num_eras) rebuild cadence, in cycles; sheds incremental
    // rounding drift.  A rebuild also always precedes the final report.
    int dense_refresh_interval = 50;

    // Visit coordinates in a freshly shuffled order each cycle instead of
    // ascending index order.
    bool random_cycle = false;
    std::uint64_t cycle_seed = 0;

    // Columns below this many nonzeros are reduced serially even when a
    // pool is available; chunking overhead swamps the win on small columns.
    std::size_t min_parallel_nnz = 4096;
};

inline void validate_config(const SolverConfig& cfg) {
    if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) {
        throw input_error("solver: epsilon must be positive and finite");
    }
    if (cfg.max_cycles < 1) {
        throw input_error("solver: max_cycles must be at least 1");
    }
    if (!(cfg.trust_init > 0.0) || !std::isfinite(cfg.trust_init)) {
        throw input_error("solver: trust region width must be positive and finite");
    }
    if (cfg.partitions < 1) {
        throw input_error("solver: partitions must be at least 1");
    }
    if (cfg.dense_refresh_interval < 1) {
        throw input_error("solver: dense refresh interval must be at least 1");
    }
}

struct FitResult {
    std::vector<double> beta_map;
    double log_posterior = -std::numeric_limits<double>::infinity();
    int cycles_run = 0;
    bool converged = false;
    double final_criterion = std::numeric_limits<double>::infinity();
};

/// Per-fit bookkeeping that survives across cycles: trust region widths,
/// the criterion snapshot, workspaces, and the optional shuffle order.
template <typename RealType>
struct SolverState {
    explicit SolverState(const Dataset& ds, const SolverConfig& cfg)
        : trust(static_cast<std::size_t>(ds.num_drugs), cfg.trust_init),
          order(static_cast<std::size_t>(ds.num_drugs)),
          order_rng(cfg.cycle_seed) {
        for (std::size_t j = 0; j < order.size(); ++j) {
            order[j] = static_cast<index_t>(j);
        }
    }

    int cycle = 0;
    std::vector<double> trust;
    std::vector<index_t> order;
    std::vector<RealType> xbeta_snapshot;
    std::vector<RealType> dense_scratch;
    Rng order_rng;
};

/// One full pass over the coordinates.  Each coordinate gets the fused
/// gradient/Hessian at the current state, a penalized Newton step clamped
/// to its trust radius, and an immediate state update; the radius then
/// adapts to the clamped step.  Returns the cycle's convergence
/// criterion: the total absolute change of the linear predictor, divided
/// by (1 + its total magnitude) in normalized mode.
template <typename RealType>
double run_cycle(const Dataset& ds,
                 EngineState<RealType>& state,
                 SolverState<RealType>& solver,
                 const PriorSpec& prior,
                 const SolverConfig& cfg,
                 ThreadPool* pool = nullptr) {
    solver.xbeta_snapshot = state.xbeta;
    if (cfg.random_cycle) {
        for (std::size_t j = solver.order.size(); j > 1; --j) {
            const std::size_t r = static_cast<std::size_t>(solver.order_rng.below(j));
            std::swap(solver.order[j - 1], solver.order[r]);
        }
    }

    for (const index_t j : solver.order) {
        const std::size_t ju = static_cast<std::size_t>(j);
        const auto& col = ds.columns[ju];
        if (col.rows.empty() && state.beta[ju] == RealType(0)) {
            continue; // nothing to measure and nothing the prior can move
        }

        GradHess gh;
        if (cfg.path == UpdatePath::dense) {
            gh = fused_grad_hess_dense(ds, state, j, solver.dense_scratch);
        } else {
            gh = parallel_fused_grad_hess(ds, state, j, cfg.partitions, pool,
                                          cfg.min_parallel_nnz);
        }

        const double unbounded =
            penalized_step(prior, static_cast<double>(state.beta[ju]),
                           gh.gradient, gh.hessian);
        const double radius = solver.trust[ju];
        const double delta = std::clamp(unbounded, -radius, radius);
        if (delta != 0.0) {
            if (cfg.path == UpdatePath::dense) {
                // dense mode refreshes the whole predictor state after
                // every accepted step instead of patching the column
                state.beta[ju] += static_cast<RealType>(delta);
                for (const index_t k : col.rows) {
                    state.xbeta[static_cast<std::size_t>(k)] +=
                        static_cast<RealType>(delta);
                }
                detail::refresh_from_xbeta(ds, state);
            } else {
                sparse_delta_update(ds, state, j, delta);
            }
        }
        solver.trust[ju] = std::max(2.0 * std::abs(delta), radius / 2.0);
    }
    ++solver.cycle;

    double change = 0.0;
    double magnitude = 0.0;
    for (std::size_t k = 0; k < state.xbeta.size(); ++k) {
        change += std::abs(static_cast<double>(state.xbeta[k]) -
                           static_cast<double>(solver.xbeta_snapshot[k]));
        if (cfg.convergence == ConvergenceMode::normalized) {
            magnitude += std::abs(static_cast<double>(state.xbeta[k]));
        }
    }
    return cfg.convergence == ConvergenceMode::raw_sum
               ? change
               : change / (1.0 + magnitude);
}

namespace detail {

template <typename RealType>
FitResult fit_impl(const Dataset& ds,
                   const PriorSpec& prior,
                   const SolverConfig& cfg,
                   const std::vector<double>& init_beta,
                   ThreadPool* pool) {
    EngineState<RealType> state = init_state<RealType>(ds, init_beta);
    SolverState<RealType> solver(ds, cfg);

    FitResult out;
    while (out.cycles_run < cfg.max_cycles) {
        out.final_criterion = run_cycle(ds, state, solver, prior, cfg, pool);
        ++out.cycles_run;
        if (out.final_criterion <= cfg.epsilon) {
            out.converged = true;
            break;
        }
        if (out.cycles_run % cfg.dense_refresh_interval == 0) {
            dense_recompute(ds, state);
        }
    }

    dense_recompute(ds, state); // report from a clean rebuild
    out.beta_map.resize(state.beta.size());
    for (std::size_t j = 0; j < state.beta.size(); ++j) {
        out.beta_map[j] = static_cast<double>(state.beta[j]);
    }
    out.log_posterior = log_likelihood(ds, state) + log_density(prior, out.beta_map);
    return out;
}

} // namespace detail

/// Cyclic coordinate descent from `init_beta` (zeros when empty) to the
/// posterior mode.  `pool` only affects wall time; all arithmetic is
/// pinned by cfg.partitions.
inline FitResult fit(const Dataset& ds,
                     const PriorSpec& prior,
                     const SolverConfig& cfg = {},
                     const std::vector<double>& init_beta = {},
                     ThreadPool* pool = nullptr) {
    validate_config(cfg);
    validate_prior(prior);
    if (ds.num_subjects == 0) {
        throw input_error("fit: dataset has no subjects");
    }
    if (cfg.precision == Precision::Single) {
        return detail::fit_impl<float>(ds, prior, cfg, init_beta, pool);
    }
    return detail::fit_impl<double>(ds, prior, cfg, init_beta, pool);
}

} // namespace bsccs
