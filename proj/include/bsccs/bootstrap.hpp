#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "prior.hpp"
#include "rng.hpp"
#include "solver.hpp"
#include "thread_pool.hpp"

namespace bsccs {

struct BootstrapConfig {
    int replicates = 200;
    double level = 0.95; // two-sided interval coverage
    std::uint64_t seed = 0;
    PriorSpec prior;
    SolverConfig solver;

    // Start every replicate from the full-data solution.  Replicate modes
    // sit near it, so this mostly saves cycles; set false to measure the
    // cost of cold starts.
    bool warm_start = true;
};

struct BootstrapResult {
    std::vector<double> beta_full; // full-data posterior mode
    bool full_converged = false;

    std::vector<double> lower;  // per drug, percentile interval
    std::vector<double> upper;
    std::vector<double> p_hat;  // share of used replicates with a nonzero estimate

    int replicates = 0;     // requested
    int used = 0;           // converged replicates, the denominator of p_hat
    int non_converged = 0;
};

/// One resample of subject indices, uniform with replacement, same size
/// as the dataset.
inline std::vector<index_t> resample(const Dataset& ds, Rng& rng) {
    std::vector<index_t> out(static_cast<std::size_t>(ds.num_subjects));
    for (auto& i : out) {
        i = static_cast<index_t>(
            rng.below(static_cast<std::uint64_t>(ds.num_subjects)));
    }
    return out;
}

namespace detail {

/// Percentile by linear interpolation between order statistics.
inline double percentile(const std::vector<double>& sorted, double q) {
    const std::size_t m = sorted.size();
    if (m == 1) {
        return sorted[0];
    }
    const double pos = q * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= m) {
        return sorted[m - 1];
    }
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

} // namespace detail

/// Case resampling at fixed hyperparameters: refit on `replicates`
/// resampled datasets, then report per-drug percentile intervals and the
/// share of replicates keeping each drug active.  Replicate r draws its
/// indices from substream r+1 of the seed, so results do not depend on
/// the pool or on scheduling.  Replicates that hit the cycle cap are
/// excluded from the summaries and counted.
inline BootstrapResult run_bootstrap(const Dataset& ds,
                                     const BootstrapConfig& cfg,
                                     ThreadPool* pool = nullptr) {
    if (cfg.replicates < 1) {
        throw input_error("bootstrap: need at least one replicate");
    }
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) {
        throw input_error("bootstrap: interval level must lie in (0, 1)");
    }
    validate_config(cfg.solver);
    validate_prior(cfg.prior);

    BootstrapResult out;
    out.replicates = cfg.replicates;

    const FitResult full = fit(ds, cfg.prior, cfg.solver);
    out.beta_full = full.beta_map;
    out.full_converged = full.converged;

    const std::size_t drugs = static_cast<std::size_t>(ds.num_drugs);
    const std::size_t reps = static_cast<std::size_t>(cfg.replicates);
    std::vector<std::vector<double>> estimates(reps);
    std::vector<char> converged(reps, 0);

    auto run_replicate = [&](int r) {
        Rng rng(cfg.seed, static_cast<std::uint64_t>(r) + 1);
        const Dataset resampled = subset_dataset(ds, resample(ds, rng));
        const FitResult fitted =
            fit(resampled, cfg.prior, cfg.solver,
                cfg.warm_start ? out.beta_full : std::vector<double>{});
        const std::size_t ru = static_cast<std::size_t>(r);
        estimates[ru] = fitted.beta_map;
        converged[ru] = fitted.converged ? 1 : 0;
    };
    if (pool != nullptr && pool->worker_count() > 0) {
        pool->run(cfg.replicates, run_replicate);
    } else {
        for (int r = 0; r < cfg.replicates; ++r) {
            run_replicate(r);
        }
    }

    for (std::size_t r = 0; r < reps; ++r) {
        if (converged[r]) {
            ++out.used;
        } else {
            ++out.non_converged;
        }
    }
    if (out.used == 0) {
        throw convergence_error("bootstrap: no replicate converged");
    }

    out.lower.resize(drugs);
    out.upper.resize(drugs);
    out.p_hat.resize(drugs);
    const double tail = (1.0 - cfg.level) / 2.0;
    std::vector<double> column;
    column.reserve(static_cast<std::size_t>(out.used));
    for (std::size_t j = 0; j < drugs; ++j) {
        column.clear();
        int nonzero = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            if (!converged[r]) {
                continue;
            }
            const double b = estimates[r][j];
            column.push_back(b);
            if (b != 0.0) {
                ++nonzero;
            }
        }
        std::sort(column.begin(), column.end());
        out.lower[j] = detail::percentile(column, tail);
        out.upper[j] = detail::percentile(column, 1.0 - tail);
        out.p_hat[j] =
            static_cast<double>(nonzero) / static_cast<double>(out.used);
    }
    return out;
}

struct RankedDrug {
    std::string drug_id;
    double beta = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double p_hat = 0.0;
};

/// Drugs kept in more than `min_p_hat` of the replicates, strongest
/// full-data estimate first; ties fall back to the label so the order is
/// total.
inline std::vector<RankedDrug> report_ranked_intervals(
    const Dataset& ds, const BootstrapResult& result, double min_p_hat = 0.5) {
    std::vector<RankedDrug> rows;
    const std::size_t drugs = static_cast<std::size_t>(ds.num_drugs);
    for (std::size_t j = 0; j < drugs; ++j) {
        if (result.p_hat[j] > min_p_hat) {
            RankedDrug row;
            row.drug_id = ds.drug_ids.empty() ? "drug_" + std::to_string(j)
                                              : ds.drug_ids[j];
            row.beta = result.beta_full[j];
            row.lower = result.lower[j];
            row.upper = result.upper[j];
            row.p_hat = result.p_hat[j];
            rows.push_back(std::move(row));
        }
    }
    std::sort(rows.begin(), rows.end(), [](const RankedDrug& a, const RankedDrug& b) {
        if (a.beta != b.beta) {
            return a.beta > b.beta;
        }
        return a.drug_id < b.drug_id;
    });
    return rows;
}

} // namespace bsccs
