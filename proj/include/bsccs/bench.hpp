#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "prior.hpp"
#include "solver.hpp"
#include "thread_pool.hpp"

namespace bsccs {

struct BenchRow {
    std::string label;
    double seconds = 0.0;
    int cycles = 0;
    bool converged = false;
    std::vector<double> beta;
};

struct BenchReport {
    std::vector<BenchRow> rows; // dense, sparse, parallel
    double dense_over_sparse = 0.0;    // wall-time ratio
    double parallel_over_sparse = 0.0;
    double gap_dense_sparse = 0.0;     // max |beta difference|
    double gap_parallel_sparse = 0.0;
};

namespace detail {

inline double infinity_gap(const std::vector<double>& a,
                           const std::vector<double>& b) {
    double gap = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        gap = std::max(gap, std::abs(a[j] - b[j]));
    }
    return gap;
}

template <typename Fn>
BenchRow time_route(const std::string& label, Fn&& fn) {
    const auto started = std::chrono::steady_clock::now();
    FitResult result = fn();
    const auto finished = std::chrono::steady_clock::now();
    BenchRow row;
    row.label = label;
    row.seconds = std::chrono::duration<double>(finished - started).count();
    row.cycles = result.cycles_run;
    row.converged = result.converged;
    row.beta = std::move(result.beta_map);
    return row;
}

} // namespace detail

/// Times the same fit three ways: the dense update path, the sparse path
/// serially, and the sparse path with partitioned reductions on a worker
/// pool.  All three must land on the same mode; the report carries the
/// coefficient gaps so callers can gate on them.
inline BenchReport run_bench(const Dataset& ds,
                             const PriorSpec& prior,
                             const SolverConfig& base,
                             int partitions,
                             int workers) {
    BenchReport report;

    SolverConfig dense_cfg = base;
    dense_cfg.path = UpdatePath::dense;
    dense_cfg.partitions = 1;
    report.rows.push_back(detail::time_route(
        "dense", [&] { return fit(ds, prior, dense_cfg); }));

    SolverConfig sparse_cfg = base;
    sparse_cfg.path = UpdatePath::sparse;
    sparse_cfg.partitions = 1;
    report.rows.push_back(detail::time_route(
        "sparse", [&] { return fit(ds, prior, sparse_cfg); }));

    SolverConfig parallel_cfg = base;
    parallel_cfg.path = UpdatePath::sparse;
    parallel_cfg.partitions = partitions;
    ThreadPool pool(workers);
    report.rows.push_back(detail::time_route(
        "parallel", [&] { return fit(ds, prior, parallel_cfg, {}, &pool); }));

    const BenchRow& dense = report.rows[0];
    const BenchRow& sparse = report.rows[1];
    const BenchRow& parallel = report.rows[2];
    report.dense_over_sparse = dense.seconds / sparse.seconds;
    report.parallel_over_sparse = parallel.seconds / sparse.seconds;
    report.gap_dense_sparse = detail::infinity_gap(dense.beta, sparse.beta);
    report.gap_parallel_sparse = detail::infinity_gap(parallel.beta, sparse.beta);
    return report;
}

} // namespace bsccs
