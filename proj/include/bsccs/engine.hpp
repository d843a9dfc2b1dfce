#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "thread_pool.hpp"

namespace bsccs {

/// Bound on |x'beta| beyond which exp() is unsafe for the element type.
template <typename RealType>
struct xbeta_bound;

template <>
struct xbeta_bound<double> {
    static constexpr double value = 700.0;
};

template <>
struct xbeta_bound<float> {
    static constexpr float value = 80.0f;
};

/// Mutable per-fit state.  The three derived vectors are maintained
/// incrementally by the sparse updates and rebuilt from scratch by
/// dense_recompute; everything is consistent with `beta` between calls.
///   xbeta[k]        = x'_k beta
///   l_exp_xbeta[k]  = l_k exp(x'_k beta)
///   denominators[i] = sum of l_exp_xbeta over the rows of subject i
template <typename RealType>
struct EngineState {
    static constexpr Precision precision =
        std::is_same_v<RealType, float> ? Precision::Single : Precision::Double;

    std::vector<RealType> beta;
    std::vector<RealType> xbeta;
    std::vector<RealType> l_exp_xbeta;
    std::vector<RealType> denominators;
};

/// One coordinate's gradient and Hessian diagonal, always accumulated and
/// reported in double regardless of the state's element type.
struct GradHess {
    double gradient = 0.0;
    double hessian = 0.0;
};

namespace detail {

template <typename RealType>
void check_xbeta_magnitude(RealType value) {
    if (!(std::abs(value) <= xbeta_bound<RealType>::value)) {
        throw numeric_error(
            "linear predictor overflow: |x'beta| reached " +
            std::to_string(static_cast<double>(std::abs(value))) +
            " (bound " + std::to_string(static_cast<double>(xbeta_bound<RealType>::value)) +
            "); the fit has diverged");
    }
}

/// Rebuilds l_exp_xbeta and denominators from xbeta.  O(num_eras).
template <typename RealType>
void refresh_from_xbeta(const Dataset& ds, EngineState<RealType>& state) {
    RealType max_abs = 0;
    for (const RealType v : state.xbeta) {
        max_abs = std::max(max_abs, std::abs(v));
    }
    check_xbeta_magnitude(max_abs);
    const std::size_t num_eras = static_cast<std::size_t>(ds.num_eras);
    for (std::size_t k = 0; k < num_eras; ++k) {
        state.l_exp_xbeta[k] =
            static_cast<RealType>(ds.era_lengths[k]) * std::exp(state.xbeta[k]);
    }
    const std::size_t num_subjects = static_cast<std::size_t>(ds.num_subjects);
    for (std::size_t i = 0; i < num_subjects; ++i) {
        RealType total = 0;
        const index_t lo = ds.subject_offsets[i];
        const index_t hi = ds.subject_offsets[i + 1];
        for (index_t k = lo; k < hi; ++k) {
            total += state.l_exp_xbeta[static_cast<std::size_t>(k)];
        }
        state.denominators[i] = total;
    }
}

/// Core of the fused gradient/Hessian reduction over one pair range of a
/// column.  [lo, hi) must not split a subject's pairs.  Accumulates the
/// two weighted sums in a single pass; the per-subject weight
/// w_i = (sum of l_exp_xbeta over the column's rows in i) / denominator_i
/// is formed once and never stored.
template <typename RealType>
void reduce_column_range(const Dataset& ds,
                         const EngineState<RealType>& state,
                         const SparseColumn& col,
                         std::size_t lo,
                         std::size_t hi,
                         RealType& weight_sum,
                         RealType& curvature_sum) {
    RealType gs = 0;
    RealType hs = 0;
    std::size_t p = lo;
    while (p < hi) {
        const index_t i = col.subjects[p];
        RealType numerator = 0;
        do {
            numerator += state.l_exp_xbeta[static_cast<std::size_t>(col.rows[p])];
            ++p;
        } while (p < hi && col.subjects[p] == i);
        const RealType den = state.denominators[static_cast<std::size_t>(i)];
        if (!(den > RealType(0))) {
            throw internal_error("fused reduction: nonpositive subject denominator");
        }
        RealType w = numerator / den;
        // The numerator is a sub-sum of the denominator (indicator
        // entries), so w > 1 can only be incremental-update rounding.
        if (w > RealType(1)) {
            w = RealType(1);
        }
        const RealType nw =
            static_cast<RealType>(ds.events_per_subject[static_cast<std::size_t>(i)]) * w;
        gs += nw;
        hs += nw * (RealType(1) - w);
    }
    weight_sum = gs;
    curvature_sum = hs;
}

} // namespace detail

/// Fresh state at the given coefficients (zeros when omitted).
template <typename RealType>
EngineState<RealType> init_state(const Dataset& ds,
                                 const std::vector<double>& beta = {}) {
    const std::size_t num_drugs = static_cast<std::size_t>(ds.num_drugs);
    if (!beta.empty() && beta.size() != num_drugs) {
        throw input_error("init_state: coefficient count does not match drug count");
    }
    EngineState<RealType> state;
    state.beta.assign(num_drugs, RealType(0));
    state.xbeta.assign(static_cast<std::size_t>(ds.num_eras), RealType(0));
    state.l_exp_xbeta.assign(static_cast<std::size_t>(ds.num_eras), RealType(0));
    state.denominators.assign(static_cast<std::size_t>(ds.num_subjects), RealType(0));
    for (std::size_t j = 0; j < beta.size(); ++j) {
        if (!std::isfinite(beta[j])) {
            throw input_error("init_state: non-finite coefficient");
        }
        state.beta[j] = static_cast<RealType>(beta[j]);
    }
    for (std::size_t j = 0; j < num_drugs; ++j) {
        const RealType bj = state.beta[j];
        if (bj == RealType(0)) {
            continue;
        }
        for (const index_t k : ds.columns[j].rows) {
            state.xbeta[static_cast<std::size_t>(k)] += bj;
        }
    }
    detail::refresh_from_xbeta(ds, state);
    return state;
}

/// Rebuilds xbeta and everything downstream from state.beta.  Used on a
/// fixed cadence to shed the rounding drift of incremental updates.
template <typename RealType>
void dense_recompute(const Dataset& ds, EngineState<RealType>& state) {
    std::fill(state.xbeta.begin(), state.xbeta.end(), RealType(0));
    for (std::size_t j = 0; j < state.beta.size(); ++j) {
        const RealType bj = state.beta[j];
        if (bj == RealType(0)) {
            continue;
        }
        for (const index_t k : ds.columns[j].rows) {
            state.xbeta[static_cast<std::size_t>(k)] += bj;
        }
    }
    detail::refresh_from_xbeta(ds, state);
}

/// Replaces the coefficients wholesale, then rebuilds.
template <typename RealType>
void dense_recompute(const Dataset& ds,
                     EngineState<RealType>& state,
                     const std::vector<double>& beta) {
    if (beta.size() != state.beta.size()) {
        throw input_error("dense_recompute: coefficient count does not match state");
    }
    for (std::size_t j = 0; j < beta.size(); ++j) {
        if (!std::isfinite(beta[j])) {
            throw input_error("dense_recompute: non-finite coefficient");
        }
        state.beta[j] = static_cast<RealType>(beta[j]);
    }
    dense_recompute(ds, state);
}

/// Applies beta_j += delta by touching only the nonzero rows of column j:
/// O(column nnz) work independent of the era count.  Each touched
/// subject's denominator is adjusted by the change in its rows.
template <typename RealType>
void sparse_delta_update(const Dataset& ds,
                         EngineState<RealType>& state,
                         index_t j,
                         double delta) {
    if (!std::isfinite(delta)) {
        throw numeric_error("sparse_delta_update: non-finite step");
    }
    if (delta == 0.0) {
        return;
    }
    const auto& col = ds.columns[static_cast<std::size_t>(j)];
    const RealType d = static_cast<RealType>(delta);
    const std::size_t nnz = col.rows.size();
    for (std::size_t p = 0; p < nnz; ++p) {
        const std::size_t k = static_cast<std::size_t>(col.rows[p]);
        const RealType updated = state.xbeta[k] + d;
        detail::check_xbeta_magnitude(updated);
        state.xbeta[k] = updated;
        const RealType fresh =
            static_cast<RealType>(ds.era_lengths[k]) * std::exp(updated);
        state.denominators[static_cast<std::size_t>(col.subjects[p])] +=
            fresh - state.l_exp_xbeta[k];
        state.l_exp_xbeta[k] = fresh;
    }
    state.beta[static_cast<std::size_t>(j)] += d;
}

/// Concurrent form of sparse_delta_update.  Rows of one column are unique,
/// so xbeta and l_exp_xbeta writes never collide; denominator adjustments
/// can collide across chunks and go through atomic adds.  Results agree
/// with the serial form only up to addition order.
template <typename RealType>
void parallel_sparse_delta_update(const Dataset& ds,
                                  EngineState<RealType>& state,
                                  index_t j,
                                  double delta,
                                  int partitions,
                                  ThreadPool* pool = nullptr,
                                  std::size_t min_chunk = 4096) {
    if (partitions < 1) {
        throw input_error("parallel_sparse_delta_update: partitions must be >= 1");
    }
    if (!std::isfinite(delta)) {
        throw numeric_error("parallel_sparse_delta_update: non-finite step");
    }
    if (delta == 0.0) {
        return;
    }
    const auto& col = ds.columns[static_cast<std::size_t>(j)];
    const std::size_t nnz = col.rows.size();
    if (partitions == 1 || pool == nullptr || pool->worker_count() == 0 ||
        nnz < min_chunk) {
        sparse_delta_update(ds, state, j, delta);
        return;
    }
    const RealType d = static_cast<RealType>(delta);
    const int parts = partitions;
    pool->run(parts, [&](int t) {
        const std::size_t lo = nnz * static_cast<std::size_t>(t) / parts;
        const std::size_t hi = nnz * (static_cast<std::size_t>(t) + 1) / parts;
        for (std::size_t p = lo; p < hi; ++p) {
            const std::size_t k = static_cast<std::size_t>(col.rows[p]);
            const RealType updated = state.xbeta[k] + d;
            detail::check_xbeta_magnitude(updated);
            state.xbeta[k] = updated;
            const RealType fresh =
                static_cast<RealType>(ds.era_lengths[k]) * std::exp(updated);
            std::atomic_ref<RealType> den(
                state.denominators[static_cast<std::size_t>(col.subjects[p])]);
            den.fetch_add(fresh - state.l_exp_xbeta[k],
                          std::memory_order_relaxed);
            state.l_exp_xbeta[k] = fresh;
        }
    });
    state.beta[static_cast<std::size_t>(j)] += d;
}

/// Gradient and Hessian diagonal of the conditional log likelihood along
/// coordinate j, fused into one pass over the column's pairs.
template <typename RealType>
GradHess fused_grad_hess(const Dataset& ds,
                         const EngineState<RealType>& state,
                         index_t j) {
    const auto& col = ds.columns[static_cast<std::size_t>(j)];
    RealType gs = 0;
    RealType hs = 0;
    detail::reduce_column_range(ds, state, col, 0, col.rows.size(), gs, hs);
    GradHess out;
    out.gradient = static_cast<double>(ds.y_dot_x[static_cast<std::size_t>(j)]) -
                   static_cast<double>(gs);
    out.hessian = hs == RealType(0) ? 0.0 : -static_cast<double>(hs);
    return out;
}

/// Same reduction split into `partitions` chunks whose boundaries are
/// pushed forward onto subject-group edges, each chunk reduced
/// independently and the partials combined in fixed ascending order.  The
/// combined value for a given partition count does not depend on the pool,
/// and partitions == 1 falls through to the serial reduction unchanged.
template <typename RealType>
GradHess parallel_fused_grad_hess(const Dataset& ds,
                                  const EngineState<RealType>& state,
                                  index_t j,
                                  int partitions,
                                  ThreadPool* pool = nullptr,
                                  std::size_t min_chunk = 4096) {
    if (partitions < 1) {
        throw input_error("parallel_fused_grad_hess: partitions must be >= 1");
    }
    const auto& col = ds.columns[static_cast<std::size_t>(j)];
    const std::size_t nnz = col.rows.size();
    if (partitions == 1 || nnz == 0) {
        return fused_grad_hess(ds, state, j);
    }

    const int parts = partitions;
    std::vector<std::size_t> bounds(static_cast<std::size_t>(parts) + 1);
    bounds[0] = 0;
    for (int t = 1; t < parts; ++t) {
        std::size_t pos = nnz * static_cast<std::size_t>(t) / parts;
        while (pos < nnz && pos > 0 && col.subjects[pos] == col.subjects[pos - 1]) {
            ++pos; // never split a subject's pairs across chunks
        }
        bounds[static_cast<std::size_t>(t)] = pos;
    }
    bounds[static_cast<std::size_t>(parts)] = nnz;

    std::vector<RealType> gs(static_cast<std::size_t>(parts), RealType(0));
    std::vector<RealType> hs(static_cast<std::size_t>(parts), RealType(0));
    auto chunk = [&](int t) {
        const std::size_t u = static_cast<std::size_t>(t);
        if (bounds[u] < bounds[u + 1]) {
            detail::reduce_column_range(ds, state, col, bounds[u], bounds[u + 1],
                                        gs[u], hs[u]);
        }
    };
    if (pool != nullptr && pool->worker_count() > 0 && nnz >= min_chunk) {
        pool->run(parts, chunk);
    } else {
        for (int t = 0; t < parts; ++t) {
            chunk(t);
        }
    }

    RealType total_g = 0;
    RealType total_h = 0;
    for (int t = 0; t < parts; ++t) {
        total_g += gs[static_cast<std::size_t>(t)];
        total_h += hs[static_cast<std::size_t>(t)];
    }
    GradHess out;
    out.gradient = static_cast<double>(ds.y_dot_x[static_cast<std::size_t>(j)]) -
                   static_cast<double>(total_g);
    out.hessian = total_h == RealType(0) ? 0.0 : -static_cast<double>(total_h);
    return out;
}

/// Reduction shaped the way a dense design would force it: one numerator
/// slot per subject, filled from the column, then a full sweep over all
/// subjects.  Exists to benchmark the sparse path against; results match
/// fused_grad_hess up to addition order.  `numerator_scratch` is caller
/// owned so repeated calls do not allocate.
template <typename RealType>
GradHess fused_grad_hess_dense(const Dataset& ds,
                               const EngineState<RealType>& state,
                               index_t j,
                               std::vector<RealType>& numerator_scratch) {
    const std::size_t num_subjects = static_cast<std::size_t>(ds.num_subjects);
    numerator_scratch.assign(num_subjects, RealType(0));
    const auto& col = ds.columns[static_cast<std::size_t>(j)];
    const std::size_t nnz = col.rows.size();
    for (std::size_t p = 0; p < nnz; ++p) {
        numerator_scratch[static_cast<std::size_t>(col.subjects[p])] +=
            state.l_exp_xbeta[static_cast<std::size_t>(col.rows[p])];
    }
    RealType gs = 0;
    RealType hs = 0;
    for (std::size_t i = 0; i < num_subjects; ++i) {
        const RealType den = state.denominators[i];
        if (!(den > RealType(0))) {
            throw internal_error("dense reduction: nonpositive subject denominator");
        }
        RealType w = numerator_scratch[i] / den;
        if (w > RealType(1)) {
            w = RealType(1);
        }
        const RealType nw = static_cast<RealType>(ds.events_per_subject[i]) * w;
        gs += nw;
        hs += nw * (RealType(1) - w);
    }
    GradHess out;
    out.gradient = static_cast<double>(ds.y_dot_x[static_cast<std::size_t>(j)]) -
                   static_cast<double>(gs);
    out.hessian = hs == RealType(0) ? 0.0 : -static_cast<double>(hs);
    return out;
}

/// Conditional log likelihood at the current state, accumulated in double.
template <typename RealType>
double log_likelihood(const Dataset& ds, const EngineState<RealType>& state) {
    double linear = 0.0;
    const std::size_t num_eras = static_cast<std::size_t>(ds.num_eras);
    for (std::size_t k = 0; k < num_eras; ++k) {
        if (ds.event_counts[k] != 0) {
            linear += static_cast<double>(ds.event_counts[k]) *
                      static_cast<double>(state.xbeta[k]);
        }
    }
    double log_denominators = 0.0;
    const std::size_t num_subjects = static_cast<std::size_t>(ds.num_subjects);
    for (std::size_t i = 0; i < num_subjects; ++i) {
        const double den = static_cast<double>(state.denominators[i]);
        if (!(den > 0.0)) {
            throw internal_error("log_likelihood: nonpositive subject denominator");
        }
        log_denominators +=
            static_cast<double>(ds.events_per_subject[i]) * std::log(den);
    }
    return linear - log_denominators;
}

} // namespace bsccs
