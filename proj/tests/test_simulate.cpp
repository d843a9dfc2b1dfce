#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "bsccs/engine.hpp"
#include "bsccs/oracle.hpp"
#include "bsccs/prior.hpp"
#include "bsccs/simulate.hpp"
#include "bsccs/solver.hpp"
#include "test_util.hpp"

using namespace bsccs;
using testutil::rel_gap;

namespace {

SimConfig small_config(std::uint64_t seed) {
    SimConfig cfg;
    cfg.subjects = 40;
    cfg.drugs = 4;
    cfg.max_eras = 6;
    cfg.prevalence = uniform_prevalence(4, 0.3);
    cfg.true_beta = {0.5, 0.0, -0.4, 0.2};
    cfg.baseline_log_rate_mean = -3.5;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("one seed, one dataset") {
    const SimConfig cfg = small_config(7);
    const SimOutput a = simulate(cfg);
    const SimOutput b = simulate(cfg);
    REQUIRE(a.dataset == b.dataset);
    REQUIRE(a.records == b.records);
    REQUIRE(a.truth.frailty == b.truth.frailty);
    REQUIRE(a.truth.kept == b.truth.kept);
    REQUIRE(a.truth.discarded == b.truth.discarded);

    SimConfig other = cfg;
    other.seed = 8;
    REQUIRE(simulate(other).dataset != a.dataset);
}

TEST_CASE("a subject's draw does not depend on the attempt count") {
    SimConfig cfg = small_config(11);
    cfg.subjects = 30;
    const SimOutput small = simulate(cfg);
    cfg.subjects = 60;
    const SimOutput big = simulate(cfg);

    // ids are zero padded, so the first 30 attempts sort first
    std::vector<SubjectRecord> prefix;
    for (const auto& rec : big.records) {
        if (rec.subject_id < "s000030") {
            prefix.push_back(rec);
        }
    }
    REQUIRE(prefix == small.records);
}

TEST_CASE("the discard rule books every attempt exactly once") {
    const SimOutput out = simulate(small_config(13));
    REQUIRE(out.truth.kept + out.truth.discarded == 40);
    REQUIRE(out.truth.kept == out.dataset.num_subjects);
    REQUIRE(static_cast<std::size_t>(out.truth.kept) == out.records.size());
    REQUIRE(out.truth.frailty.size() == out.records.size());
    for (const auto& rec : out.records) {
        index_t events = 0;
        for (const auto& era : rec.eras) {
            events += era.event_count;
        }
        REQUIRE(events > 0);
    }
    REQUIRE(out.dataset.drug_ids ==
            std::vector<std::string>{"d000", "d001", "d002", "d003"});
}

TEST_CASE("nonsense scenarios are rejected") {
    SimConfig cfg = small_config(1);
    cfg.subjects = 0;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.drugs = 0;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.prevalence = uniform_prevalence(3, 0.3);
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.prevalence[2] = 1.0;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.true_beta = {1.0};
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.min_eras = 0;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.max_eras = 1;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.max_era_length = 5;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    cfg = small_config(1);
    cfg.baseline_log_rate_sd = -0.1;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);

    // rates so low that every attempt draws zero events
    cfg = small_config(1);
    cfg.subjects = 5;
    cfg.baseline_log_rate_mean = -40.0;
    REQUIRE_THROWS_AS(simulate(cfg), input_error);
}

TEST_CASE("engine and brute-force log likelihoods coincide") {
    Rng beta_rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const SimOutput out = simulate(small_config(100 + trial));
        const auto beta =
            testutil::random_beta(beta_rng, out.dataset.num_drugs, 1.0);
        const auto state = init_state<double>(out.dataset, beta);
        REQUIRE(rel_gap(log_likelihood(out.dataset, state),
                        oracle_log_likelihood(out.dataset, beta)) < 1e-10);
    }
}

TEST_CASE("fused derivatives match finite differences of the oracle") {
    Rng beta_rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        const SimOutput out = simulate(small_config(200 + trial));
        const Dataset& ds = out.dataset;
        const auto beta = testutil::random_beta(beta_rng, ds.num_drugs, 0.8);
        const auto state = init_state<double>(ds, beta);
        for (index_t j = 0; j < ds.num_drugs; ++j) {
            const GradHess gh = fused_grad_hess(ds, state, j);
            REQUIRE(rel_gap(gh.gradient, oracle_gradient(ds, beta, j)) < 1e-5);
            REQUIRE(rel_gap(gh.hessian,
                            oracle_second_derivative(ds, beta, j)) < 1e-4);
        }
    }
}

TEST_CASE("finite difference steps agree with each other") {
    const SimOutput out = simulate(small_config(23));
    const std::vector<double> beta(static_cast<std::size_t>(out.dataset.num_drugs),
                                   0.1);
    for (index_t j = 0; j < out.dataset.num_drugs; ++j) {
        const double wide = oracle_gradient(out.dataset, beta, j, 1e-4);
        const double narrow = oracle_gradient(out.dataset, beta, j, 1e-5);
        REQUIRE(rel_gap(wide, narrow) < 1e-3);
    }
}

TEST_CASE("more subjects pull the weakly penalized fit toward the truth") {
    SolverConfig solver_cfg;
    solver_cfg.epsilon = 1e-6;
    solver_cfg.max_cycles = 5000;
    PriorSpec weak;
    weak.kind = PriorKind::normal;
    weak.variance = 100.0;

    double previous = std::numeric_limits<double>::infinity();
    for (const int attempts : {500, 2000, 8000}) {
        SimConfig cfg;
        cfg.subjects = attempts;
        cfg.drugs = 4;
        cfg.prevalence = uniform_prevalence(4, 0.3);
        cfg.true_beta = {0.8, 0.0, -0.5, 0.3};
        cfg.baseline_log_rate_mean = -4.5;
        cfg.seed = 2024;

        const SimOutput out = simulate(cfg);
        const FitResult res = fit(out.dataset, weak, solver_cfg);
        REQUIRE(res.converged);

        double err = 0.0;
        for (std::size_t j = 0; j < cfg.true_beta.size(); ++j) {
            err = std::max(err, std::abs(res.beta_map[j] - cfg.true_beta[j]));
        }
        REQUIRE(err <= previous);
        previous = err;
    }
    REQUIRE(previous < 0.1); // the largest run should be close
}
