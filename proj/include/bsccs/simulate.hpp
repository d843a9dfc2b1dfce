#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "rng.hpp"

namespace bsccs {

/// Generative model: for each attempted subject, draw an era layout, a
/// per-drug exposure indicator per era, and a subject frailty
/// phi ~ Normal(baseline_log_rate_mean, baseline_log_rate_sd), then event
/// counts y ~ Poisson(length * exp(phi + x'true_beta)) per era.  Subjects
/// with no events are discarded, mirroring what conditioning does to them.
struct SimConfig {
    int subjects = 1000; // attempts, before the zero-event discard
    int drugs = 4;
    int min_eras = 2;
    int max_eras = 6;
    int min_era_length = 10; // days
    int max_era_length = 60;
    std::vector<double> prevalence; // per drug, in (0, 1)
    std::vector<double> true_beta;  // per drug
    double baseline_log_rate_mean = -5.0; // log events per day
    double baseline_log_rate_sd = 0.5;
    std::uint64_t seed = 0;
};

struct SimTruth {
    std::vector<double> true_beta;
    std::vector<double> frailty; // phi of each kept subject
    int kept = 0;
    int discarded = 0;
};

struct SimOutput {
    Dataset dataset;
    SimTruth truth;
    std::vector<SubjectRecord> records; // same subjects, writable form
};

inline std::vector<double> uniform_prevalence(int drugs, double p) {
    return std::vector<double>(static_cast<std::size_t>(drugs), p);
}

inline SimOutput simulate(const SimConfig& cfg) {
    if (cfg.subjects < 1) {
        throw input_error("simulate: need at least one subject");
    }
    if (cfg.drugs < 1) {
        throw input_error("simulate: need at least one drug");
    }
    if (cfg.min_eras < 1 || cfg.max_eras < cfg.min_eras) {
        throw input_error("simulate: era count bounds are invalid");
    }
    if (cfg.min_era_length < 1 || cfg.max_era_length < cfg.min_era_length) {
        throw input_error("simulate: era length bounds are invalid");
    }
    const std::size_t drugs = static_cast<std::size_t>(cfg.drugs);
    if (cfg.prevalence.size() != drugs) {
        throw input_error("simulate: prevalence must list one value per drug");
    }
    for (const double p : cfg.prevalence) {
        if (!(p > 0.0 && p < 1.0)) {
            throw input_error("simulate: prevalence values must lie in (0, 1)");
        }
    }
    if (cfg.true_beta.size() != drugs) {
        throw input_error("simulate: true_beta must list one value per drug");
    }
    if (!(cfg.baseline_log_rate_sd >= 0.0)) {
        throw input_error("simulate: baseline rate spread must be non-negative");
    }

    SimOutput out;
    out.truth.true_beta = cfg.true_beta;
    std::vector<std::string> drug_ids(drugs);
    for (std::size_t j = 0; j < drugs; ++j) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "d%03zu", j);
        drug_ids[j] = buf;
    }

    for (int s = 0; s < cfg.subjects; ++s) {
        // one substream per attempted subject, so a subject's draw does
        // not depend on how many subjects precede it
        Rng rng(cfg.seed, static_cast<std::uint64_t>(s) + 1);
        const double phi =
            rng.normal(cfg.baseline_log_rate_mean, cfg.baseline_log_rate_sd);

        SubjectRecord rec;
        {
            char buf[24];
            std::snprintf(buf, sizeof buf, "s%06d", s);
            rec.subject_id = buf;
        }
        const int eras = rng.uniform_int(cfg.min_eras, cfg.max_eras);
        index_t total_events = 0;
        for (int e = 0; e < eras; ++e) {
            Era era;
            era.length_days = static_cast<index_t>(
                rng.uniform_int(cfg.min_era_length, cfg.max_era_length));
            double xb = 0.0;
            for (std::size_t j = 0; j < drugs; ++j) {
                if (rng.uniform() < cfg.prevalence[j]) {
                    era.exposures.push_back(static_cast<index_t>(j));
                    xb += cfg.true_beta[j];
                }
            }
            const double mean =
                static_cast<double>(era.length_days) * std::exp(phi + xb);
            era.event_count = static_cast<index_t>(rng.poisson(mean));
            total_events += era.event_count;
            rec.eras.push_back(std::move(era));
        }

        if (total_events == 0) {
            ++out.truth.discarded;
            continue;
        }
        ++out.truth.kept;
        out.truth.frailty.push_back(phi);
        out.records.push_back(std::move(rec));
    }

    if (out.truth.kept == 0) {
        throw input_error("simulate: every subject drew zero events; raise "
                          "baseline_log_rate_mean or lengthen the eras");
    }
    out.dataset =
        build_dataset(out.records, static_cast<index_t>(drugs), drug_ids);
    return out;
}

} // namespace bsccs
