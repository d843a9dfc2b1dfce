#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"

namespace bsccs {

/// One stretch of a subject's observation period over which drug exposure
/// is constant.  `exposures` lists the indices of the drugs active in the
/// era, strictly ascending; the design matrix entry for every listed drug
/// is an implicit 1.
struct Era {
    index_t length_days = 0;
    index_t event_count = 0;
    std::vector<index_t> exposures;

    bool operator==(const Era&) const = default;
};

struct SubjectRecord {
    std::string subject_id;
    std::vector<Era> eras;

    bool operator==(const SubjectRecord&) const = default;
};

/// One column of the indicator design matrix in compressed form, bundled
/// with the owning subject of every nonzero row.  `rows[p]` is an era
/// index, ascending; `subjects[p]` is the subject that era belongs to.
/// This is the precomputed product of the subject aggregation matrix with
/// the column, stored as parallel arrays so the fused reductions stream
/// through both with one pointer.
struct SparseColumn {
    std::vector<index_t> rows;
    std::vector<index_t> subjects;

    bool operator==(const SparseColumn&) const = default;
};

/// Immutable indexed form of a case series.  Eras of subject i occupy the
/// contiguous row range [subject_offsets[i], subject_offsets[i+1]); only
/// subjects with at least one event are present, since subjects with none
/// contribute nothing to the conditional likelihood.
///
/// Derived quantities are fixed at build time: y_dot_x[j] holds the event
/// total over the nonzero rows of column j, and max_column_nnz bounds the
/// work of one sparse coordinate update.
struct Dataset {
    index_t num_drugs = 0;
    index_t num_subjects = 0;
    index_t num_eras = 0;

    std::vector<index_t> event_counts;       // per era
    std::vector<index_t> era_lengths;        // per era, in days
    std::vector<index_t> subject_offsets;    // num_subjects + 1 fenceposts
    std::vector<index_t> events_per_subject; // row sums of event_counts
    std::vector<SparseColumn> columns;       // per drug
    std::vector<std::int64_t> y_dot_x;       // per drug
    index_t max_column_nnz = 0;
    std::vector<std::string> drug_ids;       // empty or num_drugs labels

    bool operator==(const Dataset&) const = default;
};

/// Indexes subject records into a Dataset, dropping subjects with zero
/// events.  Validates every era: positive length, non-negative event
/// count, exposure indices strictly ascending within [0, num_drugs).
/// `drug_ids` is optional; when given it must have num_drugs entries.
inline Dataset build_dataset(const std::vector<SubjectRecord>& records,
                             index_t num_drugs,
                             std::vector<std::string> drug_ids = {}) {
    if (num_drugs < 1) {
        throw input_error("build_dataset: need at least one drug");
    }
    if (!drug_ids.empty() &&
        static_cast<index_t>(drug_ids.size()) != num_drugs) {
        throw input_error("build_dataset: drug label count does not match drug count");
    }

    Dataset ds;
    ds.num_drugs = num_drugs;
    ds.drug_ids = std::move(drug_ids);
    ds.columns.resize(static_cast<std::size_t>(num_drugs));
    ds.y_dot_x.assign(static_cast<std::size_t>(num_drugs), 0);
    ds.subject_offsets.push_back(0);

    std::int64_t rows = 0;
    for (const auto& rec : records) {
        std::int64_t subject_events = 0;
        for (const auto& era : rec.eras) {
            if (era.length_days <= 0) {
                throw input_error("subject '" + rec.subject_id +
                                  "': era length must be positive");
            }
            if (era.event_count < 0) {
                throw input_error("subject '" + rec.subject_id +
                                  "': negative event count");
            }
            index_t prev = -1;
            for (index_t j : era.exposures) {
                if (j < 0 || j >= num_drugs) {
                    throw input_error("subject '" + rec.subject_id +
                                      "': exposure index " + std::to_string(j) +
                                      " out of range");
                }
                if (j <= prev) {
                    throw input_error("subject '" + rec.subject_id +
                                      "': exposure indices must be strictly ascending");
                }
                prev = j;
            }
            subject_events += era.event_count;
        }
        if (subject_events == 0) {
            continue; // non-case; carries no information about beta
        }

        const index_t subject = ds.num_subjects++;
        for (const auto& era : rec.eras) {
            if (rows >= std::numeric_limits<index_t>::max()) {
                throw input_error("build_dataset: era count overflows the row index type");
            }
            const index_t row = static_cast<index_t>(rows++);
            ds.event_counts.push_back(era.event_count);
            ds.era_lengths.push_back(era.length_days);
            for (index_t j : era.exposures) {
                auto& col = ds.columns[static_cast<std::size_t>(j)];
                col.rows.push_back(row);
                col.subjects.push_back(subject);
                ds.y_dot_x[static_cast<std::size_t>(j)] += era.event_count;
            }
        }
        ds.subject_offsets.push_back(static_cast<index_t>(rows));
        ds.events_per_subject.push_back(static_cast<index_t>(subject_events));
    }

    if (ds.num_subjects == 0) {
        throw input_error(
            "build_dataset: no subjects with events remain after exclusion");
    }
    ds.num_eras = static_cast<index_t>(rows);
    for (const auto& col : ds.columns) {
        ds.max_column_nnz = std::max(
            ds.max_column_nnz, static_cast<index_t>(col.rows.size()));
    }
    return ds;
}

/// Rebuilds a dataset over the given subjects, in the given order.
/// Indices may repeat (bootstrap resampling); each occurrence becomes an
/// independent copy of the subject.  Labels are carried over unchanged.
inline Dataset subset_dataset(const Dataset& ds,
                              const std::vector<index_t>& subject_indices) {
    if (subject_indices.empty()) {
        throw input_error("subset_dataset: empty subject selection");
    }

    Dataset out;
    out.num_drugs = ds.num_drugs;
    out.drug_ids = ds.drug_ids;
    out.columns.resize(static_cast<std::size_t>(ds.num_drugs));
    out.y_dot_x.assign(static_cast<std::size_t>(ds.num_drugs), 0);
    out.subject_offsets.push_back(0);

    // old row -> position of its subject's copy, rebuilt per selection
    index_t rows = 0;
    std::vector<index_t> row_of_subject_start(
        static_cast<std::size_t>(subject_indices.size()));
    for (std::size_t s = 0; s < subject_indices.size(); ++s) {
        const index_t i = subject_indices[s];
        if (i < 0 || i >= ds.num_subjects) {
            throw input_error("subset_dataset: subject index out of range");
        }
        const index_t lo = ds.subject_offsets[static_cast<std::size_t>(i)];
        const index_t hi = ds.subject_offsets[static_cast<std::size_t>(i) + 1];
        row_of_subject_start[s] = rows;
        for (index_t k = lo; k < hi; ++k) {
            out.event_counts.push_back(ds.event_counts[static_cast<std::size_t>(k)]);
            out.era_lengths.push_back(ds.era_lengths[static_cast<std::size_t>(k)]);
            ++rows;
        }
        out.subject_offsets.push_back(rows);
        out.events_per_subject.push_back(
            ds.events_per_subject[static_cast<std::size_t>(i)]);
    }
    out.num_subjects = static_cast<index_t>(subject_indices.size());
    out.num_eras = rows;

    // Columns must come out with ascending rows, so walk the selection in
    // output order for every drug rather than remapping the old pairs.
    for (index_t j = 0; j < ds.num_drugs; ++j) {
        const auto& col = ds.columns[static_cast<std::size_t>(j)];
        auto& ocol = out.columns[static_cast<std::size_t>(j)];
        for (std::size_t s = 0; s < subject_indices.size(); ++s) {
            const index_t i = subject_indices[s];
            const index_t lo = ds.subject_offsets[static_cast<std::size_t>(i)];
            const index_t hi = ds.subject_offsets[static_cast<std::size_t>(i) + 1];
            // pairs of subject i occupy one contiguous ascending run
            auto first = std::lower_bound(col.rows.begin(), col.rows.end(), lo);
            for (auto it = first; it != col.rows.end() && *it < hi; ++it) {
                const index_t new_row = row_of_subject_start[s] + (*it - lo);
                ocol.rows.push_back(new_row);
                ocol.subjects.push_back(static_cast<index_t>(s));
                out.y_dot_x[static_cast<std::size_t>(j)] +=
                    ds.event_counts[static_cast<std::size_t>(*it)];
            }
        }
        out.max_column_nnz = std::max(
            out.max_column_nnz, static_cast<index_t>(ocol.rows.size()));
    }
    return out;
}

} // namespace bsccs
