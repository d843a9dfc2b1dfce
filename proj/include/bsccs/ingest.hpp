#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"

namespace bsccs {

/// Daily-resolution inputs.  All intervals are half-open [start_day,
/// end_day): a drug active on days 3 and 4 spans [3, 5).
struct ObservationPeriod {
    index_t start_day = 0;
    index_t end_day = 0;
};

struct ExposureInterval {
    std::string drug_id;
    index_t start_day = 0;
    index_t end_day = 0;
};

struct EventRecord {
    index_t day = 0;
};

struct EraBuildResult {
    std::vector<Era> eras;
    int dropped_intervals = 0;
};

/// Cuts one subject's observation period into eras of constant exposure.
///
/// Intervals are clipped to the observation period first; an interval
/// left empty by clipping is dropped and counted, not an error.
/// Overlapping or touching intervals of the same drug are unioned, the
/// union endpoints plus the observation endpoints become the era
/// boundaries, events land in the era containing their day, and adjacent
/// eras that end up with identical exposure sets are merged.  Era lengths
/// always sum to the observation period length.
inline EraBuildResult build_eras(
    const ObservationPeriod& obs,
    const std::vector<ExposureInterval>& intervals,
    const std::vector<EventRecord>& events,
    const std::unordered_map<std::string, index_t>& drug_index,
    const std::string& subject_label) {
    if (!(obs.start_day < obs.end_day)) {
        throw input_error("subject '" + subject_label +
                          "': observation period is empty");
    }

    EraBuildResult out;
    std::map<index_t, std::vector<std::pair<index_t, index_t>>> per_drug;
    for (const auto& iv : intervals) {
        const auto found = drug_index.find(iv.drug_id);
        if (found == drug_index.end()) {
            throw input_error("subject '" + subject_label + "': drug '" +
                              iv.drug_id + "' is not in the dictionary");
        }
        if (!(iv.start_day < iv.end_day)) {
            throw input_error("subject '" + subject_label +
                              "': exposure interval for drug '" + iv.drug_id +
                              "' is empty or reversed");
        }
        const index_t s = std::max(iv.start_day, obs.start_day);
        const index_t e = std::min(iv.end_day, obs.end_day);
        if (s >= e) {
            ++out.dropped_intervals;
            continue;
        }
        per_drug[found->second].emplace_back(s, e);
    }

    for (auto& [j, spans] : per_drug) {
        std::sort(spans.begin(), spans.end());
        std::vector<std::pair<index_t, index_t>> merged;
        for (const auto& span : spans) {
            if (!merged.empty() && span.first <= merged.back().second) {
                merged.back().second = std::max(merged.back().second, span.second);
            } else {
                merged.push_back(span);
            }
        }
        spans = std::move(merged);
    }

    std::vector<index_t> cuts{obs.start_day, obs.end_day};
    for (const auto& [j, spans] : per_drug) {
        for (const auto& [s, e] : spans) {
            cuts.push_back(s);
            cuts.push_back(e);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const std::size_t slots = cuts.size() - 1;
    std::vector<std::vector<index_t>> exposures(slots);
    for (const auto& [j, spans] : per_drug) {
        for (const auto& [s, e] : spans) {
            const auto lo = std::lower_bound(cuts.begin(), cuts.end(), s);
            const auto hi = std::lower_bound(cuts.begin(), cuts.end(), e);
            for (auto it = lo; it != hi; ++it) {
                // per_drug iterates in ascending j, so each slot's list
                // comes out sorted without a separate pass
                exposures[static_cast<std::size_t>(it - cuts.begin())].push_back(j);
            }
        }
    }

    std::vector<index_t> counts(slots, 0);
    for (const auto& ev : events) {
        if (ev.day < obs.start_day || ev.day >= obs.end_day) {
            throw input_error("subject '" + subject_label + "': event on day " +
                              std::to_string(ev.day) +
                              " falls outside the observation period");
        }
        const auto pos = std::upper_bound(cuts.begin(), cuts.end(), ev.day);
        ++counts[static_cast<std::size_t>(pos - cuts.begin()) - 1];
    }

    for (std::size_t t = 0; t < slots; ++t) {
        const index_t length = cuts[t + 1] - cuts[t];
        if (!out.eras.empty() && out.eras.back().exposures == exposures[t]) {
            out.eras.back().length_days += length;
            out.eras.back().event_count += counts[t];
        } else {
            Era era;
            era.length_days = length;
            era.event_count = counts[t];
            era.exposures = std::move(exposures[t]);
            out.eras.push_back(std::move(era));
        }
    }
    return out;
}

/// One subject's raw rows, grouped by the reader.
struct RawSubject {
    std::string subject_id;
    ObservationPeriod observation;
    std::vector<ExposureInterval> exposures;
    std::vector<EventRecord> events;
};

struct RawData {
    std::vector<RawSubject> subjects;             // observation-file order
    std::vector<std::string> drug_labels;         // exposure-file first-appearance order
    int subjects_without_observation = 0;         // distinct ids seen only outside the period file
};

struct IngestResult {
    std::vector<SubjectRecord> records;
    std::vector<std::string> drug_ids;
    int dropped_intervals = 0;
    int subjects_without_observation = 0;
};

/// Turns grouped raw rows into era-level subject records.  With a
/// dictionary the label set is fixed (unknown labels are errors);
/// otherwise labels are indexed in first-appearance order.
inline IngestResult build_records(const RawData& raw,
                                  std::vector<std::string> dictionary = {}) {
    IngestResult out;
    out.subjects_without_observation = raw.subjects_without_observation;
    out.drug_ids = dictionary.empty() ? raw.drug_labels : std::move(dictionary);

    std::unordered_map<std::string, index_t> drug_index;
    for (std::size_t j = 0; j < out.drug_ids.size(); ++j) {
        const bool fresh =
            drug_index.emplace(out.drug_ids[j], static_cast<index_t>(j)).second;
        if (!fresh) {
            throw input_error("duplicate drug label '" + out.drug_ids[j] + "'");
        }
    }

    out.records.reserve(raw.subjects.size());
    for (const auto& subject : raw.subjects) {
        EraBuildResult built =
            build_eras(subject.observation, subject.exposures, subject.events,
                       drug_index, subject.subject_id);
        out.dropped_intervals += built.dropped_intervals;
        SubjectRecord rec;
        rec.subject_id = subject.subject_id;
        rec.eras = std::move(built.eras);
        out.records.push_back(std::move(rec));
    }
    return out;
}

} // namespace bsccs
