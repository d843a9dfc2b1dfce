#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "ingest.hpp"

namespace bsccs {

/// Shortest-faithful text form of a double; round-trips exactly.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline void split_tabs(std::string_view line, std::vector<std::string_view>& fields) {
    fields.clear();
    std::size_t start = 0;
    for (std::size_t p = 0; p <= line.size(); ++p) {
        if (p == line.size() || line[p] == '\t') {
            fields.push_back(line.substr(start, p - start));
            start = p + 1;
        }
    }
}

inline index_t parse_day(std::string_view field, const std::string& path, long line) {
    index_t value = 0;
    const auto [ptr, ec] =
        std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw input_error(path + ":" + std::to_string(line) +
                          ": expected an integer, got '" + std::string(field) + "'");
    }
    return value;
}

inline std::ifstream open_for_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw input_error("cannot open '" + path + "' for reading");
    }
    return in;
}

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw input_error("cannot open '" + path + "' for writing");
    }
    return out;
}

// Strips one trailing carriage return so CRLF files parse the same.
inline bool next_line(std::ifstream& in, std::string& line) {
    if (!std::getline(in, line)) {
        return false;
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return true;
}

} // namespace detail

/// Reads the era-level long format: one era per line,
///   subject_id <TAB> length_days <TAB> event_count <TAB> drug drug ...
/// The exposure field lists drug labels, space separated, and may be
/// empty (the trailing field may also be omitted).  A subject's lines
/// must be contiguous.  Labels are indexed in first-appearance order, or
/// against `dictionary` when one is supplied.
struct LongFormatData {
    std::vector<SubjectRecord> records;
    std::vector<std::string> drug_ids;
};

inline LongFormatData read_long_format(const std::string& path,
                                       std::vector<std::string> dictionary = {}) {
    auto in = detail::open_for_read(path);

    LongFormatData out;
    const bool fixed_labels = !dictionary.empty();
    out.drug_ids = std::move(dictionary);
    std::unordered_map<std::string, index_t> drug_index;
    for (std::size_t j = 0; j < out.drug_ids.size(); ++j) {
        if (!drug_index.emplace(out.drug_ids[j], static_cast<index_t>(j)).second) {
            throw input_error("duplicate drug label '" + out.drug_ids[j] +
                              "' in dictionary");
        }
    }
    std::unordered_map<std::string, bool> subject_seen;

    std::string line;
    std::vector<std::string_view> fields;
    long line_no = 0;
    while (detail::next_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        detail::split_tabs(line, fields);
        if (fields.size() != 3 && fields.size() != 4) {
            throw input_error(path + ":" + std::to_string(line_no) +
                              ": expected 3 or 4 tab-separated fields");
        }
        const std::string subject_id(fields[0]);
        if (subject_id.empty()) {
            throw input_error(path + ":" + std::to_string(line_no) +
                              ": empty subject id");
        }

        if (out.records.empty() || out.records.back().subject_id != subject_id) {
            auto [it, fresh] = subject_seen.emplace(subject_id, true);
            if (!fresh) {
                throw input_error(path + ":" + std::to_string(line_no) +
                                  ": rows of subject '" + subject_id +
                                  "' are not contiguous");
            }
            (void)it;
            out.records.push_back(SubjectRecord{subject_id, {}});
        }

        Era era;
        era.length_days = detail::parse_day(fields[1], path, line_no);
        era.event_count = detail::parse_day(fields[2], path, line_no);
        if (fields.size() == 4 && !fields[3].empty()) {
            std::string_view rest = fields[3];
            while (!rest.empty()) {
                const std::size_t space = rest.find(' ');
                const std::string label(rest.substr(0, space));
                rest = space == std::string_view::npos
                           ? std::string_view{}
                           : rest.substr(space + 1);
                if (label.empty()) {
                    continue; // tolerate doubled separators
                }
                auto found = drug_index.find(label);
                if (found == drug_index.end()) {
                    if (fixed_labels) {
                        throw input_error(path + ":" + std::to_string(line_no) +
                                          ": drug '" + label +
                                          "' is not in the dictionary");
                    }
                    found = drug_index
                                .emplace(label,
                                         static_cast<index_t>(out.drug_ids.size()))
                                .first;
                    out.drug_ids.push_back(label);
                }
                era.exposures.push_back(found->second);
            }
            std::sort(era.exposures.begin(), era.exposures.end());
            for (std::size_t p = 1; p < era.exposures.size(); ++p) {
                if (era.exposures[p] == era.exposures[p - 1]) {
                    throw input_error(path + ":" + std::to_string(line_no) +
                                      ": drug listed twice in one era");
                }
            }
        }
        out.records.back().eras.push_back(std::move(era));
    }
    return out;
}

inline void write_long_format(const std::string& path,
                              const std::vector<SubjectRecord>& records,
                              const std::vector<std::string>& drug_ids) {
    auto out = detail::open_for_write(path);
    for (const auto& rec : records) {
        for (const auto& era : rec.eras) {
            out << rec.subject_id << '\t' << era.length_days << '\t'
                << era.event_count << '\t';
            for (std::size_t p = 0; p < era.exposures.size(); ++p) {
                if (p != 0) {
                    out << ' ';
                }
                out << drug_ids[static_cast<std::size_t>(era.exposures[p])];
            }
            out << '\n';
        }
    }
    if (!out) {
        throw input_error("failed while writing '" + path + "'");
    }
}

/// One drug label per line.
inline std::vector<std::string> read_dictionary(const std::string& path) {
    auto in = detail::open_for_read(path);
    std::vector<std::string> labels;
    std::string line;
    while (detail::next_line(in, line)) {
        if (!line.empty()) {
            labels.push_back(line);
        }
    }
    if (labels.empty()) {
        throw input_error("dictionary '" + path + "' is empty");
    }
    return labels;
}

/// Reads the three raw daily-resolution files.
///   observation: subject_id <TAB> start_day <TAB> end_day
///   exposures:   subject_id <TAB> drug_id <TAB> start_day <TAB> end_day
///   events:      subject_id <TAB> day
/// Subjects keep observation-file order.  Exposure or event rows whose
/// subject has no observation period are set aside and the distinct
/// subjects counted, not treated as errors.
inline RawData read_raw_files(const std::string& observation_path,
                              const std::string& exposures_path,
                              const std::string& events_path) {
    RawData raw;
    std::unordered_map<std::string, std::size_t> position;
    std::unordered_map<std::string, bool> rejected;
    std::unordered_map<std::string, bool> label_seen;

    std::string line;
    std::vector<std::string_view> fields;

    {
        auto in = detail::open_for_read(observation_path);
        long line_no = 0;
        while (detail::next_line(in, line)) {
            ++line_no;
            if (line.empty()) {
                continue;
            }
            detail::split_tabs(line, fields);
            if (fields.size() != 3) {
                throw input_error(observation_path + ":" + std::to_string(line_no) +
                                  ": expected 3 tab-separated fields");
            }
            RawSubject subject;
            subject.subject_id = std::string(fields[0]);
            subject.observation.start_day =
                detail::parse_day(fields[1], observation_path, line_no);
            subject.observation.end_day =
                detail::parse_day(fields[2], observation_path, line_no);
            const auto [it, fresh] =
                position.emplace(subject.subject_id, raw.subjects.size());
            if (!fresh) {
                throw input_error(observation_path + ":" + std::to_string(line_no) +
                                  ": duplicate observation period for subject '" +
                                  subject.subject_id + "'");
            }
            (void)it;
            raw.subjects.push_back(std::move(subject));
        }
    }

    {
        auto in = detail::open_for_read(exposures_path);
        long line_no = 0;
        while (detail::next_line(in, line)) {
            ++line_no;
            if (line.empty()) {
                continue;
            }
            detail::split_tabs(line, fields);
            if (fields.size() != 4) {
                throw input_error(exposures_path + ":" + std::to_string(line_no) +
                                  ": expected 4 tab-separated fields");
            }
            ExposureInterval iv;
            iv.drug_id = std::string(fields[1]);
            iv.start_day = detail::parse_day(fields[2], exposures_path, line_no);
            iv.end_day = detail::parse_day(fields[3], exposures_path, line_no);
            if (label_seen.emplace(iv.drug_id, true).second) {
                raw.drug_labels.push_back(iv.drug_id);
            }
            const std::string subject_id(fields[0]);
            const auto found = position.find(subject_id);
            if (found == position.end()) {
                rejected.emplace(subject_id, true);
                continue;
            }
            raw.subjects[found->second].exposures.push_back(std::move(iv));
        }
    }

    {
        auto in = detail::open_for_read(events_path);
        long line_no = 0;
        while (detail::next_line(in, line)) {
            ++line_no;
            if (line.empty()) {
                continue;
            }
            detail::split_tabs(line, fields);
            if (fields.size() != 2) {
                throw input_error(events_path + ":" + std::to_string(line_no) +
                                  ": expected 2 tab-separated fields");
            }
            const std::string subject_id(fields[0]);
            const auto found = position.find(subject_id);
            if (found == position.end()) {
                rejected.emplace(subject_id, true);
                continue;
            }
            raw.subjects[found->second].events.push_back(
                EventRecord{detail::parse_day(fields[1], events_path, line_no)});
        }
    }

    raw.subjects_without_observation = static_cast<int>(rejected.size());
    return raw;
}

/// Sidecar written next to simulated data: label, generating coefficient.
inline void write_truth(const std::string& path,
                        const std::vector<std::string>& drug_ids,
                        const std::vector<double>& true_beta) {
    auto out = detail::open_for_write(path);
    out << "drug_id\ttrue_beta\n";
    for (std::size_t j = 0; j < drug_ids.size(); ++j) {
        out << drug_ids[j] << '\t' << format_double(true_beta[j]) << '\n';
    }
    if (!out) {
        throw input_error("failed while writing '" + path + "'");
    }
}

} // namespace bsccs
