#include "tsab/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "tsab/reward.hpp"
#include "tsab/util.hpp"

namespace tsab::ingest {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// RFC-4180 field splitter for one record (no embedded newlines supported).
std::vector<std::string> split_csv_row(const std::string& line, std::size_t row) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (quoted) {
        throw IngestError("unterminated quote at row " + std::to_string(row));
    }
    fields.push_back(cur);
    return fields;
}

double parse_value(const std::string& field, std::size_t row) {
    const std::string t = trim(field);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) {
        throw IngestError("unparsable value '" + t + "' at row " + std::to_string(row));
    }
    return v;
}

double parse_stamp(const std::string& field, std::size_t row) {
    const std::string t = trim(field);
    if (const auto ts = util::parse_timestamp(t)) return *ts;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) {
        throw IngestError("unparsable timestamp '" + t + "' at row " + std::to_string(row));
    }
    return v;
}

TimeSeries load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IngestError("empty file " + path.string());
    }
    const auto header = split_csv_row(line, 0);
    int col_ts = -1, col_val = -1, col_lab = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = trim(header[i]);
        if (name == "timestamp") col_ts = int(i);
        else if (name == "value") col_val = int(i);
        else if (name == "label") col_lab = int(i);
    }
    if (col_val < 0) {
        throw IngestError("CSV header of " + path.string() + " has no 'value' column");
    }

    TimeSeries ts;
    ts.id = path.stem().string();
    if (col_ts >= 0) ts.timestamps.emplace();
    if (col_lab >= 0) ts.labels.emplace();

    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_row(line, row);
        if (fields.size() != header.size()) {
            throw IngestError("row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(header.size()));
        }
        ts.values.push_back(parse_value(fields[std::size_t(col_val)], row));
        if (col_ts >= 0) {
            ts.timestamps->push_back(parse_stamp(fields[std::size_t(col_ts)], row));
        }
        if (col_lab >= 0) {
            const std::string lab = trim(fields[std::size_t(col_lab)]);
            if (lab != "0" && lab != "1") {
                throw IngestError("label '" + lab + "' at row " + std::to_string(row) +
                                  " must be 0 or 1");
            }
            ts.labels->push_back(lab == "1");
        }
    }
    ts.validate();
    return ts;
}

TimeSeries load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("invalid JSON in " + path.string() + ": " + e.what());
    }
    TimeSeries ts;
    ts.id = j.value("id", path.stem().string());
    if (!j.contains("values") || !j["values"].is_array()) {
        throw IngestError("manifest " + path.string() + " has no 'values' array");
    }
    for (const auto& v : j["values"]) {
        ts.values.push_back(v.get<double>());
    }
    if (j.contains("timestamps")) {
        ts.timestamps.emplace();
        std::size_t row = 0;
        for (const auto& t : j["timestamps"]) {
            ++row;
            if (t.is_number()) {
                ts.timestamps->push_back(t.get<double>());
            } else if (t.is_string()) {
                const auto parsed = util::parse_timestamp(t.get<std::string>());
                if (!parsed) {
                    throw IngestError("unparsable timestamp '" + t.get<std::string>() +
                                      "' at row " + std::to_string(row));
                }
                ts.timestamps->push_back(*parsed);
            } else {
                throw IngestError("timestamp at row " + std::to_string(row) +
                                  " is neither string nor number");
            }
        }
    }
    if (j.contains("labels")) {
        ts.labels.emplace();
        for (const auto& l : j["labels"]) {
            ts.labels->push_back(l.get<int>() != 0);
        }
    }
    ts.validate();
    return ts;
}

}  // namespace

void SegmentationCriteria::validate() const {
    if (!(0.0 < target_ratio_low && target_ratio_low < target_ratio_high &&
          target_ratio_high <= max_anomaly_ratio && max_anomaly_ratio <= 1.0)) {
        throw SpecError("invalid anomaly-ratio bounds");
    }
    if (!(0.0 <= center_low && center_low < center_high && center_high <= 1.0)) {
        throw SpecError("invalid center range");
    }
    if (min_length < 1) {
        throw SpecError("min_length must be >= 1");
    }
}

TimeSeries load_series(const std::filesystem::path& path, SeriesFormat format) {
    switch (format) {
        case SeriesFormat::Csv:
            return load_csv(path);
        case SeriesFormat::JsonManifest:
            return load_manifest(path);
    }
    throw IngestError("unknown series format");
}

std::vector<Segment> segment_series(const TimeSeries& series,
                                    const SegmentationCriteria& criteria) {
    criteria.validate();
    std::vector<Segment> out;
    if (!series.labels) return out;
    const IntervalSet gt = labels_to_intervals(*series.labels);
    if (gt.empty()) return out;

    const std::int64_t t = series.length();
    // Prefix sums of anomalous points for O(1) window ratio checks.
    std::vector<std::int64_t> anom_prefix(std::size_t(t) + 1, 0);
    std::vector<double> idx_prefix(std::size_t(t) + 1, 0.0);  // sum of anomalous indices
    for (std::int64_t i = 1; i <= t; ++i) {
        const bool on = (*series.labels)[std::size_t(i - 1)];
        anom_prefix[std::size_t(i)] = anom_prefix[std::size_t(i - 1)] + (on ? 1 : 0);
        idx_prefix[std::size_t(i)] = idx_prefix[std::size_t(i - 1)] + (on ? double(i) : 0.0);
    }
    auto anom_count = [&](std::int64_t lo, std::int64_t hi) {
        return anom_prefix[std::size_t(hi)] - anom_prefix[std::size_t(lo - 1)];
    };
    auto anom_index_sum = [&](std::int64_t lo, std::int64_t hi) {
        return idx_prefix[std::size_t(hi)] - idx_prefix[std::size_t(lo - 1)];
    };

    std::int64_t last_emitted_end = 0;
    std::size_t seg_no = 0;
    for (const auto& iv : gt.intervals) {
        const std::int64_t anom_len = iv.length();
        const double center = 0.5 * double(iv.start + iv.end);
        // Feasible window lengths so the window's own anomaly mass can land in
        // the open target ratio range. Other nearby intervals are counted when
        // the window is checked.
        std::int64_t len_lo = std::max(
            criteria.min_length,
            std::int64_t(std::floor(double(anom_len) / criteria.target_ratio_high)) + 1);
        std::int64_t len_hi =
            std::min(t, std::int64_t(std::ceil(double(anom_len) / criteria.target_ratio_low)) - 1);

        bool emitted = false;
        for (std::int64_t len = len_lo; len <= len_hi && !emitted; ++len) {
            std::int64_t lo = std::int64_t(std::llround(center - 0.5 * double(len - 1)));
            lo = std::min(std::max<std::int64_t>(lo, 1), t - len + 1);
            const std::int64_t hi = lo + len - 1;
            if (lo <= last_emitted_end) continue;  // keep segments disjoint

            const std::int64_t n_anom = anom_count(lo, hi);
            const double ratio = double(n_anom) / double(len);
            if (!(ratio > criteria.target_ratio_low && ratio < criteria.target_ratio_high)) {
                continue;
            }
            if (n_anom == 0) continue;
            const double centroid_local = anom_index_sum(lo, hi) / double(n_anom) - double(lo) + 1.0;
            const double pos = centroid_local / double(len);
            if (!(pos >= criteria.center_low && pos <= criteria.center_high)) continue;

            Segment seg;
            seg.id = series.id + "_seg" + std::to_string(++seg_no);
            seg.source.dataset_id = series.id;
            seg.source.offset_start = lo;
            seg.source.offset_end = hi;
            seg.series.id = seg.id;
            seg.series.values.assign(series.values.begin() + (lo - 1),
                                     series.values.begin() + hi);
            if (series.timestamps) {
                seg.series.timestamps.emplace(series.timestamps->begin() + (lo - 1),
                                              series.timestamps->begin() + hi);
            }
            seg.series.labels.emplace((*series.labels).begin() + (lo - 1),
                                      (*series.labels).begin() + hi);
            seg.gt = labels_to_intervals(*seg.series.labels);
            seg.validate();
            out.push_back(std::move(seg));
            last_emitted_end = hi;
            emitted = true;
        }
    }
    return out;
}

ConsensusDecision consensus_filter(const Segment& segment,
                                   const std::vector<schema::CandidateOutput>& candidates,
                                   const ConsensusPolicy& policy) {
    if (candidates.empty()) {
        throw DomainError("consensus filter needs at least one candidate");
    }
    std::size_t failing = 0;
    std::ostringstream rationale;
    for (const auto& c : candidates) {
        const double f1 = reward::score_anomaly_accuracy(c.intervals, segment.gt);
        const bool fails = !c.decision || f1 <= policy.overlap_f1_threshold;
        if (fails) ++failing;
        rationale << c.generator_id << ": "
                  << (!c.decision ? "no-anomaly" : (fails ? "disjoint" : "agrees")) << " (f1="
                  << f1 << "); ";
    }
    ConsensusDecision d;
    d.keep = 2 * failing <= candidates.size();  // drop only on strict majority
    d.rationale = rationale.str();
    return d;
}

Segment synth_series(const SynthSpec& spec) {
    if (spec.length < 1) {
        throw SpecError("synth length must be >= 1");
    }
    if (spec.anomaly_start < 1 || spec.anomaly_end > spec.length ||
        spec.anomaly_start > spec.anomaly_end) {
        throw SpecError("anomaly span (" + std::to_string(spec.anomaly_start) + "," +
                        std::to_string(spec.anomaly_end) + ") outside [1," +
                        std::to_string(spec.length) + "]");
    }

    std::mt19937_64 rng(spec.seed);
    auto uniform = [&]() {
        // 53-bit uniform in (0,1); avoids std::uniform_real_distribution so the
        // stream is identical across standard libraries.
        return (double(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    };
    auto gauss = [&]() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };

    Segment seg;
    seg.id = spec.id;
    seg.series.id = spec.id;
    seg.source.dataset_id = spec.id;
    seg.source.offset_start = 1;
    seg.source.offset_end = spec.length;
    seg.series.values.resize(std::size_t(spec.length));
    seg.series.labels.emplace(std::size_t(spec.length), false);

    double walk = spec.base_level;
    for (std::int64_t i = 1; i <= spec.length; ++i) {
        double v = 0.0;
        const bool in_anom = i >= spec.anomaly_start && i <= spec.anomaly_end;
        switch (spec.base) {
            case Waveform::Constant:
                v = spec.base_level;
                break;
            case Waveform::Sine: {
                double phase = 2.0 * M_PI * double(i - 1) / spec.sine_period;
                if (spec.anomaly == AnomalyKind::FrequencyChange && in_anom) {
                    phase *= spec.magnitude;
                }
                v = spec.base_level + spec.sine_amplitude * std::sin(phase);
                break;
            }
            case Waveform::RandomWalk:
                walk += spec.walk_step * (2.0 * uniform() - 1.0);
                v = walk;
                break;
        }
        if (in_anom) {
            switch (spec.anomaly) {
                case AnomalyKind::Spike:
                case AnomalyKind::LevelShift:
                    v += spec.magnitude;
                    break;
                case AnomalyKind::AmplitudeChange:
                    v *= spec.magnitude;
                    break;
                case AnomalyKind::FrequencyChange:
                    break;  // applied through the phase above
            }
            (*seg.series.labels)[std::size_t(i - 1)] = true;
        }
        if (spec.noise_sigma > 0.0) {
            v += spec.noise_sigma * gauss();
        }
        seg.series.values[std::size_t(i - 1)] = v;
    }
    seg.gt = labels_to_intervals(*seg.series.labels);
    seg.validate();
    return seg;
}

}  // namespace tsab::ingest
