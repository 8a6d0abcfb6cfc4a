/// @file ingest.hpp
/// Loading series from files, segmenting them under the benchmark criteria,
/// consensus filtering, and synthetic labeled fixtures.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsab/core.hpp"
#include "tsab/schema.hpp"

namespace tsab::ingest {

class IngestError : public DomainError {
public:
    using DomainError::DomainError;
};

class SpecError : public DomainError {
public:
    using DomainError::DomainError;
};

enum class SeriesFormat { Csv, JsonManifest };

struct SegmentationCriteria {
    double max_anomaly_ratio = 0.10;
    double target_ratio_low = 0.01;   // open interval (low, high)
    double target_ratio_high = 0.10;
    double center_low = 0.30;  // closed interval for the anomaly centroid position
    double center_high = 0.70;
    std::int64_t min_length = 200;

    void validate() const;
};

struct ConsensusPolicy {
    /// A candidate "substantially differs" when its range-based F1 against
    /// the ground truth is <= this threshold.
    double overlap_f1_threshold = 0.0;
};

struct ConsensusDecision {
    bool keep = true;
    std::string rationale;
};

enum class Waveform { Constant, Sine, RandomWalk };
enum class AnomalyKind { Spike, LevelShift, AmplitudeChange, FrequencyChange };

struct SynthSpec {
    std::int64_t length = 1000;
    Waveform base = Waveform::Constant;
    double base_level = 0.0;
    double sine_period = 100.0;
    double sine_amplitude = 1.0;
    double walk_step = 0.1;
    double noise_sigma = 0.0;
    AnomalyKind anomaly = AnomalyKind::Spike;
    std::int64_t anomaly_start = 0;  // 1-based inclusive
    std::int64_t anomaly_end = 0;
    double magnitude = 1.0;
    std::uint64_t seed = 0;
    std::string id = "synth";
};

TimeSeries load_series(const std::filesystem::path& path, SeriesFormat format);

/// Emits non-overlapping segments, each independently satisfying the ratio,
/// centering, and minimum-length criteria. Series without labels (or without
/// any labeled anomaly) yield an empty sequence.
std::vector<Segment> segment_series(const TimeSeries& series, const SegmentationCriteria& criteria);

/// Drop iff a strict majority of candidates either predict no anomaly or
/// have no meaningful overlap with the ground truth.
ConsensusDecision consensus_filter(const Segment& segment,
                                   const std::vector<schema::CandidateOutput>& candidates,
                                   const ConsensusPolicy& policy);

/// Deterministic synthetic segment; labels mark exactly the injected span.
Segment synth_series(const SynthSpec& spec);

}  // namespace tsab::ingest
