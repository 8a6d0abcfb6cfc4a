/// @file detectors.hpp
/// Classical score-based reference detectors: rolling z-score, naive matrix
/// profile, and a sliding-window isolation forest.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsab/core.hpp"

namespace tsab::detectors {

class DetectorError : public DomainError {
public:
    using DomainError::DomainError;
};

enum class DetectorKind { ZScore, MatrixProfile, IForest };

struct DetectorConfig {
    DetectorKind kind = DetectorKind::ZScore;
    std::int64_t window = 64;
    std::int64_t trees = 100;        // iforest
    std::int64_t sample_size = 256;  // iforest
    std::uint64_t seed = 0;          // iforest
};

/// |x_t - rolling_mean| / (rolling_std + 1e-9), centered window with
/// truncated edges.
std::vector<double> zscore_scores(const TimeSeries& series, std::int64_t window);

/// Per-point maxima of the z-normalized nearest-neighbor subsequence
/// distance profile (exclusion zone m/2 around self). Requires T >= 2m.
std::vector<double> matrix_profile_scores(const TimeSeries& series, std::int64_t m);

/// Sliding-window embedding fed to an isolation forest; per-point scores are
/// the mean of 2^(-E[h]/c(n)) over covering windows. Deterministic per seed.
std::vector<double> iforest_scores(const TimeSeries& series, std::int64_t window,
                                   std::int64_t trees, std::int64_t sample_size,
                                   std::uint64_t seed);

std::vector<double> detector_scores(const TimeSeries& series, const DetectorConfig& cfg);

/// scores -> top-fraction thresholding -> labels -> intervals.
IntervalSet detect(const TimeSeries& series, const DetectorConfig& cfg, double fraction);

}  // namespace tsab::detectors
