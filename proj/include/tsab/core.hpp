/// @file core.hpp
/// Domain types and interval algebra shared by every other module.
///
/// Indices are 1-based and inclusive everywhere inside the library; file
/// formats declare their own convention and are converted at the ingest
/// boundary.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsab {

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedIntervalError : public DomainError {
public:
    using DomainError::DomainError;
};

class BoundsError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Inclusive index range [start, end], 1-based. Single-point anomalies are
/// represented as (s, s).
struct AnomalyInterval {
    std::int64_t start = 0;
    std::int64_t end = 0;

    AnomalyInterval() = default;
    AnomalyInterval(std::int64_t s, std::int64_t e) : start(s), end(e) {}

    std::int64_t length() const { return end - start + 1; }

    friend bool operator==(const AnomalyInterval&, const AnomalyInterval&) = default;
};

/// Sorted, non-overlapping, non-adjacent inclusive intervals.
/// Construct via normalize() unless the input is already canonical.
struct IntervalSet {
    std::vector<AnomalyInterval> intervals;

    IntervalSet() = default;
    explicit IntervalSet(std::vector<AnomalyInterval> ivs) : intervals(std::move(ivs)) {}

    bool empty() const { return intervals.empty(); }
    std::size_t size() const { return intervals.size(); }

    friend bool operator==(const IntervalSet&, const IntervalSet&) = default;
};

/// Ordered numeric observations with optional timestamps (epoch seconds,
/// strictly increasing) and optional point-level anomaly labels.
struct TimeSeries {
    std::vector<double> values;
    std::optional<std::vector<double>> timestamps;
    std::optional<std::vector<bool>> labels;
    std::string id;

    std::int64_t length() const { return static_cast<std::int64_t>(values.size()); }

    /// Checks the type invariants; throws DomainError on violation.
    void validate() const;
};

/// Provenance of a segment within its source series.
struct SegmentSource {
    std::string dataset_id;
    std::int64_t offset_start = 0;  // 1-based index into the source series
    std::int64_t offset_end = 0;
};

/// One benchmark item: a series window, its ground-truth intervals, and
/// optional free-text context shown to the models.
struct Segment {
    std::string id;
    TimeSeries series;
    IntervalSet gt;
    SegmentSource source;
    std::string context;

    void validate() const;
};

/// Sorts and merges overlapping or directly adjacent intervals. The covered
/// point set is preserved exactly.
IntervalSet normalize(const std::vector<AnomalyInterval>& intervals);

/// Maximal runs of true become intervals (1-based).
IntervalSet labels_to_intervals(const std::vector<bool>& labels);

/// Inverse of labels_to_intervals for intervals within [1, length].
std::vector<bool> intervals_to_labels(const IntervalSet& set, std::int64_t length);

/// Total number of covered points.
std::int64_t point_count(const IntervalSet& set);

/// Point-set intersection of two normalized sets.
IntervalSet intersect(const IntervalSet& a, const IntervalSet& b);

/// True iff the inclusive intervals share at least one point.
bool overlaps(const AnomalyInterval& a, const AnomalyInterval& b);

}  // namespace tsab
