#include "tsab/core.hpp"

#include <algorithm>

namespace tsab {

void TimeSeries::validate() const {
    if (values.empty()) {
        throw DomainError("time series must contain at least one value");
    }
    if (timestamps) {
        if (timestamps->size() != values.size()) {
            throw DomainError("timestamps length does not match values length");
        }
        for (std::size_t i = 1; i < timestamps->size(); ++i) {
            if (!((*timestamps)[i - 1] < (*timestamps)[i])) {
                throw DomainError("timestamps are not strictly increasing at position " +
                                  std::to_string(i + 1));
            }
        }
    }
    if (labels && labels->size() != values.size()) {
        throw DomainError("labels length does not match values length");
    }
}

void Segment::validate() const {
    series.validate();
    const std::int64_t n = series.length();
    for (const auto& iv : gt.intervals) {
        if (iv.start < 1 || iv.end > n || iv.start > iv.end) {
            throw BoundsError("ground-truth interval (" + std::to_string(iv.start) + "," +
                              std::to_string(iv.end) + ") outside series of length " +
                              std::to_string(n));
        }
    }
}

IntervalSet normalize(const std::vector<AnomalyInterval>& intervals) {
    for (const auto& iv : intervals) {
        if (iv.start > iv.end) {
            throw MalformedIntervalError("interval start " + std::to_string(iv.start) +
                                         " exceeds end " + std::to_string(iv.end));
        }
    }
    std::vector<AnomalyInterval> sorted = intervals;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.start < b.start || (a.start == b.start && a.end < b.end);
    });

    IntervalSet out;
    for (const auto& iv : sorted) {
        if (!out.intervals.empty() && iv.start <= out.intervals.back().end + 1) {
            out.intervals.back().end = std::max(out.intervals.back().end, iv.end);
        } else {
            out.intervals.push_back(iv);
        }
    }
    return out;
}

IntervalSet labels_to_intervals(const std::vector<bool>& labels) {
    IntervalSet out;
    const std::int64_t n = static_cast<std::int64_t>(labels.size());
    std::int64_t run_start = 0;
    for (std::int64_t i = 1; i <= n; ++i) {
        const bool on = labels[static_cast<std::size_t>(i - 1)];
        if (on && run_start == 0) {
            run_start = i;
        } else if (!on && run_start != 0) {
            out.intervals.emplace_back(run_start, i - 1);
            run_start = 0;
        }
    }
    if (run_start != 0) {
        out.intervals.emplace_back(run_start, n);
    }
    return out;
}

std::vector<bool> intervals_to_labels(const IntervalSet& set, std::int64_t length) {
    std::vector<bool> labels(static_cast<std::size_t>(length), false);
    for (const auto& iv : set.intervals) {
        if (iv.start < 1 || iv.end > length) {
            throw BoundsError("interval (" + std::to_string(iv.start) + "," +
                              std::to_string(iv.end) + ") out of range for length " +
                              std::to_string(length));
        }
        for (std::int64_t i = iv.start; i <= iv.end; ++i) {
            labels[static_cast<std::size_t>(i - 1)] = true;
        }
    }
    return labels;
}

std::int64_t point_count(const IntervalSet& set) {
    std::int64_t total = 0;
    for (const auto& iv : set.intervals) {
        total += iv.length();
    }
    return total;
}

IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
    IntervalSet out;
    std::size_t i = 0, j = 0;
    while (i < a.intervals.size() && j < b.intervals.size()) {
        const auto& x = a.intervals[i];
        const auto& y = b.intervals[j];
        const std::int64_t lo = std::max(x.start, y.start);
        const std::int64_t hi = std::min(x.end, y.end);
        if (lo <= hi) {
            out.intervals.emplace_back(lo, hi);
        }
        if (x.end < y.end) {
            ++i;
        } else {
            ++j;
        }
    }
    // Intersection of normalized sets can leave adjacent pieces; re-merge.
    return normalize(out.intervals);
}

bool overlaps(const AnomalyInterval& a, const AnomalyInterval& b) {
    return a.start <= b.end && b.start <= a.end;
}

}  // namespace tsab
