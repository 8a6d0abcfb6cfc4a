/// @file metrics.hpp
/// Evaluation metrics: interval-level confusion and P/R/F1, Overlap score,
/// point-wise metrics, affiliation metrics, and top-fraction thresholding.

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "tsab/core.hpp"

namespace tsab::metrics {

class MetricError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Interval-level confusion counts. A ground-truth interval overlapped by
/// one or more predictions contributes exactly one TP; a prediction with no
/// ground-truth overlap is one FP; a prediction whose only overlaps are
/// already-credited ground-truth intervals counts as neither.
struct IntervalConfusion {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn_ = 0;
    std::set<std::size_t> matched_gt;    // indices into gt.intervals
    std::set<std::size_t> matched_pred;  // indices into pred.intervals
};

/// Precision/recall/F1 in percent. `defined` is false for the 0/0 cases,
/// in which the corresponding value is reported as 0.
struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool defined = true;
};

struct EvalReport {
    IntervalConfusion confusion;
    Prf interval;        // percent
    double overlap = 0.0;  // [0,1]
    bool overlap_both_empty = false;
    Prf pointwise;       // percent
    Prf affiliation;     // percent; affiliation.defined=false when no prediction
};

IntervalConfusion interval_confusion(const IntervalSet& pred, const IntervalSet& gt);

/// Percentages from raw counts; tp+fp==0 or tp+fn==0 flags `defined=false`.
Prf prf_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn);

/// |T_gt ∩ T_pred| / max(|T_gt|, |T_pred|); both empty -> 1, one empty -> 0.
double overlap_score(const IntervalSet& pred, const IntervalSet& gt);

Prf pointwise_metrics(const std::vector<bool>& pred_labels, const std::vector<bool>& gt_labels);

/// Event-level affiliation precision/recall/F1 (fractions in [0,1] scaled to
/// percent). The timeline [1, length] is partitioned into zones bounded at
/// midpoints between consecutive gt events; per-point directed distances are
/// converted to probabilities against a uniform baseline on the zone.
Prf affiliation_metrics(const IntervalSet& pred, const IntervalSet& gt, std::int64_t length);

/// Flags exactly ceil(fraction * |scores|) points with the highest scores;
/// ties at the cutoff go to the earliest index.
std::vector<bool> topk_threshold(const std::vector<double>& scores, double fraction);

EvalReport evaluate(const IntervalSet& pred, const IntervalSet& gt, std::int64_t length);

}  // namespace tsab::metrics
