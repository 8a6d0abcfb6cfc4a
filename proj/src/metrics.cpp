#include "tsab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tsab::metrics {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double interval_point_distance(double p, const AnomalyInterval& iv) {
    if (p < iv.start) return double(iv.start) - p;
    if (p > iv.end) return p - double(iv.end);
    return 0.0;
}

// P(dist(X, iv) >= d) for X uniform on [a, b], iv inside [a, b].
double survival_vs_interval(double d, const AnomalyInterval& iv, double a, double b) {
    if (d <= 0.0) return 1.0;
    const double len = b - a;
    if (len <= 0.0) return 0.0;
    const double left = clamp(double(iv.start) - d - a, 0.0, len);
    const double right = clamp(b - (double(iv.end) + d), 0.0, len);
    return (left + right) / len;
}

// P(|Y - y| >= d) for Y uniform on [a, b].
double survival_vs_point(double d, double y, double a, double b) {
    if (d <= 0.0) return 1.0;
    const double len = b - a;
    if (len <= 0.0) return 0.0;
    const double left = clamp(y - d - a, 0.0, len);
    const double right = clamp(b - (y + d), 0.0, len);
    return (left + right) / len;
}

}  // namespace

IntervalConfusion interval_confusion(const IntervalSet& pred, const IntervalSet& gt) {
    IntervalConfusion c;
    for (std::size_t j = 0; j < pred.intervals.size(); ++j) {
        bool any = false;
        for (std::size_t i = 0; i < gt.intervals.size(); ++i) {
            if (overlaps(pred.intervals[j], gt.intervals[i])) {
                any = true;
                c.matched_gt.insert(i);
            }
        }
        if (any) {
            c.matched_pred.insert(j);
        } else {
            ++c.fp;
        }
    }
    c.tp = static_cast<std::int64_t>(c.matched_gt.size());
    c.fn_ = static_cast<std::int64_t>(gt.intervals.size()) - c.tp;
    return c;
}

Prf prf_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    Prf out;
    const bool p_def = tp + fp > 0;
    const bool r_def = tp + fn > 0;
    const double p = p_def ? double(tp) / double(tp + fp) : 0.0;
    const double r = r_def ? double(tp) / double(tp + fn) : 0.0;
    out.precision = 100.0 * p;
    out.recall = 100.0 * r;
    out.f1 = (p + r > 0.0) ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
    out.defined = p_def && r_def;
    return out;
}

double overlap_score(const IntervalSet& pred, const IntervalSet& gt) {
    const std::int64_t np = point_count(pred);
    const std::int64_t ng = point_count(gt);
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;
    const std::int64_t both = point_count(intersect(pred, gt));
    return double(both) / double(std::max(np, ng));
}

Prf pointwise_metrics(const std::vector<bool>& pred_labels, const std::vector<bool>& gt_labels) {
    if (pred_labels.size() != gt_labels.size()) {
        throw MetricError("label sequences have different lengths: " +
                          std::to_string(pred_labels.size()) + " vs " +
                          std::to_string(gt_labels.size()));
    }
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred_labels.size(); ++i) {
        if (pred_labels[i] && gt_labels[i]) ++tp;
        else if (pred_labels[i]) ++fp;
        else if (gt_labels[i]) ++fn;
    }
    return prf_from_counts(tp, fp, fn);
}

Prf affiliation_metrics(const IntervalSet& pred, const IntervalSet& gt, std::int64_t length) {
    if (gt.empty()) {
        throw MetricError("affiliation metrics are undefined for empty ground truth");
    }
    for (const auto& iv : gt.intervals) {
        if (iv.start < 1 || iv.end > length) {
            throw MetricError("ground-truth interval out of range");
        }
    }
    for (const auto& iv : pred.intervals) {
        if (iv.start < 1 || iv.end > length) {
            throw MetricError("predicted interval out of range");
        }
    }

    const std::size_t n = gt.intervals.size();
    // Zone boundaries: timeline edges plus midpoints between consecutive events.
    std::vector<double> bounds(n + 1);
    bounds[0] = 1.0;
    bounds[n] = double(length);
    for (std::size_t j = 1; j < n; ++j) {
        bounds[j] = 0.5 * (double(gt.intervals[j - 1].end) + double(gt.intervals[j].start));
    }

    // Predicted integer points per zone (split at zone borders).
    std::vector<std::vector<double>> zone_pred(n);
    for (const auto& iv : pred.intervals) {
        for (std::int64_t p = iv.start; p <= iv.end; ++p) {
            std::size_t j = std::upper_bound(bounds.begin() + 1, bounds.end() - 1, double(p)) -
                            (bounds.begin() + 1);
            zone_pred[j].push_back(double(p));
        }
    }

    double prec_sum = 0.0;
    std::size_t prec_zones = 0;
    double rec_sum = 0.0;

    for (std::size_t j = 0; j < n; ++j) {
        const double a = bounds[j];
        const double b = bounds[j + 1];
        const auto& event = gt.intervals[j];
        const auto& pts = zone_pred[j];

        if (!pts.empty()) {
            double s = 0.0;
            for (const double p : pts) {
                s += survival_vs_interval(interval_point_distance(p, event), event, a, b);
            }
            prec_sum += s / double(pts.size());
            ++prec_zones;
        }

        double s = 0.0;
        if (!pts.empty()) {
            for (std::int64_t y = event.start; y <= event.end; ++y) {
                auto it = std::lower_bound(pts.begin(), pts.end(), double(y));
                double d = std::numeric_limits<double>::infinity();
                if (it != pts.end()) d = std::min(d, *it - double(y));
                if (it != pts.begin()) d = std::min(d, double(y) - *std::prev(it));
                s += survival_vs_point(d, double(y), a, b);
            }
        }
        rec_sum += s / double(event.length());
    }

    Prf out;
    const bool p_def = prec_zones > 0;
    const double p = p_def ? prec_sum / double(prec_zones) : 0.0;
    const double r = rec_sum / double(n);
    out.precision = 100.0 * p;
    out.recall = 100.0 * r;
    out.f1 = (p + r > 0.0) ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
    out.defined = p_def;
    return out;
}

std::vector<bool> topk_threshold(const std::vector<double>& scores, double fraction) {
    if (scores.empty()) {
        throw MetricError("cannot threshold an empty score sequence");
    }
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw MetricError("fraction must lie in (0, 1]");
    }
    const std::int64_t t = static_cast<std::int64_t>(scores.size());
    std::int64_t k = static_cast<std::int64_t>(std::ceil(fraction * double(t) - 1e-9));
    k = std::min(std::max<std::int64_t>(k, 0), t);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];  // stable: ties keep earliest index first
    });
    std::vector<bool> labels(scores.size(), false);
    for (std::int64_t i = 0; i < k; ++i) {
        labels[order[static_cast<std::size_t>(i)]] = true;
    }
    return labels;
}

EvalReport evaluate(const IntervalSet& pred, const IntervalSet& gt, std::int64_t length) {
    EvalReport r;
    r.confusion = interval_confusion(pred, gt);
    r.interval = prf_from_counts(r.confusion.tp, r.confusion.fp, r.confusion.fn_);
    r.overlap = overlap_score(pred, gt);
    r.overlap_both_empty = pred.empty() && gt.empty();
    r.pointwise = pointwise_metrics(intervals_to_labels(pred, length),
                                    intervals_to_labels(gt, length));
    if (!gt.empty()) {
        r.affiliation = affiliation_metrics(pred, gt, length);
    } else {
        r.affiliation.defined = false;
    }
    return r;
}

}  // namespace tsab::metrics
