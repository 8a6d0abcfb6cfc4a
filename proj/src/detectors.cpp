#include "tsab/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "tsab/metrics.hpp"

namespace tsab::detectors {

namespace {

constexpr double kEps = 1e-9;

// Average unsuccessful-search path length of a binary search tree with n
// external nodes.
double avg_path_length(std::int64_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double h = std::log(double(n - 1)) + 0.5772156649015329;
    return 2.0 * h - 2.0 * double(n - 1) / double(n);
}

struct IsolationNode {
    int split_dim = -1;
    double split_value = 0.0;
    std::int64_t size = 0;  // leaf population
    std::unique_ptr<IsolationNode> left, right;
};

class IsolationTree {
public:
    IsolationTree(const std::vector<std::vector<double>>& data, std::vector<std::size_t> items,
                  std::int64_t max_depth, std::mt19937_64& rng)
        : root_(build(data, std::move(items), 0, max_depth, rng)) {}

    double path_length(const std::vector<double>& point) const {
        const IsolationNode* node = root_.get();
        double depth = 0.0;
        while (node->split_dim >= 0) {
            node = point[std::size_t(node->split_dim)] < node->split_value ? node->left.get()
                                                                           : node->right.get();
            depth += 1.0;
        }
        return depth + avg_path_length(node->size);
    }

private:
    static std::unique_ptr<IsolationNode> build(const std::vector<std::vector<double>>& data,
                                                std::vector<std::size_t> items, std::int64_t depth,
                                                std::int64_t max_depth, std::mt19937_64& rng) {
        auto node = std::make_unique<IsolationNode>();
        if (items.size() <= 1 || depth >= max_depth) {
            node->size = std::int64_t(items.size());
            return node;
        }
        const std::size_t dims = data[items.front()].size();
        // Try a few random dimensions; a node may be wholly constant.
        for (std::size_t attempt = 0; attempt < dims; ++attempt) {
            const int dim = int(rng() % dims);
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (const auto i : items) {
                lo = std::min(lo, data[i][std::size_t(dim)]);
                hi = std::max(hi, data[i][std::size_t(dim)]);
            }
            if (!(hi > lo)) continue;
            const double u = (double(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
            const double split = lo + u * (hi - lo);
            std::vector<std::size_t> left, right;
            for (const auto i : items) {
                (data[i][std::size_t(dim)] < split ? left : right).push_back(i);
            }
            if (left.empty() || right.empty()) continue;
            node->split_dim = dim;
            node->split_value = split;
            node->left = build(data, std::move(left), depth + 1, max_depth, rng);
            node->right = build(data, std::move(right), depth + 1, max_depth, rng);
            return node;
        }
        node->size = std::int64_t(items.size());
        return node;
    }

    std::unique_ptr<IsolationNode> root_;
};

}  // namespace

std::vector<double> zscore_scores(const TimeSeries& series, std::int64_t window) {
    const std::int64_t t = series.length();
    if (window < 2 || window > t) {
        throw DetectorError("z-score window must lie in [2, T]");
    }
    const std::int64_t half = window / 2;
    std::vector<double> sum(std::size_t(t) + 1, 0.0), sq(std::size_t(t) + 1, 0.0);
    for (std::int64_t i = 1; i <= t; ++i) {
        const double v = series.values[std::size_t(i - 1)];
        sum[std::size_t(i)] = sum[std::size_t(i - 1)] + v;
        sq[std::size_t(i)] = sq[std::size_t(i - 1)] + v * v;
    }
    std::vector<double> scores(static_cast<std::size_t>(t));
    for (std::int64_t i = 1; i <= t; ++i) {
        const std::int64_t lo = std::max<std::int64_t>(1, i - half);
        const std::int64_t hi = std::min(t, i + half);
        const double n = double(hi - lo + 1);
        const double mean = (sum[std::size_t(hi)] - sum[std::size_t(lo - 1)]) / n;
        const double var =
            std::max(0.0, (sq[std::size_t(hi)] - sq[std::size_t(lo - 1)]) / n - mean * mean);
        scores[std::size_t(i - 1)] =
            std::abs(series.values[std::size_t(i - 1)] - mean) / (std::sqrt(var) + kEps);
    }
    return scores;
}

std::vector<double> matrix_profile_scores(const TimeSeries& series, std::int64_t m) {
    const std::int64_t t = series.length();
    if (m < 2) {
        throw DetectorError("subsequence length must be >= 2");
    }
    if (t < 2 * m) {
        throw DetectorError("matrix profile needs T >= 2m");
    }
    const std::int64_t n = t - m + 1;
    const std::int64_t excl = std::max<std::int64_t>(1, m / 2);

    std::vector<double> mean(static_cast<std::size_t>(n)), stdev(static_cast<std::size_t>(n));
    {
        double s = 0.0, s2 = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
            s += series.values[std::size_t(i)];
            s2 += series.values[std::size_t(i)] * series.values[std::size_t(i)];
        }
        for (std::int64_t i = 0; i < n; ++i) {
            mean[std::size_t(i)] = s / double(m);
            stdev[std::size_t(i)] = std::sqrt(
                std::max(0.0, s2 / double(m) - mean[std::size_t(i)] * mean[std::size_t(i)]));
            if (i + 1 < n) {
                const double out = series.values[std::size_t(i)];
                const double in = series.values[std::size_t(i + m)];
                s += in - out;
                s2 += in * in - out * out;
            }
        }
    }

    std::vector<double> profile(std::size_t(n), std::numeric_limits<double>::infinity());
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = i + excl; j < n; ++j) {
            const bool deg_i = stdev[std::size_t(i)] < kEps;
            const bool deg_j = stdev[std::size_t(j)] < kEps;
            double d;
            if (deg_i && deg_j) {
                d = 0.0;
            } else if (deg_i || deg_j) {
                d = std::sqrt(double(m));
            } else {
                double dot = 0.0;
                for (std::int64_t k = 0; k < m; ++k) {
                    dot += series.values[std::size_t(i + k)] * series.values[std::size_t(j + k)];
                }
                const double corr = (dot - double(m) * mean[std::size_t(i)] * mean[std::size_t(j)]) /
                                    (double(m) * stdev[std::size_t(i)] * stdev[std::size_t(j)]);
                d = std::sqrt(std::max(0.0, 2.0 * double(m) * (1.0 - corr)));
            }
            profile[std::size_t(i)] = std::min(profile[std::size_t(i)], d);
            profile[std::size_t(j)] = std::min(profile[std::size_t(j)], d);
        }
    }

    std::vector<double> scores(std::size_t(t), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t k = 0; k < m; ++k) {
            auto& s = scores[std::size_t(i + k)];
            s = std::max(s, profile[std::size_t(i)]);
        }
    }
    return scores;
}

std::vector<double> iforest_scores(const TimeSeries& series, std::int64_t window,
                                   std::int64_t trees, std::int64_t sample_size,
                                   std::uint64_t seed) {
    const std::int64_t t = series.length();
    if (window < 1 || window > t) {
        throw DetectorError("iforest window must lie in [1, T]");
    }
    const std::int64_t nw = t - window + 1;
    if (sample_size > nw) {
        throw DetectorError("sample_size " + std::to_string(sample_size) + " exceeds " +
                            std::to_string(nw) + " windows");
    }
    if (trees < 1) {
        throw DetectorError("at least one tree required");
    }

    std::vector<std::vector<double>> embed(static_cast<std::size_t>(nw));
    for (std::int64_t i = 0; i < nw; ++i) {
        embed[std::size_t(i)].assign(series.values.begin() + i, series.values.begin() + i + window);
    }

    std::mt19937_64 rng(seed);
    const std::int64_t max_depth =
        std::int64_t(std::ceil(std::log2(std::max<std::int64_t>(2, sample_size))));

    std::vector<double> path_sums(std::size_t(nw), 0.0);
    std::vector<std::size_t> pool(static_cast<std::size_t>(nw));
    std::iota(pool.begin(), pool.end(), 0);
    for (std::int64_t tree = 0; tree < trees; ++tree) {
        // Partial Fisher-Yates for a without-replacement sample.
        for (std::int64_t i = 0; i < sample_size; ++i) {
            const std::size_t j = std::size_t(i) + std::size_t(rng() % std::uint64_t(nw - i));
            std::swap(pool[std::size_t(i)], pool[j]);
        }
        IsolationTree itree(embed,
                            std::vector<std::size_t>(pool.begin(), pool.begin() + sample_size),
                            max_depth, rng);
        for (std::int64_t i = 0; i < nw; ++i) {
            path_sums[std::size_t(i)] += itree.path_length(embed[std::size_t(i)]);
        }
    }

    const double c = avg_path_length(sample_size);
    std::vector<double> window_scores(static_cast<std::size_t>(nw));
    for (std::int64_t i = 0; i < nw; ++i) {
        const double mean_path = path_sums[std::size_t(i)] / double(trees);
        window_scores[std::size_t(i)] = c > 0.0 ? std::pow(2.0, -mean_path / c) : 1.0;
    }

    std::vector<double> scores(std::size_t(t), 0.0);
    std::vector<std::int64_t> cover(std::size_t(t), 0);
    for (std::int64_t i = 0; i < nw; ++i) {
        for (std::int64_t k = 0; k < window; ++k) {
            scores[std::size_t(i + k)] += window_scores[std::size_t(i)];
            ++cover[std::size_t(i + k)];
        }
    }
    for (std::int64_t i = 0; i < t; ++i) {
        scores[std::size_t(i)] /= double(cover[std::size_t(i)]);
    }
    return scores;
}

std::vector<double> detector_scores(const TimeSeries& series, const DetectorConfig& cfg) {
    switch (cfg.kind) {
        case DetectorKind::ZScore:
            return zscore_scores(series, cfg.window);
        case DetectorKind::MatrixProfile:
            return matrix_profile_scores(series, cfg.window);
        case DetectorKind::IForest:
            return iforest_scores(series, cfg.window, cfg.trees, cfg.sample_size, cfg.seed);
    }
    throw DetectorError("unknown detector kind");
}

IntervalSet detect(const TimeSeries& series, const DetectorConfig& cfg, double fraction) {
    return labels_to_intervals(metrics::topk_threshold(detector_scores(series, cfg), fraction));
}

}  // namespace tsab::detectors
