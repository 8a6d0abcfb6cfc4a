/// @file reward.hpp
/// Composite reward over candidate structured outputs, best-candidate
/// selection, and pairwise explanation win-rate bookkeeping.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tsab/core.hpp"
#include "tsab/schema.hpp"

namespace tsab::reward {

class SelectionError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Weighting coefficients of the composite reward.
struct RewardWeights {
    double ano = 0.3;
    double vis = 0.3;
    double axi = 0.1;
    double cla = 0.3;
};

struct RewardBreakdown {
    double s_ano = 0.0;
    double s_vis = 0.0;
    double s_axi = 0.0;
    double s_cla = 0.0;
    double total = 0.0;
    std::string generator_id;
};

/// Length-weighted range-based F1 between predicted and ground-truth
/// intervals, computed over covered point sets. Empty prediction against
/// empty ground truth scores 1.
double score_anomaly_accuracy(const IntervalSet& pred, const IntervalSet& gt);

RewardBreakdown score_candidate(const schema::CandidateOutput& c, const IntervalSet& gt,
                                const schema::JudgeScores& judge, const RewardWeights& w);

/// Winner maximizes total; ties break on higher s_ano, then smallest
/// generator_id. Returns the winner index and the full ranking (indices into
/// the input, best first).
std::pair<std::size_t, std::vector<std::size_t>> select_best(
    const std::vector<RewardBreakdown>& breakdowns);

struct CompositionRow {
    std::string generator_id;
    std::int64_t count = 0;
    double percent = 0.0;
};

/// Per-generator counts and percentages over the selected supervision
/// targets, ordered by descending count then generator id.
std::vector<CompositionRow> composition_report(
    const std::vector<std::pair<std::string, std::string>>& selections);

struct WinRate {
    double a_percent = 0.0;
    double b_percent = 0.0;
    double tie_percent = 0.0;
    std::int64_t count = 0;
    std::string a_label;
    std::string b_label;
};

WinRate win_rate(const std::vector<schema::PairwiseVerdict>& verdicts, const std::string& a_label,
                 const std::string& b_label);

}  // namespace tsab::reward
