#include "tsab/reward.hpp"

#include <algorithm>
#include <cmath>

namespace tsab::reward {

double score_anomaly_accuracy(const IntervalSet& pred, const IntervalSet& gt) {
    const std::int64_t np = point_count(pred);
    const std::int64_t ng = point_count(gt);
    if (np == 0 && ng == 0) return 1.0;
    const std::int64_t both = point_count(intersect(pred, gt));
    const double precision = np > 0 ? double(both) / double(np) : 0.0;
    const double recall = ng > 0 ? double(both) / double(ng) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

RewardBreakdown score_candidate(const schema::CandidateOutput& c, const IntervalSet& gt,
                                const schema::JudgeScores& judge, const RewardWeights& w) {
    RewardBreakdown b;
    b.s_ano = score_anomaly_accuracy(c.intervals, gt);
    b.s_vis = judge.visual;
    b.s_axi = judge.axis;
    b.s_cla = judge.clarity;
    b.total = w.ano * b.s_ano + w.vis * b.s_vis + w.axi * b.s_axi + w.cla * b.s_cla;
    b.generator_id = c.generator_id;
    return b;
}

std::pair<std::size_t, std::vector<std::size_t>> select_best(
    const std::vector<RewardBreakdown>& breakdowns) {
    if (breakdowns.empty()) {
        throw SelectionError("cannot select from an empty candidate list");
    }
    std::vector<std::size_t> ranking(breakdowns.size());
    for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i] = i;
    std::sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = breakdowns[a];
        const auto& y = breakdowns[b];
        if (x.total != y.total) return x.total > y.total;
        if (x.s_ano != y.s_ano) return x.s_ano > y.s_ano;
        return x.generator_id < y.generator_id;
    });
    return {ranking.front(), ranking};
}

std::vector<CompositionRow> composition_report(
    const std::vector<std::pair<std::string, std::string>>& selections) {
    std::map<std::string, std::int64_t> counts;
    for (const auto& [segment_id, generator_id] : selections) {
        ++counts[generator_id];
    }
    std::vector<CompositionRow> rows;
    const double total = static_cast<double>(selections.size());
    for (const auto& [gen, n] : counts) {
        rows.push_back({gen, n, total > 0 ? 100.0 * double(n) / total : 0.0});
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.generator_id < b.generator_id;
    });
    return rows;
}

WinRate win_rate(const std::vector<schema::PairwiseVerdict>& verdicts, const std::string& a_label,
                 const std::string& b_label) {
    WinRate r;
    r.a_label = a_label;
    r.b_label = b_label;
    r.count = static_cast<std::int64_t>(verdicts.size());
    if (verdicts.empty()) return r;
    std::int64_t a = 0, b = 0, tie = 0;
    for (const auto v : verdicts) {
        if (v == schema::PairwiseVerdict::A) ++a;
        else if (v == schema::PairwiseVerdict::B) ++b;
        else ++tie;
    }
    const double n = double(r.count);
    r.a_percent = 100.0 * double(a) / n;
    r.b_percent = 100.0 * double(b) / n;
    r.tie_percent = 100.0 * double(tie) / n;
    return r;
}

}  // namespace tsab::reward
