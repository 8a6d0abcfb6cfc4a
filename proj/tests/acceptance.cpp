/// @file acceptance.cpp
/// Acceptance suite: one pass/fail line per criterion. Exit code 0 only when
/// every criterion passes. Fully hermetic; no network, no external data.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <vector>

#include "tsab/detectors.hpp"
#include "tsab/ingest.hpp"
#include "tsab/metrics.hpp"
#include "tsab/pipeline.hpp"
#include "tsab/render.hpp"
#include "tsab/reward.hpp"
#include "tsab/schema.hpp"

using namespace tsab;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& label, const std::function<bool()>& body) {
    bool ok = false;
    std::string error;
    try {
        ok = body();
    } catch (const std::exception& e) {
        error = e.what();
    }
    std::printf("[%s] criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", number, label.c_str(),
                error.empty() ? "" : " -- ", error.c_str());
    if (!ok) ++g_failures;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

IntervalSet make(std::initializer_list<std::pair<int, int>> ivs) {
    std::vector<AnomalyInterval> v;
    for (const auto& [s, e] : ivs) v.emplace_back(s, e);
    return normalize(v);
}

IntervalSet set_from_mask(unsigned mask, int bits) {
    std::vector<bool> labels(static_cast<std::size_t>(bits));
    for (int i = 0; i < bits; ++i) labels[std::size_t(i)] = (mask >> i) & 1;
    return labels_to_intervals(labels);
}

// Independent confusion matcher: one TP per overlapped ground-truth
// interval, one FP per prediction overlapping nothing, FN for the rest.
void brute_confusion(const IntervalSet& pred, const IntervalSet& gt, std::int64_t& tp,
                     std::int64_t& fp, std::int64_t& fn) {
    tp = fp = fn = 0;
    for (const auto& g : gt.intervals) {
        bool hit = false;
        for (const auto& p : pred.intervals) hit = hit || overlaps(p, g);
        (hit ? tp : fn) += 1;
    }
    for (const auto& p : pred.intervals) {
        bool any = false;
        for (const auto& g : gt.intervals) any = any || overlaps(p, g);
        if (!any) ++fp;
    }
}

IntervalSet random_set(std::mt19937_64& rng, std::int64_t length) {
    std::vector<bool> labels(static_cast<std::size_t>(length));
    for (auto&& l : labels) l = (rng() & 3) == 0;
    return labels_to_intervals(labels);
}

// Numerical-integration affiliation oracle for a single ground-truth event:
// the survival probabilities are integrated directly over the zone.
void affiliation_oracle_single_event(const AnomalyInterval& event, const IntervalSet& pred,
                                     std::int64_t length, double& precision, double& recall) {
    const double a = 1.0, b = double(length);
    const std::int64_t steps = 20000000;
    const double dx = (b - a) / double(steps);
    const auto dist_to_event = [&](double x) {
        if (x < double(event.start)) return double(event.start) - x;
        if (x > double(event.end)) return x - double(event.end);
        return 0.0;
    };
    std::vector<double> pred_points;
    for (const auto& iv : pred.intervals) {
        for (std::int64_t p = iv.start; p <= iv.end; ++p) pred_points.push_back(double(p));
    }
    const auto dist_to_pred = [&](double x) {
        double d = 1e300;
        for (const double p : pred_points) d = std::min(d, std::abs(x - p));
        return d;
    };

    double prec_sum = 0.0;
    for (const double p : pred_points) {
        const double d = dist_to_event(p);
        std::int64_t above = 0;
        for (std::int64_t i = 0; i < steps; ++i) {
            const double x = a + (double(i) + 0.5) * dx;
            if (dist_to_event(x) >= d) ++above;
        }
        prec_sum += double(above) / double(steps);
    }
    precision = pred_points.empty() ? 0.0 : prec_sum / double(pred_points.size());

    double rec_sum = 0.0;
    for (std::int64_t y = event.start; y <= event.end; ++y) {
        const double d = dist_to_pred(double(y));
        std::int64_t above = 0;
        for (std::int64_t i = 0; i < steps; ++i) {
            const double x = a + (double(i) + 0.5) * dx;
            if (std::abs(x - double(y)) >= d) ++above;
        }
        rec_sum += double(above) / double(steps);
    }
    recall = rec_sum / double(event.length());
}

Segment spike_fixture(int idx, std::int64_t length = 1000) {
    ingest::SynthSpec spec;
    spec.length = length;
    spec.anomaly_start = 476;
    spec.anomaly_end = 525;
    spec.magnitude = 20.0 + double(idx);
    spec.seed = std::uint64_t(idx);
    spec.id = "fixture" + std::to_string(idx);
    auto seg = ingest::synth_series(spec);
    seg.context = "synthetic spike fixture " + std::to_string(idx);
    return seg;
}

std::string candidate_text(const IntervalSet& ivs, const std::string& note) {
    schema::CandidateOutput c;
    c.decision = !ivs.empty();
    c.intervals = ivs;
    c.reasoning.steps = {"baseline is flat.", note};
    return schema::serialize_structured_output(c);
}

}  // namespace

int main() {
    criterion(1, "published corpus P/R/F1 rows within 0.01", [] {
        const auto a = metrics::prf_from_counts(576, 223, 183);
        const auto b = metrics::prf_from_counts(564, 240, 195);
        return near(a.precision, 72.09, 0.01) && near(a.recall, 75.88, 0.01) &&
               near(a.f1, 73.94, 0.01) && near(b.precision, 70.15, 0.01) &&
               near(b.recall, 74.30, 0.01) && near(b.f1, 72.17, 0.01);
    });

    criterion(2, "selection-mixture percentages within 0.1", [] {
        std::vector<std::pair<std::string, std::string>> sel;
        const int counts[4] = {605, 1007, 549, 415};
        const double expect[4] = {23.5, 39.1, 21.3, 16.1};
        for (int g = 0; g < 4; ++g) {
            for (int i = 0; i < counts[g]; ++i) sel.emplace_back("s", "g" + std::to_string(g));
        }
        const auto rows = reward::composition_report(sel);
        if (rows.size() != 4) return false;
        for (int g = 0; g < 4; ++g) {
            double got = -1;
            for (const auto& r : rows) {
                if (r.generator_id == "g" + std::to_string(g)) got = r.percent;
            }
            if (!near(got, expect[g], 0.1)) return false;
        }
        return true;
    });

    criterion(3, "pairwise win-rate percentages within 0.1", [] {
        std::vector<schema::PairwiseVerdict> v;
        v.insert(v.end(), 515, schema::PairwiseVerdict::A);
        v.insert(v.end(), 220, schema::PairwiseVerdict::B);
        v.insert(v.end(), 5, schema::PairwiseVerdict::Tie);
        const auto wr = reward::win_rate(v, "a", "b");
        return wr.count == 740 && near(wr.a_percent, 69.6, 0.1) &&
               near(wr.b_percent, 29.7, 0.1) && near(wr.tie_percent, 0.7, 0.1);
    });

    criterion(4, "interval confusion matches the exhaustive brute-force matcher", [] {
        constexpr int bits = 12;
        std::vector<IntervalSet> sets;
        for (unsigned mask = 0; mask < (1u << bits); ++mask) {
            auto s = set_from_mask(mask, bits);
            if (s.size() <= 3) sets.push_back(std::move(s));
        }
        for (const auto& pred : sets) {
            for (const auto& gt : sets) {
                std::int64_t tp, fp, fn;
                brute_confusion(pred, gt, tp, fp, fn);
                const auto c = metrics::interval_confusion(pred, gt);
                if (c.tp != tp || c.fp != fp || c.fn_ != fn) return false;
            }
        }
        return true;
    });

    criterion(5, "overlap symmetry/range/identity/disjoint/overextension (10k fuzz)", [] {
        std::mt19937_64 rng(101);
        for (int trial = 0; trial < 10000; ++trial) {
            const auto a = random_set(rng, 60);
            const auto b = random_set(rng, 60);
            const double ab = metrics::overlap_score(a, b);
            if (ab != metrics::overlap_score(b, a)) return false;
            if (ab < 0.0 || ab > 1.0) return false;
            if (metrics::overlap_score(a, a) != 1.0) return false;
            // Disjoint by construction: shift b past the timeline of a.
            if (!a.empty() && !b.empty()) {
                std::vector<AnomalyInterval> shifted;
                for (const auto& iv : b.intervals) {
                    shifted.emplace_back(iv.start + 100, iv.end + 100);
                }
                if (metrics::overlap_score(a, IntervalSet(shifted)) != 0.0) return false;
            }
            // Overextension: growing a gt-equal prediction past the last
            // ground-truth point strictly lowers the score at every step.
            if (!a.empty()) {
                double prev = 1.0;
                auto extended = a;
                for (int k = 1; k <= 5; ++k) {
                    extended.intervals.back().end += 1;
                    const double cur = metrics::overlap_score(extended, a);
                    if (!(cur < prev)) return false;
                    prev = cur;
                }
            }
        }
        return true;
    });

    criterion(6, "reward totals 1.0/0.0/0.3, monotonicity (10k), tie-breaks", [] {
        const reward::RewardWeights w;
        const auto gt = make({{5, 9}});
        schema::CandidateOutput hit;
        hit.decision = true;
        hit.intervals = gt;
        schema::CandidateOutput miss;
        miss.decision = true;
        miss.intervals = make({{20, 25}});
        if (!near(reward::score_candidate(hit, gt, {1, 1, 1}, w).total, 1.0, 1e-12)) return false;
        if (!near(reward::score_candidate(miss, gt, {0, 0, 0}, w).total, 0.0, 1e-12)) return false;
        if (!near(reward::score_candidate(hit, gt, {0, 0, 0}, w).total, 0.3, 1e-12)) return false;

        std::mt19937_64 rng(103);
        const auto u = [&] { return double(rng() % 1001) / 1000.0; };
        for (int trial = 0; trial < 10000; ++trial) {
            schema::JudgeScores base{u(), u(), u()};
            schema::JudgeScores up = base;
            switch (rng() % 3) {
                case 0: up.visual = std::min(1.0, up.visual + u()); break;
                case 1: up.axis = std::min(1.0, up.axis + u()); break;
                default: up.clarity = std::min(1.0, up.clarity + u()); break;
            }
            const double before = reward::score_candidate(hit, gt, base, w).total;
            const double after = reward::score_candidate(hit, gt, up, w).total;
            if (after < before - 1e-12 || before < -1e-12 || after > 1.0 + 1e-12) return false;
        }

        const auto bd = [](double total, double s_ano, const char* gen) {
            reward::RewardBreakdown b;
            b.total = total;
            b.s_ano = s_ano;
            b.generator_id = gen;
            return b;
        };
        if (reward::select_best({bd(0.9, 0, "a"), bd(0.7, 0, "b")}).first != 0) return false;
        if (reward::select_best({bd(0.8, 0.5, "a"), bd(0.8, 0.8, "b")}).first != 1) return false;
        if (reward::select_best({bd(0.8, 0.5, "b"), bd(0.8, 0.5, "a")}).first != 1) return false;
        return true;
    });

    criterion(7, "structured-output round-trip (1000) and hard-error cases", [] {
        std::mt19937_64 rng(107);
        for (int trial = 0; trial < 1000; ++trial) {
            schema::CandidateOutput c;
            c.decision = (rng() & 1) != 0;
            if (c.decision) {
                std::vector<bool> labels(100);
                while (labels_to_intervals(labels).empty()) {
                    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (rng() & 7) == 0;
                }
                c.intervals = labels_to_intervals(labels);
            }
            for (std::size_t i = 0, k = rng() % 4; i < k; ++i) {
                c.reasoning.steps.push_back("note " + std::to_string(rng() % 100) + ".");
            }
            const auto back =
                schema::parse_structured_output(schema::serialize_structured_output(c));
            if (back.decision != c.decision || back.intervals != c.intervals ||
                back.reasoning.steps.size() != c.reasoning.steps.size()) {
                return false;
            }
        }
        const auto throws = [](const char* text) {
            try {
                schema::parse_structured_output(text);
                return false;
            } catch (const schema::SchemaError&) {
                return true;
            }
        };
        return throws("no tags") &&
               throws("<anomaly>False</anomaly><index>(1,2)</index>") &&
               throws("<anomaly>True</anomaly>") &&
               throws("<anomaly>True</anomaly><index>(foo,bar)</index>");
    });

    criterion(8, "1000 random series: every emitted segment re-verifies the criteria", [] {
        std::mt19937_64 rng(109);
        const ingest::SegmentationCriteria c;
        int emitted = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            TimeSeries src;
            src.id = "fuzz";
            const std::int64_t t = 200 + std::int64_t(rng() % 2500);
            src.values.assign(std::size_t(t), 0.0);
            std::vector<bool> labels(std::size_t(t), false);
            for (int e = 0, n = int(rng() % 4); e < n; ++e) {
                const std::int64_t s = 1 + std::int64_t(rng() % std::uint64_t(t));
                for (std::int64_t i = s, stop = std::min(t, s + std::int64_t(rng() % 60));
                     i <= stop; ++i) {
                    labels[std::size_t(i - 1)] = true;
                }
            }
            src.labels = labels;
            std::int64_t prev_end = 0;
            for (const auto& seg : ingest::segment_series(src, c)) {
                ++emitted;
                const std::int64_t len = seg.series.length();
                if (len < c.min_length) return false;
                if (seg.source.offset_start <= prev_end) return false;
                prev_end = seg.source.offset_end;
                std::int64_t n_anom = 0;
                double index_sum = 0.0;
                for (std::int64_t i = 1; i <= len; ++i) {
                    const bool on = labels[std::size_t(seg.source.offset_start + i - 2)];
                    if (on != (*seg.series.labels)[std::size_t(i - 1)]) return false;
                    if (on) {
                        ++n_anom;
                        index_sum += double(i);
                    }
                }
                const double ratio = double(n_anom) / double(len);
                if (!(ratio > c.target_ratio_low && ratio < c.target_ratio_high)) return false;
                const double pos = index_sum / double(n_anom) / double(len);
                if (!(pos >= c.center_low && pos <= c.center_high)) return false;
            }
        }
        return emitted > 0;
    });

    criterion(9, "renderer determinism on 20 fixtures; degenerate-series rule", [] {
        const render::RenderConfig cfg;
        for (int i = 0; i < 20; ++i) {
            ingest::SynthSpec spec;
            spec.length = 600 + 20 * i;
            spec.base = (i % 2) ? ingest::Waveform::Sine : ingest::Waveform::RandomWalk;
            spec.noise_sigma = 0.05;
            spec.anomaly_start = 300;
            spec.anomaly_end = 310 + i;
            spec.magnitude = 2.0;
            spec.seed = std::uint64_t(i);
            spec.id = "render" + std::to_string(i);
            const auto seg = ingest::synth_series(spec);
            if (render::render_plot(seg, cfg) != render::render_plot(seg, cfg)) return false;
        }
        // Degenerate rule: a constant series renders (y-range widened), stays
        // deterministic, and the produced bytes form a PNG.
        Segment flat;
        flat.id = "flat";
        flat.series.id = "flat";
        flat.series.values.assign(400, 7.5);
        const auto png = render::render_plot(flat, cfg);
        if (png != render::render_plot(flat, cfg)) return false;
        static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
        for (int i = 0; i < 8; ++i) {
            if (png[std::size_t(i)] != sig[i]) return false;
        }
        // A different constant level must change the axis labels (the y-range
        // adapts to value +/- 1 rather than being fixed).
        Segment other = flat;
        other.series.values.assign(400, 200.0);
        return render::render_plot(other, cfg) != png;
    });

    criterion(10, "affiliation: exact match perfect (100 fuzz); oracle within 1e-6", [] {
        std::mt19937_64 rng(113);
        for (int trial = 0; trial < 100; ++trial) {
            auto gt = random_set(rng, 150);
            if (gt.empty()) gt = make({{40, 45}});
            const auto r = metrics::affiliation_metrics(gt, gt, 150);
            if (!near(r.precision, 100.0, 1e-9) || !near(r.recall, 100.0, 1e-9)) return false;
        }
        const auto got = metrics::affiliation_metrics(make({{60, 60}}), make({{50, 50}}), 100);
        double op = 0.0, orc = 0.0;
        affiliation_oracle_single_event({50, 50}, make({{60, 60}}), 100, op, orc);
        return near(got.precision / 100.0, op, 1e-6) && near(got.recall / 100.0, orc, 1e-6);
    });

    criterion(11, "hermetic end-to-end: 20/20 planted winners; gt-equal eval = 100", [] {
        std::vector<Segment> segments;
        for (int i = 0; i < 20; ++i) segments.push_back(spike_fixture(i));
        const render::RenderConfig rc;

        // Four generators with a planted quality ordering per segment.
        const std::vector<std::string> gens{"gen-best", "gen-good", "gen-weak", "gen-bad"};
        std::map<std::string, std::shared_ptr<llm::MockChatClient>> clients;
        for (const auto& g : gens) {
            clients[g] = std::make_shared<llm::MockChatClient>(
                g, std::map<std::string, std::string>{});
        }
        llm::MockChatClient judge("mock-judge", {});
        const std::map<std::string, std::string> judge_scores{
            {"gen-best", "VISUAL: 0.9\nAXIS: 0.9\nCLARITY: 0.9"},
            {"gen-good", "VISUAL: 0.8\nAXIS: 0.8\nCLARITY: 0.8"},
            {"gen-weak", "VISUAL: 0.5\nAXIS: 0.5\nCLARITY: 0.5"},
            {"gen-bad", "VISUAL: 0.2\nAXIS: 0.2\nCLARITY: 0.2"}};

        for (const auto& seg : segments) {
            const auto png = render::render_plot(seg, rc);
            auto prompt = llm::build_elicitation_prompt(seg.context, seg.gt, rc.x_axis_mode);
            prompt.image = png;
            const auto& g = seg.gt.intervals[0];
            const std::map<std::string, std::string> texts{
                {"gen-best", candidate_text(seg.gt, "the spike matches exactly.")},
                {"gen-good", candidate_text(make({{int(g.start) + 4, int(g.end) + 4}}),
                                            "the spike, slightly shifted.")},
                {"gen-weak", candidate_text(make({{int(g.start) + 20, int(g.end) + 20}}),
                                            "a rough guess.")},
                {"gen-bad", candidate_text({}, "nothing stands out.")}};
            for (const auto& [gen, text] : texts) {
                clients[gen]->add(llm::fingerprint(gen, prompt), text);
                const auto parsed = schema::parse_structured_output(text);
                const auto serialized = schema::serialize_structured_output(parsed);
                auto jp = llm::build_judge_prompt(seg.context,
                                                  serialized.substr(0, serialized.find('\n')),
                                                  parsed.reasoning.raw);
                jp.image = png;
                judge.add(llm::fingerprint("mock-judge", jp), judge_scores.at(gen));
            }
        }

        std::vector<std::shared_ptr<llm::ChatClient>> generators(
            {clients["gen-best"], clients["gen-good"], clients["gen-weak"], clients["gen-bad"]});
        const auto candidates = pipeline::elicit_candidates(segments, generators, rc);
        if (candidates.size() != 80) return false;
        for (const auto& c : candidates) {
            if (!c.parse_ok) return false;
        }

        const auto selections =
            pipeline::select_candidates(segments, candidates, judge, rc, {}, {});
        if (selections.size() != 20) return false;
        for (const auto& s : selections) {
            if (s.excluded || s.winner_generator != "gen-best") return false;
        }

        std::vector<pipeline::PredictionRecord> preds;
        for (const auto& seg : segments) preds.push_back({seg.id, seg.gt});
        const auto corpus = pipeline::evaluate_predictions(segments, preds);
        return near(corpus.interval.precision, 100.0, 1e-9) &&
               near(corpus.interval.recall, 100.0, 1e-9) &&
               near(corpus.interval.f1, 100.0, 1e-9) &&
               near(corpus.overlap_percent, 100.0, 1e-9);
    });

    criterion(12, "detector end-to-end: spike corpus F1 = 100; profile oracle", [] {
        std::vector<Segment> segments;
        for (int i = 0; i < 10; ++i) segments.push_back(spike_fixture(i));
        detectors::DetectorConfig cfg;
        cfg.kind = detectors::DetectorKind::ZScore;
        cfg.window = 64;
        std::vector<pipeline::PredictionRecord> preds;
        for (const auto& seg : segments) {
            preds.push_back({seg.id, detectors::detect(seg.series, cfg, 0.05)});
        }
        const auto corpus = pipeline::evaluate_predictions(segments, preds);
        if (!near(corpus.interval.f1, 100.0, 1e-9)) return false;

        // Matrix profile against a direct z-normalized all-pairs computation.
        std::mt19937_64 rng(127);
        TimeSeries series;
        series.id = "mp";
        const std::int64_t t = 300, m = 8;
        for (std::int64_t i = 0; i < t; ++i) {
            series.values.push_back(double(rng() % 1000) / 100.0);
        }
        const auto got = detectors::matrix_profile_scores(series, m);
        const std::int64_t n = t - m + 1, excl = std::max<std::int64_t>(1, m / 2);
        std::vector<double> profile(std::size_t(n), 1e300);
        const auto stats = [&](std::int64_t i, double& mean, double& sd) {
            mean = 0.0;
            for (std::int64_t k = 0; k < m; ++k) mean += series.values[std::size_t(i + k)];
            mean /= double(m);
            double sq = 0.0;
            for (std::int64_t k = 0; k < m; ++k) {
                const double d = series.values[std::size_t(i + k)] - mean;
                sq += d * d;
            }
            sd = std::sqrt(sq / double(m));
        };
        for (std::int64_t i = 0; i < n; ++i) {
            double mi, si;
            stats(i, mi, si);
            for (std::int64_t j = 0; j < n; ++j) {
                if (std::abs(i - j) < excl) continue;
                double mj, sj;
                stats(j, mj, sj);
                double sum = 0.0;
                for (std::int64_t k = 0; k < m; ++k) {
                    const double za = (series.values[std::size_t(i + k)] - mi) / si;
                    const double zb = (series.values[std::size_t(j + k)] - mj) / sj;
                    sum += (za - zb) * (za - zb);
                }
                profile[std::size_t(i)] = std::min(profile[std::size_t(i)], std::sqrt(sum));
            }
        }
        std::vector<double> want(std::size_t(t), 0.0);
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t k = 0; k < m; ++k) {
                want[std::size_t(i + k)] = std::max(want[std::size_t(i + k)],
                                                    profile[std::size_t(i)]);
            }
        }
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (!near(got[i], want[i], 1e-6)) return false;
        }
        return true;
    });

    if (g_failures == 0) {
        std::puts("all acceptance criteria passed");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
