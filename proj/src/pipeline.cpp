#include "tsab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tsab/util.hpp"

namespace tsab::pipeline {

namespace {

using nlohmann::json;

json intervals_to_json(const IntervalSet& set) {
    json arr = json::array();
    for (const auto& iv : set.intervals) {
        arr.push_back({iv.start, iv.end});
    }
    return arr;
}

IntervalSet intervals_from_json(const json& arr) {
    std::vector<AnomalyInterval> ivs;
    for (const auto& pair : arr) {
        ivs.emplace_back(pair.at(0).get<std::int64_t>(), pair.at(1).get<std::int64_t>());
    }
    return normalize(ivs);
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw PipelineError("cannot open " + path.string());
    }
    std::vector<json> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw PipelineError("invalid JSON at " + path.string() + ":" + std::to_string(row) +
                                ": " + e.what());
        }
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw PipelineError("cannot write " + path.string());
    }
    for (const auto& r : records) {
        out << r.dump() << "\n";
    }
}

/// Asks the client, going through the audit log when one is attached.
std::string cached_complete(llm::ChatClient& client, const llm::PromptText& prompt,
                            llm::AuditLog* audit) {
    const std::string fp = llm::fingerprint(client.model_name(), prompt);
    if (audit) {
        if (const auto hit = audit->lookup(fp)) {
            return *hit;
        }
    }
    const auto start = std::chrono::steady_clock::now();
    const std::string response = client.complete(prompt);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    if (audit) {
        audit->record(fp, client.model_name(), util::sha256_hex(prompt.user), response, elapsed);
    }
    return response;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stores
// ---------------------------------------------------------------------------

void save_segments(const std::filesystem::path& path, const std::vector<Segment>& segments,
                   const std::string& config_hash) {
    std::vector<json> records;
    for (const auto& seg : segments) {
        json r = {{"segment_id", seg.id},
                  {"source",
                   {{"dataset_id", seg.source.dataset_id},
                    {"offset_start", seg.source.offset_start},
                    {"offset_end", seg.source.offset_end}}},
                  {"values", seg.series.values},
                  {"gt_intervals", intervals_to_json(seg.gt)},
                  {"context", seg.context},
                  {"config_hash", config_hash}};
        if (seg.series.timestamps) {
            r["timestamps"] = *seg.series.timestamps;
        }
        records.push_back(std::move(r));
    }
    write_jsonl(path, records);
}

std::vector<Segment> load_segments(const std::filesystem::path& path) {
    std::vector<Segment> out;
    for (const auto& r : read_jsonl(path)) {
        Segment seg;
        seg.id = r.at("segment_id").get<std::string>();
        seg.series.id = seg.id;
        seg.series.values = r.at("values").get<std::vector<double>>();
        if (r.contains("timestamps")) {
            seg.series.timestamps = r.at("timestamps").get<std::vector<double>>();
        }
        seg.gt = intervals_from_json(r.at("gt_intervals"));
        seg.context = r.value("context", "");
        if (r.contains("source")) {
            seg.source.dataset_id = r.at("source").value("dataset_id", "");
            seg.source.offset_start = r.at("source").value("offset_start", std::int64_t(0));
            seg.source.offset_end = r.at("source").value("offset_end", std::int64_t(0));
        }
        seg.series.labels = intervals_to_labels(seg.gt, seg.series.length());
        seg.validate();
        out.push_back(std::move(seg));
    }
    return out;
}

void save_candidates(const std::filesystem::path& path, const std::vector<CandidateRecord>& records,
                     const std::string& config_hash) {
    std::vector<json> out;
    for (const auto& c : records) {
        json r = {{"segment_id", c.segment_id},
                  {"generator_id", c.generator_id},
                  {"raw_text", c.raw_text},
                  {"parse_ok", c.parse_ok},
                  {"config_hash", config_hash}};
        if (c.parse_ok) {
            r["decision"] = c.output.decision;
            r["intervals"] = intervals_to_json(c.output.intervals);
            r["reasoning_steps"] = c.output.reasoning.steps;
            r["warnings"] = c.output.warnings;
        } else {
            r["parse_error"] = c.parse_error;
        }
        out.push_back(std::move(r));
    }
    write_jsonl(path, out);
}

std::vector<CandidateRecord> load_candidates(const std::filesystem::path& path) {
    std::vector<CandidateRecord> out;
    for (const auto& r : read_jsonl(path)) {
        CandidateRecord c;
        c.segment_id = r.at("segment_id").get<std::string>();
        c.generator_id = r.at("generator_id").get<std::string>();
        c.raw_text = r.at("raw_text").get<std::string>();
        c.parse_ok = r.at("parse_ok").get<bool>();
        if (c.parse_ok) {
            c.output.decision = r.at("decision").get<bool>();
            c.output.intervals = intervals_from_json(r.at("intervals"));
            c.output.reasoning.steps = r.at("reasoning_steps").get<std::vector<std::string>>();
            c.output.warnings = r.at("warnings").get<std::vector<std::string>>();
            c.output.generator_id = c.generator_id;
        } else {
            c.parse_error = r.value("parse_error", "");
        }
        out.push_back(std::move(c));
    }
    return out;
}

void save_selections(const std::filesystem::path& path, const std::vector<SelectionRecord>& records,
                     const std::string& config_hash) {
    std::vector<json> out;
    for (const auto& s : records) {
        json breakdowns = json::array();
        for (const auto& b : s.breakdowns) {
            breakdowns.push_back({{"generator_id", b.generator_id},
                                  {"s_ano", b.s_ano},
                                  {"s_vis", b.s_vis},
                                  {"s_axi", b.s_axi},
                                  {"s_cla", b.s_cla},
                                  {"total", b.total}});
        }
        out.push_back({{"segment_id", s.segment_id},
                       {"excluded", s.excluded},
                       {"exclusion_reason", s.exclusion_reason},
                       {"winner_generator", s.winner_generator},
                       {"winner_text", s.winner_text},
                       {"breakdowns", breakdowns},
                       {"config_hash", config_hash}});
    }
    write_jsonl(path, out);
}

void save_predictions(const std::filesystem::path& path,
                      const std::vector<PredictionRecord>& records,
                      const std::string& config_hash) {
    std::vector<json> out;
    for (const auto& p : records) {
        out.push_back({{"segment_id", p.segment_id},
                       {"intervals", intervals_to_json(p.intervals)},
                       {"config_hash", config_hash}});
    }
    write_jsonl(path, out);
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    std::vector<PredictionRecord> out;
    for (const auto& r : read_jsonl(path)) {
        out.push_back({r.at("segment_id").get<std::string>(),
                       intervals_from_json(r.at("intervals"))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

std::vector<CandidateRecord> elicit_candidates(
    const std::vector<Segment>& segments,
    const std::vector<std::shared_ptr<llm::ChatClient>>& generators,
    const render::RenderConfig& render_cfg, llm::AuditLog* audit) {
    std::vector<CandidateRecord> out;
    for (const auto& seg : segments) {
        const auto png = render::render_plot(seg, render_cfg);
        llm::PromptText prompt = llm::build_elicitation_prompt(
            seg.context, seg.gt, render_cfg.x_axis_mode,
            render_cfg.x_axis_mode == render::XAxisMode::Timestamp ? &seg.series : nullptr);
        prompt.image = png;
        for (const auto& gen : generators) {
            CandidateRecord rec;
            rec.segment_id = seg.id;
            rec.generator_id = gen->model_name();
            try {
                rec.raw_text = cached_complete(*gen, prompt, audit);
                rec.output = schema::parse_structured_output(rec.raw_text, &seg.series);
                rec.output.generator_id = rec.generator_id;
                rec.parse_ok = true;
            } catch (const schema::SchemaError& e) {
                rec.parse_ok = false;
                rec.parse_error = e.what();
            }
            out.push_back(std::move(rec));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.segment_id, a.generator_id) < std::tie(b.segment_id, b.generator_id);
    });
    return out;
}

std::vector<SelectionRecord> select_candidates(const std::vector<Segment>& segments,
                                               const std::vector<CandidateRecord>& candidates,
                                               llm::ChatClient& judge,
                                               const render::RenderConfig& render_cfg,
                                               const reward::RewardWeights& weights,
                                               const ingest::ConsensusPolicy& consensus,
                                               llm::AuditLog* audit) {
    std::map<std::string, std::vector<const CandidateRecord*>> by_segment;
    for (const auto& c : candidates) {
        by_segment[c.segment_id].push_back(&c);
    }

    std::vector<SelectionRecord> out;
    for (const auto& seg : segments) {
        SelectionRecord rec;
        rec.segment_id = seg.id;
        const auto it = by_segment.find(seg.id);

        std::vector<const CandidateRecord*> parsed;
        if (it != by_segment.end()) {
            for (const auto* c : it->second) {
                if (c->parse_ok) parsed.push_back(c);
            }
        }
        if (parsed.empty()) {
            rec.excluded = true;
            rec.exclusion_reason = "no parseable candidates";
            out.push_back(std::move(rec));
            continue;
        }

        std::vector<schema::CandidateOutput> outputs;
        for (const auto* c : parsed) outputs.push_back(c->output);
        const auto verdict = ingest::consensus_filter(seg, outputs, consensus);
        if (!verdict.keep) {
            rec.excluded = true;
            rec.exclusion_reason = "consensus filter: " + verdict.rationale;
            out.push_back(std::move(rec));
            continue;
        }

        const auto png = render::render_plot(seg, render_cfg);
        std::vector<reward::RewardBreakdown> breakdowns;
        for (const auto* c : parsed) {
            const std::string serialized = schema::serialize_structured_output(c->output);
            const std::string decision_line = serialized.substr(0, serialized.find('\n'));
            llm::PromptText jp =
                llm::build_judge_prompt(seg.context, decision_line, c->output.reasoning.raw);
            jp.image = png;
            const auto scores = schema::parse_judge_scores(cached_complete(judge, jp, audit));
            breakdowns.push_back(reward::score_candidate(c->output, seg.gt, scores, weights));
        }
        const auto [winner, ranking] = reward::select_best(breakdowns);
        (void)ranking;
        rec.breakdowns = std::move(breakdowns);
        rec.winner_generator = parsed[winner]->generator_id;
        rec.winner_text = schema::serialize_structured_output(parsed[winner]->output);
        out.push_back(std::move(rec));
    }
    return out;
}

CorpusEval evaluate_predictions(const std::vector<Segment>& segments,
                                const std::vector<PredictionRecord>& predictions) {
    std::map<std::string, const PredictionRecord*> by_id;
    for (const auto& p : predictions) {
        by_id[p.segment_id] = &p;
    }
    std::vector<std::string> missing, unknown;
    std::map<std::string, bool> seen;
    for (const auto& seg : segments) seen[seg.id] = false;
    for (const auto& p : predictions) {
        if (!seen.count(p.segment_id)) unknown.push_back(p.segment_id);
    }
    for (const auto& seg : segments) {
        if (!by_id.count(seg.id)) missing.push_back(seg.id);
    }
    if (!missing.empty() || !unknown.empty()) {
        std::ostringstream msg;
        msg << "prediction/segment id mismatch;";
        if (!missing.empty()) {
            msg << " missing predictions for:";
            for (const auto& id : missing) msg << " " << id;
            msg << ";";
        }
        if (!unknown.empty()) {
            msg << " predictions for unknown segments:";
            for (const auto& id : unknown) msg << " " << id;
        }
        throw PipelineError(msg.str());
    }

    CorpusEval corpus;
    std::int64_t pw_tp = 0, pw_fp = 0, pw_fn = 0;
    double overlap_sum = 0.0;
    double aff_p_sum = 0.0, aff_r_sum = 0.0;
    std::int64_t aff_n = 0;
    for (const auto& seg : segments) {
        SegmentEval se;
        se.segment_id = seg.id;
        se.length = seg.series.length();
        se.report = metrics::evaluate(by_id.at(seg.id)->intervals, seg.gt, se.length);
        corpus.tp += se.report.confusion.tp;
        corpus.fp += se.report.confusion.fp;
        corpus.fn += se.report.confusion.fn_;
        overlap_sum += se.report.overlap;
        const auto pred_labels = intervals_to_labels(by_id.at(seg.id)->intervals, se.length);
        const auto gt_labels = intervals_to_labels(seg.gt, se.length);
        for (std::size_t i = 0; i < pred_labels.size(); ++i) {
            if (pred_labels[i] && gt_labels[i]) ++pw_tp;
            else if (pred_labels[i]) ++pw_fp;
            else if (gt_labels[i]) ++pw_fn;
        }
        if (se.report.affiliation.defined) {
            aff_p_sum += se.report.affiliation.precision;
            aff_r_sum += se.report.affiliation.recall;
            ++aff_n;
        }
        corpus.per_segment.push_back(std::move(se));
    }
    corpus.interval = metrics::prf_from_counts(corpus.tp, corpus.fp, corpus.fn);
    corpus.overlap_percent =
        segments.empty() ? 0.0 : 100.0 * overlap_sum / double(segments.size());
    corpus.pointwise = metrics::prf_from_counts(pw_tp, pw_fp, pw_fn);
    if (aff_n > 0) {
        const double p = aff_p_sum / double(aff_n) / 100.0;
        const double r = aff_r_sum / double(aff_n) / 100.0;
        corpus.affiliation.precision = 100.0 * p;
        corpus.affiliation.recall = 100.0 * r;
        corpus.affiliation.f1 = (p + r > 0.0) ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
        corpus.affiliation.defined = true;
    } else {
        corpus.affiliation.defined = false;
    }
    return corpus;
}

std::string corpus_markdown(const CorpusEval& eval, const std::string& method_name) {
    char buf[256];
    std::ostringstream out;
    out << "| Method | TP | FP | FN | Precision (%) | Recall (%) | F1 (%) | Overlap (%) |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    std::snprintf(buf, sizeof(buf), "| %s | %lld | %lld | %lld | %.2f | %.2f | %.2f | %.2f |\n",
                  method_name.c_str(), static_cast<long long>(eval.tp),
                  static_cast<long long>(eval.fp), static_cast<long long>(eval.fn),
                  eval.interval.precision, eval.interval.recall, eval.interval.f1,
                  eval.overlap_percent);
    out << buf;
    if (!eval.interval.defined) {
        out << "\n(note: some interval rates were 0/0 and are reported as 0)\n";
    }
    return out.str();
}

reward::WinRate compare_explanations(const std::vector<ExplanationPair>& pairs,
                                     llm::ChatClient& judge, const std::string& a_label,
                                     const std::string& b_label, llm::AuditLog* audit) {
    std::vector<schema::PairwiseVerdict> verdicts;
    for (const auto& pair : pairs) {
        const auto forward =
            llm::build_pairwise_prompt(pair.context, pair.explanation_a, pair.explanation_b);
        const auto reversed =
            llm::build_pairwise_prompt(pair.context, pair.explanation_b, pair.explanation_a);
        const auto v1 = schema::parse_pairwise_verdict(cached_complete(judge, forward, audit));
        const auto v2 = schema::parse_pairwise_verdict(cached_complete(judge, reversed, audit));
        // Position-bias control: credit a win only when both orderings agree.
        if (v1 == schema::PairwiseVerdict::A && v2 == schema::PairwiseVerdict::B) {
            verdicts.push_back(schema::PairwiseVerdict::A);
        } else if (v1 == schema::PairwiseVerdict::B && v2 == schema::PairwiseVerdict::A) {
            verdicts.push_back(schema::PairwiseVerdict::B);
        } else {
            verdicts.push_back(schema::PairwiseVerdict::Tie);
        }
    }
    return reward::win_rate(verdicts, a_label, b_label);
}

}  // namespace tsab::pipeline
