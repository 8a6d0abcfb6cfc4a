/// @file test_pipeline.cpp
/// JSONL stores, elicitation/selection stages on scripted clients, corpus
/// evaluation, and pairwise comparison with position-bias control.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tsab/ingest.hpp"
#include "tsab/pipeline.hpp"

using namespace tsab;

namespace {

IntervalSet make(std::initializer_list<std::pair<int, int>> ivs) {
    std::vector<AnomalyInterval> v;
    for (const auto& [s, e] : ivs) v.emplace_back(s, e);
    return normalize(v);
}

std::filesystem::path temp_path(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove(p);
    return p;
}

Segment spike_segment(int idx) {
    ingest::SynthSpec spec;
    spec.length = 400;
    spec.anomaly_start = 180 + idx;
    spec.anomaly_end = 200 + idx;
    spec.magnitude = 5.0;
    spec.noise_sigma = 0.1;
    spec.seed = std::uint64_t(idx);
    spec.id = "seg" + std::to_string(idx);
    auto seg = ingest::synth_series(spec);
    seg.context = "synthetic metric " + std::to_string(idx);
    return seg;
}

std::string candidate_text(const IntervalSet& ivs) {
    schema::CandidateOutput c;
    c.decision = !ivs.empty();
    c.intervals = ivs;
    c.reasoning.steps = {"baseline is flat.", "a spike stands out."};
    return schema::serialize_structured_output(c);
}

}  // namespace

TEST_CASE("segment store round-trips") {
    std::vector<Segment> segs{spike_segment(0), spike_segment(1)};
    segs[1].series.timestamps = std::vector<double>();
    for (int i = 0; i < segs[1].series.length(); ++i) {
        segs[1].series.timestamps->push_back(1000.0 + 60.0 * i);
    }
    const auto path = temp_path("tsab_segments.jsonl");
    pipeline::save_segments(path, segs, "cfg-hash");
    const auto back = pipeline::load_segments(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == segs[0].id);
    CHECK(back[0].series.values == segs[0].series.values);
    CHECK(back[0].gt == segs[0].gt);
    CHECK(back[0].context == segs[0].context);
    CHECK(back[1].series.timestamps == segs[1].series.timestamps);

    // Determinism: saving the loaded segments reproduces the bytes.
    const auto path2 = temp_path("tsab_segments2.jsonl");
    pipeline::save_segments(path2, back, "cfg-hash");
    std::ifstream a(path), b(path2);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("candidate and prediction stores round-trip") {
    pipeline::CandidateRecord good;
    good.segment_id = "s1";
    good.generator_id = "g1";
    good.raw_text = candidate_text(make({{10, 20}}));
    good.parse_ok = true;
    good.output = schema::parse_structured_output(good.raw_text);
    good.output.generator_id = "g1";

    pipeline::CandidateRecord bad;
    bad.segment_id = "s1";
    bad.generator_id = "g2";
    bad.raw_text = "I think there might be an anomaly somewhere";
    bad.parse_ok = false;
    bad.parse_error = "missing <anomaly> tag";

    const auto path = temp_path("tsab_candidates.jsonl");
    pipeline::save_candidates(path, {good, bad}, "h");
    const auto back = pipeline::load_candidates(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].parse_ok);
    CHECK(back[0].output.intervals == make({{10, 20}}));
    CHECK(back[0].output.reasoning.steps.size() == 2);
    CHECK_FALSE(back[1].parse_ok);
    CHECK(back[1].parse_error == "missing <anomaly> tag");
    std::filesystem::remove(path);

    const auto ppath = temp_path("tsab_predictions.jsonl");
    pipeline::save_predictions(ppath, {{"s1", make({{3, 7}})}}, "h");
    const auto preds = pipeline::load_predictions(ppath);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].intervals == make({{3, 7}}));
    std::filesystem::remove(ppath);
}

TEST_CASE("elicit_candidates records parse failures and sorts deterministically") {
    const std::vector<Segment> segs{spike_segment(0), spike_segment(1)};
    render::RenderConfig rc;

    auto good = std::make_shared<llm::MockChatClient>("gen-a",
                                                      std::map<std::string, std::string>{});
    auto broken = std::make_shared<llm::MockChatClient>("gen-b",
                                                        std::map<std::string, std::string>{});
    for (const auto& seg : segs) {
        auto prompt = llm::build_elicitation_prompt(seg.context, seg.gt, rc.x_axis_mode);
        prompt.image = render::render_plot(seg, rc);
        good->add(llm::fingerprint("gen-a", prompt), candidate_text(seg.gt));
        broken->add(llm::fingerprint("gen-b", prompt), "free-form rambling, no tags");
    }

    const auto records = pipeline::elicit_candidates(segs, {good, broken}, rc);
    REQUIRE(records.size() == 4);
    CHECK(records[0].segment_id == "seg0");
    CHECK(records[0].generator_id == "gen-a");
    CHECK(records[0].parse_ok);
    CHECK(records[0].output.intervals == segs[0].gt);
    CHECK(records[1].generator_id == "gen-b");
    CHECK_FALSE(records[1].parse_ok);
    CHECK(records[1].parse_error.find("anomaly") != std::string::npos);
}

TEST_CASE("elicit_candidates resumes through the audit log without re-asking") {
    const std::vector<Segment> segs{spike_segment(2)};
    render::RenderConfig rc;
    auto prompt = llm::build_elicitation_prompt(segs[0].context, segs[0].gt, rc.x_axis_mode);
    prompt.image = render::render_plot(segs[0], rc);
    const std::string fp = llm::fingerprint("gen-a", prompt);

    const auto audit_path = temp_path("tsab_audit.jsonl");
    {
        llm::AuditLog audit(audit_path);
        audit.record(fp, "gen-a", "req", candidate_text(segs[0].gt), 1);
    }
    // An empty-scripted client would throw on any real call; the audit hit
    // must short-circuit it.
    auto gen = std::make_shared<llm::MockChatClient>("gen-a",
                                                     std::map<std::string, std::string>{});
    llm::AuditLog audit(audit_path);
    const auto records = pipeline::elicit_candidates(segs, {gen}, rc, &audit);
    REQUIRE(records.size() == 1);
    CHECK(records[0].parse_ok);
    std::filesystem::remove(audit_path);
}

TEST_CASE("select_candidates picks the planted winner and logs exclusions") {
    const std::vector<Segment> segs{spike_segment(0)};
    const auto& seg = segs[0];
    render::RenderConfig rc;
    const auto png = render::render_plot(seg, rc);

    // Three candidates: exact gt, shifted, and a no-anomaly call.
    auto shifted = make({{seg.gt.intervals[0].start + 5, seg.gt.intervals[0].end + 5}});
    std::vector<pipeline::CandidateRecord> cands;
    const auto add = [&](const std::string& gen, const std::string& text) {
        pipeline::CandidateRecord r;
        r.segment_id = seg.id;
        r.generator_id = gen;
        r.raw_text = text;
        try {
            r.output = schema::parse_structured_output(text);
            r.output.generator_id = gen;
            r.parse_ok = true;
        } catch (const schema::SchemaError& e) {
            r.parse_error = e.what();
        }
        return cands.push_back(r);
    };
    add("exact", candidate_text(seg.gt));
    add("shifted", candidate_text(shifted));
    add("blind", candidate_text({}));

    llm::MockChatClient judge("judge", {});
    for (const auto& c : cands) {
        const auto serialized = schema::serialize_structured_output(c.output);
        auto jp = llm::build_judge_prompt(seg.context,
                                          serialized.substr(0, serialized.find('\n')),
                                          c.output.reasoning.raw);
        jp.image = png;
        judge.add(llm::fingerprint("judge", jp), "VISUAL: 0.8\nAXIS: 0.8\nCLARITY: 0.8");
    }

    const auto selections = pipeline::select_candidates(segs, cands, judge, rc, {}, {});
    REQUIRE(selections.size() == 1);
    CHECK_FALSE(selections[0].excluded);
    CHECK(selections[0].winner_generator == "exact");
    CHECK(selections[0].breakdowns.size() == 3);
    CHECK(selections[0].winner_text == candidate_text(seg.gt));

    // Majority failing the consensus filter excludes the segment.
    cands.erase(cands.begin());  // drop "exact": now 1 agree vs 1 no-anomaly
    add("blind2", candidate_text({}));
    const auto excluded = pipeline::select_candidates(segs, cands, judge, rc, {}, {});
    REQUIRE(excluded.size() == 1);
    CHECK(excluded[0].excluded);
    CHECK(excluded[0].exclusion_reason.find("consensus") != std::string::npos);

    // Zero parseable candidates are dropped with a reason.
    std::vector<pipeline::CandidateRecord> unparsed(1);
    unparsed[0].segment_id = seg.id;
    unparsed[0].generator_id = "g";
    unparsed[0].raw_text = "???";
    unparsed[0].parse_ok = false;
    const auto dropped = pipeline::select_candidates(segs, unparsed, judge, rc, {}, {});
    REQUIRE(dropped.size() == 1);
    CHECK(dropped[0].excluded);
    CHECK(dropped[0].exclusion_reason == "no parseable candidates");
}

TEST_CASE("evaluate_predictions aggregates and validates ids") {
    std::vector<Segment> segs{spike_segment(0), spike_segment(1)};
    std::vector<pipeline::PredictionRecord> preds{{segs[0].id, segs[0].gt},
                                                  {segs[1].id, segs[1].gt}};
    const auto corpus = pipeline::evaluate_predictions(segs, preds);
    CHECK(corpus.tp == 2);
    CHECK(corpus.fp == 0);
    CHECK(corpus.fn == 0);
    CHECK(corpus.interval.f1 == doctest::Approx(100.0));
    CHECK(corpus.overlap_percent == doctest::Approx(100.0));
    CHECK(corpus.pointwise.f1 == doctest::Approx(100.0));
    CHECK(corpus.affiliation.f1 == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(corpus.per_segment.size() == 2);

    const auto md = pipeline::corpus_markdown(corpus, "oracle");
    CHECK(md.find("| oracle | 2 | 0 | 0 | 100.00 | 100.00 | 100.00 | 100.00 |") !=
          std::string::npos);

    preds.pop_back();
    CHECK_THROWS_AS(pipeline::evaluate_predictions(segs, preds), pipeline::PipelineError);
    preds.push_back({"nonexistent", {}});
    CHECK_THROWS_AS(pipeline::evaluate_predictions(segs, preds), pipeline::PipelineError);
}

TEST_CASE("compare_explanations controls for position bias") {
    std::vector<pipeline::ExplanationPair> pairs{{"s1", "ctx", "alpha text", "beta text"}};

    SUBCASE("a judge that always answers A yields a tie") {
        llm::MockChatClient judge("judge", {});
        for (const auto& p : pairs) {
            judge.add(llm::fingerprint(
                          "judge", llm::build_pairwise_prompt(p.context, p.explanation_a,
                                                              p.explanation_b)),
                      "A");
            judge.add(llm::fingerprint(
                          "judge", llm::build_pairwise_prompt(p.context, p.explanation_b,
                                                              p.explanation_a)),
                      "A");
        }
        const auto wr = pipeline::compare_explanations(pairs, judge, "ours", "base");
        CHECK(wr.tie_percent == doctest::Approx(100.0));
        CHECK(wr.a_percent == 0.0);
    }
    SUBCASE("a content-consistent judge credits the winner") {
        llm::MockChatClient judge("judge", {});
        // "alpha text" wins regardless of position.
        judge.add(llm::fingerprint("judge",
                                   llm::build_pairwise_prompt("ctx", "alpha text", "beta text")),
                  "A");
        judge.add(llm::fingerprint("judge",
                                   llm::build_pairwise_prompt("ctx", "beta text", "alpha text")),
                  "B");
        const auto wr = pipeline::compare_explanations(pairs, judge, "ours", "base");
        CHECK(wr.a_percent == doctest::Approx(100.0));
        CHECK(wr.count == 1);
    }
    SUBCASE("empty pair list yields an empty report") {
        llm::MockChatClient judge("judge", {});
        const auto wr = pipeline::compare_explanations({}, judge, "a", "b");
        CHECK(wr.count == 0);
    }
}
