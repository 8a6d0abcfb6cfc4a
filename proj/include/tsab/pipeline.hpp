/// @file pipeline.hpp
/// Stage logic and JSONL stores behind the CLI: segment/candidate/selection
/// stores, elicitation, reward selection, evaluation, and pairwise
/// explanation comparison. Every stage is deterministic and resumable.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tsab/core.hpp"
#include "tsab/ingest.hpp"
#include "tsab/llm.hpp"
#include "tsab/metrics.hpp"
#include "tsab/render.hpp"
#include "tsab/reward.hpp"
#include "tsab/schema.hpp"

namespace tsab::pipeline {

class PipelineError : public DomainError {
public:
    using DomainError::DomainError;
};

// ---------------------------------------------------------------------------
// JSONL stores
// ---------------------------------------------------------------------------

void save_segments(const std::filesystem::path& path, const std::vector<Segment>& segments,
                   const std::string& config_hash);
std::vector<Segment> load_segments(const std::filesystem::path& path);

struct CandidateRecord {
    std::string segment_id;
    std::string generator_id;
    std::string raw_text;
    bool parse_ok = false;
    std::string parse_error;
    schema::CandidateOutput output;  // meaningful only when parse_ok
};

void save_candidates(const std::filesystem::path& path, const std::vector<CandidateRecord>& records,
                     const std::string& config_hash);
std::vector<CandidateRecord> load_candidates(const std::filesystem::path& path);

struct SelectionRecord {
    std::string segment_id;
    bool excluded = false;
    std::string exclusion_reason;
    std::string winner_generator;
    std::string winner_text;  // serialized structured output (the SFT target)
    std::vector<reward::RewardBreakdown> breakdowns;
};

void save_selections(const std::filesystem::path& path, const std::vector<SelectionRecord>& records,
                     const std::string& config_hash);

struct PredictionRecord {
    std::string segment_id;
    IntervalSet intervals;
};

void save_predictions(const std::filesystem::path& path,
                      const std::vector<PredictionRecord>& records,
                      const std::string& config_hash);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// One generated candidate per (segment, generator). Prompts carry the
/// rendered plot; responses already present in the audit log are reused
/// instead of re-asking the endpoint.
std::vector<CandidateRecord> elicit_candidates(
    const std::vector<Segment>& segments,
    const std::vector<std::shared_ptr<llm::ChatClient>>& generators,
    const render::RenderConfig& render_cfg, llm::AuditLog* audit = nullptr);

/// Scores every parseable candidate with the judge, applies the consensus
/// filter, and keeps the highest-reward candidate per surviving segment.
std::vector<SelectionRecord> select_candidates(const std::vector<Segment>& segments,
                                               const std::vector<CandidateRecord>& candidates,
                                               llm::ChatClient& judge,
                                               const render::RenderConfig& render_cfg,
                                               const reward::RewardWeights& weights,
                                               const ingest::ConsensusPolicy& consensus,
                                               llm::AuditLog* audit = nullptr);

struct SegmentEval {
    std::string segment_id;
    std::int64_t length = 0;
    metrics::EvalReport report;
};

struct CorpusEval {
    std::int64_t tp = 0, fp = 0, fn = 0;
    metrics::Prf interval;         // micro-averaged from summed counts
    double overlap_percent = 0.0;  // mean of per-segment overlap
    metrics::Prf pointwise;        // micro-averaged over all points
    metrics::Prf affiliation;      // macro-averaged over segments where defined
    std::vector<SegmentEval> per_segment;
};

CorpusEval evaluate_predictions(const std::vector<Segment>& segments,
                                const std::vector<PredictionRecord>& predictions);

std::string corpus_markdown(const CorpusEval& eval, const std::string& method_name);

struct ExplanationPair {
    std::string segment_id;
    std::string context;
    std::string explanation_a;
    std::string explanation_b;
};

/// Runs the judge on both orderings of each pair; a win is credited only
/// when the two verdicts agree, otherwise the pair is a tie.
reward::WinRate compare_explanations(const std::vector<ExplanationPair>& pairs,
                                     llm::ChatClient& judge, const std::string& a_label,
                                     const std::string& b_label, llm::AuditLog* audit = nullptr);

}  // namespace tsab::pipeline
