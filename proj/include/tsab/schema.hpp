/// @file schema.hpp
/// Parser and serializer for the strict two-line structured output format
/// (<anomaly>/<index>/<think>), the judge score reply, and the pairwise
/// verdict reply.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsab/core.hpp"

namespace tsab::schema {

class SchemaError : public DomainError {
public:
    using DomainError::DomainError;
};

class JudgeFormatError : public DomainError {
public:
    using DomainError::DomainError;
};

class RangeError : public DomainError {
public:
    using DomainError::DomainError;
};

class VerdictFormatError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Numbered reasoning steps plus the raw text between the think tags.
struct ReasoningTrace {
    std::vector<std::string> steps;
    std::string raw;
};

struct CandidateOutput {
    bool decision = false;
    std::vector<std::pair<std::string, std::string>> intervals_raw;
    IntervalSet intervals;
    ReasoningTrace reasoning;
    std::string generator_id;
    std::vector<std::string> warnings;
};

struct JudgeScores {
    double visual = 0.0;
    double axis = 0.0;
    double clarity = 0.0;
};

enum class PairwiseVerdict { A, B, Tie };

/// Parses the strict output format. Recoverable deviations (unsorted,
/// overlapping, or swapped intervals) are normalized with a warning; missing
/// tags, False-with-indices, and unparsable pair tokens are hard errors.
/// Timestamp tokens are mapped to indices via axis_context.
CandidateOutput parse_structured_output(const std::string& text,
                                        const TimeSeries* axis_context = nullptr);

/// Maps a (start, end) token pair to a series-index interval. Integer and
/// decimal tokens pass through (rounded, clamped to [1, T]); timestamp
/// tokens snap to the nearest stored timestamp. Swapped endpoints are
/// exchanged; `warnings` receives a note for every normalization applied.
AnomalyInterval map_timestamps_to_indices(const std::pair<std::string, std::string>& tokens,
                                          const TimeSeries& series,
                                          std::vector<std::string>* warnings = nullptr);

/// Locates the VISUAL/AXIS/CLARITY lines anywhere in the text; values must
/// lie in [0,1] (no clamping).
JudgeScores parse_judge_scores(const std::string& text);

/// Accepts surrounding prose as long as exactly one verdict token from
/// {A, B, TIE} appears.
PairwiseVerdict parse_pairwise_verdict(const std::string& text);

/// Emits the canonical two-line form; parse(serialize(c)) reproduces
/// decision, intervals, and step count.
std::string serialize_structured_output(const CandidateOutput& c);

}  // namespace tsab::schema
