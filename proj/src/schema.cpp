#include "tsab/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <sstream>

#include "tsab/util.hpp"

namespace tsab::schema {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<std::string> tag_body(const std::string& text, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    const std::size_t b = text.find(open);
    if (b == std::string::npos) return std::nullopt;
    const std::size_t e = text.find(close, b + open.size());
    if (e == std::string::npos) return std::nullopt;
    return text.substr(b + open.size(), e - b - open.size());
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string> split_steps(const std::string& raw) {
    static const std::regex marker(R"(Step\s*([0-9]+)\s*:)", std::regex::icase);
    std::vector<std::string> steps;
    auto begin = std::sregex_iterator(raw.begin(), raw.end(), marker);
    auto end = std::sregex_iterator();
    std::vector<std::size_t> starts, bodies;
    for (auto it = begin; it != end; ++it) {
        starts.push_back(static_cast<std::size_t>(it->position()));
        bodies.push_back(static_cast<std::size_t>(it->position() + it->length()));
    }
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const std::size_t stop = (i + 1 < starts.size()) ? starts[i + 1] : raw.size();
        steps.push_back(trim(raw.substr(bodies[i], stop - bodies[i])));
    }
    return steps;
}

}  // namespace

AnomalyInterval map_timestamps_to_indices(const std::pair<std::string, std::string>& tokens,
                                          const TimeSeries& series,
                                          std::vector<std::string>* warnings) {
    const std::int64_t t = series.length();
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };

    auto map_one = [&](const std::string& raw) -> std::int64_t {
        const std::string tok = trim(raw);
        if (const auto num = parse_number(tok)) {
            std::int64_t idx = static_cast<std::int64_t>(std::llround(*num));
            if (idx < 1 || idx > t) {
                warn("index token '" + tok + "' clamped to series bounds");
                idx = std::min(std::max<std::int64_t>(idx, 1), t);
            }
            return idx;
        }
        if (const auto ts = util::parse_timestamp(tok)) {
            if (!series.timestamps) {
                throw SchemaError("timestamp token '" + tok +
                                  "' on a series without timestamps");
            }
            const auto& stamps = *series.timestamps;
            auto it = std::lower_bound(stamps.begin(), stamps.end(), *ts);
            std::size_t idx;
            if (it == stamps.begin()) {
                idx = 0;
            } else if (it == stamps.end()) {
                idx = stamps.size() - 1;
            } else {
                const std::size_t hi = static_cast<std::size_t>(it - stamps.begin());
                idx = (*ts - stamps[hi - 1] <= stamps[hi] - *ts) ? hi - 1 : hi;
            }
            return static_cast<std::int64_t>(idx) + 1;
        }
        throw SchemaError("pair token '" + tok + "' is neither an index nor a timestamp");
    };

    std::int64_t s = map_one(tokens.first);
    std::int64_t e = map_one(tokens.second);
    if (s > e) {
        warn("interval endpoints swapped: (" + std::to_string(s) + "," + std::to_string(e) + ")");
        std::swap(s, e);
    }
    return AnomalyInterval{s, e};
}

CandidateOutput parse_structured_output(const std::string& text, const TimeSeries* axis_context) {
    CandidateOutput out;

    const auto anomaly = tag_body(text, "anomaly");
    if (!anomaly) {
        throw SchemaError("missing <anomaly> tag");
    }
    std::string decision = trim(*anomaly);
    std::transform(decision.begin(), decision.end(), decision.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (decision == "true") {
        out.decision = true;
    } else if (decision == "false") {
        out.decision = false;
    } else {
        throw SchemaError("anomaly tag value '" + trim(*anomaly) + "' is not True/False");
    }

    // Collect every <index>(start, end)</index> pair.
    static const std::regex index_re(R"(<index>([\s\S]*?)</index>)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), index_re);
         it != std::sregex_iterator(); ++it) {
        const std::string body = trim((*it)[1].str());
        const std::size_t lp = body.find('(');
        const std::size_t rp = body.rfind(')');
        const std::size_t comma = body.find(',');
        if (lp == std::string::npos || rp == std::string::npos || comma == std::string::npos ||
            !(lp < comma && comma < rp)) {
            throw SchemaError("malformed index pair token '" + body + "'");
        }
        out.intervals_raw.emplace_back(trim(body.substr(lp + 1, comma - lp - 1)),
                                       trim(body.substr(comma + 1, rp - comma - 1)));
    }

    if (!out.decision && !out.intervals_raw.empty()) {
        throw SchemaError("decision False must not carry <index> tags");
    }

    std::vector<AnomalyInterval> mapped;
    for (const auto& pair : out.intervals_raw) {
        if (axis_context) {
            mapped.push_back(map_timestamps_to_indices(pair, *axis_context, &out.warnings));
        } else {
            // No axis context: tokens must be plain numbers.
            const auto s = parse_number(pair.first);
            const auto e = parse_number(pair.second);
            if (!s || !e) {
                throw SchemaError("pair token '(" + pair.first + "," + pair.second +
                                  ")' requires a timestamped series to resolve");
            }
            std::int64_t a = static_cast<std::int64_t>(std::llround(*s));
            std::int64_t b = static_cast<std::int64_t>(std::llround(*e));
            if (a > b) {
                out.warnings.push_back("interval endpoints swapped: (" + std::to_string(a) + "," +
                                       std::to_string(b) + ")");
                std::swap(a, b);
            }
            mapped.emplace_back(a, b);
        }
    }

    if (out.decision && mapped.empty()) {
        throw SchemaError("decision True with zero parseable intervals");
    }

    out.intervals = normalize(mapped);
    if (out.intervals.intervals != mapped) {
        out.warnings.push_back("intervals were out of order, overlapping, or adjacent; normalized");
    }

    if (const auto think = tag_body(text, "think")) {
        out.reasoning.raw = trim(*think);
        out.reasoning.steps = split_steps(out.reasoning.raw);
    }
    return out;
}

JudgeScores parse_judge_scores(const std::string& text) {
    auto grab = [&](const char* label) -> double {
        const std::regex re(std::string(label) + R"(\s*:\s*([0-9.eE+\-]+))");
        std::smatch m;
        if (!std::regex_search(text, m, re)) {
            throw JudgeFormatError(std::string("missing ") + label + " line in judge reply");
        }
        const auto v = parse_number(m[1].str());
        if (!v) {
            throw JudgeFormatError(std::string(label) + " value '" + m[1].str() +
                                   "' is not a number");
        }
        if (*v < 0.0 || *v > 1.0) {
            throw RangeError(std::string(label) + " value " + m[1].str() + " outside [0,1]");
        }
        return *v;
    };
    JudgeScores s;
    s.visual = grab("VISUAL");
    s.axis = grab("AXIS");
    s.clarity = grab("CLARITY");
    return s;
}

PairwiseVerdict parse_pairwise_verdict(const std::string& text) {
    static const std::regex token_re(R"((^|[^A-Za-z])(A|B|TIE|Tie|tie)(?=[^A-Za-z]|$))");
    std::vector<PairwiseVerdict> found;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), token_re);
         it != std::sregex_iterator(); ++it) {
        const std::string tok = (*it)[2].str();
        if (tok == "A") {
            found.push_back(PairwiseVerdict::A);
        } else if (tok == "B") {
            found.push_back(PairwiseVerdict::B);
        } else {
            found.push_back(PairwiseVerdict::Tie);
        }
    }
    if (found.size() != 1) {
        throw VerdictFormatError("expected exactly one verdict token, found " +
                                 std::to_string(found.size()));
    }
    return found.front();
}

std::string serialize_structured_output(const CandidateOutput& c) {
    std::ostringstream line1;
    line1 << "<anomaly>" << (c.decision ? "True" : "False") << "</anomaly>";
    bool first = true;
    for (const auto& iv : c.intervals.intervals) {
        line1 << (first ? "" : ",") << "<index>(" << iv.start << "," << iv.end << ")</index>";
        first = false;
    }

    std::string think;
    if (c.reasoning.steps.empty()) {
        think = c.reasoning.raw;
    } else {
        std::ostringstream body;
        for (std::size_t i = 0; i < c.reasoning.steps.size(); ++i) {
            body << (i ? " " : "") << "Step " << (i + 1) << ": " << c.reasoning.steps[i];
        }
        think = body.str();
    }
    std::replace(think.begin(), think.end(), '\n', ' ');

    return line1.str() + "\n<think>" + think + "</think>";
}

}  // namespace tsab::schema
