#include "tsab/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tsab/util.hpp"

namespace tsab::llm {

namespace {

using nlohmann::json;

// Template shared by elicitation and detection; {gt_section} is filled with
// the ground-truth block (elicitation) or removed (detection).
constexpr const char* kAnomalyTemplate = R"(You are given a time-series plot image (not raw values) and a short context:

{ts_context}

Your task is to (i) decide whether anomalies are present, (ii) localize them as inclusive index/timestamp intervals exactly as shown on the plot axes, and (iii) provide concise, step-by-step reasoning grounded in what is visible. If citing numbers, estimate only from axis ticks or labels.

Please follow these steps:
- Give a short image description relevant to anomaly detection, focusing on axes type, visible trend or seasonality, and any obvious spikes, drops, or level shifts.
- Provide a brief rationale distinguishing normal behavior (baseline, seasonality, variance) from visible deviations. Numeric estimates should be derived only from axis labels or tick spacing and noted approximately.
- Generate a simplified step-by-step reasoning process consisting of 3-4 numbered steps. Each step must be specific, non-redundant, and grounded in visual evidence.
- Present the final decision using the STRICT schema below.

STRICT schema and rules:
- Intervals are inclusive of endpoints.
- Use x-axis values as shown (timestamps or integer indices); do not invent precision.
- Merge visually contiguous anomalous points into a single interval; intervals must be sorted and non-overlapping.
- When anomalies exist, wrap each (start, end) pair in its own <index>...</index> tag.
- When no anomalies exist, output only <anomaly>False</anomaly> with no <index> tags.

Required section headings (use exactly):
- Image Description:
  - (1-3 sentences about the plot relevant to anomalies.)
- Rationales:
  - (Concise bullet 1: expected behavior from context.)
  - (Concise bullet 2: visible deviations with axis-aware estimates when needed.)
  - (Optional concise bullet 3.)
- Lets think step by step.
  - Step 1: (Identify axes scale and baseline; note any seasonality.)
  - Step 2: (Locate candidate abnormal regions and justify deviations.)
  - Step 3: (Consolidate adjacent points into inclusive intervals; map to x-axis values; ensure sorted, non-overlapping.)
{gt_section}
Final output format (produce exactly two lines, then stop):
<anomaly>True/False</anomaly><index>(start_1,end_1)</index>,<index>(start_2,end_2)</index>
<think>Step 1: ... Step 2: ... Step 3: ...</think>
)";

constexpr const char* kJudgeTemplate = R"(You are evaluating a model's reasoning for time-series anomaly detection. Use the attached image and the inputs below.

Inputs:
- Context: {context}
- Decision (Line 1): {decision}
- Reasoning (inside <think>): {reasoning}

Evaluate along three dimensions:
1. Visual Groundedness: How well does the reasoning reference visible patterns (spikes, drops, shifts) in the plot?
2. Axis Awareness: Are timestamps/indices and value ranges consistent with the actual axes? Penalize hallucinated precision.
3. Clarity: Is the reasoning logically ordered, non-redundant, and clearly connected from observation to conclusion?

Return your scores as three numbers in this exact format:
VISUAL: <number in [0,1]>
AXIS: <number in [0,1]>
CLARITY: <number in [0,1]>

Do NOT add any other text, explanation, or formatting. Only those three lines.
)";

constexpr const char* kPairwiseTemplate = R"(You are comparing two explanations of the same time-series plot. Use the attached image and the context below.

Context: {context}

Explanation A:
{explanation_a}

Explanation B:
{explanation_b}

Select the better explanation based on visual groundedness, axis consistency, and clarity.

Answer with exactly one token: A, B, or TIE. Do NOT add any other text.
)";

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string format_intervals(const IntervalSet& gt, render::XAxisMode axis_mode,
                             const TimeSeries* series) {
    std::ostringstream out;
    bool first = true;
    for (const auto& iv : gt.intervals) {
        out << (first ? "" : ", ");
        if (axis_mode == render::XAxisMode::Timestamp) {
            if (!series || !series->timestamps) {
                throw DomainError("timestamp axis mode needs a timestamped series");
            }
            const auto& ts = *series->timestamps;
            out << "(" << util::format_timestamp(ts.at(std::size_t(iv.start - 1))) << ", "
                << util::format_timestamp(ts.at(std::size_t(iv.end - 1))) << ")";
        } else {
            out << "(" << iv.start << ", " << iv.end << ")";
        }
        first = false;
    }
    return out.str();
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

}  // namespace

void EndpointConfig::validate() const {
    if (max_parallel < 1) throw DomainError("max_parallel must be >= 1");
    if (max_retries < 0) throw DomainError("max_retries must be >= 0");
}

PromptText build_elicitation_prompt(const std::string& context, const IntervalSet& gt,
                                    render::XAxisMode axis_mode, const TimeSeries* series) {
    if (gt.empty()) {
        throw DomainError("elicitation requires non-empty ground truth");
    }
    PromptText p;
    std::string text = replace_all(kAnomalyTemplate, "{ts_context}", context);
    const std::string gt_section =
        "- The anomaly is:\n  - " + format_intervals(gt, axis_mode, series) + "\n";
    p.user = replace_all(text, "{gt_section}", gt_section);
    return p;
}

PromptText build_detection_prompt(const std::string& context) {
    PromptText p;
    std::string text = replace_all(kAnomalyTemplate, "{ts_context}", context);
    p.user = replace_all(text, "{gt_section}", "");
    return p;
}

PromptText build_judge_prompt(const std::string& context, const std::string& decision_line,
                              const std::string& reasoning) {
    PromptText p;
    std::string text = replace_all(kJudgeTemplate, "{context}", context);
    text = replace_all(text, "{decision}", decision_line);
    p.user = replace_all(text, "{reasoning}", reasoning);
    return p;
}

PromptText build_pairwise_prompt(const std::string& context, const std::string& explanation_a,
                                 const std::string& explanation_b) {
    if (explanation_a.empty() || explanation_b.empty()) {
        throw DomainError("pairwise comparison needs two non-empty explanations");
    }
    PromptText p;
    std::string text = replace_all(kPairwiseTemplate, "{context}", context);
    text = replace_all(text, "{explanation_a}", explanation_a);
    p.user = replace_all(text, "{explanation_b}", explanation_b);
    return p;
}

std::string fingerprint(const std::string& model_name, const PromptText& prompt) {
    std::string material;
    material += model_name;
    material += '\x1f';
    material += prompt.system.value_or("");
    material += '\x1f';
    material += prompt.user;
    material += '\x1f';
    material.append(reinterpret_cast<const char*>(prompt.image.data()), prompt.image.size());
    return util::sha256_hex(material);
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

namespace {

class HttplibTransport : public Transport {
public:
    explicit HttplibTransport(double timeout_seconds) : timeout_(timeout_seconds) {}

    HttpResponse post(const std::string& url, const std::string& json_body,
                      const std::vector<std::pair<std::string, std::string>>& headers) override {
        // Split scheme://host[:port] from the path.
        const std::size_t scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            return {false, 0, "", "invalid URL: " + url};
        }
        const std::size_t path_start = url.find('/', scheme_end + 3);
        const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(std::chrono::milliseconds(std::int64_t(timeout_ * 1000)));
        client.set_read_timeout(std::chrono::milliseconds(std::int64_t(timeout_ * 1000)));
        httplib::Headers hdrs;
        for (const auto& [k, v] : headers) hdrs.emplace(k, v);

        const auto res = client.Post(path, hdrs, json_body, "application/json");
        if (!res) {
            return {false, 0, "", httplib::to_string(res.error())};
        }
        return {true, res->status, res->body, ""};
    }

private:
    double timeout_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(double timeout_seconds) {
    return std::make_shared<HttplibTransport>(timeout_seconds);
}

HttpChatClient::HttpChatClient(EndpointConfig config, std::shared_ptr<Transport> transport,
                               SleepFn sleep)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport)
                           : make_http_transport(config_.timeout_seconds)),
      sleep_(sleep ? std::move(sleep) : [](int ms) {
          std::this_thread::sleep_for(std::chrono::milliseconds(ms));
      }) {
    config_.validate();
}

std::string HttpChatClient::request_body(const PromptText& prompt) const {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", prompt.user}});
    if (!prompt.image.empty()) {
        content.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url", "data:image/png;base64," + util::base64_encode(prompt.image)}}}});
    }
    json messages = json::array();
    if (prompt.system) {
        messages.push_back({{"role", "system"}, {"content", *prompt.system}});
    }
    messages.push_back({{"role", "user"}, {"content", content}});
    const json body = {{"model", config_.model_name},
                       {"messages", messages},
                       {"temperature", config_.temperature}};
    return body.dump();
}

std::string HttpChatClient::complete(const PromptText& prompt) {
    {
        std::unique_lock<std::mutex> lock(mutex_);
        slots_cv_.wait(lock, [&] { return in_flight_ < config_.max_parallel; });
        ++in_flight_;
    }
    struct SlotGuard {
        HttpChatClient* self;
        ~SlotGuard() {
            std::lock_guard<std::mutex> lock(self->mutex_);
            --self->in_flight_;
            self->slots_cv_.notify_one();
        }
    } guard{this};

    std::vector<std::pair<std::string, std::string>> headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    const std::string url = config_.base_url + "/chat/completions";
    const std::string body = request_body(prompt);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleep_(config_.backoff_initial_ms << (attempt - 1));
        }
        const HttpResponse res = transport_->post(url, body, headers);
        if (!res.transport_ok) {
            last_error = res.error;
            continue;
        }
        if (res.status >= 200 && res.status < 300) {
            json reply;
            try {
                reply = json::parse(res.body);
            } catch (const json::exception& e) {
                throw ProtocolError(std::string("unparsable completion body: ") + e.what());
            }
            std::string text;
            try {
                text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception&) {
                throw ProtocolError("completion body has no choices[0].message.content");
            }
            if (text.empty()) {
                throw ProtocolError("endpoint returned an empty completion");
            }
            return text;
        }
        if (!retryable_status(res.status)) {
            throw EndpointError(res.status, res.body);
        }
        last_error = "status " + std::to_string(res.status);
    }
    throw TransportError("request failed after " + std::to_string(config_.max_retries + 1) +
                         " attempts: " + last_error);
}

std::string MockChatClient::complete(const PromptText& prompt) {
    const std::string fp = fingerprint(model_, prompt);
    const auto it = script_.find(fp);
    if (it == script_.end()) {
        throw ScriptedMissError("no scripted response for fingerprint " + fp);
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Audit log
// ---------------------------------------------------------------------------

AuditLog::AuditLog(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            responses_[j.at("fingerprint").get<std::string>()] =
                j.at("response_text").get<std::string>();
        } catch (const json::exception&) {
            // Skip torn trailing lines from an interrupted run.
        }
    }
}

std::optional<std::string> AuditLog::lookup(const std::string& fp) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = responses_.find(fp);
    if (it == responses_.end()) return std::nullopt;
    return it->second;
}

void AuditLog::record(const std::string& fp, const std::string& model,
                      const std::string& request_sha256, const std::string& response_text,
                      std::int64_t latency_ms) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    const json entry = {
        {"fingerprint", fp},
        {"model", model},
        {"request_sha256", request_sha256},
        {"response_text", response_text},
        {"latency_ms", latency_ms},
        {"timestamp",
         double(std::chrono::duration_cast<std::chrono::milliseconds>(now).count()) / 1000.0}};
    std::ofstream out(path_, std::ios::app);
    out << entry.dump() << "\n";
    responses_[fp] = response_text;
}

}  // namespace tsab::llm
