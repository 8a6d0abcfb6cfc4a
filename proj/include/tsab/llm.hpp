/// @file llm.hpp
/// Prompt construction and (image + text) chat exchange with any
/// OpenAI-compatible vision endpoint, plus a deterministic scripted client
/// for hermetic runs.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tsab/core.hpp"
#include "tsab/render.hpp"

namespace tsab::llm {

class TransportError : public DomainError {
public:
    using DomainError::DomainError;
};

class EndpointError : public DomainError {
public:
    EndpointError(int status, const std::string& body)
        : DomainError("endpoint returned status " + std::to_string(status) + ": " + body),
          status(status),
          body(body) {}
    int status;
    std::string body;
};

class ProtocolError : public DomainError {
public:
    using DomainError::DomainError;
};

class ScriptedMissError : public DomainError {
public:
    using DomainError::DomainError;
};

struct EndpointConfig {
    std::string base_url;                       // e.g. http://localhost:8000/v1
    std::string model_name;
    std::string api_key_env = "TSAB_API_KEY";   // key is read from this env var
    double timeout_seconds = 120.0;
    int max_retries = 3;
    int max_parallel = 4;
    double temperature = 0.0;
    int backoff_initial_ms = 500;

    void validate() const;
};

struct PromptText {
    std::optional<std::string> system;
    std::string user;
    std::vector<std::uint8_t> image;  // PNG bytes; empty = text-only
};

/// Elicitation prompt: full template with the ground-truth section filled
/// in. Timestamp axis mode formats the intervals through the series'
/// timestamps (required then).
PromptText build_elicitation_prompt(const std::string& context, const IntervalSet& gt,
                                    render::XAxisMode axis_mode,
                                    const TimeSeries* series = nullptr);

/// Detection prompt: identical template with the ground-truth section
/// removed; no ground truth ever appears.
PromptText build_detection_prompt(const std::string& context);

PromptText build_judge_prompt(const std::string& context, const std::string& decision_line,
                              const std::string& reasoning);

/// Pairwise comparison under neutral A/B labels; requests one verdict token
/// from {A, B, TIE}.
PromptText build_pairwise_prompt(const std::string& context, const std::string& explanation_a,
                                 const std::string& explanation_b);

/// Stable hash over (model name, prompt text, image bytes); keys the audit
/// log and the scripted client.
std::string fingerprint(const std::string& model_name, const PromptText& prompt);

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const PromptText& prompt) = 0;
    virtual const std::string& model_name() const = 0;
};

struct HttpResponse {
    bool transport_ok = false;  // false: connection/timeout failure
    int status = 0;
    std::string body;
    std::string error;
};

/// Injectable POST transport; production code uses the httplib-backed
/// implementation from make_http_transport.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& json_body,
                              const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

std::shared_ptr<Transport> make_http_transport(double timeout_seconds);

using SleepFn = std::function<void(int /*milliseconds*/)>;

/// OpenAI-compatible chat-completions client. Retries transport failures
/// and retryable statuses (408/429/5xx) with exponential backoff; at most
/// max_parallel requests are in flight at once.
class HttpChatClient : public ChatClient {
public:
    HttpChatClient(EndpointConfig config, std::shared_ptr<Transport> transport = nullptr,
                   SleepFn sleep = nullptr);

    std::string complete(const PromptText& prompt) override;
    const std::string& model_name() const override { return config_.model_name; }

    /// JSON request body for a prompt (exposed for tests and audit hashing).
    std::string request_body(const PromptText& prompt) const;

private:
    EndpointConfig config_;
    std::shared_ptr<Transport> transport_;
    SleepFn sleep_;
    std::mutex mutex_;
    std::condition_variable slots_cv_;
    int in_flight_ = 0;
};

/// Deterministic client answering from a fingerprint -> response script.
class MockChatClient : public ChatClient {
public:
    MockChatClient(std::string model_name, std::map<std::string, std::string> script)
        : model_(std::move(model_name)), script_(std::move(script)) {}

    std::string complete(const PromptText& prompt) override;
    const std::string& model_name() const override { return model_; }

    void add(const std::string& fp, const std::string& response) { script_[fp] = response; }

private:
    std::string model_;
    std::map<std::string, std::string> script_;
};

/// Append-only JSONL transcript keyed by fingerprint; existing entries are
/// loaded on open so interrupted runs resume without re-asking.
class AuditLog {
public:
    explicit AuditLog(const std::filesystem::path& path);

    std::optional<std::string> lookup(const std::string& fp) const;
    void record(const std::string& fp, const std::string& model, const std::string& request_sha256,
                const std::string& response_text, std::int64_t latency_ms);

private:
    std::filesystem::path path_;
    std::map<std::string, std::string> responses_;
    mutable std::mutex mutex_;
};

}  // namespace tsab::llm
