#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nextpoi/prompting.hpp"

namespace nextpoi {

enum class ParseStatus { Ok, Recovered, Failed };
const char* to_string(ParseStatus status);
ParseStatus parse_status_from_string(const std::string& name);

struct Prediction {
    std::optional<int32_t> place_id;
    std::optional<std::string> place_category;
    std::string raw_response;
    ParseStatus status = ParseStatus::Failed;
    bool operator==(const Prediction&) const = default;
};

/// Extract the answer JSON from a model response: strip code fences, parse
/// the whole text as JSON (-> ok), else the first balanced JSON object
/// (-> recovered), else a place_id regex (-> recovered), else failed.
Prediction parse_response(const std::string& text);

enum class MockPolicy { EchoMostFrequent, EchoMatchingHour, AlwaysWrong };
MockPolicy mock_policy_from_string(const std::string& name);

/// Deterministic LLM stand-in driven by the bundle's audit metadata. Fails
/// when the prompt carries no demonstrations.
///  - echo-most-frequent: modal demo-target POI, ties to the smallest id
///  - echo-matching-hour: demo target with the nearest circular hour-of-day,
///    ties to the smallest id
///  - always-wrong: a sentinel id (-1) outside every valid POI space
Prediction mock_predict(const PromptBundle& bundle, MockPolicy policy);

struct BackendConfig {
    enum class Kind { Mock, Remote };
    Kind kind = Kind::Mock;
    std::string endpoint;  // base URL, e.g. http://host:port/v1
    std::string model;
    double temperature = 0.0;
    int max_retries = 3;        // retries after the first attempt
    int timeout_seconds = 60;
    int max_inflight = 4;
    std::string api_key_env = "OPENAI_API_KEY";
    int backoff_base_ms = 250;  // doubled per retry
    MockPolicy mock_policy = MockPolicy::EchoMostFrequent;
};

/// Throws on invalid configs (remote without endpoint/model, negative
/// temperature); used to fail fast before any request is issued.
void validate(const BackendConfig& config);

struct Attempt {
    int index = 0;  // 1-based
    double latency_ms = 0.0;
    int http_status = 0;  // 0 on transport failure
    std::string error;
    bool ok = false;
};

struct GatewayResult {
    Prediction prediction;
    std::vector<Attempt> attempts;
    double total_latency_ms = 0.0;
};

/// One chat completion against an OpenAI-compatible endpoint
/// (POST {endpoint}/chat/completions, bearer key from the configured env
/// var). Transient failures (transport, 429, 5xx) retry with exponential
/// backoff up to max_retries; exhausted retries yield a failed Prediction,
/// never an exception.
class LlmClient {
public:
    explicit LlmClient(BackendConfig config);

    /// Test hook: replaces the inter-retry sleep.
    void set_sleeper(std::function<void(int ms)> sleeper);

    GatewayResult predict(const PromptBundle& bundle);

private:
    BackendConfig config_;
    std::function<void(int ms)> sleeper_;
};

/// Dispatch to the mock or a remote client according to config.kind.
GatewayResult predict(const PromptBundle& bundle, const BackendConfig& config);

}  // namespace nextpoi
