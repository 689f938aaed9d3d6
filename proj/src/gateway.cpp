#include "nextpoi/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <map>
#include <regex>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "http_util.hpp"

namespace nextpoi {

using nlohmann::json;

const char* to_string(ParseStatus status) {
    switch (status) {
        case ParseStatus::Ok: return "ok";
        case ParseStatus::Recovered: return "recovered";
        case ParseStatus::Failed: return "failed";
    }
    return "?";
}

ParseStatus parse_status_from_string(const std::string& name) {
    if (name == "ok") return ParseStatus::Ok;
    if (name == "recovered") return ParseStatus::Recovered;
    if (name == "failed") return ParseStatus::Failed;
    throw std::invalid_argument("unknown parse status '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_code_fences(const std::string& text) {
    std::string work = trim(text);
    if (work.rfind("```", 0) == 0) {
        const auto eol = work.find('\n');
        work = (eol == std::string::npos) ? "" : work.substr(eol + 1);
        const auto closing = work.rfind("```");
        if (closing != std::string::npos) work = work.substr(0, closing);
        work = trim(work);
    }
    return work;
}

// First balanced {...} span, respecting string literals and escapes.
std::optional<std::string> first_json_object(const std::string& text, size_t from = 0) {
    const auto start = text.find('{', from);
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return text.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

std::optional<int32_t> id_from_json(const json& j) {
    if (!j.contains("place_id")) return std::nullopt;
    const auto& v = j["place_id"];
    if (v.is_number_integer()) return v.get<int32_t>();
    if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) {
                return std::isdigit(c) != 0;
            }))
            return std::nullopt;
        try {
            return static_cast<int32_t>(std::stol(s));
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

void fill_from_json(const json& j, Prediction& p) {
    p.place_id = id_from_json(j);
    if (j.contains("place_category") && j["place_category"].is_string())
        p.place_category = j["place_category"].get<std::string>();
}

}  // namespace

Prediction parse_response(const std::string& text) {
    Prediction p;
    p.raw_response = text;

    const std::string work = strip_code_fences(text);

    // Whole text is the answer object.
    if (!work.empty() && work.front() == '{') {
        try {
            fill_from_json(json::parse(work), p);
            if (p.place_id) {
                p.status = ParseStatus::Ok;
                return p;
            }
        } catch (const json::exception&) {
        }
    }

    // Embedded object somewhere in prose.
    for (size_t from = 0;;) {
        const auto obj = first_json_object(work, from);
        if (!obj) break;
        try {
            fill_from_json(json::parse(*obj), p);
            if (p.place_id) {
                p.status = ParseStatus::Recovered;
                return p;
            }
        } catch (const json::exception&) {
        }
        from = work.find('{', from) + 1;
    }

    // Last resort: regex over the raw text.
    static const std::regex kIdPattern(R"regex(place_id"?\s*:\s*"?(\d+))regex");
    std::smatch m;
    if (std::regex_search(work, m, kIdPattern)) {
        try {
            p.place_id = static_cast<int32_t>(std::stol(m[1].str()));
            p.status = ParseStatus::Recovered;
            static const std::regex kCatPattern(R"regex(place_category"?\s*:\s*"([^"]*)")regex");
            std::smatch mc;
            if (std::regex_search(work, mc, kCatPattern)) p.place_category = mc[1].str();
            return p;
        } catch (const std::exception&) {
        }
    }

    p.place_id.reset();
    p.status = ParseStatus::Failed;
    return p;
}

MockPolicy mock_policy_from_string(const std::string& name) {
    if (name == "echo-most-frequent") return MockPolicy::EchoMostFrequent;
    if (name == "echo-matching-hour") return MockPolicy::EchoMatchingHour;
    if (name == "always-wrong") return MockPolicy::AlwaysWrong;
    throw std::invalid_argument("unknown mock policy '" + name + "'");
}

Prediction mock_predict(const PromptBundle& bundle, MockPolicy policy) {
    Prediction p;
    p.raw_response = "[mock]";
    if (bundle.demo_targets.empty()) {
        p.status = ParseStatus::Failed;
        return p;
    }

    int32_t chosen = -1;
    switch (policy) {
        case MockPolicy::EchoMostFrequent: {
            std::map<int32_t, int> counts;  // ordered: ties resolve to smallest id
            for (const auto& t : bundle.demo_targets) ++counts[t.poi];
            int best = 0;
            for (const auto& [poi, n] : counts) {
                if (n > best) {
                    best = n;
                    chosen = poi;
                }
            }
            break;
        }
        case MockPolicy::EchoMatchingHour: {
            int best_dist = 25;
            for (const auto& t : bundle.demo_targets) {
                const int raw = std::abs(t.hour - bundle.current_target_hour);
                const int dist = std::min(raw, 24 - raw);
                if (dist < best_dist || (dist == best_dist && t.poi < chosen)) {
                    best_dist = dist;
                    chosen = t.poi;
                }
            }
            break;
        }
        case MockPolicy::AlwaysWrong:
            chosen = -1;  // dense POI ids are non-negative, so never correct
            break;
    }
    p.place_id = chosen;
    p.status = ParseStatus::Ok;
    return p;
}

void validate(const BackendConfig& config) {
    if (config.kind == BackendConfig::Kind::Remote) {
        if (config.endpoint.empty() || config.model.empty())
            throw std::invalid_argument("remote backend requires endpoint and model");
        detail::split_url(config.endpoint);  // throws on malformed URL
    }
    if (config.temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
    if (config.max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
    if (config.max_inflight < 1) throw std::invalid_argument("max_inflight must be >= 1");
}

LlmClient::LlmClient(BackendConfig config) : config_(std::move(config)) {
    validate(config_);
    sleeper_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

void LlmClient::set_sleeper(std::function<void(int ms)> sleeper) { sleeper_ = std::move(sleeper); }

GatewayResult LlmClient::predict(const PromptBundle& bundle) {
    GatewayResult result;
    const auto url = detail::split_url(config_.endpoint);
    const std::string key = detail::api_key_from_env(config_.api_key_env);

    const json body{{"model", config_.model},
                    {"messages", json::array({{{"role", "user"}, {"content", bundle.full_text}}})},
                    {"temperature", config_.temperature}};
    const std::string payload = body.dump();

    for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
        Attempt a;
        a.index = attempt;
        const auto t0 = std::chrono::steady_clock::now();

        httplib::Client client(url.base);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers;
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        auto res = client.Post(url.prefix + "/chat/completions", headers, payload,
                               "application/json");
        a.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                 t0)
                           .count();
        result.total_latency_ms += a.latency_ms;

        bool retryable = false;
        std::string content;
        if (!res) {
            a.error = httplib::to_string(res.error());
            retryable = true;
        } else {
            a.http_status = res->status;
            if (res->status == 429 || res->status >= 500) {
                a.error = "HTTP " + std::to_string(res->status);
                retryable = true;
            } else if (res->status != 200) {
                a.error = "HTTP " + std::to_string(res->status);
            } else {
                try {
                    const json parsed = json::parse(res->body);
                    content =
                        parsed.at("choices").at(0).at("message").at("content").get<std::string>();
                    a.ok = true;
                } catch (const json::exception& e) {
                    a.error = std::string("malformed completion response: ") + e.what();
                }
            }
        }
        result.attempts.push_back(a);

        if (a.ok) {
            result.prediction = parse_response(content);
            return result;
        }
        if (!retryable) break;
        if (attempt <= config_.max_retries)
            sleeper_(config_.backoff_base_ms * (1 << (attempt - 1)));
    }

    result.prediction.status = ParseStatus::Failed;
    result.prediction.raw_response =
        "[gateway] " + (result.attempts.empty() ? std::string("no attempts")
                                                : result.attempts.back().error);
    return result;
}

GatewayResult predict(const PromptBundle& bundle, const BackendConfig& config) {
    if (config.kind == BackendConfig::Kind::Mock) {
        GatewayResult result;
        result.prediction = mock_predict(bundle, config.mock_policy);
        return result;
    }
    LlmClient client(config);
    return client.predict(bundle);
}

}  // namespace nextpoi
