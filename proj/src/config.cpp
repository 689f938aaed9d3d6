#include "nextpoi/config.hpp"

#include <fstream>
#include <stdexcept>

#include "nextpoi/prompting.hpp"

namespace nextpoi {

using nlohmann::json;

namespace {

uint64_t fnv1a64_bytes(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        c.dataset.name = d.value("name", c.dataset.name);
        c.dataset.raw_path = d.value("raw_path", "");
        c.dataset.archive_path = d.value("archive_path", "");
        c.dataset.gap_hours = d.value("gap_hours", c.dataset.gap_hours);
        c.dataset.split_ratio = d.value("split_ratio", c.dataset.split_ratio);
        c.dataset.utc_offset_minutes = d.value("utc_offset_minutes", 0);
        if (d.contains("columns")) {
            const auto& cols = d["columns"];
            c.dataset.schema.user_col = cols.value("user", 0);
            c.dataset.schema.poi_col = cols.value("poi", 1);
            c.dataset.schema.category_col = cols.value("category", 2);
            c.dataset.schema.timestamp_col = cols.value("timestamp", 3);
            c.dataset.schema.lat_col = cols.value("lat", 4);
            c.dataset.schema.lon_col = cols.value("lon", 5);
        }
        const std::string delim = d.value("delimiter", ",");
        if (delim.size() != 1) throw std::invalid_argument("config: delimiter must be one character");
        c.dataset.schema.delimiter = delim[0];
        c.dataset.schema.has_header = d.value("has_header", false);
    }
    if (j.contains("strategies")) {
        for (const auto& s : j["strategies"]) {
            StrategyEntry e;
            e.kind = strategy_from_string(s.at("kind").get<std::string>());
            e.user_filter = s.value("user_filter", false);
            c.strategies.push_back(e);
        }
    }
    if (j.contains("ks")) c.ks = j["ks"].get<std::vector<int>>();
    c.trials = j.value("trials", c.trials);
    if (j.contains("backend")) {
        const auto& b = j["backend"];
        const std::string kind = b.value("kind", "mock");
        if (kind == "mock") {
            c.backend.kind = BackendConfig::Kind::Mock;
        } else if (kind == "remote") {
            c.backend.kind = BackendConfig::Kind::Remote;
        } else {
            throw std::invalid_argument("config: backend kind must be mock or remote");
        }
        c.backend.endpoint = b.value("endpoint", "");
        c.backend.model = b.value("model", "");
        c.backend.temperature = b.value("temperature", 0.0);
        c.backend.max_retries = b.value("max_retries", c.backend.max_retries);
        c.backend.timeout_seconds = b.value("timeout_seconds", c.backend.timeout_seconds);
        c.backend.max_inflight = b.value("max_inflight", c.backend.max_inflight);
        c.backend.api_key_env = b.value("api_key_env", c.backend.api_key_env);
        c.backend.backoff_base_ms = b.value("backoff_base_ms", c.backend.backoff_base_ms);
        if (b.contains("mock_policy"))
            c.backend.mock_policy = mock_policy_from_string(b["mock_policy"].get<std::string>());
    }
    if (j.contains("embedding")) {
        const auto& e = j["embedding"];
        c.embedding.provider = e.value("provider", c.embedding.provider);
        c.embedding.dimension = e.value("dimension", c.embedding.dimension);
        c.embedding.simulate_cost_ms = e.value("simulate_cost_ms", 0);
        c.embedding.endpoint = e.value("endpoint", "");
        c.embedding.model = e.value("model", "");
        c.embedding.api_key_env = e.value("api_key_env", c.embedding.api_key_env);
    }
    c.template_id = j.value("template", c.template_id);
    c.demo_order = j.value("demo_order", c.demo_order);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", uint64_t{0});
    c.trials = j.value("trials", c.trials);
    c.bench_repetitions = j.value("bench_repetitions", c.bench_repetitions);
    c.bench_warmup = j.value("bench_warmup", c.bench_warmup);
    c.bucket_cap = j.value("bucket_cap", c.bucket_cap);
    return c;
}

json config_to_json(const RunConfig& c) {
    json strategies = json::array();
    for (const auto& s : c.strategies)
        strategies.push_back({{"kind", to_string(s.kind)}, {"user_filter", s.user_filter}});
    return json{
        {"dataset",
         {{"name", c.dataset.name},
          {"raw_path", c.dataset.raw_path},
          {"archive_path", c.dataset.archive_path},
          {"delimiter", std::string(1, c.dataset.schema.delimiter)},
          {"has_header", c.dataset.schema.has_header},
          {"columns",
           {{"user", c.dataset.schema.user_col},
            {"poi", c.dataset.schema.poi_col},
            {"category", c.dataset.schema.category_col},
            {"timestamp", c.dataset.schema.timestamp_col},
            {"lat", c.dataset.schema.lat_col},
            {"lon", c.dataset.schema.lon_col}}},
          {"gap_hours", c.dataset.gap_hours},
          {"split_ratio", c.dataset.split_ratio},
          {"utc_offset_minutes", c.dataset.utc_offset_minutes}}},
        {"strategies", std::move(strategies)},
        {"ks", c.ks},
        {"trials", c.trials},
        {"backend",
         {{"kind", c.backend.kind == BackendConfig::Kind::Mock ? "mock" : "remote"},
          {"endpoint", c.backend.endpoint},
          {"model", c.backend.model},
          {"temperature", c.backend.temperature},
          {"max_retries", c.backend.max_retries},
          {"timeout_seconds", c.backend.timeout_seconds},
          {"max_inflight", c.backend.max_inflight},
          {"api_key_env", c.backend.api_key_env},
          {"backoff_base_ms", c.backend.backoff_base_ms},
          {"mock_policy", c.backend.mock_policy == MockPolicy::EchoMostFrequent
                              ? "echo-most-frequent"
                              : (c.backend.mock_policy == MockPolicy::EchoMatchingHour
                                     ? "echo-matching-hour"
                                     : "always-wrong")}}},
        {"embedding",
         {{"provider", c.embedding.provider},
          {"dimension", c.embedding.dimension},
          {"simulate_cost_ms", c.embedding.simulate_cost_ms},
          {"endpoint", c.embedding.endpoint},
          {"model", c.embedding.model},
          {"api_key_env", c.embedding.api_key_env}}},
        {"template", c.template_id},
        {"demo_order", c.demo_order},
        {"out_dir", c.out_dir},
        {"seed", c.seed},
        {"bench_repetitions", c.bench_repetitions},
        {"bench_warmup", c.bench_warmup},
        {"bucket_cap", c.bucket_cap}};
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

void validate(const RunConfig& c) {
    if (!(c.dataset.split_ratio > 0.0 && c.dataset.split_ratio < 1.0))
        throw std::invalid_argument("config: split_ratio must be in (0,1)");
    if (c.dataset.gap_hours <= 0.0) throw std::invalid_argument("config: gap_hours must be > 0");
    if (c.strategies.empty()) throw std::invalid_argument("config: no strategies configured");
    if (c.ks.empty()) throw std::invalid_argument("config: no k values configured");
    for (const int k : c.ks) {
        if (k < 1) throw std::invalid_argument("config: k must be >= 1");
    }
    if (c.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    for (const auto& s : c.strategies) {
        StrategySpec spec;
        spec.kind = s.kind;
        spec.user_filter = s.user_filter;
        spec.k = c.ks.front();
        validate(spec);  // rejects time without user_filter
    }
    validate(c.backend);
    if (c.embedding.provider != "hash" && c.embedding.provider != "remote")
        throw std::invalid_argument("config: embedding provider must be hash or remote");
    if (c.embedding.provider == "remote" &&
        (c.embedding.endpoint.empty() || c.embedding.model.empty()))
        throw std::invalid_argument("config: remote embedding requires endpoint and model");
    builtin_template(c.template_id);  // throws on unknown id
    demo_order_from_string(c.demo_order);
}

std::string config_digest(const RunConfig& config) {
    return hex64(fnv1a64_bytes(config_to_json(config).dump()));
}

uint64_t derive_seed(uint64_t run_seed, int trial, int64_t task_id) {
    uint64_t h = 1469598103934665603ULL ^ run_seed;
    auto mix = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    mix(static_cast<uint64_t>(trial));
    mix(static_cast<uint64_t>(task_id));
    return h;
}

}  // namespace nextpoi
