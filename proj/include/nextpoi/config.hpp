#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nextpoi/dataset.hpp"
#include "nextpoi/gateway.hpp"
#include "nextpoi/selection.hpp"

namespace nextpoi {

struct DatasetConfig {
    std::string name = "dataset";
    std::string raw_path;      // delimiter-separated check-in rows
    std::string archive_path;  // canonical archive produced by prepare
    ColumnSchema schema;
    double gap_hours = 24.0;
    double split_ratio = 0.8;
    int utc_offset_minutes = 0;
};

struct EmbeddingConfig {
    std::string provider = "hash";  // hash | remote
    int dimension = 64;
    int simulate_cost_ms = 0;  // hash provider only
    std::string endpoint;      // remote only, base URL ending in /v1
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
};

/// One strategy entry of the experiment grid (k values come separately).
struct StrategyEntry {
    StrategyKind kind = StrategyKind::Random;
    bool user_filter = false;
};

struct RunConfig {
    DatasetConfig dataset;
    std::vector<StrategyEntry> strategies;
    std::vector<int> ks{5, 15, 30};
    int trials = 5;  // Random only; other strategies run one trial
    BackendConfig backend;
    EmbeddingConfig embedding;
    std::string template_id = "fewshot-v1";
    std::string demo_order = "ranked";
    std::string out_dir = "out";
    uint64_t seed = 0;
    int bench_repetitions = 3;
    int bench_warmup = 1;
    int bucket_cap = 10;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);

/// Rejects invalid grids before any work: bad ratio or gap, k < 1, empty
/// strategy list, time without user filtering, remote backends missing
/// endpoint or model.
void validate(const RunConfig& config);

/// FNV-1a hash of the canonical JSON encoding, hex. Stable across runs for
/// identical configs; embedded in every emitted artifact.
std::string config_digest(const RunConfig& config);

/// Seed for one (trial, task) Random draw, derived from the run seed.
uint64_t derive_seed(uint64_t run_seed, int trial, int64_t task_id);

}  // namespace nextpoi
