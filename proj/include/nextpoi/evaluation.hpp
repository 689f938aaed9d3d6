#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nextpoi/dataset.hpp"
#include "nextpoi/gateway.hpp"
#include "nextpoi/selection.hpp"

namespace nextpoi {

/// One test instance under one (strategy, k, trial) cell.
struct EvalRecord {
    int64_t task_id = -1;
    int32_t user = -1;
    StrategyKind strategy = StrategyKind::Random;
    bool user_filter = false;
    int k = 0;
    int trial = 0;
    std::vector<ScoredDemo> selected;
    int target_poi_in_demos = 0;
    std::optional<int32_t> predicted_poi;
    std::optional<std::string> predicted_category;
    ParseStatus parse_status = ParseStatus::Failed;
    bool correct = false;
    int64_t selection_time_us = 0;
    double llm_latency_ms = 0.0;
    std::vector<double> attempt_latency_ms;  // one entry per backend attempt
    std::string template_version;
    int context_length = 0;
    bool time_fallback = false;
    std::string error;  // empty unless the instance failed (provider/backend)
    bool operator==(const EvalRecord&) const = default;
};

/// Fraction of correct predictions. Multi-trial inputs (Random) average the
/// per-trial accuracies. Throws on empty input.
double acc_at_1(std::span<const EvalRecord> records);

/// Per-task correctness of two methods over the identical task list.
struct PairedOutcomes {
    std::vector<int64_t> task_ids;
    std::vector<bool> a;
    std::vector<bool> b;
};

/// Align two record sets by task id (intersection, ascending id). Multi-trial
/// sides collapse to per-task majority correctness; ties count as incorrect.
PairedOutcomes pair_by_task(std::span<const EvalRecord> method_a,
                            std::span<const EvalRecord> method_b);

struct McNemarResult {
    int b = 0;  // A correct, B wrong
    int c = 0;  // A wrong, B correct
    double p_value = 1.0;
    bool exact = false;
};

/// Two-sided McNemar test over discordant pairs: exact binomial when
/// b + c < 25, else chi-square with continuity correction. b + c = 0 gives
/// p = 1 by convention.
McNemarResult mcnemar_test(const PairedOutcomes& outcomes);

/// Sample Pearson r. Throws on length < 2, length mismatch, or zero variance.
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

struct InclusionStat {
    StrategyKind strategy = StrategyKind::Random;
    bool user_filter = false;
    int k = 0;
    double mean_inclusion = 0.0;  // mean target_poi_in_demos
    double acc = 0.0;
    size_t records = 0;
};

/// Per-(strategy, scope, k) mean target-POI inclusion and accuracy.
std::vector<InclusionStat> inclusion_analysis(std::span<const EvalRecord> records);

/// Pearson r between mean inclusion and accuracy across strategies, one value
/// per k. Entries with fewer than two strategies (or zero variance) are
/// omitted.
std::map<int, double> inclusion_accuracy_correlation(const std::vector<InclusionStat>& stats);

struct ContextBucket {
    int checkins = 0;  // context length; overflow bucket aggregates > cap
    bool overflow = false;
    size_t count = 0;
    std::optional<double> acc;  // absent when count == 0
};

/// ACC@1 bucketed by current check-in count: buckets 1..cap plus overflow.
std::vector<ContextBucket> context_length_breakdown(std::span<const EvalRecord> records,
                                                    int cap = 10);

// ---------------------------------------------------------------------------
// Record archive: line-delimited, schema-versioned, one meta line first.

inline constexpr const char* kRecordsSchemaVersion = "nextpoi.records.v1";

struct ArchiveMeta {
    std::string schema = kRecordsSchemaVersion;
    std::string dataset;
    std::string model;
    std::string config_digest;
    std::string template_version;
    uint64_t seed = 0;
    bool operator==(const ArchiveMeta&) const = default;
};

struct RecordArchive {
    ArchiveMeta meta;
    std::vector<EvalRecord> records;
};

void write_records(std::ostream& out, const ArchiveMeta& meta,
                   std::span<const EvalRecord> records);
RecordArchive read_records(std::istream& in);

// Single-record line codecs, shared with the resumable runner.
std::string record_to_line(const EvalRecord& record);
EvalRecord record_from_line(const std::string& line);

// ---------------------------------------------------------------------------
// Selection-cost benchmark (single-threaded dedicated pass).

struct BenchSpec {
    std::vector<StrategySpec> strategies;
    int repetitions = 3;
    int warmup = 1;
};

struct StrategyTiming {
    StrategySpec spec;
    double mean_us = 0.0;
    double p50_us = 0.0;
    double p95_us = 0.0;
    size_t instances = 0;   // timed samples
    size_t total_calls = 0; // including warmup
};

/// Time select() per test instance for each strategy. Warmup rounds are
/// excluded from the stats; the embedding cache is cleared after warmup so
/// embsim timings include encoding, amortized across instances by caching.
std::vector<StrategyTiming> bench_selection(std::span<const PredictionTask> tasks,
                                            const DemonstrationPool& pool, const BenchSpec& bench,
                                            const SelectionInputs& inputs = {});

}  // namespace nextpoi
