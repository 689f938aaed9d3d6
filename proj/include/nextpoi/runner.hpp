#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nextpoi/config.hpp"
#include "nextpoi/dataset.hpp"
#include "nextpoi/evaluation.hpp"
#include "nextpoi/report.hpp"

namespace nextpoi {

/// Exclusive per-run-directory lock; throws when already held.
class LockFile {
public:
    explicit LockFile(const std::string& path);
    ~LockFile();
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    std::string path_;
    int fd_ = -1;
};

struct PrepareOutcome {
    DatasetStats stats;
    std::string archive_path;
    std::string archive_digest;  // FNV-1a of the archive bytes
    size_t row_errors = 0;
    std::string stats_text;  // aligned summary table
};

/// Ingest the raw file, segment, split, and write the canonical dataset
/// archive plus a stats report under out_dir. Deterministic: unchanged
/// input yields an identical archive digest.
PrepareOutcome cmd_prepare(const RunConfig& config, std::ostream& log);

struct RunOutcome {
    std::string records_path;
    size_t written = 0;
    size_t skipped = 0;  // already present from a previous run
    size_t llm_calls = 0;
    size_t errored = 0;  // instances recorded with an error note
};

/// Execute the full (strategy, k, trial, task) grid against the prepared
/// archive, appending one record per instance. Resumable: instances already
/// in the records file are skipped, after checking the config digest
/// matches. dry_run renders prompts to files and performs no backend calls.
RunOutcome cmd_run(const RunConfig& config, bool dry_run, std::ostream& log);

/// In-memory grid execution over an existing corpus; cmd_run's core, also
/// used directly by tests. Appends to `records` and returns counters. When
/// `transcript` is given, one line-delimited record per backend attempt is
/// written to it (task id, attempt index, latency, status). Remote backends
/// overlap up to backend.max_inflight predictions; records always land in
/// task order.
RunOutcome run_grid(const RunConfig& config, const Corpus& corpus,
                    const std::vector<std::string>& completed_keys, bool dry_run,
                    std::vector<EvalRecord>& records, std::ostream& log,
                    std::ostream* transcript = nullptr);

std::string instance_key(StrategyKind kind, bool user_filter, int k, int trial, int64_t task_id);

/// Dedicated single-threaded selection-cost pass; writes bench.json and the
/// fig3 series under out_dir.
std::vector<StrategyTiming> cmd_bench(const RunConfig& config, std::ostream& log);

/// Aggregate archives (plus optional bench timings) into report.txt, the
/// machine-readable rows, and the fig3/fig4/fig5 series under out_dir.
ReportResult cmd_report(const std::vector<std::string>& archive_paths,
                        const std::string& bench_path, const std::string& out_dir,
                        std::ostream& log);

}  // namespace nextpoi
