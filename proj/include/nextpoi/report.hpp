#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nextpoi/evaluation.hpp"

namespace nextpoi {

struct ReportResult {
    std::string table_text;   // aligned ACC@1 matrix with significance markers
    nlohmann::json rows;      // machine-readable cells, one object per cell
    std::string fig3_csv;     // selection time vs accuracy per strategy
    std::string fig4_csv;     // accuracy by current check-in count
    std::string fig5_csv;     // mean target-POI inclusion per strategy and k
    std::vector<std::string> warnings;
};

/// Aggregate one or more record archives into the evaluation report.
/// Blocks are keyed by (dataset, model, pool scope); within a block each
/// non-random strategy is McNemar-tested against Random over tasks both ran
/// ("+" marks the best cell, "†"/"‡" mark p < 0.1 / p < 0.05). Timings, when
/// provided, join into the fig3 series; otherwise fig3 is omitted with a
/// warning.
ReportResult build_report(const std::vector<RecordArchive>& archives,
                          const std::vector<StrategyTiming>& timings = {}, int bucket_cap = 10);

// Bench output persistence (JSON, consumed by report for fig3). The meta
// block, when given, stamps the run's config digest, template, and seed.
void write_bench_report(std::ostream& out, const std::vector<StrategyTiming>& timings,
                        const ArchiveMeta* meta = nullptr);
std::vector<StrategyTiming> read_bench_report(std::istream& in);

}  // namespace nextpoi
