#include "nextpoi/report.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace nextpoi {

using nlohmann::json;

namespace {

struct BlockKey {
    std::string dataset;
    std::string model;
    bool user_filter = false;
    auto operator<=>(const BlockKey&) const = default;
};

struct CellKey {
    StrategyKind strategy;
    int k;
    auto operator<=>(const CellKey&) const = default;
};

// Strategy display order mirrors the result tables: baselines first.
int strategy_rank(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Random: return 0;
        case StrategyKind::EmbSim: return 1;
        case StrategyKind::Dtw: return 2;
        case StrategyKind::Jaccard: return 3;
        case StrategyKind::Lcs: return 4;
        case StrategyKind::Time: return 5;
    }
    return 6;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

}  // namespace

ReportResult build_report(const std::vector<RecordArchive>& archives,
                          const std::vector<StrategyTiming>& timings, int bucket_cap) {
    ReportResult result;
    result.rows = json::array();

    // (block, strategy, k) -> records
    std::map<BlockKey, std::map<CellKey, std::vector<EvalRecord>>> blocks;
    for (const auto& archive : archives) {
        for (const auto& r : archive.records) {
            const BlockKey bk{archive.meta.dataset, archive.meta.model, r.user_filter};
            blocks[bk][{r.strategy, r.k}].push_back(r);
        }
    }

    std::ostringstream table;
    for (const auto& archive : archives) {
        table << "source: dataset=" << archive.meta.dataset << " model=" << archive.meta.model
              << " config_digest=" << archive.meta.config_digest << " template="
              << archive.meta.template_version << " seed=" << archive.meta.seed << "\n";
    }
    table << "\n";
    std::ostringstream fig4;
    std::ostringstream fig5;
    fig4 << "dataset,model,scope,strategy,k,checkins,count,acc\n";
    fig5 << "dataset,model,scope,strategy,k,mean_inclusion,acc\n";

    for (const auto& [bk, cells] : blocks) {
        const std::string scope = bk.user_filter ? "User" : "All";
        std::set<int> ks;
        std::set<StrategyKind> strategies;
        for (const auto& [ck, recs] : cells) {
            ks.insert(ck.k);
            strategies.insert(ck.strategy);
        }

        // acc + significance marker per cell
        std::map<CellKey, double> acc;
        std::map<CellKey, std::string> marker;
        for (const auto& [ck, recs] : cells) acc[ck] = acc_at_1(recs);

        for (const int k : ks) {
            const auto random_it = cells.find({StrategyKind::Random, k});
            for (const StrategyKind s : strategies) {
                if (s == StrategyKind::Random) continue;
                const auto it = cells.find({s, k});
                if (it == cells.end()) continue;
                if (random_it == cells.end()) {
                    result.warnings.push_back("no Random baseline for " + bk.dataset + "/" +
                                              bk.model + "/" + scope + " k=" + std::to_string(k) +
                                              "; significance omitted");
                    continue;
                }
                const auto paired = pair_by_task(it->second, random_it->second);
                if (paired.task_ids.empty()) {
                    result.warnings.push_back("unpaired records for " + bk.dataset + "/" + scope +
                                              " " + to_string(s) + " k=" + std::to_string(k) +
                                              "; significance omitted");
                    continue;
                }
                const auto mc = mcnemar_test(paired);
                if (mc.p_value < 0.05) {
                    marker[{s, k}] = "\xE2\x80\xA1";  // double dagger
                } else if (mc.p_value < 0.1) {
                    marker[{s, k}] = "\xE2\x80\xA0";  // dagger
                }
                json row{{"dataset", bk.dataset}, {"model", bk.model},
                         {"scope", scope},        {"strategy", to_string(s)},
                         {"k", k},                {"p_vs_random", mc.p_value},
                         {"mcnemar_b", mc.b},     {"mcnemar_c", mc.c}};
                // acc rows are emitted below; this one carries the test only
                result.rows.push_back(std::move(row));
            }
        }

        // best cell per (block, k)
        std::map<CellKey, bool> best;
        for (const int k : ks) {
            double top = -1.0;
            for (const StrategyKind s : strategies) {
                auto it = acc.find({s, k});
                if (it != acc.end()) top = std::max(top, it->second);
            }
            for (const StrategyKind s : strategies) {
                auto it = acc.find({s, k});
                if (it != acc.end() && it->second == top) best[{s, k}] = true;
            }
        }

        table << "== " << bk.dataset << " | " << bk.model << " | pool: " << scope << " ==\n";
        table << "  " << std::string(10, ' ');
        for (const int k : ks) {
            char head[24];
            std::snprintf(head, sizeof(head), "%12s", ("k=" + std::to_string(k)).c_str());
            table << head;
        }
        table << "\n";

        std::vector<StrategyKind> ordered(strategies.begin(), strategies.end());
        std::sort(ordered.begin(), ordered.end(), [](StrategyKind a, StrategyKind b) {
            return strategy_rank(a) < strategy_rank(b);
        });
        for (const StrategyKind s : ordered) {
            char name[24];
            std::snprintf(name, sizeof(name), "  %-10s", to_string(s));
            table << name;
            for (const int k : ks) {
                const auto it = acc.find({s, k});
                std::string cell = (it == acc.end()) ? "-" : fmt4(it->second);
                if (it != acc.end()) {
                    cell += marker.count({s, k}) ? marker[{s, k}] : "";
                    if (best.count({s, k})) cell += "*";
                }
                // markers are multi-byte; pad on the visible width
                size_t visible = cell.size();
                if (marker.count({s, k})) visible -= 2;  // 3-byte UTF-8 renders as one column
                table << std::string(visible < 12 ? 12 - visible : 1, ' ') << cell;
            }
            table << "\n";

            for (const int k : ks) {
                const auto it = cells.find({s, k});
                if (it == cells.end()) continue;
                json row{{"dataset", bk.dataset},
                         {"model", bk.model},
                         {"scope", scope},
                         {"strategy", to_string(s)},
                         {"k", k},
                         {"acc", acc[{s, k}]},
                         {"records", it->second.size()},
                         {"best", best.count({s, k}) > 0},
                         {"marker", marker.count({s, k}) ? marker[{s, k}] : ""}};
                result.rows.push_back(std::move(row));

                for (const auto& bucket : context_length_breakdown(it->second, bucket_cap)) {
                    fig4 << bk.dataset << "," << bk.model << "," << scope << "," << to_string(s)
                         << "," << k << "," << bucket.checkins << (bucket.overflow ? "+" : "")
                         << "," << bucket.count << ","
                         << (bucket.acc ? fmt4(*bucket.acc) : "") << "\n";
                }
            }
        }
        table << "\n";

        std::vector<EvalRecord> block_records;
        for (const auto& [ck, recs] : cells)
            block_records.insert(block_records.end(), recs.begin(), recs.end());
        const auto inclusion = inclusion_analysis(block_records);
        for (const auto& s : inclusion) {
            fig5 << bk.dataset << "," << bk.model << "," << scope << "," << to_string(s.strategy)
                 << "," << s.k << "," << fmt4(s.mean_inclusion) << "," << fmt4(s.acc) << "\n";
        }
        for (const auto& [k, r] : inclusion_accuracy_correlation(inclusion)) {
            table << "  inclusion/acc Pearson r (k=" << k << "): " << fmt4(r) << "\n";
        }
        table << "\n";
    }

    // fig3: timing joined with accuracy where a matching cell exists
    if (timings.empty()) {
        result.warnings.push_back("no bench timings supplied; fig3 series omitted");
    } else {
        std::ostringstream fig3;
        fig3 << "strategy,scope,k,mean_us,p50_us,p95_us,acc\n";
        for (const auto& t : timings) {
            std::string acc_text;
            for (const auto& [bk, cells] : blocks) {
                if (bk.user_filter != t.spec.user_filter) continue;
                const auto it = cells.find({t.spec.kind, t.spec.k});
                if (it != cells.end()) {
                    acc_text = fmt4(acc_at_1(it->second));
                    break;
                }
            }
            fig3 << to_string(t.spec.kind) << "," << (t.spec.user_filter ? "User" : "All") << ","
                 << t.spec.k << "," << fmt1(t.mean_us) << "," << fmt1(t.p50_us) << ","
                 << fmt1(t.p95_us) << "," << acc_text << "\n";
        }
        result.fig3_csv = fig3.str();
    }

    result.table_text = table.str();
    result.fig4_csv = fig4.str();
    result.fig5_csv = fig5.str();
    return result;
}

void write_bench_report(std::ostream& out, const std::vector<StrategyTiming>& timings,
                        const ArchiveMeta* meta) {
    json arr = json::array();
    for (const auto& t : timings) {
        arr.push_back({{"strategy", to_string(t.spec.kind)},
                       {"user_filter", t.spec.user_filter},
                       {"k", t.spec.k},
                       {"mean_us", t.mean_us},
                       {"p50_us", t.p50_us},
                       {"p95_us", t.p95_us},
                       {"instances", t.instances},
                       {"total_calls", t.total_calls}});
    }
    json doc{{"schema", "nextpoi.bench.v1"}, {"timings", arr}};
    if (meta != nullptr) {
        doc["config_digest"] = meta->config_digest;
        doc["template"] = meta->template_version;
        doc["seed"] = meta->seed;
        doc["dataset"] = meta->dataset;
        doc["model"] = meta->model;
    }
    out << doc.dump(2) << "\n";
}

std::vector<StrategyTiming> read_bench_report(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("bench report: ") + e.what());
    }
    if (j.value("schema", "") != "nextpoi.bench.v1")
        throw std::runtime_error("bench report: unknown schema '" + j.value("schema", "") + "'");
    std::vector<StrategyTiming> out;
    for (const auto& t : j.at("timings")) {
        StrategyTiming timing;
        timing.spec.kind = strategy_from_string(t.at("strategy").get<std::string>());
        timing.spec.user_filter = t.at("user_filter").get<bool>();
        timing.spec.k = t.at("k").get<int>();
        timing.mean_us = t.at("mean_us").get<double>();
        timing.p50_us = t.at("p50_us").get<double>();
        timing.p95_us = t.at("p95_us").get<double>();
        timing.instances = t.at("instances").get<size_t>();
        timing.total_calls = t.at("total_calls").get<size_t>();
        out.push_back(timing);
    }
    return out;
}

}  // namespace nextpoi
