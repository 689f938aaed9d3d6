#include "nextpoi/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace nextpoi {

using nlohmann::json;

double acc_at_1(std::span<const EvalRecord> records) {
    if (records.empty()) throw std::invalid_argument("acc_at_1: no records");
    std::map<int, std::pair<size_t, size_t>> per_trial;  // trial -> (correct, total)
    for (const auto& r : records) {
        auto& [correct, total] = per_trial[r.trial];
        if (r.correct) ++correct;
        ++total;
    }
    double sum = 0.0;
    for (const auto& [trial, counts] : per_trial)
        sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
    return sum / static_cast<double>(per_trial.size());
}

namespace {

// task id -> correct in a strict majority of trials (tie counts as wrong).
std::map<int64_t, bool> majority_by_task(std::span<const EvalRecord> records) {
    std::map<int64_t, std::pair<int, int>> tally;  // (correct, total)
    for (const auto& r : records) {
        auto& [correct, total] = tally[r.task_id];
        if (r.correct) ++correct;
        ++total;
    }
    std::map<int64_t, bool> out;
    for (const auto& [id, counts] : tally) out[id] = 2 * counts.first > counts.second;
    return out;
}

}  // namespace

PairedOutcomes pair_by_task(std::span<const EvalRecord> method_a,
                            std::span<const EvalRecord> method_b) {
    const auto a = majority_by_task(method_a);
    const auto b = majority_by_task(method_b);
    PairedOutcomes out;
    for (const auto& [id, a_correct] : a) {
        auto it = b.find(id);
        if (it == b.end()) continue;
        out.task_ids.push_back(id);
        out.a.push_back(a_correct);
        out.b.push_back(it->second);
    }
    return out;
}

namespace {

// log C(n, k) via lgamma, exact enough for the tail sums used here.
double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial_two_sided_p(int b, int c) {
    const int n = b + c;
    const int lo = std::min(b, c);
    double tail = 0.0;
    for (int i = 0; i <= lo; ++i)
        tail += std::exp(log_choose(n, i) - n * std::log(2.0));
    return std::min(1.0, 2.0 * tail);
}

double chi_square_1df_survival(double x) { return std::erfc(std::sqrt(x / 2.0)); }

}  // namespace

McNemarResult mcnemar_test(const PairedOutcomes& outcomes) {
    if (outcomes.a.size() != outcomes.b.size())
        throw std::invalid_argument("mcnemar_test: unaligned outcomes");
    McNemarResult result;
    for (size_t i = 0; i < outcomes.a.size(); ++i) {
        if (outcomes.a[i] && !outcomes.b[i]) ++result.b;
        if (!outcomes.a[i] && outcomes.b[i]) ++result.c;
    }
    const int n = result.b + result.c;
    if (n == 0) {
        result.p_value = 1.0;
        result.exact = true;
        return result;
    }
    if (n < 25) {
        result.exact = true;
        result.p_value = binomial_two_sided_p(result.b, result.c);
    } else {
        result.exact = false;
        // continuity correction clamps at zero so b == c stays at p = 1
        const double d = std::max(0.0, std::abs(result.b - result.c) - 1.0);
        result.p_value = chi_square_1df_survival(d * d / n);
    }
    return result;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<InclusionStat> inclusion_analysis(std::span<const EvalRecord> records) {
    struct Agg {
        double inclusion_sum = 0.0;
        std::vector<EvalRecord> recs;
    };
    std::map<std::tuple<int, bool, int>, Agg> by_cell;  // (kind, filter, k)
    for (const auto& r : records) {
        auto& agg = by_cell[{static_cast<int>(r.strategy), r.user_filter, r.k}];
        agg.inclusion_sum += r.target_poi_in_demos;
        agg.recs.push_back(r);
    }
    std::vector<InclusionStat> out;
    for (const auto& [key, agg] : by_cell) {
        InclusionStat s;
        s.strategy = static_cast<StrategyKind>(std::get<0>(key));
        s.user_filter = std::get<1>(key);
        s.k = std::get<2>(key);
        s.records = agg.recs.size();
        s.mean_inclusion = agg.inclusion_sum / static_cast<double>(agg.recs.size());
        s.acc = acc_at_1(agg.recs);
        out.push_back(std::move(s));
    }
    return out;
}

std::map<int, double> inclusion_accuracy_correlation(const std::vector<InclusionStat>& stats) {
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_k;
    for (const auto& s : stats) {
        by_k[s.k].first.push_back(s.mean_inclusion);
        by_k[s.k].second.push_back(s.acc);
    }
    std::map<int, double> out;
    for (const auto& [k, xy] : by_k) {
        if (xy.first.size() < 2) continue;
        try {
            out[k] = pearson_correlation(xy.first, xy.second);
        } catch (const std::invalid_argument&) {
            // zero variance across strategies: correlation undefined, omitted
        }
    }
    return out;
}

std::vector<ContextBucket> context_length_breakdown(std::span<const EvalRecord> records,
                                                    int cap) {
    if (cap < 1) throw std::invalid_argument("context_length_breakdown: cap must be >= 1");
    std::vector<std::pair<size_t, size_t>> counts(cap + 1, {0, 0});  // (correct, total)
    for (const auto& r : records) {
        const int bucket = std::min(r.context_length, cap + 1);
        if (bucket < 1) continue;  // empty contexts are not a current check-in count
        auto& [correct, total] = counts[bucket - 1];
        if (r.correct) ++correct;
        ++total;
    }
    std::vector<ContextBucket> out;
    for (int i = 0; i <= cap; ++i) {
        ContextBucket b;
        b.checkins = i + 1;
        b.overflow = (i == cap);
        b.count = counts[i].second;
        if (b.count > 0)
            b.acc = static_cast<double>(counts[i].first) / static_cast<double>(b.count);
        out.push_back(b);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Archive codecs

std::string record_to_line(const EvalRecord& r) {
    json selected = json::array();
    for (const auto& d : r.selected) selected.push_back({d.trajectory_id, d.score});
    json j{{"task", r.task_id},
           {"user", r.user},
           {"strategy", to_string(r.strategy)},
           {"user_filter", r.user_filter},
           {"k", r.k},
           {"trial", r.trial},
           {"selected", std::move(selected)},
           {"inclusion", r.target_poi_in_demos},
           {"parse_status", to_string(r.parse_status)},
           {"correct", r.correct},
           {"selection_us", r.selection_time_us},
           {"llm_ms", r.llm_latency_ms},
           {"attempt_ms", r.attempt_latency_ms},
           {"template", r.template_version},
           {"context_len", r.context_length},
           {"time_fallback", r.time_fallback}};
    if (r.predicted_poi) j["poi"] = *r.predicted_poi;
    if (r.predicted_category) j["category"] = *r.predicted_category;
    if (!r.error.empty()) j["error"] = r.error;
    return j.dump();
}

EvalRecord record_from_line(const std::string& line) {
    const json j = json::parse(line);
    EvalRecord r;
    r.task_id = j.at("task").get<int64_t>();
    r.user = j.at("user").get<int32_t>();
    r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    r.user_filter = j.at("user_filter").get<bool>();
    r.k = j.at("k").get<int>();
    r.trial = j.at("trial").get<int>();
    for (const auto& d : j.at("selected"))
        r.selected.push_back({d.at(0).get<int64_t>(), d.at(1).get<double>()});
    r.target_poi_in_demos = j.at("inclusion").get<int>();
    if (j.contains("poi")) r.predicted_poi = j["poi"].get<int32_t>();
    if (j.contains("category")) r.predicted_category = j["category"].get<std::string>();
    r.parse_status = parse_status_from_string(j.at("parse_status").get<std::string>());
    r.correct = j.at("correct").get<bool>();
    r.selection_time_us = j.at("selection_us").get<int64_t>();
    r.llm_latency_ms = j.at("llm_ms").get<double>();
    r.attempt_latency_ms = j.at("attempt_ms").get<std::vector<double>>();
    r.template_version = j.at("template").get<std::string>();
    r.context_length = j.at("context_len").get<int>();
    r.time_fallback = j.at("time_fallback").get<bool>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    return r;
}

void write_records(std::ostream& out, const ArchiveMeta& meta,
                   std::span<const EvalRecord> records) {
    json m{{"schema", meta.schema},         {"dataset", meta.dataset},
           {"model", meta.model},           {"config_digest", meta.config_digest},
           {"template", meta.template_version}, {"seed", meta.seed}};
    out << m.dump() << "\n";
    for (const auto& r : records) out << record_to_line(r) << "\n";
}

RecordArchive read_records(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("records archive: empty stream");
    json m;
    try {
        m = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("records archive: bad meta line: ") + e.what());
    }
    RecordArchive archive;
    archive.meta.schema = m.value("schema", "");
    if (archive.meta.schema != kRecordsSchemaVersion)
        throw std::runtime_error("records archive: schema '" + archive.meta.schema +
                                 "' does not match reader '" + kRecordsSchemaVersion + "'");
    archive.meta.dataset = m.value("dataset", "");
    archive.meta.model = m.value("model", "");
    archive.meta.config_digest = m.value("config_digest", "");
    archive.meta.template_version = m.value("template", "");
    archive.meta.seed = m.value("seed", uint64_t{0});

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            archive.records.push_back(record_from_line(line));
        } catch (const json::exception& e) {
            throw std::runtime_error("records archive: line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    return archive;
}

// ---------------------------------------------------------------------------
// Benchmark

std::vector<StrategyTiming> bench_selection(std::span<const PredictionTask> tasks,
                                            const DemonstrationPool& pool, const BenchSpec& bench,
                                            const SelectionInputs& inputs) {
    std::vector<StrategyTiming> out;
    for (const auto& spec : bench.strategies) {
        validate(spec);
        StrategyTiming timing;
        timing.spec = spec;

        if (inputs.cache != nullptr) inputs.cache->clear();
        for (int w = 0; w < bench.warmup; ++w) {
            for (const auto& task : tasks) {
                select(task, pool, spec, inputs);
                ++timing.total_calls;
            }
        }
        // Encoding cost belongs to the measured phase; within it, the cache
        // still deduplicates so each trajectory is embedded once.
        if (inputs.cache != nullptr) inputs.cache->clear();

        std::vector<double> samples;
        samples.reserve(tasks.size() * static_cast<size_t>(bench.repetitions));
        for (int rep = 0; rep < bench.repetitions; ++rep) {
            for (const auto& task : tasks) {
                const auto t0 = std::chrono::steady_clock::now();
                select(task, pool, spec, inputs);
                const auto t1 = std::chrono::steady_clock::now();
                samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
                ++timing.total_calls;
            }
        }

        std::sort(samples.begin(), samples.end());
        timing.instances = samples.size();
        double sum = 0.0;
        for (const double s : samples) sum += s;
        timing.mean_us = samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
        auto quantile = [&](double q) {
            if (samples.empty()) return 0.0;
            const size_t idx = std::min(samples.size() - 1,
                                        static_cast<size_t>(q * static_cast<double>(samples.size())));
            return samples[idx];
        };
        timing.p50_us = quantile(0.50);
        timing.p95_us = quantile(0.95);
        out.push_back(std::move(timing));
    }
    return out;
}

}  // namespace nextpoi
