#include "nextpoi/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "nextpoi/gateway.hpp"
#include "nextpoi/prompting.hpp"
#include "nextpoi/selection.hpp"

namespace nextpoi {

namespace fs = std::filesystem;

LockFile::LockFile(const std::string& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
        throw std::runtime_error("run directory is locked by another invocation ('" + path +
                                 "' exists)");
}

LockFile::~LockFile() {
    if (fd_ >= 0) {
        ::close(fd_);
        ::unlink(path_.c_str());
    }
}

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

std::string default_archive_path(const RunConfig& config) {
    if (!config.dataset.archive_path.empty()) return config.dataset.archive_path;
    return (fs::path(config.out_dir) / (config.dataset.name + ".dataset.jsonl")).string();
}

std::string backend_label(const BackendConfig& backend) {
    if (backend.kind == BackendConfig::Kind::Remote) return backend.model;
    switch (backend.mock_policy) {
        case MockPolicy::EchoMostFrequent: return "mock:echo-most-frequent";
        case MockPolicy::EchoMatchingHour: return "mock:echo-matching-hour";
        case MockPolicy::AlwaysWrong: return "mock:always-wrong";
    }
    return "mock";
}

std::unique_ptr<EmbeddingProvider> make_provider(const RunConfig& config) {
    if (config.embedding.provider == "remote")
        return std::make_unique<RemoteEmbeddingProvider>(
            config.embedding.endpoint, config.embedding.model, config.embedding.api_key_env,
            config.embedding.dimension, config.backend.timeout_seconds);
    return std::make_unique<HashEmbeddingProvider>(config.embedding.dimension,
                                                   config.embedding.simulate_cost_ms);
}

bool needs_embsim(const RunConfig& config) {
    return std::any_of(config.strategies.begin(), config.strategies.end(),
                       [](const StrategyEntry& s) { return s.kind == StrategyKind::EmbSim; });
}

std::string key_to_filename(std::string key) {
    for (char& c : key) {
        if (c == '/' || c == '+') c = '_';
    }
    return key;
}

ArchiveMeta run_meta(const RunConfig& config) {
    ArchiveMeta meta;
    meta.dataset = config.dataset.name;
    meta.model = backend_label(config.backend);
    meta.config_digest = config_digest(config);
    meta.template_version = config.template_id;
    meta.seed = config.seed;
    return meta;
}

}  // namespace

std::string instance_key(StrategyKind kind, bool user_filter, int k, int trial, int64_t task_id) {
    std::string key = to_string(kind);
    key += user_filter ? "+u" : "+a";
    key += "/k" + std::to_string(k) + "/t" + std::to_string(trial) + "/" + std::to_string(task_id);
    return key;
}

PrepareOutcome cmd_prepare(const RunConfig& config, std::ostream& log) {
    validate(config);
    if (config.dataset.raw_path.empty())
        throw std::invalid_argument("prepare: dataset.raw_path is not set");
    std::ifstream raw(config.dataset.raw_path);
    if (!raw) throw std::runtime_error("prepare: cannot open '" + config.dataset.raw_path + "'");

    fs::create_directories(config.out_dir);

    ParseResult parsed = parse_checkins(raw, config.dataset.schema);
    PrepareOutcome outcome;
    outcome.row_errors = parsed.errors.size();
    if (!parsed.errors.empty()) {
        const auto err_path = fs::path(config.out_dir) / (config.dataset.name + ".row_errors.txt");
        std::ofstream err(err_path);
        for (const auto& e : parsed.errors)
            err << "line " << e.line << ": " << e.message << ": " << e.raw << "\n";
        log << "prepare: " << parsed.errors.size() << " malformed rows, see " << err_path.string()
            << "\n";
    }
    if (parsed.checkins.empty()) throw std::runtime_error("prepare: no valid check-in rows");

    const auto gap_seconds = static_cast<int64_t>(config.dataset.gap_hours * 3600.0);
    Corpus corpus = build_corpus(std::move(parsed), config.dataset.name, gap_seconds,
                                 config.dataset.split_ratio, config.dataset.utc_offset_minutes);
    corpus.config_digest = config_digest(config);

    std::ostringstream archive;
    write_dataset_archive(archive, corpus);
    const std::string bytes = archive.str();
    outcome.archive_digest = hex64(fnv1a64_bytes(bytes));
    outcome.archive_path = default_archive_path(config);
    {
        std::ofstream out(outcome.archive_path, std::ios::binary);
        if (!out) throw std::runtime_error("prepare: cannot write '" + outcome.archive_path + "'");
        out << bytes;
    }

    outcome.stats = dataset_stats(corpus.split);
    std::ostringstream text;
    char avg[32];
    std::snprintf(avg, sizeof(avg), "%.1f", outcome.stats.avg_sequences_per_user);
    text << "dataset              " << corpus.name << "\n"
         << "users                " << outcome.stats.users << "\n"
         << "pois                 " << outcome.stats.pois << "\n"
         << "test instances       " << outcome.stats.test_instances << "\n"
         << "train trajectories   " << outcome.stats.train_trajectories << "\n"
         << "avg sequences/user   " << avg << "\n"
         << "archive digest       " << outcome.archive_digest << "\n"
         << "config digest        " << config_digest(config) << "\n";
    outcome.stats_text = text.str();
    log << outcome.stats_text;

    std::ofstream stats_out(fs::path(config.out_dir) / (config.dataset.name + ".stats.txt"));
    stats_out << outcome.stats_text;
    return outcome;
}

RunOutcome run_grid(const RunConfig& config, const Corpus& corpus,
                    const std::vector<std::string>& completed_keys, bool dry_run,
                    std::vector<EvalRecord>& records, std::ostream& log,
                    std::ostream* transcript) {
    validate(config);
    const std::set<std::string> done(completed_keys.begin(), completed_keys.end());

    std::unordered_map<int64_t, const Trajectory*> by_id;
    for (const auto& t : corpus.split.train) by_id[t.id] = &t;
    const TrajectoryLookup lookup = [&by_id](int64_t id) -> const Trajectory* {
        auto it = by_id.find(id);
        return it == by_id.end() ? nullptr : it->second;
    };

    const DemonstrationPool pool = build_pool(corpus.split, PoolScope::All);
    const PromptTemplate& tmpl = builtin_template(config.template_id);
    const DemoOrder order = demo_order_from_string(config.demo_order);

    std::unique_ptr<EmbeddingProvider> provider;
    EmbeddingCache cache;
    if (needs_embsim(config)) provider = make_provider(config);

    // Tasks run in ascending id order so the grid layout is reproducible.
    std::vector<const PredictionTask*> tasks;
    for (const auto& t : corpus.split.test) tasks.push_back(&t);
    std::sort(tasks.begin(), tasks.end(),
              [](const PredictionTask* a, const PredictionTask* b) {
                  return a->trajectory_id < b->trajectory_id;
              });

    const fs::path prompt_dir = fs::path(config.out_dir) / "prompts";
    if (dry_run) fs::create_directories(prompt_dir);

    RunOutcome outcome;
    outcome.records_path = (fs::path(config.out_dir) / "records.jsonl").string();

    struct Pending {
        EvalRecord rec;
        std::optional<PromptBundle> bundle;  // absent when selection failed
        std::vector<Attempt> attempts;
        int32_t target_poi = -1;
    };

    for (const auto& entry : config.strategies) {
        const int trials = entry.kind == StrategyKind::Random ? config.trials : 1;
        for (const int k : config.ks) {
            for (int trial = 0; trial < trials; ++trial) {
                // Phase 1: selection and prompt rendering, sequential.
                std::vector<Pending> cell;
                for (const PredictionTask* task : tasks) {
                    const std::string key =
                        instance_key(entry.kind, entry.user_filter, k, trial, task->trajectory_id);
                    if (done.count(key)) {
                        ++outcome.skipped;
                        continue;
                    }

                    StrategySpec spec;
                    spec.kind = entry.kind;
                    spec.user_filter = entry.user_filter;
                    spec.k = k;
                    spec.seed = derive_seed(config.seed, trial, task->trajectory_id);

                    Pending p;
                    p.target_poi = task->target.poi;
                    p.rec.task_id = task->trajectory_id;
                    p.rec.user = task->user;
                    p.rec.strategy = entry.kind;
                    p.rec.user_filter = entry.user_filter;
                    p.rec.k = k;
                    p.rec.trial = trial;
                    p.rec.template_version = config.template_id;
                    p.rec.context_length = static_cast<int>(task->context.size());

                    SelectionInputs inputs;
                    inputs.provider = provider.get();
                    inputs.cache = &cache;
                    inputs.utc_offset_minutes = corpus.utc_offset_minutes;

                    try {
                        const auto t0 = std::chrono::steady_clock::now();
                        const RankedDemos demos = select(*task, pool, spec, inputs);
                        const auto t1 = std::chrono::steady_clock::now();
                        p.rec.selection_time_us =
                            std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
                        p.rec.selected = demos.demos;
                        p.rec.time_fallback = demos.time_fallback;

                        PromptBundle bundle = build_prompt(*task, demos, lookup, tmpl,
                                                           corpus.utc_offset_minutes, order);
                        p.rec.target_poi_in_demos = bundle.target_poi_in_demos;
                        if (dry_run) {
                            std::ofstream prompt_out(prompt_dir / (key_to_filename(key) + ".txt"));
                            prompt_out << bundle.full_text;
                            continue;
                        }
                        p.bundle = std::move(bundle);
                    } catch (const std::exception& e) {
                        // Provider failure: record the instance, keep the run alive.
                        p.rec.parse_status = ParseStatus::Failed;
                        p.rec.error = e.what();
                    }
                    cell.push_back(std::move(p));
                }

                // Phase 2: predictions. Remote backends overlap up to
                // max_inflight; results are joined by index, so record order
                // never depends on completion order.
                const bool remote = config.backend.kind == BackendConfig::Kind::Remote;
                std::atomic<size_t> cursor{0};
                std::atomic<size_t> calls{0};
                auto run_predictions = [&] {
                    std::unique_ptr<LlmClient> client;
                    if (remote) client = std::make_unique<LlmClient>(config.backend);
                    for (;;) {
                        const size_t i = cursor.fetch_add(1);
                        if (i >= cell.size()) break;
                        Pending& p = cell[i];
                        if (!p.bundle) continue;
                        const GatewayResult got = remote
                                                      ? client->predict(*p.bundle)
                                                      : predict(*p.bundle, config.backend);
                        calls.fetch_add(1);
                        p.attempts = got.attempts;
                        p.rec.predicted_poi = got.prediction.place_id;
                        p.rec.predicted_category = got.prediction.place_category;
                        p.rec.parse_status = got.prediction.status;
                        p.rec.llm_latency_ms = got.total_latency_ms;
                        for (const auto& a : got.attempts)
                            p.rec.attempt_latency_ms.push_back(a.latency_ms);
                        p.rec.correct = got.prediction.place_id.has_value() &&
                                        *got.prediction.place_id == p.target_poi;
                        if (got.prediction.status == ParseStatus::Failed &&
                            !got.attempts.empty() && !got.attempts.back().error.empty())
                            p.rec.error = got.attempts.back().error;
                    }
                };
                if (!dry_run) {
                    const int workers =
                        remote ? std::max(1, std::min<int>(config.backend.max_inflight,
                                                           static_cast<int>(cell.size())))
                               : 1;
                    if (workers == 1) {
                        run_predictions();
                    } else {
                        std::vector<std::thread> threads;
                        for (int w = 0; w < workers; ++w) threads.emplace_back(run_predictions);
                        for (auto& t : threads) t.join();
                    }
                }
                outcome.llm_calls += calls.load();

                // Phase 3: commit in task order.
                for (Pending& p : cell) {
                    if (!p.rec.error.empty()) ++outcome.errored;
                    if (transcript != nullptr && !dry_run) {
                        if (p.attempts.empty()) {
                            nlohmann::json line{{"task", p.rec.task_id},
                                                {"strategy", to_string(p.rec.strategy)},
                                                {"k", p.rec.k},
                                                {"trial", p.rec.trial},
                                                {"attempt", 1},
                                                {"latency_ms", p.rec.llm_latency_ms},
                                                {"status", p.rec.error.empty() ? "mock" : "error"}};
                            *transcript << line.dump() << "\n";
                        }
                        for (const auto& a : p.attempts) {
                            nlohmann::json line{{"task", p.rec.task_id},
                                                {"strategy", to_string(p.rec.strategy)},
                                                {"k", p.rec.k},
                                                {"trial", p.rec.trial},
                                                {"attempt", a.index},
                                                {"latency_ms", a.latency_ms},
                                                {"status", a.ok ? "ok"
                                                                : (a.http_status != 0
                                                                       ? std::to_string(a.http_status)
                                                                       : a.error)}};
                            *transcript << line.dump() << "\n";
                        }
                    }
                    records.push_back(std::move(p.rec));
                    ++outcome.written;
                }
            }
        }
        log << "run: finished strategy " << to_string(entry.kind)
            << (entry.user_filter ? "+user" : "") << "\n";
    }
    return outcome;
}

RunOutcome cmd_run(const RunConfig& config, bool dry_run, std::ostream& log) {
    validate(config);  // fails fast, before any backend call

    const std::string archive_path = default_archive_path(config);
    std::ifstream archive_in(archive_path);
    if (!archive_in)
        throw std::runtime_error("run: dataset archive '" + archive_path +
                                 "' not found; run prepare first");
    const Corpus corpus = read_dataset_archive(archive_in);

    fs::create_directories(config.out_dir);
    LockFile lock((fs::path(config.out_dir) / ".nextpoi.lock").string());

    const ArchiveMeta meta = run_meta(config);
    const fs::path records_path = fs::path(config.out_dir) / "records.jsonl";

    // Resume: collect completed instance keys, but only for the same config.
    std::vector<std::string> completed;
    bool fresh_file = true;
    if (fs::exists(records_path) && !dry_run) {
        std::ifstream in(records_path);
        const RecordArchive existing = read_records(in);
        if (existing.meta.config_digest != meta.config_digest)
            throw std::runtime_error("run: records.jsonl belongs to config digest " +
                                     existing.meta.config_digest + ", current is " +
                                     meta.config_digest + "; use a fresh out_dir");
        for (const auto& r : existing.records)
            completed.push_back(instance_key(r.strategy, r.user_filter, r.k, r.trial, r.task_id));
        fresh_file = false;
        log << "run: resuming, " << completed.size() << " instances already recorded\n";
    }

    std::vector<EvalRecord> records;
    std::ofstream transcript;
    if (!dry_run)
        transcript.open(fs::path(config.out_dir) / "transcript.jsonl", std::ios::app);
    RunOutcome outcome = run_grid(config, corpus, completed, dry_run, records, log,
                                  dry_run ? nullptr : &transcript);
    outcome.records_path = records_path.string();

    if (!dry_run) {
        std::ofstream out(records_path, std::ios::app);
        if (!out) throw std::runtime_error("run: cannot write '" + records_path.string() + "'");
        if (fresh_file) {
            std::ostringstream header;
            write_records(header, meta, {});
            out << header.str();
        }
        for (const auto& r : records) out << record_to_line(r) << "\n";
    }
    log << "run: wrote " << outcome.written << " records (" << outcome.skipped << " resumed, "
        << outcome.errored << " errored)\n";
    return outcome;
}

std::vector<StrategyTiming> cmd_bench(const RunConfig& config, std::ostream& log) {
    validate(config);
    const std::string archive_path = default_archive_path(config);
    std::ifstream archive_in(archive_path);
    if (!archive_in)
        throw std::runtime_error("bench: dataset archive '" + archive_path +
                                 "' not found; run prepare first");
    const Corpus corpus = read_dataset_archive(archive_in);
    const DemonstrationPool pool = build_pool(corpus.split, PoolScope::All);

    BenchSpec bench;
    bench.repetitions = config.bench_repetitions;
    bench.warmup = config.bench_warmup;
    for (const auto& entry : config.strategies) {
        for (const int k : config.ks) {
            StrategySpec spec;
            spec.kind = entry.kind;
            spec.user_filter = entry.user_filter;
            spec.k = k;
            spec.seed = config.seed;
            bench.strategies.push_back(spec);
        }
    }

    std::unique_ptr<EmbeddingProvider> provider;
    EmbeddingCache cache;
    SelectionInputs inputs;
    if (needs_embsim(config)) provider = make_provider(config);
    inputs.provider = provider.get();
    inputs.cache = &cache;
    inputs.utc_offset_minutes = corpus.utc_offset_minutes;

    const auto timings = bench_selection(corpus.split.test, pool, bench, inputs);

    fs::create_directories(config.out_dir);
    const ArchiveMeta meta = run_meta(config);
    std::ofstream out(fs::path(config.out_dir) / "bench.json");
    write_bench_report(out, timings, &meta);
    for (const auto& t : timings) {
        log << "bench: " << to_string(t.spec.kind) << (t.spec.user_filter ? "+user" : "")
            << " k=" << t.spec.k << " mean=" << t.mean_us << "us p50=" << t.p50_us
            << "us p95=" << t.p95_us << "us over " << t.instances << " instances\n";
    }
    return timings;
}

ReportResult cmd_report(const std::vector<std::string>& archive_paths,
                        const std::string& bench_path, const std::string& out_dir,
                        std::ostream& log) {
    if (archive_paths.empty()) throw std::invalid_argument("report: no archives given");
    std::vector<RecordArchive> archives;
    for (const auto& path : archive_paths) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("report: cannot open '" + path + "'");
        archives.push_back(read_records(in));
    }
    std::vector<StrategyTiming> timings;
    if (!bench_path.empty()) {
        std::ifstream in(bench_path);
        if (!in) throw std::runtime_error("report: cannot open '" + bench_path + "'");
        timings = read_bench_report(in);
    }

    ReportResult result = build_report(archives, timings);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    std::ofstream(dir / "report.txt") << result.table_text;
    {
        std::ofstream rows(dir / "report_rows.jsonl");
        for (const auto& row : result.rows) rows << row.dump() << "\n";
    }
    if (!result.fig3_csv.empty()) std::ofstream(dir / "fig3_cost_vs_acc.csv") << result.fig3_csv;
    std::ofstream(dir / "fig4_context_breakdown.csv") << result.fig4_csv;
    std::ofstream(dir / "fig5_inclusion.csv") << result.fig5_csv;

    log << result.table_text;
    for (const auto& w : result.warnings) log << "warning: " << w << "\n";
    return result;
}

}  // namespace nextpoi
