#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "nextpoi/config.hpp"
#include "nextpoi/runner.hpp"

using namespace nextpoi;

int main(int argc, char** argv) {
    CLI::App app{"Demonstration-selection engine and evaluation pipeline for "
                 "in-context next-POI prediction"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_override;
    std::string backend_override;
    uint64_t seed_override = 0;
    bool seed_set = false;
    bool dry_run = false;

    app.add_option("--config", config_path, "run configuration JSON")->required();
    app.add_option("--out", out_override, "override output directory");
    app.add_option("--backend", backend_override, "override backend kind (mock|remote)");
    auto* seed_opt = app.add_option("--seed", seed_override, "override run seed");
    app.add_flag("--dry-run", dry_run, "render prompts only, no backend calls (run)");

    auto* prepare = app.add_subcommand("prepare", "ingest raw check-ins into a dataset archive");
    auto* run = app.add_subcommand("run", "execute the selection/prediction grid");
    auto* bench = app.add_subcommand("bench", "time demonstration selection per test instance");
    auto* report = app.add_subcommand("report", "aggregate record archives into report tables");

    std::vector<std::string> archives;
    std::string bench_path;
    report->add_option("archives", archives, "records.jsonl archives")->required();
    report->add_option("--bench", bench_path, "bench.json for the cost-vs-accuracy series");

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;

    try {
        RunConfig config = load_config(config_path);
        if (!out_override.empty()) config.out_dir = out_override;
        if (seed_set) config.seed = seed_override;
        if (!backend_override.empty()) {
            if (backend_override == "mock") {
                config.backend.kind = BackendConfig::Kind::Mock;
            } else if (backend_override == "remote") {
                config.backend.kind = BackendConfig::Kind::Remote;
            } else {
                std::cerr << "unknown backend '" << backend_override << "'\n";
                return 2;
            }
        }

        if (prepare->parsed()) {
            cmd_prepare(config, std::cout);
        } else if (run->parsed()) {
            cmd_run(config, dry_run, std::cout);
        } else if (bench->parsed()) {
            cmd_bench(config, std::cout);
        } else if (report->parsed()) {
            const std::string out = out_override.empty() ? config.out_dir : out_override;
            cmd_report(archives, bench_path, out, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
