#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nextpoi/evaluation.hpp"
#include "support/synthetic.hpp"

using namespace nextpoi;

namespace {

EvalRecord rec(int64_t task, bool correct, int trial = 0, StrategyKind kind = StrategyKind::Random,
               int k = 5, bool user_filter = false) {
    EvalRecord r;
    r.task_id = task;
    r.user = static_cast<int32_t>(task % 7);
    r.strategy = kind;
    r.user_filter = user_filter;
    r.k = k;
    r.trial = trial;
    r.correct = correct;
    r.parse_status = ParseStatus::Ok;
    r.predicted_poi = correct ? 1 : 2;
    r.template_version = "fewshot-v1";
    r.context_length = static_cast<int>(task % 5) + 1;
    return r;
}

// Test-side exact binomial, independent of the library path.
double exact_binomial_p(int b, int c) {
    const int n = b + c;
    long double tail = 0.0;
    for (int i = 0; i <= std::min(b, c); ++i) {
        long double coeff = 1.0;
        for (int j = 0; j < i; ++j) coeff = coeff * (n - j) / (j + 1);
        tail += coeff / std::pow(2.0L, n);
    }
    const long double p = 2.0L * tail;
    return static_cast<double>(p > 1.0L ? 1.0L : p);
}

PairedOutcomes outcomes_with(int b, int c, int both_correct = 3, int both_wrong = 2) {
    PairedOutcomes out;
    int64_t id = 0;
    for (int i = 0; i < b; ++i) {
        out.task_ids.push_back(id++);
        out.a.push_back(true);
        out.b.push_back(false);
    }
    for (int i = 0; i < c; ++i) {
        out.task_ids.push_back(id++);
        out.a.push_back(false);
        out.b.push_back(true);
    }
    for (int i = 0; i < both_correct; ++i) {
        out.task_ids.push_back(id++);
        out.a.push_back(true);
        out.b.push_back(true);
    }
    for (int i = 0; i < both_wrong; ++i) {
        out.task_ids.push_back(id++);
        out.a.push_back(false);
        out.b.push_back(false);
    }
    return out;
}

}  // namespace

TEST_CASE("acc_at_1") {
    std::vector<EvalRecord> all{rec(1, true), rec(2, true), rec(3, true)};
    CHECK(acc_at_1(all) == 1.0);

    std::vector<EvalRecord> three_of_four{rec(1, true), rec(2, true), rec(3, true), rec(4, false)};
    CHECK(acc_at_1(three_of_four) == 0.75);

    SUBCASE("multi-trial records average per-trial accuracies") {
        std::vector<EvalRecord> trials;
        // trial 0: 1/5 correct; trial 1: 2/5 correct
        for (int t = 1; t <= 5; ++t) trials.push_back(rec(t, t == 1, 0));
        for (int t = 1; t <= 5; ++t) trials.push_back(rec(t, t <= 2, 1));
        CHECK(acc_at_1(trials) == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("empty input throws") {
        CHECK_THROWS_AS(acc_at_1(std::vector<EvalRecord>{}), std::invalid_argument);
    }
}

TEST_CASE("mcnemar reference values") {
    SUBCASE("b equals c gives p = 1 under the exact test") {
        const auto r = mcnemar_test(outcomes_with(6, 6));
        CHECK(r.exact);
        CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("b=10 c=2 exact tail") {
        const auto r = mcnemar_test(outcomes_with(10, 2));
        CHECK(r.exact);
        CHECK(r.b == 10);
        CHECK(r.c == 2);
        // 2 * (C(12,0)+C(12,1)+C(12,2)) / 2^12 = 158/4096
        CHECK(std::abs(r.p_value - 0.03857421875) < 1e-4);
        CHECK(r.p_value == doctest::Approx(exact_binomial_p(10, 2)).epsilon(1e-12));
    }
    SUBCASE("b=40 c=20 chi-square with continuity correction") {
        const auto r = mcnemar_test(outcomes_with(40, 20));
        CHECK_FALSE(r.exact);
        // (|40-20|-1)^2 / 60 = 6.01667; survival of chi2(1)
        CHECK(std::abs(r.p_value - 0.0142) < 5e-4);
    }
    SUBCASE("no discordant pairs means p = 1") {
        const auto r = mcnemar_test(outcomes_with(0, 0, 5, 5));
        CHECK(r.p_value == 1.0);
        CHECK(r.b == 0);
        CHECK(r.c == 0);
    }
    SUBCASE("exact and chi-square agree near the switch-over") {
        std::mt19937_64 rng(3);
        for (int iter = 0; iter < 50; ++iter) {
            const int n = 25 + static_cast<int>(rng() % 16);  // b+c in [25, 40]
            const int b = 1 + static_cast<int>(rng() % (n - 1));
            const int c = n - b;
            const auto chi = mcnemar_test(outcomes_with(b, c));  // n >= 25: chi branch
            CHECK_FALSE(chi.exact);
            CHECK(std::abs(chi.p_value - exact_binomial_p(b, c)) <= 0.02);
        }
    }
}

TEST_CASE("pearson reference fixtures") {
    const std::vector<double> xs{1.0, 2.0, 3.0};
    const std::vector<double> doubled{2.0, 4.0, 6.0};
    const std::vector<double> negated{-1.0, -2.0, -3.0};
    const std::vector<double> swapped{1.0, 3.0, 2.0};
    CHECK(std::abs(pearson_correlation(xs, doubled) - 1.0) < 1e-9);
    CHECK(std::abs(pearson_correlation(xs, negated) + 1.0) < 1e-9);
    CHECK(std::abs(pearson_correlation(xs, swapped) - 0.5) < 1e-9);

    const std::vector<double> flat{4.0, 4.0, 4.0};
    CHECK_THROWS_AS(pearson_correlation(xs, flat), std::invalid_argument);
    const std::vector<double> two{1.0};
    CHECK_THROWS_AS(pearson_correlation(two, two), std::invalid_argument);
    const std::vector<double> longer{1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(pearson_correlation(xs, longer), std::invalid_argument);
}

TEST_CASE("inclusion analysis") {
    SUBCASE("all demos carrying the target average to k") {
        std::vector<EvalRecord> records;
        for (int t = 0; t < 10; ++t) {
            auto r = rec(t, true, 0, StrategyKind::Jaccard);
            r.target_poi_in_demos = r.k;
            records.push_back(r);
        }
        const auto stats = inclusion_analysis(records);
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].mean_inclusion == doctest::Approx(5.0));
        CHECK(stats[0].acc == 1.0);
    }
    SUBCASE("no demo ever carrying the target averages to zero") {
        std::vector<EvalRecord> records;
        for (int t = 0; t < 10; ++t) records.push_back(rec(t, false));
        const auto stats = inclusion_analysis(records);
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].mean_inclusion == 0.0);
    }
    SUBCASE("per-k correlation across strategies") {
        std::vector<EvalRecord> records;
        // two strategies at k=5: jaccard high inclusion + correct, random low + wrong
        for (int t = 0; t < 8; ++t) {
            auto j = rec(t, true, 0, StrategyKind::Jaccard);
            j.target_poi_in_demos = 4;
            records.push_back(j);
            auto r = rec(t, false, 0, StrategyKind::Random);
            r.target_poi_in_demos = 1;
            records.push_back(r);
        }
        const auto stats = inclusion_analysis(records);
        CHECK(stats.size() == 2);
        const auto corr = inclusion_accuracy_correlation(stats);
        REQUIRE(corr.count(5) == 1);
        CHECK(corr.at(5) == doctest::Approx(1.0));

        SUBCASE("a single strategy has no correlation entry") {
            const auto solo = inclusion_analysis(
                std::vector<EvalRecord>(records.begin(), records.begin() + 1));
            CHECK(inclusion_accuracy_correlation(solo).empty());
        }
    }
}

TEST_CASE("context length breakdown") {
    SUBCASE("everything in one bucket reproduces the overall accuracy") {
        std::vector<EvalRecord> records;
        for (int t = 0; t < 8; ++t) {
            auto r = rec(t, t % 2 == 0);
            r.context_length = 3;
            records.push_back(r);
        }
        const auto buckets = context_length_breakdown(records, 5);
        REQUIRE(buckets.size() == 6);
        CHECK(buckets[2].count == 8);
        CHECK(buckets[2].acc == doctest::Approx(0.5));
        CHECK(buckets[0].count == 0);
        CHECK_FALSE(buckets[0].acc.has_value());
    }
    SUBCASE("overflow bucket aggregates long contexts") {
        std::vector<EvalRecord> records;
        auto a = rec(1, true);
        a.context_length = 11;
        auto b = rec(2, false);
        b.context_length = 40;
        records.push_back(a);
        records.push_back(b);
        const auto buckets = context_length_breakdown(records, 10);
        REQUIRE(buckets.size() == 11);
        CHECK(buckets.back().overflow);
        CHECK(buckets.back().count == 2);
        CHECK(buckets.back().acc == doctest::Approx(0.5));
    }
    SUBCASE("hand-computed mixed fixture") {
        std::vector<EvalRecord> records;
        struct Row {
            int len;
            bool ok;
        };
        const std::vector<Row> rows{{1, true}, {1, false}, {2, true}, {2, true}, {3, false}};
        int64_t id = 0;
        for (const auto& row : rows) {
            auto r = rec(id++, row.ok);
            r.context_length = row.len;
            records.push_back(r);
        }
        const auto buckets = context_length_breakdown(records, 4);
        CHECK(buckets[0].acc == doctest::Approx(0.5));
        CHECK(buckets[1].acc == doctest::Approx(1.0));
        CHECK(buckets[2].acc == doctest::Approx(0.0));
        CHECK(buckets[3].count == 0);
    }
}

TEST_CASE("record archive round trip") {
    std::vector<EvalRecord> records;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        auto r = rec(i, rng() % 2 == 0, static_cast<int>(rng() % 3),
                     static_cast<StrategyKind>(rng() % 6), 5 + static_cast<int>(rng() % 3));
        if (r.strategy == StrategyKind::Time) r.user_filter = true;
        r.selected = {{static_cast<int64_t>(rng() % 100), 0.25 * (rng() % 7)},
                      {static_cast<int64_t>(rng() % 100), -1.5}};
        r.selection_time_us = static_cast<int64_t>(rng() % 100000);
        r.llm_latency_ms = 0.125 * (rng() % 1000);
        if (rng() % 3 == 0) r.attempt_latency_ms = {12.5, 80.0, 0.25 * (rng() % 9)};
        r.target_poi_in_demos = static_cast<int>(rng() % 5);
        if (rng() % 4 == 0) r.predicted_category = "Some Category";
        if (rng() % 10 == 0) {
            r.error = "provider failure";
            r.parse_status = ParseStatus::Failed;
            r.predicted_poi.reset();
        }
        if (rng() % 7 == 0) r.time_fallback = true;
        records.push_back(r);
    }

    ArchiveMeta meta;
    meta.dataset = "synthetic";
    meta.model = "mock:echo-most-frequent";
    meta.config_digest = "deadbeef00000000";
    meta.template_version = "fewshot-v1";
    meta.seed = 42;

    std::ostringstream out;
    write_records(out, meta, records);
    std::istringstream in(out.str());
    const auto loaded = read_records(in);
    CHECK(loaded.meta == meta);
    REQUIRE(loaded.records.size() == records.size());
    CHECK(loaded.records == records);

    SUBCASE("accuracy recomputed from the archive matches the runtime value") {
        CHECK(acc_at_1(loaded.records) == acc_at_1(records));
    }
    SUBCASE("schema mismatch names both versions") {
        std::string tampered = out.str();
        tampered.replace(tampered.find("nextpoi.records.v1"), 18, "nextpoi.records.v8");
        std::istringstream bad(tampered);
        try {
            read_records(bad);
            FAIL("expected a schema error");
        } catch (const std::runtime_error& e) {
            const std::string what = e.what();
            CHECK(what.find("nextpoi.records.v8") != std::string::npos);
            CHECK(what.find("nextpoi.records.v1") != std::string::npos);
        }
    }
    SUBCASE("truncated final line reports the line number") {
        const std::string bytes = out.str();
        std::istringstream bad(bytes.substr(0, bytes.size() - 30));
        CHECK_THROWS_WITH_AS(read_records(bad), doctest::Contains("line 1001"),
                             std::runtime_error);
    }
}

TEST_CASE("pairing aligns archives by task id") {
    // method A ran tasks 1..4, method B ran 2..5
    std::vector<EvalRecord> a{rec(1, true), rec(2, true), rec(3, false), rec(4, true)};
    std::vector<EvalRecord> b{rec(2, false), rec(3, false), rec(4, true), rec(5, true)};
    const auto paired = pair_by_task(a, b);
    CHECK(paired.task_ids == std::vector<int64_t>{2, 3, 4});
    CHECK(paired.a == std::vector<bool>{true, false, true});
    CHECK(paired.b == std::vector<bool>{false, false, true});

    SUBCASE("multi-trial sides collapse to majority, ties count as wrong") {
        std::vector<EvalRecord> trials{rec(9, true, 0), rec(9, false, 1), rec(9, true, 2),
                                       rec(8, true, 0), rec(8, false, 1)};
        std::vector<EvalRecord> other{rec(9, true), rec(8, true)};
        const auto p = pair_by_task(trials, other);
        REQUIRE(p.task_ids == std::vector<int64_t>{8, 9});
        CHECK(p.a == std::vector<bool>{false, true});  // 8 ties 1-1, 9 majority correct
    }
}

TEST_CASE("bench touches each strategy and task the configured number of times") {
    synthetic::Options opt;
    opt.users = 4;
    opt.trajectories_per_user = 5;
    const auto corpus = synthetic::make_corpus(opt);
    const auto pool = build_pool(corpus.split, PoolScope::All);

    BenchSpec bench;
    bench.repetitions = 2;
    bench.warmup = 1;
    StrategySpec jaccard;
    jaccard.kind = StrategyKind::Jaccard;
    StrategySpec random;
    random.kind = StrategyKind::Random;
    random.seed = 5;
    bench.strategies = {jaccard, random};

    const auto timings = bench_selection(corpus.split.test, pool, bench);
    REQUIRE(timings.size() == 2);
    for (const auto& t : timings) {
        CHECK(t.total_calls == corpus.split.test.size() * 3);  // warmup + 2 reps
        CHECK(t.instances == corpus.split.test.size() * 2);    // timed samples only
        CHECK(t.mean_us > 0.0);
        CHECK(t.p50_us <= t.p95_us);
    }

    SUBCASE("zero candidates still runs without crashing") {
        DatasetSplit empty_split;
        empty_split.train = {};
        DemonstrationPool empty_pool;
        const auto t2 = bench_selection(corpus.split.test, empty_pool, bench);
        CHECK(t2.size() == 2);
        CHECK(t2[0].instances == corpus.split.test.size() * 2);
    }
}
