#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "nextpoi/dataset.hpp"
#include "support/synthetic.hpp"

using namespace nextpoi;

namespace {

CheckIn ci(int32_t user, int32_t poi, int64_t t) {
    CheckIn c;
    c.user = user;
    c.poi = poi;
    c.category = "Cat" + std::to_string(poi);
    c.timestamp = t;
    c.geo = {35.0 + poi * 0.001, 139.0};
    return c;
}

constexpr int64_t kHour = 3600;
constexpr int64_t kDay = 24 * kHour;

}  // namespace

TEST_CASE("parse_checkins maps fields in input order") {
    std::istringstream in(
        "u1,p7,Coffee Shop,2012-04-11T14:52:00Z,35.68,139.76\n"
        "u1,p8,Park,1334150520,35.6,139.7\n");
    const auto result = parse_checkins(in, ColumnSchema{});
    REQUIRE(result.errors.empty());
    REQUIRE(result.checkins.size() == 2);
    CHECK(result.users.original(result.checkins[0].user) == "u1");
    CHECK(result.pois.original(result.checkins[0].poi) == "p7");
    CHECK(result.checkins[0].category == "Coffee Shop");
    CHECK(result.checkins[0].timestamp == 1334155920);
    CHECK(result.checkins[0].geo.lat == doctest::Approx(35.68));
    CHECK(result.checkins[1].timestamp == 1334150520);
    CHECK(result.checkins[0].poi != result.checkins[1].poi);
}

TEST_CASE("parse_checkins on empty input") {
    std::istringstream in("");
    const auto result = parse_checkins(in, ColumnSchema{});
    CHECK(result.checkins.empty());
    CHECK(result.errors.empty());
}

TEST_CASE("parse_checkins collects malformed rows instead of aborting") {
    std::istringstream in(
        "u1,p1,Cafe,2012-04-11T14:52:00Z,35.68,139.76\n"
        "u1,p1,Cafe,yesterday,35.68,139.76\n"
        "u1,p1,Cafe,2012-04-11T14:52:00Z,95.0,139.76\n"
        "u1,p1,Cafe,2012-04-11T14:52:00Z,35.68,abc\n"
        "too,few\n"
        "u2,p2,Bar,2012-04-12T02:00:00Z,35.0,139.0\n");
    const auto result = parse_checkins(in, ColumnSchema{});
    CHECK(result.checkins.size() == 2);
    REQUIRE(result.errors.size() == 4);
    CHECK(result.errors[0].line == 2);
    CHECK(result.errors[1].line == 3);
    CHECK(result.errors[3].line == 5);
}

TEST_CASE("parse_checkins honors schema options") {
    ColumnSchema schema;
    schema.delimiter = '\t';
    schema.has_header = true;
    schema.timestamp_col = 0;
    schema.user_col = 1;
    schema.poi_col = 2;
    schema.category_col = 3;
    schema.lat_col = 4;
    schema.lon_col = 5;
    std::istringstream in(
        "ts\tuser\tpoi\tcat\tlat\tlon\n"
        "1334150520\tu9\tp9\tStation\t35.1\t139.1\n");
    const auto result = parse_checkins(in, schema);
    REQUIRE(result.errors.empty());
    REQUIRE(result.checkins.size() == 1);
    CHECK(result.users.original(0) == "u9");
}

TEST_CASE("segment_history applies the inclusive gap rule") {
    SUBCASE("hours 0,5,40 with 24h gap split after 5") {
        const std::vector<CheckIn> history{ci(0, 1, 0), ci(0, 2, 5 * kHour), ci(0, 3, 40 * kHour)};
        const auto trajs = segment_history(history, kDay);
        REQUIRE(trajs.size() == 2);
        CHECK(trajs[0].checkins.size() == 2);
        CHECK(trajs[1].checkins.size() == 1);
        CHECK(trajs[0].id == 0);
        CHECK(trajs[1].id == 1);
    }
    SUBCASE("single check-in") {
        const auto trajs = segment_history({ci(0, 1, 100)}, kDay);
        REQUIRE(trajs.size() == 1);
        CHECK(trajs[0].checkins.size() == 1);
    }
    SUBCASE("gap of exactly 24h splits") {
        const auto trajs = segment_history({ci(0, 1, 0), ci(0, 2, kDay)}, kDay);
        CHECK(trajs.size() == 2);
    }
    SUBCASE("gap one second under 24h does not split") {
        const auto trajs = segment_history({ci(0, 1, 0), ci(0, 2, kDay - 1)}, kDay);
        CHECK(trajs.size() == 1);
    }
    SUBCASE("empty input yields empty list") { CHECK(segment_history({}, kDay).empty()); }
    SUBCASE("unsorted input is an error") {
        CHECK_THROWS_AS(segment_history({ci(0, 1, 10), ci(0, 2, 5)}, kDay), std::invalid_argument);
    }
    SUBCASE("mixed users are an error") {
        CHECK_THROWS_AS(segment_history({ci(0, 1, 0), ci(1, 2, 5)}, kDay), std::invalid_argument);
    }
}

TEST_CASE("segmentation is a partition and idempotent") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> len(1, 40);
    // Gap distribution straddles the boundary, including exactly 24h.
    std::uniform_int_distribution<int64_t> gap(0, 2 * kDay);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<CheckIn> history;
        int64_t t = 1'000'000;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            history.push_back(ci(3, i % 7, t));
            int64_t g = gap(rng);
            if (iter % 5 == 0 && i % 3 == 0) g = kDay;  // force boundary cases
            t += g;
        }
        const auto trajs = segment_history(history, kDay);

        std::vector<CheckIn> flattened;
        for (const auto& traj : trajs)
            flattened.insert(flattened.end(), traj.checkins.begin(), traj.checkins.end());
        CHECK(flattened == history);

        for (const auto& traj : trajs) {
            const auto again = segment_history(traj.checkins, kDay);
            REQUIRE(again.size() == 1);
            CHECK(again[0].checkins == traj.checkins);
        }
    }
}

TEST_CASE("split_dataset is chronological per user") {
    std::vector<Trajectory> trajs;
    for (int s = 0; s < 5; ++s) {
        Trajectory t;
        t.id = s;
        t.user = 0;
        t.checkins = {ci(0, s, s * 10 * kDay)};
        trajs.push_back(t);
    }
    const auto split = split_dataset(trajs, 0.8);
    CHECK(split.train.size() == 4);
    REQUIRE(split.test.size() == 1);
    CHECK(split.test[0].trajectory_id == 4);

    SUBCASE("single trajectory goes to train only") {
        const auto solo = split_dataset({trajs[0]}, 0.8);
        CHECK(solo.train.size() == 1);
        CHECK(solo.test.empty());
    }
    SUBCASE("ratio bounds") {
        CHECK_THROWS_AS(split_dataset(trajs, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(split_dataset(trajs, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(split_dataset({}, 0.5), std::invalid_argument);
    }
}

TEST_CASE("every test user keeps train history on a synthetic corpus") {
    synthetic::Options opt;
    opt.users = 10;
    opt.trajectories_per_user = 4;
    const auto corpus = synthetic::make_corpus(opt);
    std::set<int32_t> train_users;
    for (const auto& t : corpus.split.train) train_users.insert(t.user);
    for (const auto& task : corpus.split.test) CHECK(train_users.count(task.user) == 1);

    SUBCASE("task context plus target reconstructs the trajectory") {
        for (const auto& task : corpus.split.test) {
            CHECK_FALSE(task.target.poi == -1);
            if (!task.context.empty())
                CHECK(task.context.back().timestamp <= task.target.timestamp);
        }
    }
}

TEST_CASE("build_pool scopes") {
    synthetic::Options opt;
    opt.users = 6;
    opt.trajectories_per_user = 5;
    const auto corpus = synthetic::make_corpus(opt);

    const auto all = build_pool(corpus.split, PoolScope::All);
    CHECK(all.trajectories.size() == corpus.split.train.size());

    std::set<const Trajectory*> union_of_user_pools;
    for (int u = 0; u < opt.users; ++u) {
        const auto pool = build_pool(corpus.split, PoolScope::User, u);
        for (const auto* t : pool.trajectories) {
            CHECK(t->user == u);
            union_of_user_pools.insert(t);
        }
    }
    CHECK(union_of_user_pools.size() == all.trajectories.size());

    CHECK_THROWS_AS(build_pool(corpus.split, PoolScope::User, 999), std::invalid_argument);
}

TEST_CASE("dataset_stats") {
    SUBCASE("empty split is all zeros") {
        const auto stats = dataset_stats(DatasetSplit{});
        CHECK(stats.users == 0);
        CHECK(stats.pois == 0);
        CHECK(stats.test_instances == 0);
        CHECK(stats.avg_sequences_per_user == 0.0);
    }
    SUBCASE("2 users with 3 and 5 train trajectories average 4.0") {
        DatasetSplit split;
        int64_t id = 0;
        for (int i = 0; i < 3; ++i) {
            Trajectory t;
            t.id = id++;
            t.user = 0;
            t.checkins = {ci(0, 1, i * 10 * kDay)};
            split.train.push_back(t);
        }
        for (int i = 0; i < 5; ++i) {
            Trajectory t;
            t.id = id++;
            t.user = 1;
            t.checkins = {ci(1, 2, i * 10 * kDay)};
            split.train.push_back(t);
        }
        const auto stats = dataset_stats(split);
        CHECK(stats.users == 2);
        CHECK(stats.pois == 2);
        CHECK(stats.avg_sequences_per_user == doctest::Approx(4.0));
    }
}

TEST_CASE("dataset archive round trip") {
    synthetic::Options opt;
    opt.users = 5;
    opt.trajectories_per_user = 4;
    const auto corpus = synthetic::make_corpus(opt);

    std::ostringstream out;
    write_dataset_archive(out, corpus);
    const std::string bytes = out.str();

    std::istringstream in(bytes);
    const auto loaded = read_dataset_archive(in);
    CHECK(loaded.name == corpus.name);
    CHECK(loaded.gap_seconds == corpus.gap_seconds);
    CHECK(loaded.split.train == corpus.split.train);
    CHECK(loaded.split.test == corpus.split.test);
    CHECK(loaded.users.originals == corpus.users.originals);

    SUBCASE("write is deterministic") {
        std::ostringstream again;
        write_dataset_archive(again, corpus);
        CHECK(again.str() == bytes);
    }
    SUBCASE("schema version mismatch names both versions") {
        std::string tampered = bytes;
        tampered.replace(tampered.find("nextpoi.dataset.v1"), 18, "nextpoi.dataset.v9");
        std::istringstream bad(tampered);
        CHECK_THROWS_WITH_AS(read_dataset_archive(bad),
                             doctest::Contains("nextpoi.dataset.v1"), std::runtime_error);
    }
    SUBCASE("truncated line reports its number") {
        const auto cut = bytes.substr(0, bytes.size() - 20);
        std::istringstream bad(cut);
        CHECK_THROWS_WITH_AS(read_dataset_archive(bad), doctest::Contains("line"),
                             std::runtime_error);
    }
}
