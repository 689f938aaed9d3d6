#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace nextpoi {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
    bool operator==(const GeoPoint&) const = default;
};

/// One visit event. User/POI ids are dense integers assigned at ingestion;
/// the original string ids live in the corpus id maps.
struct CheckIn {
    int32_t user = -1;
    int32_t poi = -1;
    std::string category;
    int64_t timestamp = 0;  // UTC epoch seconds
    GeoPoint geo;
    bool operator==(const CheckIn&) const = default;
};

/// Consecutive check-ins of one user with every gap below the segmentation
/// threshold. Timestamps are non-decreasing.
struct Trajectory {
    int64_t id = -1;
    int32_t user = -1;
    std::vector<CheckIn> checkins;

    int64_t start_time() const { return checkins.front().timestamp; }
    int64_t end_time() const { return checkins.back().timestamp; }
    bool operator==(const Trajectory&) const = default;
};

/// A test trajectory split into context (all but last) and the hidden target.
struct PredictionTask {
    int64_t trajectory_id = -1;
    int32_t user = -1;
    std::vector<CheckIn> context;  // may be empty for length-1 trajectories
    CheckIn target;                // ground truth; poi/category never rendered

    int64_t target_time() const { return target.timestamp; }
    bool operator==(const PredictionTask&) const = default;
};

struct DatasetSplit {
    std::vector<Trajectory> train;
    std::vector<PredictionTask> test;
};

enum class PoolScope { All, User };

/// Candidate demonstrations, drawn exclusively from the train split.
/// Pointers reference the DatasetSplit the pool was built from.
struct DemonstrationPool {
    PoolScope scope = PoolScope::All;
    int32_t user = -1;  // meaningful for PoolScope::User
    std::vector<const Trajectory*> trajectories;
};

/// Original string id <-> dense integer id.
struct IdMap {
    std::vector<std::string> originals;
    std::unordered_map<std::string, int32_t> dense;

    int32_t intern(const std::string& original);
    const std::string& original(int32_t id) const { return originals.at(id); }
    size_t size() const { return originals.size(); }
};

struct ColumnSchema {
    char delimiter = ',';
    bool has_header = false;
    int user_col = 0;
    int poi_col = 1;
    int category_col = 2;
    int timestamp_col = 3;  // ISO-8601 or epoch seconds, detected per row
    int lat_col = 4;
    int lon_col = 5;
};

struct RowError {
    size_t line = 0;  // 1-based
    std::string message;
    std::string raw;
};

struct ParseResult {
    std::vector<CheckIn> checkins;  // valid rows, input order
    std::vector<RowError> errors;
    IdMap users;
    IdMap pois;
};

ParseResult parse_checkins(std::istream& in, const ColumnSchema& schema);

/// Partition one user's sorted history into maximal runs whose consecutive
/// gaps are strictly below gap_seconds ("24 hours or more" splits, so a gap
/// of exactly gap_seconds starts a new trajectory). Ids are assigned
/// first_id, first_id+1, ... in order. Throws on unsorted or mixed-user
/// input.
std::vector<Trajectory> segment_history(const std::vector<CheckIn>& checkins,
                                        int64_t gap_seconds, int64_t first_id = 0);

/// Per-user chronological split: earliest trajectories go to train. Every
/// user keeps at least one train trajectory, so no test user lacks history.
/// One prediction task per test trajectory (predict its last check-in).
DatasetSplit split_dataset(const std::vector<Trajectory>& trajectories, double train_ratio);

DemonstrationPool build_pool(const DatasetSplit& split, PoolScope scope, int32_t user = -1);

struct DatasetStats {
    size_t users = 0;
    size_t pois = 0;
    size_t train_trajectories = 0;
    size_t test_instances = 0;
    double avg_sequences_per_user = 0.0;
};

DatasetStats dataset_stats(const DatasetSplit& split);

/// A prepared dataset: id maps, split, and the preprocessing knobs that
/// produced it, so downstream phases never re-ingest raw data.
struct Corpus {
    std::string name;  // e.g. "nyc"
    IdMap users;
    IdMap pois;
    DatasetSplit split;
    int64_t gap_seconds = 24 * 3600;
    double split_ratio = 0.8;
    int utc_offset_minutes = 0;  // rendering offset for prompts
    std::string config_digest;   // configuration that produced this corpus
};

/// Ingest raw rows into a corpus: group by user, stable-sort by timestamp,
/// segment, split. Deterministic for a fixed input.
Corpus build_corpus(ParseResult parsed, std::string name, int64_t gap_seconds,
                    double split_ratio, int utc_offset_minutes);

// Line-delimited archive: one meta line, then one line per trajectory.
inline constexpr const char* kDatasetSchemaVersion = "nextpoi.dataset.v1";

void write_dataset_archive(std::ostream& out, const Corpus& corpus);
Corpus read_dataset_archive(std::istream& in);

}  // namespace nextpoi
