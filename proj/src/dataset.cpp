#include "nextpoi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nextpoi/timeutil.hpp"

namespace nextpoi {

using nlohmann::json;

int32_t IdMap::intern(const std::string& original) {
    auto it = dense.find(original);
    if (it != dense.end()) return it->second;
    const int32_t id = static_cast<int32_t>(originals.size());
    originals.push_back(original);
    dense.emplace(original, id);
    return id;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, delimiter)) fields.push_back(field);
    if (!line.empty() && line.back() == delimiter) fields.emplace_back("");
    return fields;
}

std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ParseResult parse_checkins(std::istream& in, const ColumnSchema& schema) {
    ParseResult result;
    const int max_col = std::max({schema.user_col, schema.poi_col, schema.category_col,
                                  schema.timestamp_col, schema.lat_col, schema.lon_col});

    std::string line;
    size_t line_no = 0;
    bool header_pending = schema.has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (header_pending) {
            header_pending = false;
            continue;
        }
        if (strip(line).empty()) continue;

        const auto fields = split_fields(line, schema.delimiter);
        if (static_cast<int>(fields.size()) <= max_col) {
            result.errors.push_back({line_no, "expected at least " + std::to_string(max_col + 1) +
                                                  " columns, got " + std::to_string(fields.size()),
                                     line});
            continue;
        }

        const auto ts = timeutil::parse_timestamp(strip(fields[schema.timestamp_col]));
        if (!ts) {
            result.errors.push_back({line_no, "unparseable timestamp '" +
                                                  strip(fields[schema.timestamp_col]) + "'",
                                     line});
            continue;
        }

        double lat = 0.0, lon = 0.0;
        try {
            lat = std::stod(strip(fields[schema.lat_col]));
            lon = std::stod(strip(fields[schema.lon_col]));
        } catch (const std::exception&) {
            result.errors.push_back({line_no, "unparseable coordinates", line});
            continue;
        }
        if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0)) {
            result.errors.push_back({line_no, "coordinates out of bounds", line});
            continue;
        }

        CheckIn c;
        c.user = result.users.intern(strip(fields[schema.user_col]));
        c.poi = result.pois.intern(strip(fields[schema.poi_col]));
        c.category = strip(fields[schema.category_col]);
        c.timestamp = *ts;
        c.geo = {lat, lon};
        result.checkins.push_back(std::move(c));
    }
    return result;
}

std::vector<Trajectory> segment_history(const std::vector<CheckIn>& checkins,
                                        int64_t gap_seconds, int64_t first_id) {
    std::vector<Trajectory> out;
    if (checkins.empty()) return out;
    if (gap_seconds <= 0) throw std::invalid_argument("segment_history: gap must be positive");

    for (size_t i = 1; i < checkins.size(); ++i) {
        if (checkins[i].user != checkins[0].user)
            throw std::invalid_argument("segment_history: mixed users in input");
        if (checkins[i].timestamp < checkins[i - 1].timestamp)
            throw std::invalid_argument("segment_history: input not sorted by timestamp");
    }

    Trajectory current;
    current.id = first_id;
    current.user = checkins[0].user;
    current.checkins.push_back(checkins[0]);
    for (size_t i = 1; i < checkins.size(); ++i) {
        // "24 hours or more" splits, so the boundary itself is a split.
        if (checkins[i].timestamp - checkins[i - 1].timestamp >= gap_seconds) {
            out.push_back(std::move(current));
            current = Trajectory{};
            current.id = first_id + static_cast<int64_t>(out.size());
            current.user = checkins[i].user;
        }
        current.checkins.push_back(checkins[i]);
    }
    out.push_back(std::move(current));
    return out;
}

DatasetSplit split_dataset(const std::vector<Trajectory>& trajectories, double train_ratio) {
    if (trajectories.empty()) throw std::invalid_argument("split_dataset: empty input");
    if (!(train_ratio > 0.0 && train_ratio < 1.0))
        throw std::invalid_argument("split_dataset: ratio must be in (0,1)");

    std::map<int32_t, std::vector<Trajectory>> by_user;
    for (const auto& t : trajectories) by_user[t.user].push_back(t);

    DatasetSplit split;
    for (auto& [user, trajs] : by_user) {
        std::stable_sort(trajs.begin(), trajs.end(), [](const Trajectory& a, const Trajectory& b) {
            return a.start_time() < b.start_time();
        });
        const size_t n = trajs.size();
        const size_t n_train = std::max<size_t>(
            1, static_cast<size_t>(std::floor(static_cast<double>(n) * train_ratio + 1e-9)));
        for (size_t i = 0; i < n; ++i) {
            if (i < n_train) {
                split.train.push_back(std::move(trajs[i]));
            } else {
                PredictionTask task;
                task.trajectory_id = trajs[i].id;
                task.user = user;
                task.target = trajs[i].checkins.back();
                task.context.assign(trajs[i].checkins.begin(), trajs[i].checkins.end() - 1);
                split.test.push_back(std::move(task));
            }
        }
    }
    return split;
}

DemonstrationPool build_pool(const DatasetSplit& split, PoolScope scope, int32_t user) {
    DemonstrationPool pool;
    pool.scope = scope;
    if (scope == PoolScope::All) {
        pool.trajectories.reserve(split.train.size());
        for (const auto& t : split.train) pool.trajectories.push_back(&t);
        return pool;
    }
    pool.user = user;
    for (const auto& t : split.train) {
        if (t.user == user) pool.trajectories.push_back(&t);
    }
    if (pool.trajectories.empty())
        throw std::invalid_argument("build_pool: user " + std::to_string(user) +
                                    " has no train trajectories");
    return pool;
}

DatasetStats dataset_stats(const DatasetSplit& split) {
    DatasetStats stats;
    std::set<int32_t> users;
    std::set<int32_t> pois;
    for (const auto& t : split.train) {
        users.insert(t.user);
        for (const auto& c : t.checkins) pois.insert(c.poi);
    }
    for (const auto& task : split.test) {
        users.insert(task.user);
        for (const auto& c : task.context) pois.insert(c.poi);
        pois.insert(task.target.poi);
    }
    stats.users = users.size();
    stats.pois = pois.size();
    stats.train_trajectories = split.train.size();
    stats.test_instances = split.test.size();
    stats.avg_sequences_per_user =
        users.empty() ? 0.0
                      : static_cast<double>(split.train.size()) / static_cast<double>(users.size());
    return stats;
}

Corpus build_corpus(ParseResult parsed, std::string name, int64_t gap_seconds,
                    double split_ratio, int utc_offset_minutes) {
    Corpus corpus;
    corpus.name = std::move(name);
    corpus.users = std::move(parsed.users);
    corpus.pois = std::move(parsed.pois);
    corpus.gap_seconds = gap_seconds;
    corpus.split_ratio = split_ratio;
    corpus.utc_offset_minutes = utc_offset_minutes;

    std::map<int32_t, std::vector<CheckIn>> by_user;
    for (auto& c : parsed.checkins) by_user[c.user].push_back(std::move(c));

    std::vector<Trajectory> trajectories;
    int64_t next_id = 0;
    for (auto& [user, history] : by_user) {
        std::stable_sort(history.begin(), history.end(),
                         [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
        auto segs = segment_history(history, gap_seconds, next_id);
        next_id += static_cast<int64_t>(segs.size());
        for (auto& s : segs) trajectories.push_back(std::move(s));
    }
    if (trajectories.empty()) throw std::runtime_error("build_corpus: no valid check-ins");
    corpus.split = split_dataset(trajectories, split_ratio);
    return corpus;
}

namespace {

json trajectory_to_json(const Trajectory& t, const char* kind) {
    json rows = json::array();
    for (const auto& c : t.checkins)
        rows.push_back({c.timestamp, c.poi, c.geo.lat, c.geo.lon, c.category});
    return json{{"id", t.id}, {"user", t.user}, {"set", kind}, {"checkins", rows}};
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.id = j.at("id").get<int64_t>();
    t.user = j.at("user").get<int32_t>();
    for (const auto& row : j.at("checkins")) {
        CheckIn c;
        c.user = t.user;
        c.timestamp = row.at(0).get<int64_t>();
        c.poi = row.at(1).get<int32_t>();
        c.geo.lat = row.at(2).get<double>();
        c.geo.lon = row.at(3).get<double>();
        c.category = row.at(4).get<std::string>();
        t.checkins.push_back(std::move(c));
    }
    return t;
}

}  // namespace

void write_dataset_archive(std::ostream& out, const Corpus& corpus) {
    json meta{{"schema", kDatasetSchemaVersion},
              {"name", corpus.name},
              {"config_digest", corpus.config_digest},
              {"gap_seconds", corpus.gap_seconds},
              {"split_ratio", corpus.split_ratio},
              {"utc_offset_minutes", corpus.utc_offset_minutes},
              {"users", corpus.users.originals},
              {"pois", corpus.pois.originals}};
    out << meta.dump() << "\n";
    for (const auto& t : corpus.split.train) out << trajectory_to_json(t, "train").dump() << "\n";
    for (const auto& task : corpus.split.test) {
        Trajectory t;  // test trajectories round-trip whole; the split re-derives tasks
        t.id = task.trajectory_id;
        t.user = task.user;
        t.checkins = task.context;
        t.checkins.push_back(task.target);
        out << trajectory_to_json(t, "test").dump() << "\n";
    }
}

Corpus read_dataset_archive(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset archive: empty stream");
    json meta;
    try {
        meta = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("dataset archive: bad meta line: ") + e.what());
    }
    const std::string schema = meta.value("schema", "");
    if (schema != kDatasetSchemaVersion)
        throw std::runtime_error("dataset archive: schema '" + schema + "' does not match reader '" +
                                 kDatasetSchemaVersion + "'");

    Corpus corpus;
    corpus.name = meta.value("name", "");
    corpus.config_digest = meta.value("config_digest", "");
    corpus.gap_seconds = meta.at("gap_seconds").get<int64_t>();
    corpus.split_ratio = meta.at("split_ratio").get<double>();
    corpus.utc_offset_minutes = meta.at("utc_offset_minutes").get<int>();
    for (const auto& u : meta.at("users")) corpus.users.intern(u.get<std::string>());
    for (const auto& p : meta.at("pois")) corpus.pois.intern(p.get<std::string>());

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("dataset archive: line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
        Trajectory t = trajectory_from_json(j);
        if (j.at("set").get<std::string>() == "train") {
            corpus.split.train.push_back(std::move(t));
        } else {
            PredictionTask task;
            task.trajectory_id = t.id;
            task.user = t.user;
            task.target = t.checkins.back();
            task.context.assign(t.checkins.begin(), t.checkins.end() - 1);
            corpus.split.test.push_back(std::move(task));
        }
    }
    return corpus;
}

}  // namespace nextpoi
