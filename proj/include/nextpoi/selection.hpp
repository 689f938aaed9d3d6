#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nextpoi/dataset.hpp"
#include "nextpoi/embedding.hpp"

namespace nextpoi {

enum class StrategyKind { Random, EmbSim, Dtw, Jaccard, Lcs, Time };

const char* to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& name);

struct StrategySpec {
    StrategyKind kind = StrategyKind::Random;
    bool user_filter = false;
    int k = 5;
    uint64_t seed = 0;  // used by Random only; derived per (run, trial, task)
};

/// Throws on invalid combinations: k < 1, or Time without user filtering
/// (Time is only defined over the target user's own history).
void validate(const StrategySpec& spec);

enum class ScoreOrder { Ascending, Descending, None };

struct ScoredDemo {
    int64_t trajectory_id = -1;
    double score = 0.0;
    bool operator==(const ScoredDemo&) const = default;
};

struct RankedDemos {
    std::vector<ScoredDemo> demos;  // length min(k, candidates)
    ScoreOrder order = ScoreOrder::None;
    bool time_fallback = false;  // kernel strategy fell back on empty context
};

struct SelectionInputs {
    EmbeddingProvider* provider = nullptr;
    EmbeddingCache* cache = nullptr;
    int utc_offset_minutes = 0;  // wall-clock offset for embedding text renderings
};

/// Candidates from an All-scope pool that belong to `user`. Idempotent on a
/// User-scope pool of the same user.
std::vector<const Trajectory*> apply_user_filter(const DemonstrationPool& pool, int32_t user);

/// Rank demonstrations for one prediction task. Applies the user filter
/// first when requested, always excludes the task's own trajectory, caps at
/// spec.k, and dispatches to the per-kind ranker. Deterministic given
/// (task, pool, spec). Kernel and embedding scores compare the task CONTEXT
/// against each candidate's FULL trajectory.
RankedDemos select(const PredictionTask& task, const DemonstrationPool& pool,
                   const StrategySpec& spec, const SelectionInputs& inputs = {});

// Per-kind rankers (select() is the normal entry point).
RankedDemos rank_random(std::span<const Trajectory* const> candidates, int k, uint64_t seed);
RankedDemos rank_time(std::span<const Trajectory* const> candidates, int k);
RankedDemos rank_by_kernel(const PredictionTask& task,
                           std::span<const Trajectory* const> candidates, int k,
                           StrategyKind kernel);
RankedDemos rank_embsim(const PredictionTask& task, std::span<const Trajectory* const> candidates,
                        int k, EmbeddingProvider& provider, EmbeddingCache* cache,
                        int utc_offset_minutes = 0);

}  // namespace nextpoi
