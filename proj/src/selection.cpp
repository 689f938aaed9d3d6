#include "nextpoi/selection.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "nextpoi/prompting.hpp"
#include "nextpoi/similarity.hpp"

namespace nextpoi {

const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Random: return "random";
        case StrategyKind::EmbSim: return "embsim";
        case StrategyKind::Dtw: return "dtw";
        case StrategyKind::Jaccard: return "jaccard";
        case StrategyKind::Lcs: return "lcs";
        case StrategyKind::Time: return "time";
    }
    return "?";
}

StrategyKind strategy_from_string(const std::string& name) {
    if (name == "random") return StrategyKind::Random;
    if (name == "embsim") return StrategyKind::EmbSim;
    if (name == "dtw") return StrategyKind::Dtw;
    if (name == "jaccard") return StrategyKind::Jaccard;
    if (name == "lcs") return StrategyKind::Lcs;
    if (name == "time") return StrategyKind::Time;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

void validate(const StrategySpec& spec) {
    if (spec.k < 1) throw std::invalid_argument("strategy k must be >= 1");
    if (spec.kind == StrategyKind::Time && !spec.user_filter)
        throw std::invalid_argument("time strategy requires user_filter=true");
}

std::vector<const Trajectory*> apply_user_filter(const DemonstrationPool& pool, int32_t user) {
    std::vector<const Trajectory*> out;
    for (const Trajectory* t : pool.trajectories) {
        if (t->user == user) out.push_back(t);
    }
    return out;
}

namespace {

// Deterministic tie-break shared by all scored rankers: score first (per
// direction), then more recent trajectory, then smaller id.
struct Scored {
    const Trajectory* traj;
    double score;
};

void sort_scored(std::vector<Scored>& scored, ScoreOrder order) {
    std::sort(scored.begin(), scored.end(), [order](const Scored& a, const Scored& b) {
        if (a.score != b.score)
            return order == ScoreOrder::Ascending ? a.score < b.score : a.score > b.score;
        if (a.traj->end_time() != b.traj->end_time())
            return a.traj->end_time() > b.traj->end_time();
        return a.traj->id < b.traj->id;
    });
}

RankedDemos take_top(std::vector<Scored>& scored, int k, ScoreOrder order) {
    RankedDemos out;
    out.order = order;
    const size_t take = std::min<size_t>(scored.size(), static_cast<size_t>(k));
    out.demos.reserve(take);
    for (size_t i = 0; i < take; ++i)
        out.demos.push_back({scored[i].traj->id, scored[i].score});
    return out;
}

}  // namespace

RankedDemos rank_random(std::span<const Trajectory* const> candidates, int k, uint64_t seed) {
    // Selection is over ids, not input order: normalize before sampling.
    std::vector<const Trajectory*> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });

    std::mt19937_64 rng(seed);
    const size_t take = std::min<size_t>(sorted.size(), static_cast<size_t>(k));
    for (size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<size_t> pick(i, sorted.size() - 1);
        std::swap(sorted[i], sorted[pick(rng)]);
    }

    RankedDemos out;
    out.order = ScoreOrder::None;
    out.demos.reserve(take);
    for (size_t i = 0; i < take; ++i) out.demos.push_back({sorted[i]->id, 0.0});
    return out;
}

RankedDemos rank_time(std::span<const Trajectory* const> candidates, int k) {
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const Trajectory* t : candidates)
        scored.push_back({t, static_cast<double>(t->end_time())});
    sort_scored(scored, ScoreOrder::Descending);
    return take_top(scored, k, ScoreOrder::Descending);
}

RankedDemos rank_by_kernel(const PredictionTask& task,
                           std::span<const Trajectory* const> candidates, int k,
                           StrategyKind kernel) {
    if (task.context.empty()) {
        auto out = rank_time(candidates, k);
        out.time_fallback = true;
        return out;
    }

    const auto context_geo = geo_sequence(task.context);
    const auto context_pois = poi_sequence(task.context);

    ScoreOrder order = ScoreOrder::Descending;
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const Trajectory* t : candidates) {
        double score = 0.0;
        switch (kernel) {
            case StrategyKind::Dtw:
                score = dtw_distance(context_geo, geo_sequence(t->checkins));
                order = ScoreOrder::Ascending;
                break;
            case StrategyKind::Jaccard: {
                const auto pois = poi_sequence(t->checkins);
                score = jaccard_similarity(context_pois, pois);
                break;
            }
            case StrategyKind::Lcs: {
                const auto pois = poi_sequence(t->checkins);
                score = static_cast<double>(lcs_length(context_pois, pois));
                break;
            }
            default:
                throw std::invalid_argument("rank_by_kernel: not a kernel strategy");
        }
        scored.push_back({t, score});
    }
    sort_scored(scored, order);
    return take_top(scored, k, order);
}

RankedDemos rank_embsim(const PredictionTask& task, std::span<const Trajectory* const> candidates,
                        int k, EmbeddingProvider& provider, EmbeddingCache* cache,
                        int utc_offset_minutes) {
    // Both sides use the demonstration line format so the comparison is
    // fully reproducible from text alone; the task side renders its context,
    // candidates render their whole sequence.
    const std::string task_text =
        "<context>: " + render_checkin_sequence(task.context, utc_offset_minutes);
    EmbeddingCache local;
    EmbeddingCache& c = cache ? *cache : local;

    const auto task_vec = c.get_or_compute(task.trajectory_id, task_text, provider);

    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const Trajectory* t : candidates) {
        const std::string text =
            "<context>: " + render_checkin_sequence(t->checkins, utc_offset_minutes);
        const auto vec = c.get_or_compute(t->id, text, provider);
        scored.push_back({t, cosine_similarity(*task_vec, *vec)});
    }
    sort_scored(scored, ScoreOrder::Descending);
    return take_top(scored, k, ScoreOrder::Descending);
}

RankedDemos select(const PredictionTask& task, const DemonstrationPool& pool,
                   const StrategySpec& spec, const SelectionInputs& inputs) {
    validate(spec);
    if (pool.scope == PoolScope::User && pool.user != task.user)
        throw std::invalid_argument("select: user pool does not match task user");

    std::vector<const Trajectory*> candidates;
    if (spec.user_filter && pool.scope == PoolScope::All) {
        candidates = apply_user_filter(pool, task.user);
    } else {
        candidates.assign(pool.trajectories.begin(), pool.trajectories.end());
    }
    // Never demonstrate a task with its own trajectory.
    std::erase_if(candidates,
                  [&](const Trajectory* t) { return t->id == task.trajectory_id; });
    if (candidates.empty()) return RankedDemos{};

    switch (spec.kind) {
        case StrategyKind::Random: return rank_random(candidates, spec.k, spec.seed);
        case StrategyKind::Time: return rank_time(candidates, spec.k);
        case StrategyKind::Dtw:
        case StrategyKind::Jaccard:
        case StrategyKind::Lcs: return rank_by_kernel(task, candidates, spec.k, spec.kind);
        case StrategyKind::EmbSim: {
            if (inputs.provider == nullptr)
                throw std::invalid_argument("select: embsim requires an embedding provider");
            return rank_embsim(task, candidates, spec.k, *inputs.provider, inputs.cache,
                               inputs.utc_offset_minutes);
        }
    }
    throw std::invalid_argument("select: unknown strategy kind");
}

}  // namespace nextpoi
