#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nextpoi/dataset.hpp"
#include "nextpoi/selection.hpp"

namespace nextpoi {

/// "(HH:MM AM|PM, DayName, <poi id>, <category>)" in local wall-clock.
/// The display hour is hour mod 12, zero-padded, so noon renders "00:xx PM"
/// and midnight "00:xx AM".
std::string render_checkin(const CheckIn& c, int utc_offset_minutes);

/// Comma-space-joined tuple renderings; also the embedding text format.
std::string render_checkin_sequence(std::span<const CheckIn> checkins, int utc_offset_minutes);

/// "<context>: <tuples>\n<target>: <tuple>". Length-1 trajectories render
/// with an empty context line.
std::string render_demonstration(const Trajectory& t, int utc_offset_minutes);

/// Versioned prompt template with {{examples}} and {{current}} placeholders.
struct PromptTemplate {
    std::string id;
    std::string text;
    bool flat_demos = false;  // list demo check-ins as bare tuples, no context/target split
};

/// Built-in templates: "fewshot-v1" (context/target demonstrations) and
/// "flat-v1" (tuple-list history). Throws on unknown id.
const PromptTemplate& builtin_template(const std::string& id);

enum class DemoOrder { Ranked, ReverseRanked, Chronological };
DemoOrder demo_order_from_string(const std::string& name);

/// Structured metadata about a demo's target, for mock backends and audits.
struct DemoTargetInfo {
    int32_t poi = -1;
    int hour = 0;  // local wall-clock hour 0..23
};

struct PromptBundle {
    std::string full_text;
    int demo_count = 0;
    int token_estimate = 0;  // chars / 4
    int target_poi_in_demos = 0;
    std::string template_id;
    // Audit metadata, never rendered into the prompt text:
    std::vector<DemoTargetInfo> demo_targets;
    int current_target_hour = 0;
};

using TrajectoryLookup = std::function<const Trajectory*(int64_t)>;

/// Render the full prompt: instruction, demonstrations in the requested
/// order, then the current block with the target POI hidden. Throws when a
/// demo id cannot be resolved.
PromptBundle build_prompt(const PredictionTask& task, const RankedDemos& demos,
                          const TrajectoryLookup& lookup, const PromptTemplate& tmpl,
                          int utc_offset_minutes, DemoOrder order = DemoOrder::Ranked);

}  // namespace nextpoi
