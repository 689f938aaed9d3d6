#include "nextpoi/prompting.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "nextpoi/timeutil.hpp"

namespace nextpoi {

namespace {

const char* const kFewshotInstruction =
    R"(Your task is to predict a user's next location based on his/her activity pattern. You will be provided with some examples of the user's historical stay sequences. One sequence consists of <context> and <target>. <context> provides contextual information about where and when this user has been to before the last stay. <target> is the last stay in the sequence. Stays in <context> are in chronological order. Each stay takes on such form as (start_time, day_of_week, place_id, place_category).

The detailed explanation of each element is as follows:
  start_time: the start time of the stay in 12h clock format.
  day_of_week: indicating the day of the week.
  place_id: an integer representing the unique place ID, which indicates where the stay is.
  place_category: a string representing the category of the place (e.g., Train Station, Park, etc.).

<target_current> is the prediction target with unknown place ID denoted as <next_place_id> and unknown place category name denoted as <next_place_category>, while temporal information is provided.

Please infer what the <next_place_id> is (i.e., the most likely place ID), considering the following aspects:
  1. the activity pattern of this user that you learned from examples, e.g., repeated visits to a certain place during a certain time;
  2. the context stays in <context_current>, which provide more recent activities of this user;
  3. the temporal information (i.e., start_time and weekday) of target stay, which is important because people's activity varies during different time (e.g., nighttime versus daytime) and on different days (e.g., weekday versus weekend).

Please organize your answer in a JSON object containing following keys: "place_id" and "place_category". Do not include reasons in your output.

{{examples}}The current data are as follows:
{{current}}
)";

// Tuple-list variant: historical check-ins are listed as bare tuples with no
// context/target segmentation.
const char* const kFlatInstruction =
    R"(Your task is to predict a user's next location based on his/her activity pattern. You will be provided with this user's historical stays as a list of tuples in chronological order. Each stay takes on such form as (start_time, day_of_week, place_id, place_category).

The detailed explanation of each element is as follows:
  start_time: the start time of the stay in 12h clock format.
  day_of_week: indicating the day of the week.
  place_id: an integer representing the unique place ID, which indicates where the stay is.
  place_category: a string representing the category of the place (e.g., Train Station, Park, etc.).

<target_current> is the prediction target with unknown place ID denoted as <next_place_id> and unknown place category name denoted as <next_place_category>, while temporal information is provided.

Please organize your answer in a JSON object containing following keys: "place_id" and "place_category". Do not include reasons in your output.

{{examples}}The current data are as follows:
{{current}}
)";

const PromptTemplate kTemplates[] = {
    {"fewshot-v1", kFewshotInstruction, false},
    {"flat-v1", kFlatInstruction, true},
};

std::string replace_once(std::string text, const std::string& placeholder,
                         const std::string& value) {
    const auto pos = text.find(placeholder);
    if (pos == std::string::npos)
        throw std::runtime_error("prompt template is missing placeholder " + placeholder);
    text.replace(pos, placeholder.size(), value);
    return text;
}

int local_hour(int64_t timestamp, int utc_offset_minutes) {
    return timeutil::civil_from_epoch(timestamp + int64_t{utc_offset_minutes} * 60).hour;
}

}  // namespace

std::string render_checkin(const CheckIn& c, int utc_offset_minutes) {
    const auto ct = timeutil::civil_from_epoch(c.timestamp + int64_t{utc_offset_minutes} * 60);
    char head[16];
    std::snprintf(head, sizeof(head), "%02d:%02d %s", ct.hour % 12, ct.minute,
                  ct.hour < 12 ? "AM" : "PM");
    std::string out = "(";
    out += head;
    out += ", ";
    out += timeutil::kWeekdayNames[ct.weekday];
    out += ", ";
    out += std::to_string(c.poi);
    out += ", ";
    out += c.category;
    out += ")";
    return out;
}

std::string render_checkin_sequence(std::span<const CheckIn> checkins, int utc_offset_minutes) {
    std::string out;
    for (size_t i = 0; i < checkins.size(); ++i) {
        if (i > 0) out += ", ";
        out += render_checkin(checkins[i], utc_offset_minutes);
    }
    return out;
}

std::string render_demonstration(const Trajectory& t, int utc_offset_minutes) {
    if (t.checkins.empty()) throw std::invalid_argument("render_demonstration: empty trajectory");
    const std::span<const CheckIn> all(t.checkins);
    std::string out = "<context>: ";
    out += render_checkin_sequence(all.subspan(0, all.size() - 1), utc_offset_minutes);
    out += "\n<target>: ";
    out += render_checkin(t.checkins.back(), utc_offset_minutes);
    return out;
}

const PromptTemplate& builtin_template(const std::string& id) {
    for (const auto& t : kTemplates) {
        if (t.id == id) return t;
    }
    throw std::invalid_argument("unknown prompt template '" + id + "'");
}

DemoOrder demo_order_from_string(const std::string& name) {
    if (name == "ranked") return DemoOrder::Ranked;
    if (name == "reverse-ranked") return DemoOrder::ReverseRanked;
    if (name == "chronological") return DemoOrder::Chronological;
    throw std::invalid_argument("unknown demo order '" + name + "'");
}

PromptBundle build_prompt(const PredictionTask& task, const RankedDemos& demos,
                          const TrajectoryLookup& lookup, const PromptTemplate& tmpl,
                          int utc_offset_minutes, DemoOrder order) {
    std::vector<const Trajectory*> resolved;
    resolved.reserve(demos.demos.size());
    for (const auto& d : demos.demos) {
        const Trajectory* t = lookup(d.trajectory_id);
        if (t == nullptr)
            throw std::runtime_error("build_prompt: unknown trajectory id " +
                                     std::to_string(d.trajectory_id));
        resolved.push_back(t);
    }
    switch (order) {
        case DemoOrder::Ranked:
            break;
        case DemoOrder::ReverseRanked:
            std::reverse(resolved.begin(), resolved.end());
            break;
        case DemoOrder::Chronological:
            std::stable_sort(resolved.begin(), resolved.end(),
                             [](const Trajectory* a, const Trajectory* b) {
                                 return a->end_time() < b->end_time();
                             });
            break;
    }

    PromptBundle bundle;
    bundle.template_id = tmpl.id;
    bundle.demo_count = static_cast<int>(resolved.size());
    bundle.current_target_hour = local_hour(task.target.timestamp, utc_offset_minutes);

    std::string examples;
    if (!resolved.empty()) {
        examples = "The examples are as follows:\n";
        for (const Trajectory* t : resolved) {
            if (tmpl.flat_demos) {
                for (const auto& c : t->checkins)
                    examples += render_checkin(c, utc_offset_minutes) + "\n";
            } else {
                examples += render_demonstration(*t, utc_offset_minutes) + "\n";
            }
            const CheckIn& target = t->checkins.back();
            bundle.demo_targets.push_back(
                {target.poi, local_hour(target.timestamp, utc_offset_minutes)});
            if (target.poi == task.target.poi) ++bundle.target_poi_in_demos;
        }
        examples += "\n";
    }

    std::string current = "<context_current>: ";
    current += render_checkin_sequence(task.context, utc_offset_minutes);
    current += "\n<target_current>: (";
    {
        const auto ct =
            timeutil::civil_from_epoch(task.target.timestamp + int64_t{utc_offset_minutes} * 60);
        char head[16];
        std::snprintf(head, sizeof(head), "%02d:%02d %s", ct.hour % 12, ct.minute,
                      ct.hour < 12 ? "AM" : "PM");
        current += head;
        current += ", ";
        current += timeutil::kWeekdayNames[ct.weekday];
    }
    current += ", <next_place_id>, <next_place_category>)";

    bundle.full_text = replace_once(replace_once(tmpl.text, "{{examples}}", examples),
                                    "{{current}}", current);
    bundle.token_estimate = static_cast<int>(bundle.full_text.size() / 4);
    return bundle;
}

}  // namespace nextpoi
