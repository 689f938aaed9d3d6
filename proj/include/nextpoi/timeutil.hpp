#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace nextpoi::timeutil {

// All timestamps are UTC epoch seconds. Rendering applies a per-dataset
// wall-clock offset in minutes (check-in feeds carry local offsets).

struct CivilTime {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31
    int hour = 0;
    int minute = 0;
    int second = 0;
    int weekday = 4;  // 0 = Sunday
};

int64_t days_from_civil(int year, int month, int day);
CivilTime civil_from_epoch(int64_t epoch_seconds);

// 0 = Sunday, matching kWeekdayNames.
int weekday_from_epoch(int64_t epoch_seconds);

extern const char* const kWeekdayNames[7];

// "YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|+HH:MM|-HH:MM|+HHMM]"; no suffix means UTC.
std::optional<int64_t> parse_iso8601(const std::string& text);

// ISO-8601 or plain epoch seconds.
std::optional<int64_t> parse_timestamp(const std::string& text);

std::string format_iso8601(int64_t epoch_seconds);

}  // namespace nextpoi::timeutil
