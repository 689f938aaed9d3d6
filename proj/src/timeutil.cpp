#include "nextpoi/timeutil.hpp"

#include <cctype>
#include <cstdio>

namespace nextpoi::timeutil {

const char* const kWeekdayNames[7] = {"Sunday",   "Monday", "Tuesday", "Wednesday",
                                      "Thursday", "Friday", "Saturday"};

namespace {

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int64_t floor_mod(int64_t a, int64_t b) { return a - floor_div(a, b) * b; }

// Inverse of days_from_civil.
void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = floor_div(z, 146097);
    const int64_t doe = z - era * 146097;
    const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yy = yoe + era * 400;
    const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int64_t mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    y = static_cast<int>(m <= 2 ? yy + 1 : yy);
}

}  // namespace

int64_t days_from_civil(int year, int month, int day) {
    const int64_t y = year - (month <= 2 ? 1 : 0);
    const int64_t era = floor_div(y, 400);
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (month > 2 ? month - 3 : month + 9) + 2) / 5 + day - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

CivilTime civil_from_epoch(int64_t epoch_seconds) {
    CivilTime ct;
    const int64_t days = floor_div(epoch_seconds, 86400);
    const int64_t sod = floor_mod(epoch_seconds, 86400);
    civil_from_days(days, ct.year, ct.month, ct.day);
    ct.hour = static_cast<int>(sod / 3600);
    ct.minute = static_cast<int>((sod % 3600) / 60);
    ct.second = static_cast<int>(sod % 60);
    ct.weekday = static_cast<int>(floor_mod(days + 4, 7));  // 1970-01-01 was a Thursday
    return ct;
}

int weekday_from_epoch(int64_t epoch_seconds) {
    return static_cast<int>(floor_mod(floor_div(epoch_seconds, 86400) + 4, 7));
}

std::optional<int64_t> parse_iso8601(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%*1[T ]%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &s,
                    &consumed) != 6) {
        return std::nullopt;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) return std::nullopt;
    {
        // Reject non-existent dates (e.g. Feb 30) via round-trip.
        int ry, rm, rd;
        civil_from_days(days_from_civil(y, mo, d), ry, rm, rd);
        if (ry != y || rm != mo || rd != d) return std::nullopt;
    }

    const char* p = text.c_str() + consumed;
    if (*p == '.') {  // fractional seconds, ignored
        ++p;
        while (std::isdigit(static_cast<unsigned char>(*p))) ++p;
    }
    int64_t offset = 0;
    if (*p == 'Z') {
        ++p;
    } else if (*p == '+' || *p == '-') {
        const int sign = (*p == '-') ? -1 : 1;
        ++p;
        int oh = 0, om = 0, n = 0;
        if (std::sscanf(p, "%2d:%2d%n", &oh, &om, &n) == 2 && p[2] == ':') {
            p += n;
        } else if (std::sscanf(p, "%2d%2d%n", &oh, &om, &n) == 2) {
            p += n;
        } else if (std::sscanf(p, "%2d%n", &oh, &n) == 1) {
            om = 0;
            p += n;
        } else {
            return std::nullopt;
        }
        offset = sign * (oh * 3600LL + om * 60LL);
    }
    if (*p != '\0') return std::nullopt;

    return days_from_civil(y, mo, d) * 86400LL + h * 3600LL + mi * 60LL + s - offset;
}

std::optional<int64_t> parse_timestamp(const std::string& text) {
    if (text.empty()) return std::nullopt;
    bool numeric = true;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (i == 0 && (c == '-' || c == '+')) continue;
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            numeric = false;
            break;
        }
    }
    if (numeric) {
        try {
            return std::stoll(text);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return parse_iso8601(text);
}

std::string format_iso8601(int64_t epoch_seconds) {
    const CivilTime ct = civil_from_epoch(epoch_seconds);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", ct.year, ct.month, ct.day,
                  ct.hour, ct.minute, ct.second);
    return buf;
}

}  // namespace nextpoi::timeutil
