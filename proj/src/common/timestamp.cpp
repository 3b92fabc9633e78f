#include "sotk/common/timestamp.hpp"

#include <chrono>
#include <cstdio>

namespace sotk {

namespace {

bool read_digits(std::string_view text, std::size_t pos, std::size_t count, int& out) {
    if (pos + count > text.size()) {
        return false;
    }
    int value = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const char c = text[pos + i];
        if (c < '0' || c > '9') {
            return false;
        }
        value = value * 10 + (c - '0');
    }
    out = value;
    return true;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    if (!text.empty() && text.back() == 'Z') {
        text.remove_suffix(1);
    }
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (text.size() < 19 || !read_digits(text, 0, 4, year) || text[4] != '-' ||
        !read_digits(text, 5, 2, month) || text[7] != '-' || !read_digits(text, 8, 2, day) ||
        (text[10] != 'T' && text[10] != ' ') || !read_digits(text, 11, 2, hour) || text[13] != ':' ||
        !read_digits(text, 14, 2, minute) || text[16] != ':' || !read_digits(text, 17, 2, second)) {
        return std::nullopt;
    }
    int millis = 0;
    if (text.size() > 19) {
        if (text[19] != '.' || text.size() == 20 || text.size() > 29) {
            return std::nullopt;
        }
        // Fractional seconds beyond milliseconds are truncated.
        int scale = 100;
        for (std::size_t i = 20; i < text.size(); ++i) {
            const char c = text[i];
            if (c < '0' || c > '9') {
                return std::nullopt;
            }
            millis += (c - '0') * scale;
            scale /= 10;
        }
    }
    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{static_cast<unsigned>(month)},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
        return std::nullopt;
    }
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    const std::int64_t ms = static_cast<std::int64_t>(days) * Timestamp::ms_per_day +
                            ((hour * 60LL + minute) * 60LL + second) * 1000LL + millis;
    return Timestamp{ms};
}

std::string format_timestamp(Timestamp ts) {
    std::int64_t days = ts.ms_since_epoch / Timestamp::ms_per_day;
    std::int64_t rem = ts.ms_since_epoch % Timestamp::ms_per_day;
    if (rem < 0) {
        rem += Timestamp::ms_per_day;
        --days;
    }
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
    const auto ms = static_cast<int>(rem % 1000);
    const auto secs = static_cast<int>(rem / 1000);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), secs / 3600,
                  (secs / 60) % 60, secs % 60, ms);
    return buf;
}

}  // namespace sotk
