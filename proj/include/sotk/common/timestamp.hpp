#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sotk {

// UTC instant with millisecond precision, as carried by the dump's
// `2022-03-07T12:34:56.789` attribute format.
struct Timestamp {
    std::int64_t ms_since_epoch = 0;

    auto operator<=>(const Timestamp&) const = default;

    static constexpr std::int64_t ms_per_day = 86'400'000;
};

// Accepts `YYYY-MM-DDTHH:MM:SS[.fff]` with an optional trailing `Z`.
std::optional<Timestamp> parse_timestamp(std::string_view text);

std::string format_timestamp(Timestamp ts);

}  // namespace sotk
