#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace kalfuse {

/// Calendar day stored as days since 1970-01-01. Keeps all date arithmetic
/// integral; time-of-day never matters for acquisition schedules.
struct Date {
    int days = 0;

    auto operator<=>(const Date&) const = default;
    Date operator+(int n) const { return Date{days + n}; }
    int operator-(const Date& other) const { return days - other.days; }
};

/// Parses ISO-8601 "YYYY-MM-DD". Throws DataError on malformed input.
Date parse_date(std::string_view iso);

/// Formats as "YYYY-MM-DD".
std::string format_date(Date d);

}  // namespace kalfuse
