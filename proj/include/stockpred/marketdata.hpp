#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace stockpred {

// Calendar day. Input dates are ISO-8601; a trailing time-of-day component is
// accepted and ignored (the source files mix "2016-01-05" and
// "2016-01-05 00:00:00" styles).
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    static Date parse(std::string_view text); // throws Error("UnparsableField")
    std::string to_string() const;            // "YYYY-MM-DD"

    // Days since 1970-01-01, proleptic Gregorian. Used for linear date axes.
    long serial() const;
    static Date from_serial(long days);
};

struct PriceBar {
    Date date;
    double open = 0.0;
    double close = 0.0;
    double low = 0.0;
    double high = 0.0;
    double volume = 0.0;
};

// Bars strictly ascending by date, one symbol.
struct SymbolSeries {
    std::string symbol;
    std::vector<PriceBar> bars;
};

// Immutable after parse; concurrent reads are fine.
class PriceTable {
public:
    explicit PriceTable(std::map<std::string, SymbolSeries> series) : series_(std::move(series)) {}

    std::size_t census() const { return series_.size(); }
    const std::map<std::string, SymbolSeries>& series() const { return series_; }

private:
    std::map<std::string, SymbolSeries> series_;
};

// Header must contain date,symbol,open,close,low,high,volume (any order,
// extra columns ignored). Rows are grouped per symbol and sorted by date.
// Errors: MissingColumn, UnparsableField, BadBar, DuplicateBar, EmptyInput.
PriceTable parse_prices(std::istream& in);
PriceTable parse_prices_file(const std::filesystem::path& path);

// Lexicographically sorted, duplicate-free; length equals the census.
std::vector<std::string> list_symbols(const PriceTable& table);

// Deterministic: sorted_symbols[splitmix64(seed) mod census].
std::string pick_random_symbol(const PriceTable& table, std::uint64_t seed);

const SymbolSeries& select_symbol(const PriceTable& table, const std::string& symbol);

} // namespace stockpred
