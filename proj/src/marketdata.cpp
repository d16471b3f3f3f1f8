#include "stockpred/marketdata.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "stockpred/errors.hpp"
#include "stockpred/prng.hpp"

namespace stockpred {

namespace {

int parse_int_field(std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) fail("UnparsableField", "bad integer '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::string_view strip_cr(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    return line;
}

double parse_price_field(std::string_view s, std::size_t line_no, const char* column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        fail("UnparsableField",
             "line " + std::to_string(line_no) + ", column '" + column + "': cannot parse '" + std::string(s) + "'");
    }
    return v;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return lengths[static_cast<std::size_t>(m - 1)];
}

} // namespace

Date Date::parse(std::string_view text) {
    // ISO date prefix; anything after the 10th character (e.g. " 00:00:00")
    // is ignored.
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
        fail("UnparsableField", "bad date '" + std::string(text) + "'");
    }
    Date d;
    d.year = parse_int_field(text.substr(0, 4));
    d.month = parse_int_field(text.substr(5, 2));
    d.day = parse_int_field(text.substr(8, 2));
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
        fail("UnparsableField", "bad date '" + std::string(text) + "'");
    }
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

long Date::serial() const {
    // Howard Hinnant's days_from_civil.
    int y = year - (month <= 2);
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

Date Date::from_serial(long days) {
    long z = days + 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

PriceTable parse_prices(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail("EmptyInput", "no header row");

    const auto header = split_csv_line(strip_cr(line));
    static constexpr std::array<const char*, 7> required = {"date", "symbol", "open",  "close",
                                                            "low",  "high",   "volume"};
    std::array<std::size_t, 7> col{};
    for (std::size_t i = 0; i < required.size(); ++i) {
        const auto it = std::find(header.begin(), header.end(), std::string_view(required[i]));
        if (it == header.end()) fail("MissingColumn", std::string("header lacks column '") + required[i] + "'");
        col[i] = static_cast<std::size_t>(it - header.begin());
    }
    enum { kDate, kSymbol, kOpen, kClose, kLow, kHigh, kVolume };

    std::map<std::string, SymbolSeries> series;
    std::size_t line_no = 1;
    std::size_t data_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = strip_cr(line);
        if (row.empty()) continue;
        const auto fields = split_csv_line(row);
        if (fields.size() < header.size()) {
            fail("UnparsableField", "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }

        PriceBar bar;
        try {
            bar.date = Date::parse(fields[col[kDate]]);
        } catch (const Error&) {
            fail("UnparsableField",
                 "line " + std::to_string(line_no) + ", column 'date': cannot parse '" + std::string(fields[col[kDate]]) + "'");
        }
        bar.open = parse_price_field(fields[col[kOpen]], line_no, "open");
        bar.close = parse_price_field(fields[col[kClose]], line_no, "close");
        bar.low = parse_price_field(fields[col[kLow]], line_no, "low");
        bar.high = parse_price_field(fields[col[kHigh]], line_no, "high");
        bar.volume = parse_price_field(fields[col[kVolume]], line_no, "volume");

        // Reject rather than clamp: a silently corrected bar would poison
        // every downstream metric.
        if (bar.open <= 0 || bar.close <= 0 || bar.low <= 0 || bar.high <= 0) {
            fail("BadBar", "line " + std::to_string(line_no) + ": non-positive price");
        }
        if (bar.volume < 0) fail("BadBar", "line " + std::to_string(line_no) + ": negative volume");
        if (bar.low > bar.high || bar.low > std::min(bar.open, bar.close) ||
            bar.high < std::max(bar.open, bar.close)) {
            fail("BadBar", "line " + std::to_string(line_no) + ": low/high do not contain open/close");
        }

        const std::string symbol(fields[col[kSymbol]]);
        if (symbol.empty()) fail("UnparsableField", "line " + std::to_string(line_no) + ": empty symbol");
        auto& s = series[symbol];
        s.symbol = symbol;
        s.bars.push_back(bar);
        ++data_rows;
    }
    if (data_rows == 0) fail("EmptyInput", "no data rows");

    for (auto& [symbol, s] : series) {
        std::stable_sort(s.bars.begin(), s.bars.end(),
                         [](const PriceBar& a, const PriceBar& b) { return a.date < b.date; });
        for (std::size_t i = 1; i < s.bars.size(); ++i) {
            if (s.bars[i].date == s.bars[i - 1].date) {
                fail("DuplicateBar", symbol + " has two bars dated " + s.bars[i].date.to_string());
            }
        }
    }
    return PriceTable(std::move(series));
}

PriceTable parse_prices_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoFailure", "cannot open: " + path.string());
    return parse_prices(in);
}

std::vector<std::string> list_symbols(const PriceTable& table) {
    std::vector<std::string> symbols;
    symbols.reserve(table.census());
    for (const auto& [symbol, s] : table.series()) symbols.push_back(symbol);
    return symbols; // std::map iteration is already lexicographic
}

std::string pick_random_symbol(const PriceTable& table, std::uint64_t seed) {
    const auto symbols = list_symbols(table);
    if (symbols.empty()) fail("EmptyInput", "no symbols to pick from");
    const std::uint64_t index = splitmix64_once(seed) % symbols.size();
    return symbols[static_cast<std::size_t>(index)];
}

const SymbolSeries& select_symbol(const PriceTable& table, const std::string& symbol) {
    const auto it = table.series().find(symbol);
    if (it == table.series().end()) fail("UnknownSymbol", "'" + symbol + "' not in table");
    return it->second;
}

} // namespace stockpred
