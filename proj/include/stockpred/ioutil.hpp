#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace stockpred {

// 17 significant digits: enough to round-trip any binary64 value exactly.
std::string format_g17(double v);

// Full-string strict parse; throws Error("CorruptNumber") on anything else.
double parse_double_strict(std::string_view s);

// Write-temp-then-rename so readers never observe a truncated file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

} // namespace stockpred
