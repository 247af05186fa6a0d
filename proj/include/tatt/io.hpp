// Small file and formatting helpers shared by the writers.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tatt {

/// Writes bytes to a sibling temporary file and renames it over path, so
/// readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Shortest representation that parses back to the same double.
std::string format_real(double v);

std::string format_fixed(double v, int decimals);

}  // namespace tatt
