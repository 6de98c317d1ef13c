#pragma once

#include <filesystem>
#include <string>

namespace fedar {

// Writes via a temp file in the same directory, then renames over the target.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// Decimal text with 9 significant digits; the format used by all CSV emitters.
std::string format_g9(double v);

std::string read_file(const std::filesystem::path& path);

} // namespace fedar
