#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace distopt {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// 64-bit FNV-1a; used for config and data checksums in logs and manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string checksum_hex(std::string_view bytes);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);

void set_log_enabled(bool enabled);
void log_line(std::string_view message);

}  // namespace distopt
