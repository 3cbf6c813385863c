#include "distopt/util.hpp"

#include "distopt/errors.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

namespace distopt {

namespace {

std::atomic<bool> g_log_enabled{true};
std::mutex g_log_mutex;

}  // namespace

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("cannot open file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write file: " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string checksum_hex(std::string_view bytes)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string format_double(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) {
        std::snprintf(buf, sizeof buf, "%.17g", value);
        return buf;
    }
    return std::string(buf, end);
}

void set_log_enabled(bool enabled) { g_log_enabled = enabled; }

void log_line(std::string_view message)
{
    if (!g_log_enabled) {
        return;
    }
    std::lock_guard lock(g_log_mutex);
    std::clog << "[distopt] " << message << '\n';
}

}  // namespace distopt
