#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agentrl::text {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);
std::uint64_t parse_uint(std::string_view s);
std::int64_t parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Token sequences are written as comma-joined integers; empty sequence is "".
std::string join_ids(std::span<const std::uint32_t> ids);
std::vector<std::uint32_t> parse_ids(std::string_view s);

// 64-bit FNV-1a, used for run manifest content hashes.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace agentrl::text
