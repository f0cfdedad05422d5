#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace statemem {

// Shortest "%.17g" rendering; round-trips every finite double.
std::string format_double(double x);

// Parses a finite double, throwing std::invalid_argument otherwise.
double parse_double(std::string_view text);

// Writes to `path.tmp` then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

std::vector<std::string> split_whitespace(std::string_view line);
std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

// Independent seed for a named random substream.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

}  // namespace statemem
