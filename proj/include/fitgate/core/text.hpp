#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fitgate {

// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

// Parses a whole field as a double; subnormals are accepted, garbage throws kFormat.
double parse_double(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep);

std::string read_text_file(const std::filesystem::path& path);
// Writes atomically enough for our purposes: truncate + write, throws kIo.
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Minimal CSV reader for the artifact manifests (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws kFormat when missing.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace fitgate
