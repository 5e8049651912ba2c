#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace alsprog::csv {

// Minimal comma-separated format: UTF-8, header row, no quoting. Field
// values must not contain commas or newlines; identifiers are validated at
// ingest so round-trips are lossless.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

Table read_file(const std::filesystem::path& path);

// Shortest round-trip decimal rendering (std::to_chars); NaN renders as an
// empty field, which is the missing-value marker throughout.
std::string format_double(double v);
std::string format_int(long long v);

double parse_double(std::string_view field, const std::string& context);
int parse_int(std::string_view field, const std::string& context);

// Writes rows atomically: a temp file in the same directory is renamed over
// the target only after a successful flush.
void write_file(const std::filesystem::path& path,
                const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

std::string read_text(const std::filesystem::path& path);

// FNV-1a over file bytes; used for run-manifest input digests.
std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace alsprog::csv
