#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kvsim/record.hpp"

namespace kvsim {

enum class TraceFormat { Csv, Jsonl };

// Picks by extension: .jsonl/.json -> Jsonl, anything else -> Csv.
TraceFormat trace_format_from_path(const std::filesystem::path& p);

struct RowDiagnostic {
  size_t line = 0;  // 1-based line in the file (CSV header is line 1)
  std::string field;
  std::string message;

  std::string to_string() const;
};

struct ParseResult {
  std::vector<TraceRecord> records;  // valid rows, file order
  std::vector<RowDiagnostic> rejected;
};

ParseResult parse_trace(std::istream& in, TraceFormat format);
ParseResult parse_trace_file(const std::filesystem::path& file);
ParseResult parse_trace_file(const std::filesystem::path& file, TraceFormat format);

void serialize_trace(std::ostream& out, std::span<const TraceRecord> records,
                     TraceFormat format);
void serialize_trace_file(const std::filesystem::path& file,
                          std::span<const TraceRecord> records, TraceFormat format);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace kvsim
