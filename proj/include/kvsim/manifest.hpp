#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace kvsim {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

uint64_t fnv1a64_file(const std::filesystem::path& file);

// Written as <out>/manifest.json after every CLI run. Timestamps make it the
// one output excluded from byte-identity comparisons.
struct RunManifest {
  std::string command;
  std::string config_json;  // resolved settings snapshot, already serialized
  std::vector<std::pair<std::string, uint64_t>> inputs;  // path, content digest
  std::vector<std::string> outputs;
  std::string started_at, finished_at;  // UTC ISO-8601

  void add_input(const std::filesystem::path& file);
  void write(const std::filesystem::path& file) const;
};

std::string utc_now_iso8601();

}  // namespace kvsim
