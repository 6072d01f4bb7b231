#include "kvsim/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace kvsim {

uint64_t fnv1a64_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for digest: " + file.string());
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string utc_now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

void RunManifest::add_input(const std::filesystem::path& file) {
  inputs.emplace_back(file.string(), fnv1a64_file(file));
}

void RunManifest::write(const std::filesystem::path& file) const {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["config"] = nlohmann::ordered_json::parse(config_json.empty() ? "{}" : config_json);
  nlohmann::ordered_json ins = nlohmann::ordered_json::array();
  for (const auto& [path, digest] : inputs) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(digest));
    ins.push_back({{"path", path}, {"fnv1a64", hex}});
  }
  j["inputs"] = ins;
  j["outputs"] = outputs;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;

  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write manifest: " + file.string());
  out << j.dump(2) << '\n';
}

}  // namespace kvsim
