#include "kvsim/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace kvsim {

namespace {

constexpr char kCsvHeader[] =
    "timestamp,chat_id,parent_chat_id,user_id,type,input_tokens,output_tokens,"
    "input_hashes,output_hashes";

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool parse_u64(std::string_view s, uint64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_f64(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

// '|'-separated unsigned decimals; empty string means no groups.
bool parse_hash_list(std::string_view s, std::vector<uint64_t>& out) {
  out.clear();
  if (s.empty()) return true;
  for (std::string_view part : split(s, '|')) {
    uint64_t v;
    if (!parse_u64(part, v)) return false;
    out.push_back(v);
  }
  return true;
}

// Id fields may not contain separators or quoting; keeps the CSV split exact.
bool valid_id(std::string_view s) {
  for (char c : s)
    if (c == ',' || c == '|' || c == '"' || c == '\n' || c == '\r') return false;
  return true;
}

struct RowCheck {
  std::string field;
  std::string message;
};

// Schema checks shared by both formats. Returns the first violation.
std::optional<RowCheck> validate(const TraceRecord& r) {
  if (r.chat_id.empty()) return RowCheck{"chat_id", "must be non-empty"};
  if (!valid_id(r.chat_id)) return RowCheck{"chat_id", "contains separator or quote"};
  if (!valid_id(r.parent_chat_id)) return RowCheck{"parent_chat_id", "contains separator or quote"};
  if (r.user_id.empty()) return RowCheck{"user_id", "must be non-empty"};
  if (!valid_id(r.user_id)) return RowCheck{"user_id", "contains separator or quote"};
  if (r.input_hashes.size() != r.input_tokens / 4)
    return RowCheck{"input_hashes",
                    "expected " + std::to_string(r.input_tokens / 4) + " hashes, got " +
                        std::to_string(r.input_hashes.size())};
  if (r.output_hashes.size() != r.output_tokens / 4)
    return RowCheck{"output_hashes",
                    "expected " + std::to_string(r.output_tokens / 4) + " hashes, got " +
                        std::to_string(r.output_hashes.size())};
  return std::nullopt;
}

ParseResult parse_csv(std::istream& in) {
  ParseResult result;
  std::string line;
  size_t lineno = 0;
  std::unordered_set<std::string> seen_ids;

  if (!std::getline(in, line)) throw std::runtime_error("empty trace: missing csv header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw std::runtime_error("bad csv header, expected: " + std::string(kCsvHeader));

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    auto reject = [&](std::string field, std::string msg) {
      result.rejected.push_back(RowDiagnostic{lineno, std::move(field), std::move(msg)});
    };

    auto fields = split(line, ',');
    if (fields.size() != 9) {
      reject("", "expected 9 fields, got " + std::to_string(fields.size()));
      continue;
    }
    TraceRecord r;
    if (!parse_f64(fields[0], r.timestamp)) { reject("timestamp", "not a finite number"); continue; }
    r.chat_id = std::string(fields[1]);
    r.parent_chat_id = std::string(fields[2]);
    r.user_id = std::string(fields[3]);
    auto type = request_type_from_string(fields[4]);
    if (!type) { reject("type", "unknown request type '" + std::string(fields[4]) + "'"); continue; }
    r.type = *type;
    if (!parse_u64(fields[5], r.input_tokens)) { reject("input_tokens", "not an unsigned integer"); continue; }
    if (!parse_u64(fields[6], r.output_tokens)) { reject("output_tokens", "not an unsigned integer"); continue; }
    if (!parse_hash_list(fields[7], r.input_hashes)) { reject("input_hashes", "bad hash list"); continue; }
    if (!parse_hash_list(fields[8], r.output_hashes)) { reject("output_hashes", "bad hash list"); continue; }
    if (auto v = validate(r)) { reject(v->field, v->message); continue; }
    if (!seen_ids.insert(r.chat_id).second) { reject("chat_id", "duplicate chat_id '" + r.chat_id + "'"); continue; }
    result.records.push_back(std::move(r));
  }
  return result;
}

ParseResult parse_jsonl(std::istream& in) {
  ParseResult result;
  std::string line;
  size_t lineno = 0;
  std::unordered_set<std::string> seen_ids;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    auto reject = [&](std::string field, std::string msg) {
      result.rejected.push_back(RowDiagnostic{lineno, std::move(field), std::move(msg)});
    };

    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) { reject("", "not a json object"); continue; }
    TraceRecord r;
    try {
      r.timestamp = j.at("timestamp").get<double>();
      r.chat_id = j.at("chat_id").get<std::string>();
      if (j.contains("parent_chat_id") && !j["parent_chat_id"].is_null())
        r.parent_chat_id = j["parent_chat_id"].get<std::string>();
      r.user_id = j.at("user_id").get<std::string>();
      auto type = request_type_from_string(j.at("type").get<std::string>());
      if (!type) { reject("type", "unknown request type"); continue; }
      r.type = *type;
      r.input_tokens = j.at("input_tokens").get<uint64_t>();
      r.output_tokens = j.at("output_tokens").get<uint64_t>();
      r.input_hashes = j.at("input_hashes").get<std::vector<uint64_t>>();
      r.output_hashes = j.at("output_hashes").get<std::vector<uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
      reject("", e.what());
      continue;
    }
    if (!std::isfinite(r.timestamp)) { reject("timestamp", "not finite"); continue; }
    if (auto v = validate(r)) { reject(v->field, v->message); continue; }
    if (!seen_ids.insert(r.chat_id).second) { reject("chat_id", "duplicate chat_id '" + r.chat_id + "'"); continue; }
    result.records.push_back(std::move(r));
  }
  return result;
}

std::string join_hashes(const std::vector<uint64_t>& hashes) {
  std::string out;
  for (size_t i = 0; i < hashes.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(hashes[i]);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

TraceFormat trace_format_from_path(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".jsonl" || ext == ".json") return TraceFormat::Jsonl;
  return TraceFormat::Csv;
}

std::string RowDiagnostic::to_string() const {
  std::string out = "line " + std::to_string(line);
  if (!field.empty()) out += ", field " + field;
  out += ": " + message;
  return out;
}

ParseResult parse_trace(std::istream& in, TraceFormat format) {
  return format == TraceFormat::Csv ? parse_csv(in) : parse_jsonl(in);
}

ParseResult parse_trace_file(const std::filesystem::path& file) {
  return parse_trace_file(file, trace_format_from_path(file));
}

ParseResult parse_trace_file(const std::filesystem::path& file, TraceFormat format) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open trace: " + file.string());
  return parse_trace(in, format);
}

void serialize_trace(std::ostream& out, std::span<const TraceRecord> records,
                     TraceFormat format) {
  if (format == TraceFormat::Csv) {
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
      out << format_double(r.timestamp) << ',' << r.chat_id << ',' << r.parent_chat_id
          << ',' << r.user_id << ',' << to_string(r.type) << ',' << r.input_tokens << ','
          << r.output_tokens << ',' << join_hashes(r.input_hashes) << ','
          << join_hashes(r.output_hashes) << '\n';
    }
  } else {
    for (const auto& r : records) {
      nlohmann::ordered_json j;
      j["timestamp"] = r.timestamp;
      j["chat_id"] = r.chat_id;
      j["parent_chat_id"] = r.parent_chat_id;
      j["user_id"] = r.user_id;
      j["type"] = to_string(r.type);
      j["input_tokens"] = r.input_tokens;
      j["output_tokens"] = r.output_tokens;
      j["input_hashes"] = r.input_hashes;
      j["output_hashes"] = r.output_hashes;
      out << j.dump() << '\n';
    }
  }
}

void serialize_trace_file(const std::filesystem::path& file,
                          std::span<const TraceRecord> records, TraceFormat format) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write trace: " + file.string());
  serialize_trace(out, records, format);
}

}  // namespace kvsim
