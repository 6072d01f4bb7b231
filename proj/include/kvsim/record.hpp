#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kvsim/types.hpp"

namespace kvsim {

// One serving request as it appears in an anonymized trace. Token content is
// gone; what remains is one hash per 4 consecutive tokens ("group"). A trailing
// partial group (token count not a multiple of 4) carries no hash, so
// hashes.size() == tokens / 4 always.
struct TraceRecord {
  double timestamp = 0;  // seconds, fractional
  std::string chat_id;
  std::string parent_chat_id;  // empty = session root
  std::string user_id;
  RequestType type = RequestType::Text;
  uint64_t input_tokens = 0;
  uint64_t output_tokens = 0;
  std::vector<uint64_t> input_hashes;
  std::vector<uint64_t> output_hashes;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

enum class AttentionKind : uint8_t { Mha, Gqa, Mla };

const char* to_string(AttentionKind k);

struct ModelProfile {
  std::string name;
  AttentionKind attention = AttentionKind::Gqa;
  double bytes_per_token = 0;   // KV bytes per cached token
  double hbm_for_kv_bytes = 0;  // HBM budget available for KV on one instance
  int gpus_per_instance = 1;
};

// KV footprint of a token span. bytes_per_token may be fractional.
double kv_bytes(const ModelProfile& p, uint64_t tokens);

// Request footprint as a fraction of the profile's per-instance KV budget.
double hbm_fraction(const ModelProfile& p, uint64_t tokens);

ModelProfile load_model_profile(const std::filesystem::path& file);

}  // namespace kvsim
