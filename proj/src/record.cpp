#include "kvsim/record.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace kvsim {

const char* to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::Mha: return "mha";
    case AttentionKind::Gqa: return "gqa";
    case AttentionKind::Mla: return "mla";
  }
  return "gqa";
}

double kv_bytes(const ModelProfile& p, uint64_t tokens) {
  if (p.bytes_per_token <= 0) throw std::invalid_argument("bytes_per_token must be > 0");
  return p.bytes_per_token * static_cast<double>(tokens);
}

double hbm_fraction(const ModelProfile& p, uint64_t tokens) {
  if (p.hbm_for_kv_bytes <= 0) throw std::invalid_argument("hbm_for_kv_bytes must be > 0");
  return kv_bytes(p, tokens) / p.hbm_for_kv_bytes;
}

ModelProfile load_model_profile(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open model profile: " + file.string());
  nlohmann::json j = nlohmann::json::parse(in);
  ModelProfile p;
  p.name = j.at("name").get<std::string>();
  std::string att = j.value("attention", "gqa");
  if (att == "mha") p.attention = AttentionKind::Mha;
  else if (att == "gqa") p.attention = AttentionKind::Gqa;
  else if (att == "mla") p.attention = AttentionKind::Mla;
  else throw std::runtime_error("unknown attention kind: " + att);
  p.bytes_per_token = j.at("bytes_per_token").get<double>();
  p.hbm_for_kv_bytes = j.at("hbm_for_kv_bytes").get<double>();
  p.gpus_per_instance = j.value("gpus_per_instance", 1);
  if (p.bytes_per_token <= 0 || p.hbm_for_kv_bytes <= 0 || p.gpus_per_instance < 1)
    throw std::runtime_error("model profile values out of range: " + file.string());
  return p;
}

}  // namespace kvsim
