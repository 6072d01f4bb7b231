#include "kvsim/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace kvsim {

const char* to_string(RequestType t) {
  switch (t) {
    case RequestType::Text: return "text";
    case RequestType::File: return "file";
    case RequestType::Multimodal: return "multimodal";
    case RequestType::Search: return "search";
    case RequestType::Api: return "api";
  }
  return "text";
}

std::optional<RequestType> request_type_from_string(std::string_view s) {
  if (s == "text") return RequestType::Text;
  if (s == "file") return RequestType::File;
  if (s == "multimodal") return RequestType::Multimodal;
  if (s == "search") return RequestType::Search;
  if (s == "api") return RequestType::Api;
  return std::nullopt;
}

RequestCategory make_category(RequestType type, int turn_number, int turn_cap) {
  if (turn_number < 1) throw std::invalid_argument("turn_number must be >= 1");
  if (turn_cap < 1) throw std::invalid_argument("turn_cap must be >= 1");
  return RequestCategory{type, std::min(turn_number, turn_cap)};
}

std::string category_label(RequestCategory c) {
  return std::string(to_string(c.type)) + "-" + std::to_string(c.turn_bucket);
}

}  // namespace kvsim
