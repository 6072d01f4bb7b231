#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace kvsim {

enum class RequestType : uint8_t { Text = 0, File, Multimodal, Search, Api };

inline constexpr int kRequestTypeCount = 5;

// Turn numbers at or above the cap share one bucket.
inline constexpr int kTurnCap = 8;

const char* to_string(RequestType t);
std::optional<RequestType> request_type_from_string(std::string_view s);

// A workload category: request type crossed with the (capped) turn number.
struct RequestCategory {
  RequestType type = RequestType::Text;
  int turn_bucket = 1;  // 1-based; kTurnCap means "cap or deeper"

  friend bool operator==(const RequestCategory&, const RequestCategory&) = default;
  friend auto operator<=>(const RequestCategory&, const RequestCategory&) = default;
};

RequestCategory make_category(RequestType type, int turn_number, int turn_cap = kTurnCap);

// "text-3", "api-1", ... bucket kTurnCap renders as "text-8".
std::string category_label(RequestCategory c);

}  // namespace kvsim

template <>
struct std::hash<kvsim::RequestCategory> {
  size_t operator()(const kvsim::RequestCategory& c) const noexcept {
    return static_cast<size_t>(c.type) * 31u + static_cast<size_t>(c.turn_bucket);
  }
};
