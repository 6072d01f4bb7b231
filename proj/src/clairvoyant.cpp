#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "kvsim/simulator.hpp"

namespace kvsim {

namespace {
constexpr int64_t kNever = std::numeric_limits<int64_t>::max();
}

SimReport simulate_clairvoyant(const TraceContext& ctx, const BlockStreamOptions& opts,
                               size_t capacity_blocks) {
  if (capacity_blocks < 1) throw std::invalid_argument("capacity must be >= 1");
  auto stream = build_block_stream(ctx, opts);

  // Future references per key (inputs and outputs), in stream position order.
  // Evicting the farthest next reference minimizes misses on a fixed stream,
  // so the resident-block hit count upper-bounds every online policy.
  struct KeyRefs {
    std::vector<int64_t> positions;
    size_t cursor = 0;
  };
  std::unordered_map<uint64_t, KeyRefs> refs;
  for (size_t i = 0; i < stream.size(); ++i)
    refs[stream[i].key].positions.push_back(static_cast<int64_t>(i));

  struct Entry {
    int64_t next_use;
    uint32_t offset;
    uint64_t age;  // UINT64_MAX - insertion seq, so older sorts larger
  };
  std::unordered_map<uint64_t, Entry> cache;
  // Max-heap: farthest next use evicted first (never-used = kNever tops it),
  // then larger offset, then older insertion. Entries are lazily invalidated.
  using HeapItem = std::tuple<int64_t, uint32_t, uint64_t, uint64_t>;
  std::priority_queue<HeapItem> heap;
  uint64_t seq = 0;

  SimReport report;
  report.policy = "clairvoyant";
  std::unordered_set<uint64_t> distinct;

  auto evict_one = [&]() {
    while (true) {
      auto [next_use, offset, age, key] = heap.top();
      heap.pop();
      auto it = cache.find(key);
      if (it == cache.end() || it->second.next_use != next_use ||
          it->second.age != age)
        continue;  // stale
      cache.erase(it);
      ++report.device_evictions;
      return;
    }
  };
  auto push_entry = [&](uint64_t key, const Entry& e) {
    heap.push(HeapItem{e.next_use, e.offset, e.age, key});
  };

  for (size_t pos = 0; pos < stream.size(); ++pos) {
    const BlockAccess& ev = stream[pos];
    KeyRefs& kr = refs[ev.key];
    while (kr.cursor < kr.positions.size() &&
           kr.positions[kr.cursor] <= static_cast<int64_t>(pos))
      ++kr.cursor;
    int64_t next = kr.cursor < kr.positions.size() ? kr.positions[kr.cursor] : kNever;

    auto it = cache.find(ev.key);
    bool present = it != cache.end();
    auto touch = [&]() {
      it->second.next_use = next;
      push_entry(ev.key, it->second);
    };
    auto insert = [&]() {
      if (cache.size() >= capacity_blocks) evict_one();
      Entry e{next, ev.offset, UINT64_MAX - seq++};
      cache.emplace(ev.key, e);
      push_entry(ev.key, e);
      distinct.insert(ev.key);
    };

    if (ev.is_input) {
      ++report.total_input_blocks;
      auto& cs = report.per_category[category_label(ev.category)];
      if (present) {
        ++report.device_hits;
        ++cs.hits;
        touch();
      } else {
        ++report.misses;
        ++cs.misses;
        insert();
      }
    } else {
      ++report.output_inserts;
      if (present) touch(); else insert();
    }
  }

  report.hit_ratio = report.total_input_blocks > 0
                         ? static_cast<double>(report.device_hits) /
                               static_cast<double>(report.total_input_blocks)
                         : 0.0;
  report.distinct_blocks = static_cast<int64_t>(distinct.size());
  return report;
}

}  // namespace kvsim
