#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>

#include "kvsim/distfit.hpp"
#include "kvsim/types.hpp"

namespace kvsim {

enum class PolicyKind { Lru, Fifo, Lfu, S3Fifo, Gdfs, Wa };

const char* to_string(PolicyKind k);
std::optional<PolicyKind> policy_from_string(std::string_view s);

struct BlockEntry {
  uint64_t key = 0;
  RequestCategory category;  // follows the last accessing request
  uint32_t offset = 0;       // block index within the producing request
  double insert_time = 0;    // first entry into the cache system, kept across migrations
  double last_access = 0;
  uint64_t frequency = 1;    // accesses including the insert
  uint64_t seq = 0;          // global insertion order, final tie-break
};

struct EvictContext {
  double now = 0;
  const FitSnapshot* fits = nullptr;  // WA only
  double life = 1.0;                  // WA residency horizon, seconds
};

// Per-tier eviction state. choose_victim may reorganize internal queues
// (S3-FIFO promotions, second chances) but removes at most the returned key;
// the tier follows up with on_remove, which must tolerate an already-forgotten
// key.
class TierPolicy {
 public:
  virtual ~TierPolicy() = default;
  virtual void on_insert(const BlockEntry& e) = 0;
  virtual void on_access(const BlockEntry& before, const BlockEntry& after) = 0;
  virtual void on_remove(const BlockEntry& e) = 0;
  virtual uint64_t choose_victim(const EvictContext& ctx) = 0;
};

// miss_cost feeds the GDFS priority; capacity feeds the S3-FIFO queue split.
std::unique_ptr<TierPolicy> make_policy(PolicyKind kind, size_t capacity, double miss_cost);

// Clock + Frequency * Cost / Size.
double gdfs_priority(double clock, uint64_t frequency, double cost, double size);

// Eviction rank of a WA-managed block: (reuse probability within the horizon,
// -offset). Unfitted categories rank by negated age, which is always <= 0 and
// therefore below every fitted probability; with nothing fitted this is LRU.
double wa_priority(const BlockEntry& e, const EvictContext& ctx);

// One cache level: hash map of resident blocks plus the policy's ordering.
class Tier {
 public:
  Tier(size_t capacity, PolicyKind kind, double miss_cost)
      : capacity_(capacity), policy_(make_policy(kind, capacity, miss_cost)) {}

  size_t size() const { return map_.size(); }
  size_t capacity() const { return capacity_; }
  bool full() const { return map_.size() >= capacity_; }
  bool contains(uint64_t key) const { return map_.count(key) != 0; }
  const BlockEntry* find(uint64_t key) const {
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }

  void insert(BlockEntry e);  // key absent, size < capacity
  BlockEntry take(uint64_t key);
  void touch(uint64_t key, double now, RequestCategory category);
  uint64_t choose_victim(const EvictContext& ctx) { return policy_->choose_victim(ctx); }

 private:
  size_t capacity_;
  std::unordered_map<uint64_t, BlockEntry> map_;
  std::unique_ptr<TierPolicy> policy_;
};

}  // namespace kvsim
