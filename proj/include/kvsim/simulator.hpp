#pragma once

#include <deque>
#include <map>
#include <queue>
#include <string>
#include <unordered_set>
#include <vector>

#include "kvsim/blockstream.hpp"
#include "kvsim/policy.hpp"

namespace kvsim {

struct TierConfig {
  size_t device_blocks = 1;  // >= 1
  size_t host_blocks = 0;    // 0 disables the host tier
  int block_tokens = 16;     // multiple of 4
};

struct CostModel {
  double host_hit = 1.0;  // fetch one block back from host memory
  double miss = 8.0;      // recompute one block
};

// WA residency horizon. Default: tier capacity / trailing insertion rate,
// recomputed at each fit refresh; per_eviction recomputes the rate at every
// eviction instead.
struct LifeRule {
  bool fixed = false;
  double value = 0;  // seconds, when fixed
  bool per_eviction = false;
};

struct SimOptions {
  TierConfig tiers;
  PolicyKind policy = PolicyKind::Lru;
  CostModel cost;
  ExpandMode mode = ExpandMode::AsRecorded;
  uint64_t prefix_seed = kDefaultPrefixSeed;
  double decode_delay_per_token = 0;
  int turn_cap = kTurnCap;
  double fit_refresh = 600;   // seconds between fit snapshots (WA)
  double fit_window = 3600;   // trailing sample window (WA)
  int min_fit_samples = kMinFitSamples;
  LifeRule life;
  bool time_evictions = false;    // wall-clock per-decision timing; off keeps
                                  // reports byte-identical across runs
  bool record_evictions = false;  // capture the device eviction key sequence
};

struct CategoryStat {
  int64_t hits = 0;
  int64_t misses = 0;
};

struct EvictionTiming {
  int64_t count = 0;
  double mean_us = 0, p50_us = 0, p99_us = 0, max_us = 0;
};

struct SimReport {
  std::string policy;
  int64_t total_input_blocks = 0;
  int64_t device_hits = 0, host_hits = 0, misses = 0;
  double hit_ratio = 0;
  double total_cost = 0;
  int64_t device_evictions = 0, host_evictions = 0;
  int64_t migrations = 0;  // host -> device promotions
  int64_t self_evictions = 0;  // victim was touched by the event being served
  int64_t output_inserts = 0;
  int64_t distinct_blocks = 0;
  std::map<std::string, CategoryStat> per_category;
  EvictionTiming timing;
  std::vector<uint64_t> eviction_sequence;  // device tier, when recorded

  std::string to_json_string(int indent = 2) const;
};

// One cache instance stepped event by event. simulate() drives a single
// instance; simulate_routed() fans records out across several.
class Simulator {
 public:
  Simulator(const SimOptions& opts, double start_time);

  // Drains decode completions and fit refreshes due at or before t.
  void advance_to(double t);
  void process_arrival(const RecordBlocks& rb);
  void finish();  // flush remaining completions

  // Leading blocks resident in either tier; read-only, used for routing.
  size_t resident_prefix(const std::vector<BlockKey>& blocks) const;
  int64_t outstanding_work() const { return work_; }

  SimReport take_report();

 private:
  struct PendingCompletion {
    double time;
    uint64_t order;
    RequestCategory category;
    std::vector<BlockKey> outputs;
    bool operator>(const PendingCompletion& o) const {
      return time != o.time ? time > o.time : order > o.order;
    }
  };

  void process_completion(const PendingCompletion& c);
  void admit(uint64_t key, uint32_t offset, RequestCategory cat, double now);
  void place_device(BlockEntry e, double now);
  void evict_device_once(double now);
  double life_for(const Tier& tier, const std::deque<double>& inserts, double now) const;
  void refresh_at(double boundary);
  void append_events(const std::vector<BlockKey>& blocks, double time,
                     RequestCategory cat, bool is_input);

  SimOptions opts_;
  Tier device_, host_;
  std::priority_queue<PendingCompletion, std::vector<PendingCompletion>, std::greater<>>
      pending_;
  uint64_t order_counter_ = 0;
  uint64_t seq_counter_ = 0;

  // WA fit state
  bool wa_ = false;
  std::vector<BlockAccess> events_;
  FitSnapshotPtr snapshot_;
  double next_refresh_ = 0;
  double life_device_ = 0, life_host_ = 0;
  std::deque<double> device_inserts_, host_inserts_;

  std::unordered_set<uint64_t> touched_;
  std::unordered_set<uint64_t> distinct_keys_;
  std::vector<double> evict_us_;
  int64_t work_ = 0;  // cumulative miss blocks, the routing load signal
  SimReport report_;
};

// Records must be time-ordered (build_context guarantees it).
SimReport simulate(const TraceContext& ctx, const SimOptions& opts);

// Longest resident prefix wins; ties go to the least outstanding recompute
// work, then the lowest instance id.
size_t route_request(const std::vector<BlockKey>& input,
                     const std::vector<Simulator*>& instances);

struct RoutedReport {
  SimReport aggregate;
  std::vector<SimReport> per_instance;
  std::vector<size_t> routed_requests;  // per instance
};

RoutedReport simulate_routed(const TraceContext& ctx, const SimOptions& opts,
                             size_t instances);

// Belady-style clairvoyant reference, single tier: evict the block whose next
// reference is farthest away, preferring blocks never referenced again. Hits
// are counted per resident block, so the curve upper-bounds the scan-based
// policies and is itself bounded by the infinite-capacity ideal.
SimReport simulate_clairvoyant(const TraceContext& ctx, const BlockStreamOptions& opts,
                               size_t capacity_blocks);

}  // namespace kvsim
