#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "kvsim/blockstream.hpp"
#include "kvsim/record.hpp"
#include "kvsim/tables.hpp"

namespace kvsim {

// Infinite-capacity hit accounting: an input block hits iff its PrefixKey
// already appeared in an earlier request's input-or-output expansion.
struct HitAccounting {
  int64_t total_blocks = 0;
  int64_t hit_blocks = 0;
  double ratio = 0;
  std::map<std::string, int64_t> hits_by_category, totals_by_category;
  std::map<std::string, int64_t> hits_by_user, totals_by_user;
  std::vector<int64_t> hits_by_record, totals_by_record;
};

HitAccounting ideal_hit_ratio(const TraceContext& ctx, const BlockStreamOptions& opts);

// x: fraction of items (sorted by descending weight), y: cumulative weight share.
struct SkewCurve {
  std::vector<double> x, y;  // same length, x increasing to 1
  int64_t total_items = 0;
  double total_weight = 0;

  // Weight share captured by the top `frac` of items.
  double share_at(double frac) const;
};

// Blocks ranked by how many hits they served.
SkewCurve reuse_skew(const TraceContext& ctx, const BlockStreamOptions& opts);

struct TypeContribution {
  std::map<std::string, int64_t> hits_by_type;  // type of the hitting request
  int64_t single_turn_hits = 0, multi_turn_hits = 0, total_hits = 0;
};

TypeContribution per_type_contribution(const TraceContext& ctx,
                                       const BlockStreamOptions& opts);

struct CrossUser {
  HeatmapTable matrix;  // rows: consumer, cols: producer; cells sum to 1
  double diagonal_mass = 0;  // self-hit share over all users, not just top k
  int64_t total_hits = 0;
};

CrossUser cross_user_matrix(const TraceContext& ctx, const BlockStreamOptions& opts,
                            size_t top_k);

struct UserSkew {
  SkewCurve requests;  // requests per user
  SkewCurve hits;      // hits per consuming user
};

UserSkew user_skew(const TraceContext& ctx, const BlockStreamOptions& opts);

struct UserTurnStat {
  std::string user;
  int64_t sessions = 0;
  double mean_turns = 0, stddev_turns = 0;
};

struct TurnStats {
  DistributionTable turns_per_session;
  std::vector<UserTurnStat> per_user;  // sorted by mean descending
};

TurnStats turn_distribution(const TraceContext& ctx);

struct NextTurnFrequency {
  HeatmapTable rate;    // fraction of requests later answered by a next turn
  HeatmapTable counts;  // request counts behind each cell
};

// Rows: categories by descending request count. Cols: time windows.
NextTurnFrequency next_turn_frequency(const TraceContext& ctx, double window_seconds,
                                      int turn_cap = kTurnCap);

enum class ReuseGrouping { Overall, Category, SingleVsMulti };

// Reuse intervals between consecutive accesses to the same block, grouped.
std::map<std::string, DistributionTable> reuse_time_distribution(
    const TraceContext& ctx, const BlockStreamOptions& opts, ReuseGrouping grouping);

// Cell (offset, stride): ideal hit ratio when each request caches only blocks
// fully inside [offset%, offset%+stride%) of its total token length. Hits are
// key-presence matches against that restricted cache.
HeatmapTable spatial_heatmap(const TraceContext& ctx, const BlockStreamOptions& opts,
                             std::span<const double> offsets_pct,
                             std::span<const double> strides_pct);

// Per-block time between first and last access (0 for never-reused blocks).
DistributionTable lifespan_distribution(const TraceContext& ctx,
                                        const BlockStreamOptions& opts);

// Mean lifespan of blocks born in each window, per birth category.
HeatmapTable lifespan_timeline(const TraceContext& ctx, const BlockStreamOptions& opts,
                               double window_seconds);

struct KvSizeRow {
  std::string profile;
  std::string klass;  // "single-turn" / "multi-turn"
  DistributionTable hbm_fraction;  // per-request KV size / HBM budget
};

std::vector<KvSizeRow> kv_size_distribution(const TraceContext& ctx,
                                            std::span<const ModelProfile> profiles);

// Working set of a clairvoyant cache that drops each block right after its
// last access: blocks with first_access <= t < last_access.
struct CapacityCurve {
  std::vector<double> times;
  std::vector<int64_t> live_blocks;
  int64_t peak = 0;
  double integral_block_seconds = 0;  // equals sum_lifespans by construction
  double sum_lifespans = 0;
};

CapacityCurve clairvoyant_capacity_curve(const TraceContext& ctx,
                                         const BlockStreamOptions& opts,
                                         double grid_step);

}  // namespace kvsim
