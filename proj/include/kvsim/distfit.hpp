#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kvsim/blockstream.hpp"
#include "kvsim/types.hpp"

namespace kvsim {

// Below this many reuse intervals a category stays unfitted and the consumer
// falls back to recency ordering.
inline constexpr int kMinFitSamples = 30;
// Degenerate fits (all intervals zero) clamp here instead of diverging.
inline constexpr double kLambdaMax = 1e6;

struct ReuseSample {
  RequestCategory category;  // category the block carried while waiting
  double interval = 0;       // seconds between consecutive accesses
  double observed_at = 0;    // time of the second access
};

struct CategoryTotals {
  int64_t total_blocks = 0;   // distinct blocks, attributed to first-access category
  int64_t reused_blocks = 0;  // of those, accessed at least twice in the window
};

struct SampleSet {
  std::vector<ReuseSample> samples;
  std::map<RequestCategory, CategoryTotals> totals;
};

// Scans accesses with window_start <= time < window_end. Emits one sample per
// repeated PrefixKey; sample count == sum over keys of (accesses - 1).
SampleSet collect_samples(std::span<const BlockAccess> accesses, double window_start,
                          double window_end);

struct CategoryFit {
  RequestCategory category;
  bool fitted = false;
  double lambda = 0;          // 1 / mean interval, exponential rate
  double reuse_fraction = 0;  // p: reused blocks / total blocks
  int64_t sample_count = 0;
  double window_start = 0, window_end = 0;
};

CategoryFit fit_exponential(RequestCategory category, std::span<const double> intervals,
                            CategoryTotals totals, double window_start, double window_end,
                            int min_samples = kMinFitSamples);

// P(block is reused inside (t, t + life]) given it has sat idle for t seconds:
// p * (exp(-lambda t) - exp(-lambda (t + life))). nullopt when unfitted.
std::optional<double> reuse_probability(const CategoryFit& fit, double t, double life);

// Immutable once published; policies hold a shared_ptr and never see a
// half-written refresh.
struct FitSnapshot {
  double time = 0;
  std::map<RequestCategory, CategoryFit> fits;

  const CategoryFit* find(RequestCategory c) const {
    auto it = fits.find(c);
    return it == fits.end() ? nullptr : &it->second;
  }
};

using FitSnapshotPtr = std::shared_ptr<const FitSnapshot>;

FitSnapshotPtr fit_window(std::span<const BlockAccess> accesses, double window_start,
                          double window_end, int min_samples = kMinFitSamples);

// One snapshot per refresh boundary in [start, end], each fitted over the
// trailing window [boundary - window_length, boundary].
std::vector<FitSnapshotPtr> refresh_fits(std::span<const BlockAccess> accesses,
                                         double start, double end, double refresh_period,
                                         double window_length,
                                         int min_samples = kMinFitSamples);

// Two-sample Kolmogorov-Smirnov distance, max |F1 - F2|.
double ks_distance(std::span<const double> a, std::span<const double> b);

// 5% significance threshold: 1.358 * sqrt((n+m)/(n*m)).
double ks_critical_5(size_t n, size_t m);

struct StabilityWindow {
  std::string label;
  double start = 0, end = 0;
};

struct StabilityEntry {
  RequestCategory category;
  std::string window_a, window_b;
  int64_t n_a = 0, n_b = 0;
  double ks = 0, ks_critical = 0;
  double lambda_a = 0, lambda_b = 0;  // 0 when that side is unfitted
  double lambda_diff = 0;
};

// Pairwise window comparison of reuse-interval distributions per category.
std::vector<StabilityEntry> fit_stability_report(std::span<const BlockAccess> accesses,
                                                 std::span<const StabilityWindow> windows,
                                                 int min_samples = kMinFitSamples);

}  // namespace kvsim
