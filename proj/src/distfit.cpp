#include "kvsim/distfit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace kvsim {

SampleSet collect_samples(std::span<const BlockAccess> accesses, double window_start,
                          double window_end) {
  SampleSet out;
  struct KeyState {
    double last_time;
    RequestCategory last_category;   // owns the next interval
    RequestCategory first_category;  // owns the block for the reuse fraction
    bool reused;
  };
  std::unordered_map<uint64_t, KeyState> state;
  state.reserve(accesses.size());

  for (const BlockAccess& a : accesses) {
    if (a.time < window_start || a.time >= window_end) continue;
    auto [it, inserted] = state.try_emplace(
        a.key, KeyState{a.time, a.category, a.category, false});
    if (!inserted) {
      out.samples.push_back(
          ReuseSample{it->second.last_category, a.time - it->second.last_time, a.time});
      it->second.reused = true;
      it->second.last_time = a.time;
      it->second.last_category = a.category;
    }
  }
  for (const auto& [key, ks] : state) {
    auto& tot = out.totals[ks.first_category];
    ++tot.total_blocks;
    if (ks.reused) ++tot.reused_blocks;
  }
  return out;
}

CategoryFit fit_exponential(RequestCategory category, std::span<const double> intervals,
                            CategoryTotals totals, double window_start, double window_end,
                            int min_samples) {
  CategoryFit fit;
  fit.category = category;
  fit.sample_count = static_cast<int64_t>(intervals.size());
  fit.window_start = window_start;
  fit.window_end = window_end;
  if (fit.sample_count < min_samples) return fit;

  double sum = 0;
  for (double v : intervals) {
    if (v < 0) throw std::invalid_argument("negative reuse interval");
    sum += v;
  }
  double mean = sum / static_cast<double>(intervals.size());
  fit.lambda = mean > 0 ? std::min(1.0 / mean, kLambdaMax) : kLambdaMax;
  fit.reuse_fraction = totals.total_blocks > 0
                           ? static_cast<double>(totals.reused_blocks) /
                                 static_cast<double>(totals.total_blocks)
                           : 0.0;
  fit.fitted = true;
  return fit;
}

std::optional<double> reuse_probability(const CategoryFit& fit, double t, double life) {
  if (!fit.fitted) return std::nullopt;
  if (t < 0) throw std::invalid_argument("t must be >= 0");
  if (!(life > 0)) throw std::invalid_argument("life must be > 0");
  return fit.reuse_fraction *
         (std::exp(-fit.lambda * t) - std::exp(-fit.lambda * (t + life)));
}

FitSnapshotPtr fit_window(std::span<const BlockAccess> accesses, double window_start,
                          double window_end, int min_samples) {
  SampleSet set = collect_samples(accesses, window_start, window_end);
  std::map<RequestCategory, std::vector<double>> intervals;
  for (const ReuseSample& s : set.samples) intervals[s.category].push_back(s.interval);

  auto snap = std::make_shared<FitSnapshot>();
  snap->time = window_end;
  for (const auto& [cat, iv] : intervals) {
    CategoryTotals tot;
    if (auto it = set.totals.find(cat); it != set.totals.end()) tot = it->second;
    snap->fits.emplace(cat, fit_exponential(cat, iv, tot, window_start, window_end,
                                            min_samples));
  }
  return snap;
}

std::vector<FitSnapshotPtr> refresh_fits(std::span<const BlockAccess> accesses,
                                         double start, double end, double refresh_period,
                                         double window_length, int min_samples) {
  if (!(refresh_period > 0)) throw std::invalid_argument("refresh_period must be > 0");
  if (!(window_length > 0)) throw std::invalid_argument("window_length must be > 0");
  std::vector<FitSnapshotPtr> out;
  for (double t = start + refresh_period; t <= end + 1e-9; t += refresh_period)
    out.push_back(fit_window(accesses, t - window_length, t, min_samples));
  return out;
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double d = 0;
  size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    // step past every sample at x on both sides before measuring, otherwise
    // tied values inflate the distance mid-jump
    double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    double fa = static_cast<double>(i) / static_cast<double>(sa.size());
    double fb = static_cast<double>(j) / static_cast<double>(sb.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

double ks_critical_5(size_t n, size_t m) {
  return 1.358 * std::sqrt(static_cast<double>(n + m) /
                           (static_cast<double>(n) * static_cast<double>(m)));
}

std::vector<StabilityEntry> fit_stability_report(std::span<const BlockAccess> accesses,
                                                 std::span<const StabilityWindow> windows,
                                                 int min_samples) {
  struct WindowData {
    std::map<RequestCategory, std::vector<double>> intervals;
    FitSnapshotPtr snap;
  };
  std::vector<WindowData> data;
  for (const auto& w : windows) {
    WindowData wd;
    SampleSet set = collect_samples(accesses, w.start, w.end);
    for (const ReuseSample& s : set.samples) wd.intervals[s.category].push_back(s.interval);
    wd.snap = fit_window(accesses, w.start, w.end, min_samples);
    data.push_back(std::move(wd));
  }

  std::vector<StabilityEntry> out;
  for (size_t i = 0; i < data.size(); ++i) {
    for (size_t j = i + 1; j < data.size(); ++j) {
      for (const auto& [cat, iva] : data[i].intervals) {
        auto itb = data[j].intervals.find(cat);
        if (itb == data[j].intervals.end()) continue;
        const auto& ivb = itb->second;
        StabilityEntry e;
        e.category = cat;
        e.window_a = windows[i].label;
        e.window_b = windows[j].label;
        e.n_a = static_cast<int64_t>(iva.size());
        e.n_b = static_cast<int64_t>(ivb.size());
        e.ks = ks_distance(iva, ivb);
        e.ks_critical = ks_critical_5(iva.size(), ivb.size());
        if (const CategoryFit* f = data[i].snap->find(cat); f && f->fitted) e.lambda_a = f->lambda;
        if (const CategoryFit* f = data[j].snap->find(cat); f && f->fitted) e.lambda_b = f->lambda;
        e.lambda_diff = std::abs(e.lambda_a - e.lambda_b);
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

}  // namespace kvsim
