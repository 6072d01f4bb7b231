#include "kvsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "kvsim/distfit.hpp"

namespace kvsim {

namespace {

SkewCurve make_skew(std::vector<double> weights) {
  SkewCurve c;
  c.total_items = static_cast<int64_t>(weights.size());
  if (weights.empty()) return c;
  std::sort(weights.begin(), weights.end(), std::greater<>());
  double total = 0;
  for (double w : weights) total += w;
  c.total_weight = total;
  c.x.reserve(weights.size());
  c.y.reserve(weights.size());
  double cum = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    c.x.push_back(static_cast<double>(i + 1) / static_cast<double>(weights.size()));
    c.y.push_back(total > 0 ? cum / total : 0.0);
  }
  return c;
}

std::vector<std::string> window_labels(double t0, double t_end, double w, size_t& count) {
  count = std::max<size_t>(1, static_cast<size_t>(std::floor((t_end - t0) / w)) + 1);
  std::vector<std::string> labels;
  labels.reserve(count);
  for (size_t i = 0; i < count; ++i)
    labels.push_back(format_double(t0 + static_cast<double>(i) * w));
  return labels;
}

}  // namespace

double SkewCurve::share_at(double frac) const {
  if (!(frac >= 0) || frac > 1) throw std::invalid_argument("frac must be in [0, 1]");
  if (y.empty() || frac == 0) return 0;
  size_t k = static_cast<size_t>(std::ceil(frac * static_cast<double>(y.size())));
  return y[std::min(y.size(), std::max<size_t>(k, 1)) - 1];
}

HitAccounting ideal_hit_ratio(const TraceContext& ctx, const BlockStreamOptions& opts) {
  auto stream = build_block_stream(ctx, opts);
  HitAccounting acc;
  acc.hits_by_record.assign(ctx.records.size(), 0);
  acc.totals_by_record.assign(ctx.records.size(), 0);
  std::unordered_set<uint64_t> seen;
  seen.reserve(stream.size());

  for (const BlockAccess& ev : stream) {
    if (ev.is_input) {
      const TraceRecord& rec = ctx.records[ev.record_index];
      std::string cat = category_label(ev.category);
      ++acc.total_blocks;
      ++acc.totals_by_category[cat];
      ++acc.totals_by_user[rec.user_id];
      ++acc.totals_by_record[ev.record_index];
      if (seen.count(ev.key)) {
        ++acc.hit_blocks;
        ++acc.hits_by_category[cat];
        ++acc.hits_by_user[rec.user_id];
        ++acc.hits_by_record[ev.record_index];
      }
    }
    seen.insert(ev.key);
  }
  acc.ratio = acc.total_blocks > 0
                  ? static_cast<double>(acc.hit_blocks) / static_cast<double>(acc.total_blocks)
                  : 0.0;
  return acc;
}

SkewCurve reuse_skew(const TraceContext& ctx, const BlockStreamOptions& opts) {
  auto stream = build_block_stream(ctx, opts);
  std::unordered_map<uint64_t, int64_t> reuses;
  std::unordered_set<uint64_t> seen;
  for (const BlockAccess& ev : stream) {
    if (ev.is_input && seen.count(ev.key)) ++reuses[ev.key];
    if (seen.insert(ev.key).second) reuses.emplace(ev.key, 0);
  }
  std::vector<double> weights;
  weights.reserve(reuses.size());
  for (const auto& [key, n] : reuses) weights.push_back(static_cast<double>(n));
  return make_skew(std::move(weights));
}

TypeContribution per_type_contribution(const TraceContext& ctx,
                                       const BlockStreamOptions& opts) {
  auto stream = build_block_stream(ctx, opts);
  TypeContribution out;
  std::unordered_set<uint64_t> seen;
  for (const BlockAccess& ev : stream) {
    if (ev.is_input && seen.count(ev.key)) {
      ++out.total_hits;
      ++out.hits_by_type[to_string(ctx.records[ev.record_index].type)];
      if (ctx.turn_of(ev.record_index) == 1) ++out.single_turn_hits;
      else ++out.multi_turn_hits;
    }
    seen.insert(ev.key);
  }
  return out;
}

CrossUser cross_user_matrix(const TraceContext& ctx, const BlockStreamOptions& opts,
                            size_t top_k) {
  auto stream = build_block_stream(ctx, opts);
  CrossUser out;

  std::unordered_map<std::string, int64_t> request_counts;
  for (const auto& r : ctx.records) ++request_counts[r.user_id];
  std::vector<std::pair<std::string, int64_t>> ranked(request_counts.begin(),
                                                      request_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  std::unordered_map<std::string, size_t> row_of;
  for (size_t i = 0; i < ranked.size(); ++i) row_of.emplace(ranked[i].first, i);

  out.matrix.corner = "consumer\\producer";
  for (const auto& entry : ranked) {
    out.matrix.row_labels.push_back(entry.first);
    out.matrix.col_labels.push_back(entry.first);
  }
  out.matrix.cells.assign(ranked.size(), std::vector<double>(ranked.size(), 0.0));

  std::unordered_map<uint64_t, std::string> producer_of;
  double diag = 0;
  for (const BlockAccess& ev : stream) {
    const std::string& user = ctx.records[ev.record_index].user_id;
    if (ev.is_input) {
      auto it = producer_of.find(ev.key);
      if (it != producer_of.end()) {
        ++out.total_hits;
        if (it->second == user) diag += 1;
        auto r = row_of.find(user);
        auto c = row_of.find(it->second);
        if (r != row_of.end() && c != row_of.end())
          out.matrix.cells[r->second][c->second] += 1;
        continue;  // producer unchanged on reuse
      }
    }
    producer_of.try_emplace(ev.key, user);
  }

  double total_in_matrix = 0;
  for (const auto& row : out.matrix.cells)
    for (double v : row) total_in_matrix += v;
  if (total_in_matrix > 0)
    for (auto& row : out.matrix.cells)
      for (double& v : row) v /= total_in_matrix;
  out.diagonal_mass = out.total_hits > 0 ? diag / static_cast<double>(out.total_hits) : 0;
  return out;
}

UserSkew user_skew(const TraceContext& ctx, const BlockStreamOptions& opts) {
  HitAccounting acc = ideal_hit_ratio(ctx, opts);
  std::map<std::string, int64_t> requests;
  for (const auto& r : ctx.records) ++requests[r.user_id];

  UserSkew out;
  std::vector<double> req, hits;
  for (const auto& [user, n] : requests) {
    req.push_back(static_cast<double>(n));
    auto it = acc.hits_by_user.find(user);
    hits.push_back(it == acc.hits_by_user.end() ? 0.0 : static_cast<double>(it->second));
  }
  out.requests = make_skew(std::move(req));
  out.hits = make_skew(std::move(hits));
  return out;
}

TurnStats turn_distribution(const TraceContext& ctx) {
  TurnStats out;
  std::vector<double> turns;
  std::map<std::string, std::vector<double>> by_user;
  for (const Session& s : ctx.links.sessions) {
    turns.push_back(static_cast<double>(s.max_turn));
    by_user[ctx.records[s.turns.front()].user_id].push_back(
        static_cast<double>(s.max_turn));
  }
  out.turns_per_session = DistributionTable::from_samples(std::move(turns));
  for (const auto& [user, vals] : by_user) {
    UserTurnStat st;
    st.user = user;
    st.sessions = static_cast<int64_t>(vals.size());
    double sum = 0;
    for (double v : vals) sum += v;
    st.mean_turns = sum / static_cast<double>(vals.size());
    double var = 0;
    for (double v : vals) var += (v - st.mean_turns) * (v - st.mean_turns);
    st.stddev_turns = std::sqrt(var / static_cast<double>(vals.size()));
    out.per_user.push_back(std::move(st));
  }
  std::sort(out.per_user.begin(), out.per_user.end(),
            [](const UserTurnStat& a, const UserTurnStat& b) {
              return a.mean_turns != b.mean_turns ? a.mean_turns > b.mean_turns
                                                  : a.user < b.user;
            });
  return out;
}

NextTurnFrequency next_turn_frequency(const TraceContext& ctx, double window_seconds,
                                      int turn_cap) {
  if (!(window_seconds > 0)) throw std::invalid_argument("window must be > 0");
  NextTurnFrequency out;
  if (ctx.records.empty()) return out;

  std::unordered_set<std::string> has_child;
  for (const auto& r : ctx.records)
    if (!r.parent_chat_id.empty()) has_child.insert(r.parent_chat_id);

  double t0 = ctx.records.front().timestamp;
  double t_end = ctx.records.back().timestamp;
  size_t n_windows = 0;
  auto col_labels = window_labels(t0, t_end, window_seconds, n_windows);

  std::map<std::string, int64_t> cat_counts;
  for (size_t i = 0; i < ctx.records.size(); ++i)
    ++cat_counts[category_label(ctx.category_of(i, turn_cap))];
  std::vector<std::pair<std::string, int64_t>> ranked(cat_counts.begin(), cat_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::unordered_map<std::string, size_t> row_of;
  std::vector<std::string> row_labels;
  for (const auto& [label, n] : ranked) {
    row_of.emplace(label, row_labels.size());
    row_labels.push_back(label);
  }

  std::vector<std::vector<double>> with_child(row_labels.size(),
                                              std::vector<double>(n_windows, 0));
  std::vector<std::vector<double>> totals(row_labels.size(),
                                          std::vector<double>(n_windows, 0));
  for (size_t i = 0; i < ctx.records.size(); ++i) {
    const auto& r = ctx.records[i];
    size_t w = static_cast<size_t>((r.timestamp - t0) / window_seconds);
    w = std::min(w, n_windows - 1);
    size_t row = row_of.at(category_label(ctx.category_of(i, turn_cap)));
    totals[row][w] += 1;
    if (has_child.count(r.chat_id)) with_child[row][w] += 1;
  }

  out.rate.corner = out.counts.corner = "category\\window_start";
  out.rate.row_labels = out.counts.row_labels = row_labels;
  out.rate.col_labels = out.counts.col_labels = col_labels;
  out.rate.cells.assign(row_labels.size(), std::vector<double>(n_windows, 0));
  out.counts.cells = totals;
  for (size_t r = 0; r < row_labels.size(); ++r)
    for (size_t c = 0; c < n_windows; ++c)
      out.rate.cells[r][c] = totals[r][c] > 0 ? with_child[r][c] / totals[r][c] : 0.0;
  return out;
}

std::map<std::string, DistributionTable> reuse_time_distribution(
    const TraceContext& ctx, const BlockStreamOptions& opts, ReuseGrouping grouping) {
  auto stream = build_block_stream(ctx, opts);
  SampleSet set = collect_samples(stream, -std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity());
  std::map<std::string, std::vector<double>> grouped;
  for (const ReuseSample& s : set.samples) {
    std::string label;
    switch (grouping) {
      case ReuseGrouping::Overall: label = "all"; break;
      case ReuseGrouping::Category: label = category_label(s.category); break;
      case ReuseGrouping::SingleVsMulti:
        label = s.category.turn_bucket == 1 ? "single-turn" : "multi-turn";
        break;
    }
    grouped[label].push_back(s.interval);
  }
  std::map<std::string, DistributionTable> out;
  for (auto& [label, vals] : grouped)
    out.emplace(label, DistributionTable::from_samples(std::move(vals)));
  return out;
}

HeatmapTable spatial_heatmap(const TraceContext& ctx, const BlockStreamOptions& opts,
                             std::span<const double> offsets_pct,
                             std::span<const double> strides_pct) {
  auto blocks = expand_blocks(ctx, opts);
  const double B = static_cast<double>(opts.block_tokens);

  HeatmapTable table;
  table.corner = "offset_pct\\stride_pct";
  for (double o : offsets_pct) table.row_labels.push_back(format_double(o));
  for (double s : strides_pct) table.col_labels.push_back(format_double(s));
  table.cells.assign(offsets_pct.size(), std::vector<double>(strides_pct.size(), 0));

  for (size_t oi = 0; oi < offsets_pct.size(); ++oi) {
    for (size_t si = 0; si < strides_pct.size(); ++si) {
      const double lo_frac = offsets_pct[oi] / 100.0;
      const double hi_frac = (offsets_pct[oi] + strides_pct[si]) / 100.0;
      std::unordered_set<uint64_t> seen;
      int64_t total = 0, hits = 0;
      for (const RecordBlocks& rb : blocks) {
        const TraceRecord& rec = ctx.records[rb.record_index];
        const double len =
            static_cast<double>(rec.input_tokens + rec.output_tokens);
        for (const BlockKey& bk : rb.input_blocks) {
          ++total;
          if (seen.count(bk.key)) ++hits;
        }
        auto cache_if_inside = [&](const BlockKey& bk) {
          double lo = static_cast<double>(bk.offset) * B;
          double hi = lo + B;
          if (lo >= lo_frac * len - 1e-9 && hi <= hi_frac * len + 1e-9)
            seen.insert(bk.key);
        };
        for (const BlockKey& bk : rb.input_blocks) cache_if_inside(bk);
        for (const BlockKey& bk : rb.output_blocks) cache_if_inside(bk);
      }
      table.cells[oi][si] =
          total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
    }
  }
  return table;
}

namespace {

struct KeyLife {
  double first, last;
  RequestCategory birth_category;
};

std::unordered_map<uint64_t, KeyLife> key_lives(const std::vector<BlockAccess>& stream) {
  std::unordered_map<uint64_t, KeyLife> lives;
  lives.reserve(stream.size() / 2 + 1);
  for (const BlockAccess& ev : stream) {
    auto [it, inserted] = lives.try_emplace(ev.key, KeyLife{ev.time, ev.time, ev.category});
    if (!inserted) it->second.last = std::max(it->second.last, ev.time);
  }
  return lives;
}

}  // namespace

DistributionTable lifespan_distribution(const TraceContext& ctx,
                                        const BlockStreamOptions& opts) {
  auto lives = key_lives(build_block_stream(ctx, opts));
  std::vector<double> spans;
  spans.reserve(lives.size());
  for (const auto& [key, kl] : lives) spans.push_back(kl.last - kl.first);
  return DistributionTable::from_samples(std::move(spans));
}

HeatmapTable lifespan_timeline(const TraceContext& ctx, const BlockStreamOptions& opts,
                               double window_seconds) {
  if (!(window_seconds > 0)) throw std::invalid_argument("window must be > 0");
  auto stream = build_block_stream(ctx, opts);
  auto lives = key_lives(stream);

  HeatmapTable table;
  table.corner = "category\\window_start";
  if (lives.empty()) return table;

  double t0 = stream.front().time;
  double t_end = t0;
  for (const auto& [key, kl] : lives) t_end = std::max(t_end, kl.first);
  size_t n_windows = 0;
  table.col_labels = window_labels(t0, t_end, window_seconds, n_windows);

  std::map<std::string, std::vector<std::pair<double, int64_t>>> agg;  // sum, count
  for (const auto& [key, kl] : lives) {
    auto& rows = agg[category_label(kl.birth_category)];
    if (rows.empty()) rows.assign(n_windows, {0.0, 0});
    size_t w = static_cast<size_t>((kl.first - t0) / window_seconds);
    w = std::min(w, n_windows - 1);
    rows[w].first += kl.last - kl.first;
    rows[w].second += 1;
  }
  for (const auto& [label, rows] : agg) {
    table.row_labels.push_back(label);
    std::vector<double> cells(n_windows, 0);
    for (size_t w = 0; w < n_windows; ++w)
      cells[w] = rows[w].second > 0
                     ? rows[w].first / static_cast<double>(rows[w].second)
                     : 0.0;
    table.cells.push_back(std::move(cells));
  }
  return table;
}

std::vector<KvSizeRow> kv_size_distribution(const TraceContext& ctx,
                                            std::span<const ModelProfile> profiles) {
  std::vector<KvSizeRow> out;
  for (const ModelProfile& p : profiles) {
    std::vector<double> single, multi;
    for (size_t i = 0; i < ctx.records.size(); ++i) {
      const auto& r = ctx.records[i];
      double frac = hbm_fraction(p, r.input_tokens + r.output_tokens);
      (ctx.turn_of(i) == 1 ? single : multi).push_back(frac);
    }
    out.push_back(KvSizeRow{p.name, "single-turn",
                            DistributionTable::from_samples(std::move(single))});
    out.push_back(KvSizeRow{p.name, "multi-turn",
                            DistributionTable::from_samples(std::move(multi))});
  }
  return out;
}

CapacityCurve clairvoyant_capacity_curve(const TraceContext& ctx,
                                         const BlockStreamOptions& opts,
                                         double grid_step) {
  if (!(grid_step > 0)) throw std::invalid_argument("grid_step must be > 0");
  auto stream = build_block_stream(ctx, opts);
  auto lives = key_lives(stream);

  CapacityCurve curve;
  if (lives.empty()) return curve;

  // Delta list: +1 when a block is born, -1 at its last access. A block is
  // live on [first, last), so never-reused blocks are never live.
  std::vector<std::pair<double, int>> deltas;
  deltas.reserve(lives.size() * 2);
  for (const auto& [key, kl] : lives) {
    curve.sum_lifespans += kl.last - kl.first;
    if (kl.last > kl.first) {
      deltas.push_back({kl.first, +1});
      deltas.push_back({kl.last, -1});
    }
  }
  std::sort(deltas.begin(), deltas.end());

  double t0 = stream.front().time;
  double t_end = stream.back().time;
  for (const BlockAccess& ev : stream) {
    t0 = std::min(t0, ev.time);
    t_end = std::max(t_end, ev.time);
  }

  int64_t level = 0;
  size_t di = 0;
  double prev_t = t0;
  double next_grid = t0;
  while (di < deltas.size() || next_grid <= t_end + 1e-12) {
    double event_t = di < deltas.size() ? deltas[di].first
                                        : std::numeric_limits<double>::infinity();
    if (next_grid <= event_t && next_grid <= t_end + 1e-12) {
      // Grid sample: level after all deltas at times <= next_grid.
      while (di < deltas.size() && deltas[di].first <= next_grid) {
        curve.integral_block_seconds +=
            static_cast<double>(level) * (deltas[di].first - prev_t);
        level += deltas[di].second;
        curve.peak = std::max(curve.peak, level);
        prev_t = deltas[di].first;
        ++di;
      }
      curve.times.push_back(next_grid);
      curve.live_blocks.push_back(level);
      curve.peak = std::max(curve.peak, level);
      next_grid += grid_step;
    } else if (di < deltas.size()) {
      curve.integral_block_seconds += static_cast<double>(level) * (event_t - prev_t);
      level += deltas[di].second;
      curve.peak = std::max(curve.peak, level);
      prev_t = event_t;
      ++di;
    } else {
      break;
    }
  }
  return curve;
}

}  // namespace kvsim
