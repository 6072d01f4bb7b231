#include "kvsim/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace kvsim {

namespace {

void validate(const SimOptions& o) {
  if (o.tiers.device_blocks < 1)
    throw std::invalid_argument("device_blocks must be >= 1");
  if (o.tiers.block_tokens < 4 || o.tiers.block_tokens % 4 != 0)
    throw std::invalid_argument("block_tokens must be a positive multiple of 4");
  if (o.cost.host_hit < 0 || o.cost.miss < o.cost.host_hit)
    throw std::invalid_argument("cost model requires miss >= host_hit >= 0");
  if (!(o.fit_refresh > 0) || !(o.fit_window > 0))
    throw std::invalid_argument("fit refresh/window must be > 0");
  if (o.life.fixed && !(o.life.value > 0))
    throw std::invalid_argument("fixed life must be > 0");
}

// Count of sorted times inside (now - window, now].
int64_t count_in_window(const std::deque<double>& times, double now, double window) {
  auto lo = std::upper_bound(times.begin(), times.end(), now - window);
  auto hi = std::upper_bound(times.begin(), times.end(), now);
  return hi - lo;
}

void prune_before(std::deque<double>& times, double cutoff) {
  while (!times.empty() && times.front() < cutoff) times.pop_front();
}

EvictionTiming summarize_us(std::vector<double>& samples) {
  EvictionTiming t;
  t.count = static_cast<int64_t>(samples.size());
  if (samples.empty()) return t;
  double sum = 0;
  for (double v : samples) sum += v;
  t.mean_us = sum / static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double q) {
    size_t i = static_cast<size_t>(std::ceil(q * static_cast<double>(samples.size())));
    return samples[std::min(samples.size() - 1, i == 0 ? 0 : i - 1)];
  };
  t.p50_us = rank(0.50);
  t.p99_us = rank(0.99);
  t.max_us = samples.back();
  return t;
}

}  // namespace

Simulator::Simulator(const SimOptions& opts, double start_time)
    : opts_(opts),
      device_(opts.tiers.device_blocks, opts.policy, opts.cost.miss),
      host_(std::max<size_t>(opts.tiers.host_blocks, 1), opts.policy, opts.cost.miss) {
  validate(opts_);
  wa_ = opts_.policy == PolicyKind::Wa;
  next_refresh_ = start_time + opts_.fit_refresh;
  life_device_ = life_host_ = opts_.life.fixed ? opts_.life.value : opts_.fit_window;
  report_.policy = to_string(opts_.policy);
}

void Simulator::append_events(const std::vector<BlockKey>& blocks, double time,
                              RequestCategory cat, bool is_input) {
  for (const BlockKey& bk : blocks)
    events_.push_back(BlockAccess{bk.key, time, cat, bk.offset, is_input, 0});
}

double Simulator::life_for(const Tier& tier, const std::deque<double>& inserts,
                           double now) const {
  if (opts_.life.fixed) return opts_.life.value;
  int64_t n = count_in_window(inserts, now, opts_.fit_window);
  if (n <= 0) return opts_.fit_window;
  double rate = static_cast<double>(n) / opts_.fit_window;
  return std::clamp(static_cast<double>(tier.capacity()) / rate, 1e-3, 1e9);
}

void Simulator::refresh_at(double boundary) {
  snapshot_ = fit_window(events_, boundary - opts_.fit_window, boundary,
                         opts_.min_fit_samples);
  if (!opts_.life.per_eviction) {
    life_device_ = life_for(device_, device_inserts_, boundary);
    life_host_ = life_for(host_, host_inserts_, boundary);
  }
  // Anything older than the window can never enter a later snapshot.
  double cutoff = boundary - opts_.fit_window;
  prune_before(device_inserts_, cutoff);
  prune_before(host_inserts_, cutoff);
  if (!events_.empty() && events_.front().time < cutoff) {
    auto it = std::find_if(events_.begin(), events_.end(),
                           [&](const BlockAccess& a) { return a.time >= cutoff; });
    events_.erase(events_.begin(), it);
  }
}

void Simulator::advance_to(double t) {
  while (!pending_.empty() && pending_.top().time <= t) {
    PendingCompletion c = pending_.top();
    pending_.pop();
    process_completion(c);
  }
  if (wa_)
    while (next_refresh_ <= t) {
      refresh_at(next_refresh_);
      next_refresh_ += opts_.fit_refresh;
    }
}

void Simulator::evict_device_once(double now) {
  EvictContext ctx{now, snapshot_.get(),
                   opts_.life.per_eviction ? life_for(device_, device_inserts_, now)
                                           : life_device_};
  uint64_t victim;
  if (opts_.time_evictions) {
    auto t0 = std::chrono::steady_clock::now();
    victim = device_.choose_victim(ctx);
    auto t1 = std::chrono::steady_clock::now();
    evict_us_.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  } else {
    victim = device_.choose_victim(ctx);
  }
  BlockEntry e = device_.take(victim);
  ++report_.device_evictions;
  if (opts_.record_evictions) report_.eviction_sequence.push_back(victim);
  if (touched_.count(victim)) ++report_.self_evictions;

  if (opts_.tiers.host_blocks == 0) return;
  while (host_.size() >= opts_.tiers.host_blocks) {
    EvictContext hctx{now, snapshot_.get(),
                      opts_.life.per_eviction ? life_for(host_, host_inserts_, now)
                                              : life_host_};
    host_.take(host_.choose_victim(hctx));
    ++report_.host_evictions;
  }
  host_.insert(e);
  host_inserts_.push_back(now);
}

void Simulator::place_device(BlockEntry e, double now) {
  while (device_.full()) evict_device_once(now);
  device_.insert(std::move(e));
  device_inserts_.push_back(now);
}

void Simulator::admit(uint64_t key, uint32_t offset, RequestCategory cat, double now) {
  touched_.insert(key);
  if (device_.contains(key)) {
    device_.touch(key, now, cat);
    return;
  }
  if (host_.contains(key)) {  // resident below: promote rather than duplicate
    BlockEntry e = host_.take(key);
    e.last_access = now;
    e.category = cat;
    ++e.frequency;
    place_device(std::move(e), now);
    return;
  }
  distinct_keys_.insert(key);
  place_device(BlockEntry{key, cat, offset, now, now, 1, seq_counter_++}, now);
}

void Simulator::process_arrival(const RecordBlocks& rb) {
  const double now = rb.arrival;
  touched_.clear();
  if (wa_) append_events(rb.input_blocks, now, rb.category, true);

  auto& cat_stat = report_.per_category[category_label(rb.category)];
  size_t i = 0;
  for (; i < rb.input_blocks.size(); ++i) {
    const BlockKey& bk = rb.input_blocks[i];
    if (device_.contains(bk.key)) {
      device_.touch(bk.key, now, rb.category);
      touched_.insert(bk.key);
      ++report_.device_hits;
    } else if (host_.contains(bk.key)) {
      BlockEntry e = host_.take(bk.key);
      e.last_access = now;
      e.category = rb.category;
      ++e.frequency;
      ++report_.host_hits;
      ++report_.migrations;
      touched_.insert(bk.key);
      place_device(std::move(e), now);
    } else {
      break;
    }
  }
  cat_stat.hits += static_cast<int64_t>(i);
  const int64_t misses = static_cast<int64_t>(rb.input_blocks.size() - i);
  cat_stat.misses += misses;
  report_.misses += misses;
  work_ += misses;
  for (; i < rb.input_blocks.size(); ++i)
    admit(rb.input_blocks[i].key, rb.input_blocks[i].offset, rb.category, now);
  report_.total_input_blocks += static_cast<int64_t>(rb.input_blocks.size());

  pending_.push(PendingCompletion{rb.completion, order_counter_++, rb.category,
                                  rb.output_blocks});
}

void Simulator::process_completion(const PendingCompletion& c) {
  touched_.clear();
  if (wa_) append_events(c.outputs, c.time, c.category, false);
  for (const BlockKey& bk : c.outputs) {
    admit(bk.key, bk.offset, c.category, c.time);
    ++report_.output_inserts;
  }
}

void Simulator::finish() {
  while (!pending_.empty()) {
    PendingCompletion c = pending_.top();
    pending_.pop();
    process_completion(c);
  }
}

size_t Simulator::resident_prefix(const std::vector<BlockKey>& blocks) const {
  size_t n = 0;
  for (const BlockKey& bk : blocks) {
    if (!device_.contains(bk.key) && !host_.contains(bk.key)) break;
    ++n;
  }
  return n;
}

SimReport Simulator::take_report() {
  report_.hit_ratio =
      report_.total_input_blocks > 0
          ? static_cast<double>(report_.device_hits + report_.host_hits) /
                static_cast<double>(report_.total_input_blocks)
          : 0.0;
  report_.total_cost = opts_.cost.host_hit * static_cast<double>(report_.host_hits) +
                       opts_.cost.miss * static_cast<double>(report_.misses);
  report_.distinct_blocks = static_cast<int64_t>(distinct_keys_.size());
  report_.timing = summarize_us(evict_us_);
  return report_;
}

SimReport simulate(const TraceContext& ctx, const SimOptions& opts) {
  BlockStreamOptions so;
  so.block_tokens = opts.tiers.block_tokens;
  so.mode = opts.mode;
  so.prefix_seed = opts.prefix_seed;
  so.decode_delay_per_token = opts.decode_delay_per_token;
  so.turn_cap = opts.turn_cap;
  auto blocks = expand_blocks(ctx, so);

  Simulator sim(opts, blocks.empty() ? 0.0 : blocks.front().arrival);
  for (const RecordBlocks& rb : blocks) {
    sim.advance_to(rb.arrival);
    sim.process_arrival(rb);
  }
  sim.finish();
  return sim.take_report();
}

size_t route_request(const std::vector<BlockKey>& input,
                     const std::vector<Simulator*>& instances) {
  if (instances.empty()) throw std::invalid_argument("no instances");
  size_t best = 0;
  size_t best_prefix = instances[0]->resident_prefix(input);
  int64_t best_work = instances[0]->outstanding_work();
  for (size_t i = 1; i < instances.size(); ++i) {
    size_t p = instances[i]->resident_prefix(input);
    int64_t w = instances[i]->outstanding_work();
    if (p > best_prefix || (p == best_prefix && w < best_work)) {
      best = i;
      best_prefix = p;
      best_work = w;
    }
  }
  return best;
}

RoutedReport simulate_routed(const TraceContext& ctx, const SimOptions& opts,
                             size_t instances) {
  if (instances < 1) throw std::invalid_argument("instances must be >= 1");
  BlockStreamOptions so;
  so.block_tokens = opts.tiers.block_tokens;
  so.mode = opts.mode;
  so.prefix_seed = opts.prefix_seed;
  so.decode_delay_per_token = opts.decode_delay_per_token;
  so.turn_cap = opts.turn_cap;
  auto blocks = expand_blocks(ctx, so);

  double t0 = blocks.empty() ? 0.0 : blocks.front().arrival;
  std::vector<std::unique_ptr<Simulator>> sims;
  std::vector<Simulator*> ptrs;
  for (size_t i = 0; i < instances; ++i) {
    sims.push_back(std::make_unique<Simulator>(opts, t0));
    ptrs.push_back(sims.back().get());
  }

  RoutedReport out;
  out.routed_requests.assign(instances, 0);
  for (const RecordBlocks& rb : blocks) {
    for (auto& s : sims) s->advance_to(rb.arrival);
    size_t k = route_request(rb.input_blocks, ptrs);
    ++out.routed_requests[k];
    sims[k]->process_arrival(rb);
  }
  for (auto& s : sims) s->finish();

  out.aggregate.policy = to_string(opts.policy);
  for (auto& s : sims) {
    SimReport r = s->take_report();
    out.aggregate.total_input_blocks += r.total_input_blocks;
    out.aggregate.device_hits += r.device_hits;
    out.aggregate.host_hits += r.host_hits;
    out.aggregate.misses += r.misses;
    out.aggregate.total_cost += r.total_cost;
    out.aggregate.device_evictions += r.device_evictions;
    out.aggregate.host_evictions += r.host_evictions;
    out.aggregate.migrations += r.migrations;
    out.aggregate.self_evictions += r.self_evictions;
    out.aggregate.output_inserts += r.output_inserts;
    out.aggregate.distinct_blocks += r.distinct_blocks;
    for (const auto& [label, cs] : r.per_category) {
      auto& agg = out.aggregate.per_category[label];
      agg.hits += cs.hits;
      agg.misses += cs.misses;
    }
    out.per_instance.push_back(std::move(r));
  }
  out.aggregate.hit_ratio =
      out.aggregate.total_input_blocks > 0
          ? static_cast<double>(out.aggregate.device_hits + out.aggregate.host_hits) /
                static_cast<double>(out.aggregate.total_input_blocks)
          : 0.0;
  return out;
}

std::string SimReport::to_json_string(int indent) const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["policy"] = policy;
  j["total_input_blocks"] = total_input_blocks;
  j["device_hits"] = device_hits;
  j["host_hits"] = host_hits;
  j["misses"] = misses;
  j["hit_ratio"] = hit_ratio;
  j["total_cost"] = total_cost;
  j["device_evictions"] = device_evictions;
  j["host_evictions"] = host_evictions;
  j["migrations"] = migrations;
  j["self_evictions"] = self_evictions;
  j["output_inserts"] = output_inserts;
  j["distinct_blocks"] = distinct_blocks;
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [label, cs] : per_category)
    cats[label] = {{"hits", cs.hits}, {"misses", cs.misses}};
  j["per_category"] = cats;
  j["eviction_timing"] = {{"count", timing.count},
                          {"mean_us", timing.mean_us},
                          {"p50_us", timing.p50_us},
                          {"p99_us", timing.p99_us},
                          {"max_us", timing.max_us}};
  return j.dump(indent);
}

}  // namespace kvsim
