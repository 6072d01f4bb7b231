// Command line front end: analyze / simulate / sweep / fit / generate / capacity.
// Exit codes: 0 success, 1 data error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kvsim/analysis.hpp"
#include "kvsim/distfit.hpp"
#include "kvsim/generator.hpp"
#include "kvsim/manifest.hpp"
#include "kvsim/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace kvsim;

namespace {

bool log_debug_enabled() {
  const char* v = std::getenv("KVSIM_LOG");
  return v && std::string_view(v) == "debug";
}

void log_info(const std::string& msg) {
  if (log_debug_enabled()) std::cerr << "[kvsim] " << msg << '\n';
}

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceArgs {
  std::string path;
  std::string format = "auto";
  bool allow_bad_rows = false;
};

void add_trace_args(CLI::App* cmd, TraceArgs& args) {
  cmd->add_option("--trace", args.path, "input trace (csv or jsonl)")->required();
  cmd->add_option("--format", args.format, "trace format: auto|csv|jsonl")
      ->check(CLI::IsMember({"auto", "csv", "jsonl"}));
  cmd->add_flag("--allow-bad-rows", args.allow_bad_rows,
                "keep going when rows are rejected (default: exit 1)");
}

TraceContext load_context(const TraceArgs& args) {
  TraceFormat fmt = args.format == "csv"     ? TraceFormat::Csv
                    : args.format == "jsonl" ? TraceFormat::Jsonl
                                             : trace_format_from_path(args.path);
  ParseResult parsed;
  try {
    parsed = parse_trace_file(args.path, fmt);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  for (const auto& d : parsed.rejected)
    std::cerr << args.path << ": " << d.to_string() << '\n';
  if (!parsed.rejected.empty() && !args.allow_bad_rows)
    throw DataError(std::to_string(parsed.rejected.size()) + " rejected row(s) in " +
                    args.path);
  TraceContext ctx = build_context(std::move(parsed.records));
  for (const auto& d : ctx.links.diagnostics)
    std::cerr << args.path << ": " << d.to_string() << '\n';
  log_info("loaded " + std::to_string(ctx.records.size()) + " records, " +
           std::to_string(ctx.links.sessions.size()) + " sessions");
  return ctx;
}

struct StreamArgs {
  int block_tokens = 4;
  std::string expand = "as_recorded";
  uint64_t prefix_seed = kDefaultPrefixSeed;
  bool exclude_outputs = false;
  double decode_delay = 0;
  int turn_cap = kTurnCap;
};

void add_stream_args(CLI::App* cmd, StreamArgs& args, int default_block_tokens) {
  args.block_tokens = default_block_tokens;
  cmd->add_option("--block-tokens", args.block_tokens, "tokens per cache block")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--expand", args.expand, "input hash semantics")
      ->check(CLI::IsMember({"as_recorded", "reconstruct"}));
  cmd->add_option("--prefix-seed", args.prefix_seed, "prefix key chain seed");
  cmd->add_flag("--exclude-outputs", args.exclude_outputs,
                "ignore blocks first produced by decode");
  cmd->add_option("--decode-delay", args.decode_delay,
                  "seconds per output token before blocks land");
  cmd->add_option("--turn-cap", args.turn_cap, "turn bucket cap")->check(CLI::PositiveNumber);
}

BlockStreamOptions to_stream_options(const StreamArgs& args) {
  BlockStreamOptions o;
  o.block_tokens = args.block_tokens;
  o.mode = args.expand == "reconstruct" ? ExpandMode::Reconstruct : ExpandMode::AsRecorded;
  o.prefix_seed = args.prefix_seed;
  o.include_outputs = !args.exclude_outputs;
  o.decode_delay_per_token = args.decode_delay;
  o.turn_cap = args.turn_cap;
  return o;
}

ordered_json stream_args_json(const StreamArgs& a) {
  return ordered_json{{"block_tokens", a.block_tokens},
                      {"expand", a.expand},
                      {"prefix_seed", a.prefix_seed},
                      {"exclude_outputs", a.exclude_outputs},
                      {"decode_delay", a.decode_delay},
                      {"turn_cap", a.turn_cap}};
}

// Every artifact goes through here so the manifest sees every output.
struct OutDir {
  fs::path dir;
  std::vector<std::string> written;

  explicit OutDir(const std::string& d) : dir(d) { fs::create_directories(dir); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << content;
    written.push_back(name);
  }
  template <typename Fn>
  void write_with(const std::string& name, Fn&& fn) {
    std::ostringstream ss;
    fn(ss);
    write(name, ss.str());
  }
};

void finish_manifest(RunManifest& m, OutDir& out) {
  m.outputs = out.written;
  m.finished_at = utc_now_iso8601();
  m.write(out.dir / "manifest.json");
}

std::string dist_summary_json(const DistributionTable& t) {
  ordered_json j{{"count", t.count}, {"mean", t.mean}, {"p50", t.p50},
                 {"p90", t.p90},     {"p99", t.p99},   {"min", t.min},
                 {"max", t.max}};
  return j.dump();
}

ordered_json dist_summary(const DistributionTable& t) {
  return ordered_json::parse(dist_summary_json(t));
}

void write_long_form_dists(OutDir& out, const std::string& name,
                           const std::map<std::string, DistributionTable>& dists,
                           size_t max_points) {
  out.write_with(name, [&](std::ostream& os) {
    os << "label,value,cdf\n";
    for (const auto& [label, table] : dists) {
      size_t stride = 1;
      if (max_points > 0 && table.values.size() > max_points)
        stride = (table.values.size() + max_points - 1) / max_points;
      for (size_t i = 0; i < table.values.size(); i += stride) {
        double cdf = static_cast<double>(i + 1) / static_cast<double>(table.values.size());
        os << label << ',' << format_double(table.values[i]) << ','
           << format_double(cdf) << '\n';
      }
      if (!table.values.empty() && (table.values.size() - 1) % stride != 0)
        os << label << ',' << format_double(table.values.back()) << ",1\n";
    }
  });
}

void write_skew_csv(OutDir& out, const std::string& name, const SkewCurve& curve,
                    size_t max_points) {
  out.write_with(name, [&](std::ostream& os) {
    os << "item_fraction,weight_share\n";
    size_t n = curve.x.size();
    size_t stride = max_points > 0 && n > max_points ? (n + max_points - 1) / max_points : 1;
    for (size_t i = 0; i < n; i += stride)
      os << format_double(curve.x[i]) << ',' << format_double(curve.y[i]) << '\n';
    if (n > 0 && (n - 1) % stride != 0)
      os << format_double(curve.x.back()) << ',' << format_double(curve.y.back()) << '\n';
  });
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

// ---------------------------------------------------------------- analyze --

struct AnalyzeArgs {
  TraceArgs trace;
  StreamArgs stream;
  std::string out;
  std::vector<std::string> metrics{"all"};
  size_t top_k = 10;
  double window = 600;
  std::string offsets = "0,25,50,75";
  std::string strides = "25,50,75,100";
  std::vector<std::string> profiles;
  size_t max_points = 2000;
};

int run_analyze(const AnalyzeArgs& a) {
  TraceContext ctx = load_context(a.trace);
  BlockStreamOptions so = to_stream_options(a.stream);
  OutDir out(a.out);

  RunManifest manifest;
  manifest.command = "analyze";
  manifest.started_at = utc_now_iso8601();
  manifest.add_input(a.trace.path);
  for (const auto& p : a.profiles) manifest.add_input(p);

  auto wants = [&](const std::string& m) {
    for (const auto& sel : a.metrics)
      if (sel == "all" || sel == m) return true;
    return false;
  };
  ordered_json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["records"] = ctx.records.size();
  summary["sessions"] = ctx.links.sessions.size();

  if (wants("ideal-hit")) {
    HitAccounting acc = ideal_hit_ratio(ctx, so);
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["ratio"] = acc.ratio;
    j["total_blocks"] = acc.total_blocks;
    j["hit_blocks"] = acc.hit_blocks;
    ordered_json cats = ordered_json::object();
    for (const auto& [label, total] : acc.totals_by_category) {
      int64_t hits = 0;
      if (auto it = acc.hits_by_category.find(label); it != acc.hits_by_category.end())
        hits = it->second;
      cats[label] = {{"hits", hits}, {"total", total}};
    }
    j["by_category"] = cats;
    out.write("ideal_hit.json", j.dump(2) + "\n");
    summary["ideal_hit_ratio"] = acc.ratio;
  }
  if (wants("reuse-skew")) {
    SkewCurve curve = reuse_skew(ctx, so);
    write_skew_csv(out, "reuse_skew.csv", curve, a.max_points);
    summary["reuse_share_top_10pct_blocks"] = curve.share_at(0.10);
  }
  if (wants("type-contribution")) {
    TypeContribution tc = per_type_contribution(ctx, so);
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["total_hits"] = tc.total_hits;
    j["single_turn_hits"] = tc.single_turn_hits;
    j["multi_turn_hits"] = tc.multi_turn_hits;
    j["hits_by_type"] = tc.hits_by_type;
    out.write("type_contribution.json", j.dump(2) + "\n");
    if (tc.total_hits > 0)
      summary["single_turn_hit_share"] =
          static_cast<double>(tc.single_turn_hits) / static_cast<double>(tc.total_hits);
  }
  if (wants("cross-user")) {
    CrossUser cu = cross_user_matrix(ctx, so, a.top_k);
    out.write_with("cross_user.csv", [&](std::ostream& os) { cu.matrix.write_csv(os); });
    summary["cross_user_diagonal_mass"] = cu.diagonal_mass;
  }
  if (wants("user-skew")) {
    UserSkew us = user_skew(ctx, so);
    write_skew_csv(out, "user_request_skew.csv", us.requests, a.max_points);
    write_skew_csv(out, "user_hit_skew.csv", us.hits, a.max_points);
    summary["request_share_top_19pct_users"] = us.requests.share_at(0.19);
    summary["hit_share_top_19pct_users"] = us.hits.share_at(0.19);
  }
  if (wants("turns")) {
    TurnStats ts = turn_distribution(ctx);
    out.write_with("turns.csv", [&](std::ostream& os) {
      ts.turns_per_session.write_csv(os, a.max_points);
    });
    out.write_with("turns_by_user.csv", [&](std::ostream& os) {
      os << "user,sessions,mean_turns,stddev_turns\n";
      for (const auto& st : ts.per_user)
        os << st.user << ',' << st.sessions << ',' << format_double(st.mean_turns) << ','
           << format_double(st.stddev_turns) << '\n';
    });
    summary["turns_per_session"] = dist_summary(ts.turns_per_session);
  }
  if (wants("next-turn")) {
    NextTurnFrequency nt = next_turn_frequency(ctx, a.window, a.stream.turn_cap);
    out.write_with("next_turn_rate.csv", [&](std::ostream& os) { nt.rate.write_csv(os); });
    out.write_with("next_turn_counts.csv",
                   [&](std::ostream& os) { nt.counts.write_csv(os); });
  }
  if (wants("reuse-time")) {
    write_long_form_dists(out, "reuse_time_overall.csv",
                          reuse_time_distribution(ctx, so, ReuseGrouping::Overall),
                          a.max_points);
    write_long_form_dists(out, "reuse_time_by_category.csv",
                          reuse_time_distribution(ctx, so, ReuseGrouping::Category),
                          a.max_points);
    auto sv = reuse_time_distribution(ctx, so, ReuseGrouping::SingleVsMulti);
    write_long_form_dists(out, "reuse_time_single_multi.csv", sv, a.max_points);
    for (const auto& [label, table] : sv)
      summary["reuse_time_" + label] = dist_summary(table);
  }
  if (wants("spatial")) {
    auto offsets = parse_double_list(a.offsets);
    auto strides = parse_double_list(a.strides);
    HeatmapTable t = spatial_heatmap(ctx, so, offsets, strides);
    out.write_with("spatial.csv", [&](std::ostream& os) { t.write_csv(os); });
  }
  if (wants("lifespan")) {
    DistributionTable t = lifespan_distribution(ctx, so);
    out.write_with("lifespan.csv", [&](std::ostream& os) { t.write_csv(os, a.max_points); });
    summary["lifespan_seconds"] = dist_summary(t);
  }
  if (wants("lifespan-timeline")) {
    HeatmapTable t = lifespan_timeline(ctx, so, a.window);
    out.write_with("lifespan_timeline.csv", [&](std::ostream& os) { t.write_csv(os); });
  }
  if (wants("kv-size") && !a.profiles.empty()) {
    std::vector<ModelProfile> profiles;
    for (const auto& p : a.profiles) profiles.push_back(load_model_profile(p));
    auto rows = kv_size_distribution(ctx, profiles);
    out.write_with("kv_size.csv", [&](std::ostream& os) {
      os << "profile,class,value,cdf\n";
      for (const auto& row : rows) {
        for (size_t i = 0; i < row.hbm_fraction.values.size(); ++i) {
          double cdf = static_cast<double>(i + 1) /
                       static_cast<double>(row.hbm_fraction.values.size());
          os << row.profile << ',' << row.klass << ','
             << format_double(row.hbm_fraction.values[i]) << ',' << format_double(cdf)
             << '\n';
        }
      }
    });
    for (const auto& row : rows)
      if (row.hbm_fraction.count > 0)
        summary["kv_size_" + row.profile + "_" + row.klass] =
            dist_summary(row.hbm_fraction);
  }

  out.write("summary.json", summary.dump(2) + "\n");
  manifest.config_json =
      ordered_json{{"trace", a.trace.path},
                   {"metrics", a.metrics},
                   {"stream", stream_args_json(a.stream)},
                   {"top_k", a.top_k},
                   {"window", a.window},
                   {"offsets", a.offsets},
                   {"strides", a.strides},
                   {"profiles", a.profiles}}
          .dump();
  finish_manifest(manifest, out);
  return 0;
}

// --------------------------------------------------------------- simulate --

struct SimArgs {
  TraceArgs trace;
  StreamArgs stream;
  std::string out;
  std::string policy = "lru";
  size_t device_blocks = 0;
  size_t host_blocks = 0;
  double device_bytes = 0, host_bytes = 0;
  std::string profile;
  double host_hit_cost = 1.0, miss_cost = 8.0;
  double fit_refresh = 600, fit_window = 3600;
  int min_fit_samples = kMinFitSamples;
  std::string life = "auto";
  bool life_per_eviction = false;
  size_t instances = 1;
  bool time_evictions = false;
};

void add_sim_args(CLI::App* cmd, SimArgs& a) {
  add_trace_args(cmd, a.trace);
  add_stream_args(cmd, a.stream, 16);
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--policy", a.policy, "lru|fifo|lfu|s3fifo|gdfs|wa");
  cmd->add_option("--device-blocks", a.device_blocks, "device tier capacity in blocks");
  cmd->add_option("--host-blocks", a.host_blocks, "host tier capacity in blocks");
  cmd->add_option("--device-bytes", a.device_bytes, "device capacity in bytes (with --profile)");
  cmd->add_option("--host-bytes", a.host_bytes, "host capacity in bytes (with --profile)");
  cmd->add_option("--profile", a.profile, "model profile json for byte sizing");
  cmd->add_option("--host-hit-cost", a.host_hit_cost, "cost of one host fetch");
  cmd->add_option("--miss-cost", a.miss_cost, "cost of one block recompute");
  cmd->add_option("--fit-refresh", a.fit_refresh, "seconds between fit snapshots");
  cmd->add_option("--fit-window", a.fit_window, "trailing fit sample window seconds");
  cmd->add_option("--min-fit-samples", a.min_fit_samples, "samples required per category");
  cmd->add_option("--life", a.life, "residency horizon: auto or seconds");
  cmd->add_flag("--life-per-eviction", a.life_per_eviction,
                "recompute the horizon at every eviction");
  cmd->add_option("--instances", a.instances, "prefix-affinity routed instances");
  cmd->add_flag("--time-evictions", a.time_evictions,
                "measure per-decision wall time (breaks byte-identical reruns)");
}

SimOptions to_sim_options(const SimArgs& a) {
  SimOptions o;
  o.tiers.block_tokens = a.stream.block_tokens;
  o.tiers.device_blocks = a.device_blocks;
  o.tiers.host_blocks = a.host_blocks;
  if (a.device_bytes > 0 || a.host_bytes > 0) {
    if (a.profile.empty())
      throw DataError("--device-bytes/--host-bytes require --profile");
    ModelProfile p = load_model_profile(a.profile);
    double block_bytes = kv_bytes(p, a.stream.block_tokens);
    if (a.device_bytes > 0)
      o.tiers.device_blocks =
          std::max<size_t>(1, static_cast<size_t>(a.device_bytes / block_bytes));
    if (a.host_bytes > 0)
      o.tiers.host_blocks = static_cast<size_t>(a.host_bytes / block_bytes);
  }
  auto kind = policy_from_string(a.policy);
  if (!kind) throw DataError("unknown policy: " + a.policy);
  o.policy = *kind;
  o.cost.host_hit = a.host_hit_cost;
  o.cost.miss = a.miss_cost;
  o.mode = a.stream.expand == "reconstruct" ? ExpandMode::Reconstruct
                                            : ExpandMode::AsRecorded;
  o.prefix_seed = a.stream.prefix_seed;
  o.decode_delay_per_token = a.stream.decode_delay;
  o.turn_cap = a.stream.turn_cap;
  o.fit_refresh = a.fit_refresh;
  o.fit_window = a.fit_window;
  o.min_fit_samples = a.min_fit_samples;
  if (a.life != "auto") {
    o.life.fixed = true;
    o.life.value = std::stod(a.life);
  }
  o.life.per_eviction = a.life_per_eviction;
  o.time_evictions = a.time_evictions;
  return o;
}

ordered_json sim_config_json(const SimArgs& a, const SimOptions& o) {
  return ordered_json{{"trace", a.trace.path},
                      {"policy", a.policy},
                      {"device_blocks", o.tiers.device_blocks},
                      {"host_blocks", o.tiers.host_blocks},
                      {"stream", stream_args_json(a.stream)},
                      {"host_hit_cost", a.host_hit_cost},
                      {"miss_cost", a.miss_cost},
                      {"fit_refresh", a.fit_refresh},
                      {"fit_window", a.fit_window},
                      {"min_fit_samples", a.min_fit_samples},
                      {"life", a.life},
                      {"life_per_eviction", a.life_per_eviction},
                      {"instances", a.instances}};
}

int run_simulate(const SimArgs& a) {
  TraceContext ctx = load_context(a.trace);
  SimOptions opts = to_sim_options(a);
  OutDir out(a.out);
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.started_at = utc_now_iso8601();
  manifest.add_input(a.trace.path);

  if (a.instances <= 1) {
    SimReport r = simulate(ctx, opts);
    out.write("report.json", r.to_json_string(2) + "\n");
    log_info("hit_ratio=" + format_double(r.hit_ratio));
  } else {
    RoutedReport r = simulate_routed(ctx, opts, a.instances);
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["instances"] = a.instances;
    j["aggregate"] = ordered_json::parse(r.aggregate.to_json_string(0));
    ordered_json per = ordered_json::array();
    for (size_t i = 0; i < r.per_instance.size(); ++i) {
      ordered_json ji = ordered_json::parse(r.per_instance[i].to_json_string(0));
      ji["routed_requests"] = r.routed_requests[i];
      per.push_back(ji);
    }
    j["per_instance"] = per;
    out.write("report.json", j.dump(2) + "\n");
    log_info("aggregate hit_ratio=" + format_double(r.aggregate.hit_ratio));
  }

  manifest.config_json = sim_config_json(a, opts).dump();
  finish_manifest(manifest, out);
  return 0;
}

// ------------------------------------------------------------------ sweep --

struct SweepArgs {
  SimArgs sim;
  std::string policies = "lru,fifo,lfu,s3fifo,gdfs,wa";
  std::string host_ratios = "0,1,2,4";
};

int run_sweep(const SweepArgs& a) {
  TraceContext ctx = load_context(a.sim.trace);
  SimOptions base = to_sim_options(a.sim);

  std::vector<PolicyKind> kinds;
  {
    std::stringstream ss(a.policies);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto k = policy_from_string(item);
      if (!k) throw DataError("unknown policy in --policies: " + item);
      kinds.push_back(*k);
    }
  }
  std::vector<double> ratios = parse_double_list(a.host_ratios);
  if (kinds.empty() || ratios.empty()) throw DataError("empty sweep grid");

  struct Cell {
    PolicyKind policy;
    double ratio;
    SimOptions opts;
  };
  std::vector<Cell> cells;
  for (PolicyKind k : kinds)
    for (double r : ratios) {
      SimOptions o = base;
      o.policy = k;
      o.tiers.host_blocks =
          static_cast<size_t>(r * static_cast<double>(base.tiers.device_blocks));
      cells.push_back(Cell{k, r, o});
    }

  std::vector<std::future<SimReport>> futs;
  futs.reserve(cells.size());
  for (const Cell& c : cells)
    futs.push_back(std::async(std::launch::async,
                              [&ctx, opts = c.opts] { return simulate(ctx, opts); }));

  OutDir out(a.sim.out);
  RunManifest manifest;
  manifest.command = "sweep";
  manifest.started_at = utc_now_iso8601();
  manifest.add_input(a.sim.trace.path);

  out.write_with("sweep.csv", [&](std::ostream& os) {
    os << "policy,host_ratio,device_blocks,host_blocks,total_input_blocks,device_hits,"
          "host_hits,misses,hit_ratio,total_cost,device_evictions,host_evictions,"
          "self_evictions\n";
    for (size_t i = 0; i < cells.size(); ++i) {
      SimReport r = futs[i].get();
      os << to_string(cells[i].policy) << ',' << format_double(cells[i].ratio) << ','
         << cells[i].opts.tiers.device_blocks << ',' << cells[i].opts.tiers.host_blocks
         << ',' << r.total_input_blocks << ',' << r.device_hits << ',' << r.host_hits
         << ',' << r.misses << ',' << format_double(r.hit_ratio) << ','
         << format_double(r.total_cost) << ',' << r.device_evictions << ','
         << r.host_evictions << ',' << r.self_evictions << '\n';
    }
  });

  ordered_json cfg = sim_config_json(a.sim, base);
  cfg["policies"] = a.policies;
  cfg["host_ratios"] = a.host_ratios;
  manifest.config_json = cfg.dump();
  finish_manifest(manifest, out);
  return 0;
}

// -------------------------------------------------------------------- fit --

struct FitArgs {
  TraceArgs trace;
  StreamArgs stream;
  std::string out;
  double window = 3600, refresh = 600;
  int min_samples = kMinFitSamples;
  bool stability = false;
  std::vector<std::string> stability_windows;  // label=start:end
  std::vector<std::string> stability_hours;    // "9-10", expanded per day
  double day_seconds = 86400;
};

ordered_json fit_json(const CategoryFit& f) {
  return ordered_json{{"category", category_label(f.category)},
                      {"fitted", f.fitted},
                      {"lambda", f.lambda},
                      {"reuse_fraction", f.reuse_fraction},
                      {"sample_count", f.sample_count},
                      {"window_start", f.window_start},
                      {"window_end", f.window_end}};
}

int run_fit(const FitArgs& a) {
  TraceContext ctx = load_context(a.trace);
  BlockStreamOptions so = to_stream_options(a.stream);
  auto stream = build_block_stream(ctx, so);
  OutDir out(a.out);
  RunManifest manifest;
  manifest.command = "fit";
  manifest.started_at = utc_now_iso8601();
  manifest.add_input(a.trace.path);

  if (!stream.empty()) {
    double t0 = stream.front().time;
    double t_end = stream.back().time;
    auto snaps = refresh_fits(stream, t0, t_end, a.refresh, a.window, a.min_samples);
    for (size_t i = 0; i < snaps.size(); ++i) {
      ordered_json j;
      j["schema_version"] = kSchemaVersion;
      j["time"] = snaps[i]->time;
      ordered_json fits = ordered_json::array();
      for (const auto& [cat, fit] : snaps[i]->fits) fits.push_back(fit_json(fit));
      j["fits"] = fits;
      char name[32];
      std::snprintf(name, sizeof(name), "fit_%04zu.json", i);
      out.write(name, j.dump(2) + "\n");
    }
  }

  if (a.stability) {
    std::vector<StabilityWindow> windows;
    for (const auto& spec : a.stability_windows) {
      auto eq = spec.find('=');
      auto colon = spec.find(':', eq == std::string::npos ? 0 : eq);
      if (eq == std::string::npos || colon == std::string::npos)
        throw DataError("bad --stability-window, want label=start:end");
      windows.push_back(StabilityWindow{spec.substr(0, eq),
                                        std::stod(spec.substr(eq + 1, colon - eq - 1)),
                                        std::stod(spec.substr(colon + 1))});
    }
    if (!a.stability_hours.empty() && !stream.empty()) {
      double t0 = stream.front().time;
      double t_end = stream.back().time;
      double day0 = std::floor(t0 / a.day_seconds) * a.day_seconds;
      for (const auto& hp : a.stability_hours) {
        auto dash = hp.find('-');
        if (dash == std::string::npos)
          throw DataError("bad --stability-hours, want H1-H2");
        double h1 = std::stod(hp.substr(0, dash));
        double h2 = std::stod(hp.substr(dash + 1));
        for (int d = 0;; ++d) {
          double ws = day0 + d * a.day_seconds + h1 * 3600;
          double we = day0 + d * a.day_seconds + h2 * 3600;
          if (ws > t_end) break;
          windows.push_back(StabilityWindow{
              "d" + std::to_string(d) + "-h" + hp, ws, we});
        }
      }
    }
    if (windows.size() < 2) throw DataError("stability needs at least two windows");
    auto entries = fit_stability_report(stream, windows, a.min_samples);
    out.write_with("stability.csv", [&](std::ostream& os) {
      os << "category,window_a,window_b,n_a,n_b,ks,ks_critical_5pct,lambda_a,lambda_b,"
            "lambda_diff\n";
      for (const auto& e : entries)
        os << category_label(e.category) << ',' << e.window_a << ',' << e.window_b << ','
           << e.n_a << ',' << e.n_b << ',' << format_double(e.ks) << ','
           << format_double(e.ks_critical) << ',' << format_double(e.lambda_a) << ','
           << format_double(e.lambda_b) << ',' << format_double(e.lambda_diff) << '\n';
    });
  }

  manifest.config_json = ordered_json{{"trace", a.trace.path},
                                      {"window", a.window},
                                      {"refresh", a.refresh},
                                      {"min_samples", a.min_samples},
                                      {"stream", stream_args_json(a.stream)},
                                      {"stability", a.stability}}
                             .dump();
  finish_manifest(manifest, out);
  return 0;
}

// --------------------------------------------------------------- generate --

struct GenArgs {
  std::string spec;
  std::string out;
  uint64_t seed = 42;
  std::string format = "csv";
  uint64_t rows = 0;  // 0 = all
  std::string name = "trace";
};

int run_generate(const GenArgs& a) {
  GeneratorSpec spec;
  try {
    spec = load_generator_spec(a.spec);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  auto records = generate_synthetic(spec, a.seed);
  if (a.rows > 0 && records.size() > a.rows) records.resize(a.rows);

  OutDir out(a.out);
  RunManifest manifest;
  manifest.command = "generate";
  manifest.started_at = utc_now_iso8601();
  manifest.add_input(a.spec);

  TraceFormat fmt = a.format == "jsonl" ? TraceFormat::Jsonl : TraceFormat::Csv;
  std::string file = a.name + (fmt == TraceFormat::Jsonl ? ".jsonl" : ".csv");
  out.write_with(file, [&](std::ostream& os) { serialize_trace(os, records, fmt); });
  log_info("generated " + std::to_string(records.size()) + " records");

  manifest.config_json = ordered_json{{"spec", a.spec},
                                      {"seed", a.seed},
                                      {"format", a.format},
                                      {"rows", a.rows}}
                             .dump();
  finish_manifest(manifest, out);
  return 0;
}

// --------------------------------------------------------------- capacity --

struct CapArgs {
  TraceArgs trace;
  StreamArgs stream;
  std::string out;
  double grid_step = 60;
  std::string profile;
};

int run_capacity(const CapArgs& a) {
  TraceContext ctx = load_context(a.trace);
  BlockStreamOptions so = to_stream_options(a.stream);
  CapacityCurve curve = clairvoyant_capacity_curve(ctx, so, a.grid_step);

  std::optional<ModelProfile> profile;
  if (!a.profile.empty()) profile = load_model_profile(a.profile);
  double block_bytes = profile ? kv_bytes(*profile, a.stream.block_tokens) : 0;

  OutDir out(a.out);
  RunManifest manifest;
  manifest.command = "capacity";
  manifest.started_at = utc_now_iso8601();
  manifest.add_input(a.trace.path);
  if (profile) manifest.add_input(a.profile);

  out.write_with("capacity.csv", [&](std::ostream& os) {
    os << "time,live_blocks";
    if (profile) os << ",bytes,hbm_fraction";
    os << '\n';
    for (size_t i = 0; i < curve.times.size(); ++i) {
      os << format_double(curve.times[i]) << ',' << curve.live_blocks[i];
      if (profile) {
        double bytes = static_cast<double>(curve.live_blocks[i]) * block_bytes;
        os << ',' << format_double(bytes) << ','
           << format_double(bytes / profile->hbm_for_kv_bytes);
      }
      os << '\n';
    }
  });
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["peak_live_blocks"] = curve.peak;
  j["integral_block_seconds"] = curve.integral_block_seconds;
  j["sum_lifespans_seconds"] = curve.sum_lifespans;
  if (profile) j["peak_bytes"] = static_cast<double>(curve.peak) * block_bytes;
  out.write("capacity.json", j.dump(2) + "\n");

  manifest.config_json = ordered_json{{"trace", a.trace.path},
                                      {"grid_step", a.grid_step},
                                      {"stream", stream_args_json(a.stream)},
                                      {"profile", a.profile}}
                             .dump();
  finish_manifest(manifest, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven KV-cache reuse analysis and two-tier cache simulation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an ini/toml file");
  app.set_version_flag("--version", kToolVersion);

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "batch workload characterizations");
  add_trace_args(c_an, an.trace);
  add_stream_args(c_an, an.stream, 4);
  c_an->add_option("--out", an.out, "output directory")->required();
  c_an->add_option("--metrics", an.metrics,
                   "subset: ideal-hit reuse-skew type-contribution cross-user user-skew "
                   "turns next-turn reuse-time spatial lifespan lifespan-timeline kv-size");
  c_an->add_option("--top-k", an.top_k, "users in the cross-user matrix");
  c_an->add_option("--window", an.window, "window seconds for windowed metrics");
  c_an->add_option("--offsets", an.offsets, "spatial offsets, percent csv");
  c_an->add_option("--strides", an.strides, "spatial strides, percent csv");
  c_an->add_option("--profile", an.profiles, "model profile json (repeatable)");
  c_an->add_option("--max-points", an.max_points, "max csv points per curve");

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "two-tier cache simulation");
  add_sim_args(c_sim, sim);

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "policy x host-ratio grid");
  add_sim_args(c_sweep, sweep.sim);
  c_sweep->add_option("--policies", sweep.policies, "comma list of policies");
  c_sweep->add_option("--host-ratios", sweep.host_ratios,
                      "host capacity as multiples of device capacity");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "per-category reuse model fits");
  add_trace_args(c_fit, fit.trace);
  add_stream_args(c_fit, fit.stream, 16);
  c_fit->add_option("--out", fit.out, "output directory")->required();
  c_fit->add_option("--window", fit.window, "trailing sample window seconds");
  c_fit->add_option("--refresh", fit.refresh, "seconds between snapshots");
  c_fit->add_option("--min-samples", fit.min_samples, "samples required per category");
  c_fit->add_flag("--stability", fit.stability, "emit the window-pair distance table");
  c_fit->add_option("--stability-window", fit.stability_windows,
                    "explicit window label=start:end (repeatable)");
  c_fit->add_option("--stability-hours", fit.stability_hours,
                    "hour-of-day pair H1-H2, expanded across days (repeatable)");
  c_fit->add_option("--day-seconds", fit.day_seconds, "day length for hour windows");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("generate", "synthetic trace from a spec");
  c_gen->add_option("--spec", gen.spec, "generator spec json")->required();
  c_gen->add_option("--out", gen.out, "output directory")->required();
  c_gen->add_option("--seed", gen.seed, "generator seed");
  c_gen->add_option("--format", gen.format, "csv|jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  c_gen->add_option("--rows", gen.rows, "keep only the first N records");
  c_gen->add_option("--name", gen.name, "output file stem");

  CapArgs cap;
  auto* c_cap = app.add_subcommand("capacity", "clairvoyant working-set curve");
  add_trace_args(c_cap, cap.trace);
  add_stream_args(c_cap, cap.stream, 4);
  c_cap->add_option("--out", cap.out, "output directory")->required();
  c_cap->add_option("--grid-step", cap.grid_step, "curve sample step seconds");
  c_cap->add_option("--profile", cap.profile, "model profile json for byte columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_an->parsed()) return run_analyze(an);
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_sweep->parsed()) return run_sweep(sweep);
    if (c_fit->parsed()) return run_fit(fit);
    if (c_gen->parsed()) return run_generate(gen);
    if (c_cap->parsed()) return run_capacity(cap);
  } catch (const std::exception& e) {
    std::cerr << "kvsim: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
