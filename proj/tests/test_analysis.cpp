#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kvsim/analysis.hpp"
#include "kvsim/generator.hpp"
#include "kvsim/simulator.hpp"

using namespace kvsim;

namespace {

TraceRecord rec(double ts, std::string chat, std::string parent,
                std::vector<uint64_t> in, std::vector<uint64_t> out,
                std::string user = "u1", RequestType type = RequestType::Text) {
  TraceRecord r;
  r.timestamp = ts;
  r.chat_id = std::move(chat);
  r.parent_chat_id = std::move(parent);
  r.user_id = std::move(user);
  r.type = type;
  r.input_hashes = std::move(in);
  r.output_hashes = std::move(out);
  r.input_tokens = r.input_hashes.size() * 4;
  r.output_tokens = r.output_hashes.size() * 4;
  return r;
}

// session continuation plus one unseen block and one never-reused suffix
TraceContext two_turn_context() {
  std::vector<TraceRecord> rs{
      rec(0, "a", "", {1, 2}, {3}),
      rec(10, "b", "a", {1, 2, 3, 4}, {}),
  };
  return build_context(std::move(rs));
}

GeneratorSpec small_spec() {
  GeneratorSpec spec;
  spec.duration = 300;
  spec.user_count = 6;
  spec.user_zipf = 0.5;
  ClassSpec c;
  c.name = "chat";
  c.type = RequestType::Text;
  c.arrival_rate = 0.2;
  c.prompt_pool = 2;
  c.shared_prompt_fraction = 0.8;
  c.prompt_tokens = Dist{Dist::Kind::Fixed, 48, 0};
  c.suffix_tokens = Dist{Dist::Kind::Uniform, 8, 32};
  c.output_tokens = Dist{Dist::Kind::Exponential, 32, 0};
  c.next_turn_prob = {0.5};
  c.think_time = Dist{Dist::Kind::Exponential, 20, 0};
  spec.classes.push_back(c);
  return spec;
}

}  // namespace

TEST_CASE("ideal hit accounting on a hand-traced session") {
  TraceContext ctx = two_turn_context();
  BlockStreamOptions so;  // block_tokens 4
  HitAccounting acc = ideal_hit_ratio(ctx, so);
  CHECK(acc.total_blocks == 6);
  CHECK(acc.hit_blocks == 3);  // turn 2 reuses {1,2} and the decoded {3}
  CHECK(acc.ratio == 0.5);
  CHECK(acc.totals_by_category.at("text-1") == 2);
  CHECK(acc.hits_by_category.count("text-1") == 0);
  CHECK(acc.totals_by_category.at("text-2") == 4);
  CHECK(acc.hits_by_category.at("text-2") == 3);
  CHECK(acc.totals_by_user.at("u1") == 6);
  CHECK(acc.hits_by_record == std::vector<int64_t>{0, 3});
  CHECK(acc.totals_by_record == std::vector<int64_t>{2, 4});
}

TEST_CASE("every policy at ample capacity matches the seen-set ideal") {
  auto records = generate_synthetic(small_spec(), 11);
  REQUIRE(records.size() > 40);
  TraceContext ctx = build_context(std::move(records));

  BlockStreamOptions so;
  so.block_tokens = 16;
  HitAccounting ideal = ideal_hit_ratio(ctx, so);
  REQUIRE(ideal.hit_blocks > 0);

  for (PolicyKind k : {PolicyKind::Lru, PolicyKind::Fifo, PolicyKind::Lfu,
                       PolicyKind::S3Fifo, PolicyKind::Gdfs, PolicyKind::Wa}) {
    SimOptions opts;
    opts.policy = k;
    opts.tiers.device_blocks = 1 << 20;  // never evicts
    opts.tiers.block_tokens = 16;
    SimReport r = simulate(ctx, opts);
    CHECK(r.total_input_blocks == ideal.total_blocks);
    CHECK(r.device_hits == ideal.hit_blocks);
    CHECK(r.hit_ratio == ideal.ratio);
    CHECK(r.device_evictions == 0);
  }

  SimReport c = simulate_clairvoyant(ctx, so, 1 << 20);
  CHECK(c.device_hits == ideal.hit_blocks);
}

TEST_CASE("reuse skew ranks blocks by served hits") {
  TraceContext ctx = two_turn_context();
  BlockStreamOptions so;
  SkewCurve curve = reuse_skew(ctx, so);
  // distinct blocks: {1},{1,2},{1,2,3},{1,2,3,4}; first three get one hit each
  CHECK(curve.total_items == 4);
  CHECK(curve.total_weight == 3);
  REQUIRE(curve.x.size() == 4);
  CHECK(curve.y[0] == doctest::Approx(1.0 / 3));
  CHECK(curve.y[2] == doctest::Approx(1.0));
  CHECK(curve.y[3] == doctest::Approx(1.0));  // the zero-reuse tail block
  CHECK(curve.share_at(0.5) == doctest::Approx(2.0 / 3));
  CHECK(curve.share_at(1.0) == doctest::Approx(1.0));
  CHECK_THROWS(curve.share_at(1.5));
}

TEST_CASE("type contribution credits the hitting request") {
  std::vector<TraceRecord> rs{
      rec(0, "a", "", {1, 2}, {}, "u1", RequestType::Text),
      rec(1, "b", "", {1, 2, 9}, {}, "u2", RequestType::Api),
      rec(2, "c", "b", {1, 2, 9, 9}, {}, "u2", RequestType::Api),
  };
  TraceContext ctx = build_context(std::move(rs));
  BlockStreamOptions so;
  TypeContribution tc = per_type_contribution(ctx, so);
  CHECK(tc.total_hits == 5);  // b reuses 2 blocks, c reuses 3
  CHECK(tc.hits_by_type.at("api") == 5);
  CHECK(tc.hits_by_type.count("text") == 0);
  CHECK(tc.single_turn_hits == 2);
  CHECK(tc.multi_turn_hits == 3);
}

TEST_CASE("cross-user matrix attributes hits to first producers") {
  std::vector<TraceRecord> rs{
      rec(0, "a", "", {1, 2}, {}, "alice"),
      rec(1, "b", "", {1, 2}, {}, "bob"),
      rec(2, "c", "", {1, 2}, {}, "bob"),
      rec(3, "d", "", {7}, {}, "carol"),
      rec(4, "e", "d", {7, 8}, {}, "carol"),
  };
  TraceContext ctx = build_context(std::move(rs));
  BlockStreamOptions so;
  CrossUser cu = cross_user_matrix(ctx, so, 3);
  CHECK(cu.total_hits == 5);  // b:2, c:2 from alice, carol self-hit on {7}
  // rows ranked by request count: bob(2), carol(2), alice(1)
  REQUIRE(cu.matrix.row_labels ==
          std::vector<std::string>{"bob", "carol", "alice"});
  CHECK(cu.matrix.corner == "consumer\\producer");
  // bob consumed 4 alice-produced blocks, carol 1 of her own; sums to 1
  CHECK(cu.matrix.cells[0][2] == doctest::Approx(0.8));
  CHECK(cu.matrix.cells[1][1] == doctest::Approx(0.2));
  CHECK(cu.diagonal_mass == doctest::Approx(0.2));

  // with top_k 1 only bob remains; his producer alice falls outside the
  // matrix, so the visible cells stay zero while diagonal mass is global
  CrossUser top1 = cross_user_matrix(ctx, so, 1);
  REQUIRE(top1.matrix.row_labels == std::vector<std::string>{"bob"});
  CHECK(top1.matrix.cells[0][0] == 0.0);
  CHECK(top1.total_hits == 5);
  CHECK(top1.diagonal_mass == doctest::Approx(0.2));
}

TEST_CASE("user skew curves cover requests and hits") {
  std::vector<TraceRecord> rs{
      rec(0, "a", "", {1}, {}, "heavy"),
      rec(1, "b", "", {1}, {}, "heavy"),
      rec(2, "c", "", {1}, {}, "heavy"),
      rec(3, "d", "", {1}, {}, "light"),
  };
  TraceContext ctx = build_context(std::move(rs));
  BlockStreamOptions so;
  UserSkew us = user_skew(ctx, so);
  CHECK(us.requests.total_items == 2);
  CHECK(us.requests.total_weight == 4);
  CHECK(us.requests.y[0] == doctest::Approx(0.75));
  // hits: heavy 2 (b, c), light 1 (d)
  CHECK(us.hits.total_weight == 3);
  CHECK(us.hits.y[0] == doctest::Approx(2.0 / 3));
}

TEST_CASE("turn distribution and per-user stats") {
  std::vector<TraceRecord> rs{
      rec(0, "a1", "", {1}, {}, "u1"), rec(1, "a2", "a1", {1, 2}, {}, "u1"),
      rec(2, "a3", "a2", {1, 2, 3}, {}, "u1"),
      rec(3, "b1", "", {5}, {}, "u1"),
      rec(4, "c1", "", {6}, {}, "u2"), rec(5, "c2", "c1", {6, 7}, {}, "u2"),
  };
  TraceContext ctx = build_context(std::move(rs));
  TurnStats ts = turn_distribution(ctx);
  CHECK(ts.turns_per_session.count == 3);
  CHECK(ts.turns_per_session.mean == doctest::Approx(2.0));
  CHECK(ts.turns_per_session.p50 == 2);
  REQUIRE(ts.per_user.size() == 2);
  // u1 sessions {3,1}: mean 2, population stddev 1; u2 {2}: mean 2, stddev 0
  CHECK(ts.per_user[0].user == "u1");  // mean ties break by name
  CHECK(ts.per_user[0].mean_turns == doctest::Approx(2.0));
  CHECK(ts.per_user[0].stddev_turns == doctest::Approx(1.0));
  CHECK(ts.per_user[1].stddev_turns == doctest::Approx(0.0));
}

TEST_CASE("next-turn frequency windows by category") {
  std::vector<TraceRecord> rs{
      rec(0, "a1", "", {1}, {}, "u1"),            // text-1, answered at t=50
      rec(5, "b1", "", {2}, {}, "u1"),            // text-1, never answered
      rec(50, "a2", "a1", {1, 9}, {}, "u1"),      // text-2, never answered
      rec(130, "c1", "", {3}, {}, "u1"),          // text-1 in window 1, answered
      rec(140, "c2", "c1", {3, 4}, {}, "u1"),
  };
  TraceContext ctx = build_context(std::move(rs));
  NextTurnFrequency nt = next_turn_frequency(ctx, 100);
  // text-1 is the most common category and lands in row 0
  REQUIRE(nt.rate.row_labels[0] == "text-1");
  CHECK(nt.rate.col_labels == std::vector<std::string>{"0", "100"});
  CHECK(nt.rate.cells[0][0] == doctest::Approx(0.5));  // a1 yes, b1 no
  CHECK(nt.rate.cells[0][1] == doctest::Approx(1.0));  // c1
  CHECK(nt.counts.cells[0][0] == 2);
  // text-2 requests (a2, c2) never get a follow-up
  REQUIRE(nt.rate.row_labels[1] == "text-2");
  CHECK(nt.rate.cells[1][0] == 0.0);
  CHECK(nt.rate.cells[1][1] == 0.0);
  CHECK_THROWS(next_turn_frequency(ctx, 0));
}

TEST_CASE("reuse time distributions group three ways") {
  TraceContext ctx = two_turn_context();
  BlockStreamOptions so;
  // intervals: keys {1},{1,2} waited 10s; decoded {1,2,3} waited 10s
  auto overall = reuse_time_distribution(ctx, so, ReuseGrouping::Overall);
  REQUIRE(overall.count("all") == 1);
  CHECK(overall.at("all").count == 3);
  CHECK(overall.at("all").mean == doctest::Approx(10.0));

  auto by_cat = reuse_time_distribution(ctx, so, ReuseGrouping::Category);
  CHECK(by_cat.at("text-1").count == 3);  // all three waited under turn 1

  auto sm = reuse_time_distribution(ctx, so, ReuseGrouping::SingleVsMulti);
  CHECK(sm.at("single-turn").count == 3);
  CHECK(sm.count("multi-turn") == 0);
}

TEST_CASE("spatial heatmap: full window equals ideal, halves are selective") {
  TraceContext ctx = two_turn_context();
  BlockStreamOptions so;
  std::vector<double> offsets{0, 50};
  std::vector<double> strides{50, 100};
  HeatmapTable t = spatial_heatmap(ctx, so, offsets, strides);
  CHECK(t.corner == "offset_pct\\stride_pct");
  HitAccounting ideal = ideal_hit_ratio(ctx, so);
  CHECK(t.cells[0][1] == doctest::Approx(ideal.ratio));  // (0,100) caches all

  // (0,50): only blocks fully inside the first half of each request are kept.
  // r1 is 12 tokens long: the first half holds block {1} only (block {1,2}
  // ends at token 8 > 6); r2 then hits just that block.
  CHECK(t.cells[0][0] == doctest::Approx(1.0 / 6));
  // (50,50): r1 keeps nothing in its second half except the straddler; the
  // decoded block {1,2,3} spans tokens 8..12, inside [6,12] -> one hit for r2
  CHECK(t.cells[1][0] == doctest::Approx(1.0 / 6));
}

TEST_CASE("lifespans and the capacity curve agree exactly") {
  std::vector<TraceRecord> rs{
      rec(0, "a", "", {1}, {}),
      rec(4, "b", "", {2}, {}),
      rec(10, "c", "", {1}, {}),
      rec(14, "d", "", {2}, {}),
  };
  TraceContext ctx = build_context(std::move(rs));
  BlockStreamOptions so;

  DistributionTable spans = lifespan_distribution(ctx, so);
  CHECK(spans.count == 2);
  CHECK(spans.values == std::vector<double>{10, 10});

  CapacityCurve curve = clairvoyant_capacity_curve(ctx, so, 2);
  CHECK(curve.sum_lifespans == 20);
  CHECK(curve.integral_block_seconds == 20);  // exact on integer timestamps
  CHECK(curve.peak == 2);  // both live inside [4, 10)
  REQUIRE(!curve.times.empty());
  CHECK(curve.times.front() == 0);
  // grid samples at t=6 and t=8 see both blocks alive
  for (size_t i = 0; i < curve.times.size(); ++i) {
    if (curve.times[i] >= 4 && curve.times[i] < 10) CHECK(curve.live_blocks[i] == 2);
    if (curve.times[i] >= 14) CHECK(curve.live_blocks[i] == 0);
  }
  CHECK_THROWS(clairvoyant_capacity_curve(ctx, so, 0));
}

TEST_CASE("capacity integral equals summed lifespans on a generated trace") {
  auto records = generate_synthetic(small_spec(), 23);
  // integer timestamps keep the integral arithmetic exact
  for (auto& r : records) r.timestamp = std::floor(r.timestamp);
  TraceContext ctx = build_context(std::move(records));
  BlockStreamOptions so;
  so.block_tokens = 16;
  CapacityCurve curve = clairvoyant_capacity_curve(ctx, so, 60);
  CHECK(curve.integral_block_seconds == curve.sum_lifespans);
  CHECK(curve.peak > 0);
}

TEST_CASE("kv size distribution splits single and multi turn per profile") {
  ModelProfile p;
  p.name = "toy";
  p.bytes_per_token = 1000;
  p.hbm_for_kv_bytes = 1000000;  // 1000 tokens fit
  std::vector<TraceRecord> rs{
      rec(0, "a", "", {1, 2}, {3}),         // 12 tokens -> 0.012
      rec(1, "b", "a", {1, 2, 3, 4}, {}),   // 16 tokens -> 0.016
      rec(2, "c", "", {5}, {}),             // 4 tokens  -> 0.004
  };
  TraceContext ctx = build_context(std::move(rs));
  auto rows = kv_size_distribution(ctx, std::vector<ModelProfile>{p});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].profile == "toy");
  CHECK(rows[0].klass == "single-turn");
  CHECK(rows[0].hbm_fraction.count == 2);
  CHECK(rows[0].hbm_fraction.values == std::vector<double>{0.004, 0.012});
  CHECK(rows[1].klass == "multi-turn");
  CHECK(rows[1].hbm_fraction.values == std::vector<double>{0.016});
}

TEST_CASE("distribution table percentiles use nearest rank") {
  auto t = DistributionTable::from_samples({5, 1, 3, 2, 4});
  CHECK(t.p50 == 3);
  CHECK(t.p90 == 5);
  CHECK(t.percentile(0.2) == 1);
  CHECK(t.percentile(0.21) == 2);
  CHECK(t.percentile(1.0) == 5);
  CHECK(t.min == 1);
  CHECK(t.max == 5);
  CHECK(t.mean == 3);
  CHECK_THROWS(t.percentile(0.0));

  std::ostringstream csv;
  t.write_csv(csv);
  CHECK(csv.str() == "value,cdf\n1,0.2\n2,0.4\n3,0.6\n4,0.8\n5,1\n");

  auto empty = DistributionTable::from_samples({});
  CHECK(empty.count == 0);
  CHECK_THROWS(empty.percentile(0.5));
}

TEST_CASE("csv thinning keeps the first sample of each stride and the tail") {
  auto t = DistributionTable::from_samples({1, 2, 3, 4, 5});
  std::ostringstream csv;
  t.write_csv(csv, 2);  // stride 3: rows at i=0 and i=3, then the forced tail
  CHECK(csv.str() == "value,cdf\n1,0.2\n4,0.8\n5,1\n");

  std::ostringstream exact;
  t.write_csv(exact, 5);  // no thinning needed
  CHECK(exact.str() == "value,cdf\n1,0.2\n2,0.4\n3,0.6\n4,0.8\n5,1\n");
}

TEST_CASE("heatmap csv lays out corner, columns, then one row per label") {
  HeatmapTable t;
  t.corner = "a\\b";
  t.row_labels = {"r1", "r2"};
  t.col_labels = {"c1", "c2", "c3"};
  t.cells = {{0.5, 1, 0}, {0.25, 2, 3.5}};
  std::ostringstream csv;
  t.write_csv(csv);
  CHECK(csv.str() == "a\\b,c1,c2,c3\nr1,0.5,1,0\nr2,0.25,2,3.5\n");
}

TEST_CASE("lifespan timeline buckets mean lifespans by birth window") {
  std::vector<TraceRecord> rs{
      rec(0, "a", "", {1}, {}),    // key {1} born at 0, dies at 10
      rec(10, "b", "", {1}, {}),
      rec(70, "c", "", {2}, {}),   // key {2} born at 70, never reused
  };
  TraceContext ctx = build_context(std::move(rs));
  BlockStreamOptions so;
  HeatmapTable t = lifespan_timeline(ctx, so, 60);
  CHECK(t.corner == "category\\window_start");
  // birth window axis spans [0, 70] -> windows starting at 0 and 60
  CHECK(t.col_labels == std::vector<std::string>{"0", "60"});
  REQUIRE(t.row_labels == std::vector<std::string>{"text-1"});
  CHECK(t.cells[0][0] == doctest::Approx(10.0));
  CHECK(t.cells[0][1] == 0.0);  // the unreused key contributes a 0 lifespan
  CHECK_THROWS(lifespan_timeline(ctx, so, 0));
}
