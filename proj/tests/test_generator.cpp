#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kvsim/generator.hpp"
#include "kvsim/session.hpp"
#include "kvsim/trace_io.hpp"

using namespace kvsim;
namespace fs = std::filesystem;

namespace {

GeneratorSpec two_class_spec() {
  GeneratorSpec spec;
  spec.duration = 600;
  spec.user_count = 12;
  spec.user_zipf = 0.8;

  ClassSpec chat;
  chat.name = "chat";
  chat.type = RequestType::Text;
  chat.arrival_rate = 0.2;
  chat.prompt_pool = 2;
  chat.shared_prompt_fraction = 0.7;
  chat.prompt_tokens = Dist{Dist::Kind::Fixed, 64, 0};
  chat.suffix_tokens = Dist{Dist::Kind::Uniform, 8, 40};
  chat.output_tokens = Dist{Dist::Kind::Exponential, 48, 0};
  chat.next_turn_prob = {0.5, 0.3};
  chat.think_time = Dist{Dist::Kind::Exponential, 60, 0};
  spec.classes.push_back(chat);

  ClassSpec api;
  api.name = "api";
  api.type = RequestType::Api;
  api.arrival_rate = 0.1;
  api.prompt_pool = 1;
  api.prompt_tokens = Dist{Dist::Kind::Fixed, 32, 0};
  api.suffix_tokens = Dist{Dist::Kind::Fixed, 8, 0};
  api.output_tokens = Dist{Dist::Kind::Fixed, 16, 0};
  spec.classes.push_back(api);
  return spec;
}

}  // namespace

TEST_CASE("generation is deterministic for a fixed seed") {
  GeneratorSpec spec = two_class_spec();
  auto a = generate_synthetic(spec, 99);
  auto b = generate_synthetic(spec, 99);
  REQUIRE(a.size() == b.size());
  CHECK(a == b);

  std::ostringstream sa, sb;
  serialize_trace(sa, a, TraceFormat::Csv);
  serialize_trace(sb, b, TraceFormat::Csv);
  CHECK(sa.str() == sb.str());

  auto c = generate_synthetic(spec, 100);
  CHECK(a != c);
}

TEST_CASE("generated records satisfy the trace schema") {
  auto recs = generate_synthetic(two_class_spec(), 7);
  REQUIRE(recs.size() > 50);
  double prev = -1;
  std::set<std::string> ids;
  for (const auto& r : recs) {
    CHECK(r.timestamp >= prev);
    prev = r.timestamp;
    CHECK(r.input_tokens % 4 == 0);
    CHECK(r.output_tokens % 4 == 0);
    CHECK(r.input_tokens >= 4);
    CHECK(r.input_hashes.size() == r.input_tokens / 4);
    CHECK(r.output_hashes.size() == r.output_tokens / 4);
    CHECK(ids.insert(r.chat_id).second);  // unique chat ids
    CHECK(r.user_id.front() == 'u');
  }
  // serialization round trip stays clean
  std::ostringstream out;
  serialize_trace(out, recs, TraceFormat::Csv);
  std::istringstream in(out.str());
  auto parsed = parse_trace(in, TraceFormat::Csv);
  CHECK(parsed.rejected.empty());
  CHECK(parsed.records.size() == recs.size());
}

TEST_CASE("multi-turn inputs accumulate the full history") {
  auto recs = generate_synthetic(two_class_spec(), 13);
  TraceContext ctx = build_context(std::move(recs));
  int multi = 0;
  for (size_t i = 0; i < ctx.records.size(); ++i) {
    if (ctx.turn_of(i) < 2) continue;
    ++multi;
    const auto& child = ctx.records[i];
    const auto& parent = ctx.records.at(ctx.by_chat_id.at(child.parent_chat_id));
    // child input = parent input + parent output + fresh suffix
    REQUIRE(child.input_hashes.size() >
            parent.input_hashes.size() + parent.output_hashes.size());
    size_t pi = parent.input_hashes.size();
    CHECK(std::equal(parent.input_hashes.begin(), parent.input_hashes.end(),
                     child.input_hashes.begin()));
    CHECK(std::equal(parent.output_hashes.begin(), parent.output_hashes.end(),
                     child.input_hashes.begin() + pi));
    CHECK(child.timestamp > parent.timestamp);
    CHECK(child.user_id == parent.user_id);
    CHECK(child.type == parent.type);
  }
  CHECK(multi > 20);
}

TEST_CASE("shared prompt pool really is shared") {
  GeneratorSpec spec = two_class_spec();
  spec.classes[1].arrival_rate = 0.5;  // plenty of api sessions, pool of 1
  auto recs = generate_synthetic(spec, 21);
  std::vector<const TraceRecord*> api_roots;
  for (const auto& r : recs)
    if (r.type == RequestType::Api && r.parent_chat_id.empty()) api_roots.push_back(&r);
  REQUIRE(api_roots.size() > 30);
  // prompt is fixed 32 tokens = 8 groups; every root shares them
  for (const auto* r : api_roots) {
    REQUIRE(r->input_hashes.size() >= 8);
    CHECK(std::equal(r->input_hashes.begin(), r->input_hashes.begin() + 8,
                     api_roots[0]->input_hashes.begin()));
  }
}

TEST_CASE("session starts stay inside the arrival window") {
  GeneratorSpec spec = two_class_spec();
  spec.start_time = 1000;
  auto recs = generate_synthetic(spec, 5);
  TraceContext ctx = build_context(std::move(recs));
  for (size_t i = 0; i < ctx.records.size(); ++i) {
    if (ctx.turn_of(i) == 1) {
      CHECK(ctx.records[i].timestamp >= 1000);
      CHECK(ctx.records[i].timestamp < 1600);
    }
  }
}

TEST_CASE("turn counts follow the stop probability") {
  GeneratorSpec spec;
  spec.duration = 20000;
  spec.user_count = 5;
  ClassSpec c;
  c.name = "g";
  c.type = RequestType::Text;
  c.arrival_rate = 0.3;
  c.prompt_pool = 1;
  c.prompt_tokens = Dist{Dist::Kind::Fixed, 16, 0};
  c.suffix_tokens = Dist{Dist::Kind::Fixed, 8, 0};
  c.output_tokens = Dist{Dist::Kind::Fixed, 8, 0};
  c.next_turn_prob = {0.5};  // geometric: mean 2 turns
  c.think_time = Dist{Dist::Kind::Fixed, 10, 0};
  spec.classes.push_back(c);

  auto recs = generate_synthetic(spec, 3);
  TraceContext ctx = build_context(std::move(recs));
  double sessions = static_cast<double>(ctx.links.sessions.size());
  REQUIRE(sessions > 3000);
  double mean = static_cast<double>(ctx.records.size()) / sessions;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("spec loading validates fields") {
  auto dir = fs::temp_directory_path() / "kvsim_gen_spec_test";
  fs::create_directories(dir);
  auto write = [&](const char* name, const nlohmann::json& j) {
    std::ofstream out(dir / name);
    out << j.dump(2);
    return (dir / name).string();
  };

  nlohmann::json good = {
      {"spec_version", 1},
      {"duration", 100},
      {"user_count", 3},
      {"classes",
       {{{"name", "a"},
         {"type", "text"},
         {"arrival_rate", 0.5},
         {"prompt_pool", 1},
         {"prompt_tokens", {{"kind", "fixed"}, {"value", 32}}},
         {"suffix_tokens", {{"kind", "uniform"}, {"min", 4}, {"max", 16}}},
         {"output_tokens", {{"kind", "exponential"}, {"mean", 20}}},
         {"next_turn_prob", {0.4}}}}}};
  GeneratorSpec spec = load_generator_spec(write("good.json", good));
  CHECK(spec.classes.size() == 1);
  CHECK(spec.classes[0].suffix_tokens.kind == Dist::Kind::Uniform);

  nlohmann::json bad = good;
  bad["spec_version"] = 2;
  CHECK_THROWS(load_generator_spec(write("bad1.json", bad)));

  bad = good;
  bad["classes"][0]["next_turn_prob"] = {1.0};  // would loop forever
  CHECK_THROWS(load_generator_spec(write("bad2.json", bad)));

  bad = good;
  bad["classes"][0]["arrival_rate"] = 0;
  CHECK_THROWS(load_generator_spec(write("bad3.json", bad)));

  bad = good;
  bad["duration"] = -5;
  CHECK_THROWS(load_generator_spec(write("bad4.json", bad)));

  bad = good;
  bad["classes"][0]["prompt_tokens"]["kind"] = "gamma";
  CHECK_THROWS(load_generator_spec(write("bad5.json", bad)));
}
