#include "kvsim/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace kvsim {

namespace {

// All sampling goes through inverse-CDF transforms on raw mt19937_64 output;
// std::<distribution> adapters produce implementation-defined sequences and
// would break frozen expected values across standard libraries.
struct Rng {
  std::mt19937_64 eng;

  explicit Rng(uint64_t seed) : eng(seed) {}

  double uniform01() {  // [0, 1)
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
  }
  double exponential(double mean) { return -std::log1p(-uniform01()) * mean; }
  uint64_t below(uint64_t n) {  // unbiased [0, n)
    uint64_t limit = n * (UINT64_MAX / n);
    uint64_t v;
    do { v = eng(); } while (v >= limit);
    return v % n;
  }
};

double sample(const Dist& d, Rng& rng) {
  switch (d.kind) {
    case Dist::Kind::Fixed: return d.a;
    case Dist::Kind::Uniform: return d.a + (d.b - d.a) * rng.uniform01();
    case Dist::Kind::Exponential: return rng.exponential(d.a);
  }
  return d.a;
}

uint64_t sample_tokens(const Dist& d, Rng& rng) {
  double v = sample(d, rng);
  auto t = static_cast<uint64_t>(std::llround(std::max(v, 4.0)));
  return ((t + 3) / 4) * 4;
}

double sample_seconds(const Dist& d, Rng& rng) {
  return std::max(sample(d, rng), 1e-6);
}

struct ZipfSampler {
  std::vector<double> cum;  // cumulative weights over ranks 1..n

  ZipfSampler(int n, double s) {
    cum.resize(n);
    double total = 0;
    for (int r = 1; r <= n; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r), s);
      cum[r - 1] = total;
    }
    for (auto& c : cum) c /= total;
  }
  int draw(Rng& rng) const {
    double u = rng.uniform01();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return static_cast<int>(it - cum.begin());  // 0-based rank
  }
};

Dist parse_dist(const nlohmann::json& j, const char* what) {
  Dist d;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") {
    d.kind = Dist::Kind::Fixed;
    d.a = j.at("value").get<double>();
  } else if (kind == "uniform") {
    d.kind = Dist::Kind::Uniform;
    d.a = j.at("min").get<double>();
    d.b = j.at("max").get<double>();
    if (d.b < d.a) throw std::runtime_error(std::string(what) + ": uniform max < min");
  } else if (kind == "exponential") {
    d.kind = Dist::Kind::Exponential;
    d.a = j.at("mean").get<double>();
  } else {
    throw std::runtime_error(std::string(what) + ": unknown dist kind '" + kind + "'");
  }
  return d;
}

}  // namespace

GeneratorSpec load_generator_spec(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open generator spec: " + file.string());
  nlohmann::json j = nlohmann::json::parse(in);

  GeneratorSpec spec;
  spec.spec_version = j.at("spec_version").get<int>();
  if (spec.spec_version != 1)
    throw std::runtime_error("unsupported spec_version " + std::to_string(spec.spec_version));
  spec.start_time = j.value("start_time", 0.0);
  spec.duration = j.at("duration").get<double>();
  spec.user_count = j.at("user_count").get<int>();
  spec.user_zipf = j.value("user_zipf", 0.0);
  if (spec.duration <= 0) throw std::runtime_error("duration must be > 0");
  if (spec.user_count < 1) throw std::runtime_error("user_count must be >= 1");

  for (const auto& jc : j.at("classes")) {
    ClassSpec c;
    c.name = jc.at("name").get<std::string>();
    auto type = request_type_from_string(jc.at("type").get<std::string>());
    if (!type) throw std::runtime_error("class '" + c.name + "': unknown request type");
    c.type = *type;
    c.arrival_rate = jc.at("arrival_rate").get<double>();
    if (c.arrival_rate <= 0) throw std::runtime_error("class '" + c.name + "': arrival_rate must be > 0");
    c.prompt_pool = jc.value("prompt_pool", 0);
    c.shared_prompt_fraction = jc.value("shared_prompt_fraction", 1.0);
    c.prompt_tokens = parse_dist(jc.at("prompt_tokens"), "prompt_tokens");
    c.suffix_tokens = parse_dist(jc.at("suffix_tokens"), "suffix_tokens");
    c.output_tokens = parse_dist(jc.at("output_tokens"), "output_tokens");
    if (jc.contains("next_turn_prob"))
      c.next_turn_prob = jc["next_turn_prob"].get<std::vector<double>>();
    for (double p : c.next_turn_prob)
      if (p < 0 || p >= 1) throw std::runtime_error("class '" + c.name + "': next_turn_prob must be in [0,1)");
    c.think_time = jc.contains("think_time") ? parse_dist(jc["think_time"], "think_time")
                                             : Dist{Dist::Kind::Fixed, 30.0, 0};
    spec.classes.push_back(std::move(c));
  }
  if (spec.classes.empty()) throw std::runtime_error("generator spec has no classes");
  return spec;
}

std::vector<TraceRecord> generate_synthetic(const GeneratorSpec& spec, uint64_t seed) {
  Rng rng(seed);
  uint64_t next_group = 1;  // every fresh group hash is a new natural number
  auto fresh_groups = [&](uint64_t tokens) {
    std::vector<uint64_t> g(tokens / 4);
    for (auto& v : g) v = next_group++;
    return g;
  };

  // Shared prompt pools are built up front in class order so later sampling
  // order cannot perturb them.
  std::vector<std::vector<std::vector<uint64_t>>> pools(spec.classes.size());
  for (size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const auto& c = spec.classes[ci];
    pools[ci].reserve(c.prompt_pool);
    for (int p = 0; p < c.prompt_pool; ++p)
      pools[ci].push_back(fresh_groups(sample_tokens(c.prompt_tokens, rng)));
  }
  std::map<std::pair<size_t, int>, std::vector<uint64_t>> private_prompts;

  ZipfSampler zipf(spec.user_count, spec.user_zipf);
  std::vector<TraceRecord> records;
  uint64_t session_no = 0;

  for (size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const auto& c = spec.classes[ci];
    double t = spec.start_time;
    while (true) {
      t += rng.exponential(1.0 / c.arrival_rate);
      if (t >= spec.start_time + spec.duration) break;

      ++session_no;
      int user = zipf.draw(rng);
      std::string user_id = "u" + std::to_string(user + 1);

      const std::vector<uint64_t>* prompt = nullptr;
      bool use_shared = c.prompt_pool > 0 && rng.uniform01() < c.shared_prompt_fraction;
      if (use_shared) {
        prompt = &pools[ci][rng.below(static_cast<uint64_t>(c.prompt_pool))];
      } else {
        auto key = std::make_pair(ci, user);
        auto it = private_prompts.find(key);
        if (it == private_prompts.end())
          it = private_prompts.emplace(key, fresh_groups(sample_tokens(c.prompt_tokens, rng))).first;
        prompt = &it->second;
      }

      // Inputs carry the full concatenated history (as-recorded semantics).
      std::vector<uint64_t> history(*prompt);
      double turn_time = t;
      std::string parent_id;
      int turn = 0;
      char idbuf[32];
      while (true) {
        ++turn;
        auto suffix = fresh_groups(sample_tokens(c.suffix_tokens, rng));
        history.insert(history.end(), suffix.begin(), suffix.end());

        TraceRecord r;
        r.timestamp = turn_time;
        std::snprintf(idbuf, sizeof(idbuf), "s%06llut%02d",
                      static_cast<unsigned long long>(session_no), turn);
        r.chat_id = idbuf;
        r.parent_chat_id = parent_id;
        r.user_id = user_id;
        r.type = c.type;
        r.input_hashes = history;
        r.input_tokens = r.input_hashes.size() * 4;
        r.output_hashes = fresh_groups(sample_tokens(c.output_tokens, rng));
        r.output_tokens = r.output_hashes.size() * 4;

        history.insert(history.end(), r.output_hashes.begin(), r.output_hashes.end());
        parent_id = r.chat_id;
        records.push_back(std::move(r));

        double p_next = 0;
        if (!c.next_turn_prob.empty())
          p_next = c.next_turn_prob[std::min<size_t>(turn - 1, c.next_turn_prob.size() - 1)];
        if (rng.uniform01() >= p_next) break;
        turn_time += sample_seconds(c.think_time, rng);
      }
    }
  }

  std::stable_sort(records.begin(), records.end(),
                   [](const TraceRecord& a, const TraceRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  return records;
}

}  // namespace kvsim
