#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kvsim/record.hpp"

namespace kvsim {

// Scalar distribution. Token lengths are rounded up to a multiple of 4
// (minimum 4) when sampled; durations get a 1e-6 s floor.
struct Dist {
  enum class Kind { Fixed, Uniform, Exponential } kind = Kind::Fixed;
  double a = 0;  // Fixed: value; Uniform: min; Exponential: mean
  double b = 0;  // Uniform: max
};

struct ClassSpec {
  std::string name;
  RequestType type = RequestType::Text;
  double arrival_rate = 0;  // session starts per second (Poisson)
  int prompt_pool = 0;      // number of distinct shared system prompts
  double shared_prompt_fraction = 1.0;  // else a per-user private prompt
  Dist prompt_tokens;
  Dist suffix_tokens;  // unique per request
  Dist output_tokens;
  std::vector<double> next_turn_prob;  // indexed by turn, last entry repeats
  Dist think_time;
};

struct GeneratorSpec {
  int spec_version = 1;
  double start_time = 0;
  double duration = 0;  // session arrival window; turns may run past it
  int user_count = 1;
  double user_zipf = 0;  // 0 = uniform
  std::vector<ClassSpec> classes;
};

GeneratorSpec load_generator_spec(const std::filesystem::path& file);

// Deterministic for a fixed (spec, seed): same records, byte for byte after
// serialization. Sessions whose first turn falls inside the arrival window are
// emitted whole, so turn-count statistics carry no end-of-trace truncation bias.
std::vector<TraceRecord> generate_synthetic(const GeneratorSpec& spec, uint64_t seed);

}  // namespace kvsim
