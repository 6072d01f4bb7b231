#pragma once

#include <cstdint>
#include <vector>

#include "kvsim/prefix.hpp"
#include "kvsim/session.hpp"

namespace kvsim {

struct BlockStreamOptions {
  int block_tokens = 4;  // multiple of 4; 4 = the trace's native group size
  ExpandMode mode = ExpandMode::AsRecorded;
  uint64_t prefix_seed = kDefaultPrefixSeed;
  bool include_outputs = true;  // count blocks first produced by decode
  double decode_delay_per_token = 0;  // completion = arrival + delay * output_tokens
  int turn_cap = kTurnCap;
};

struct BlockKey {
  uint64_t key = 0;
  uint32_t offset = 0;  // block index within the request's full sequence
};

// One record expanded to cache blocks. Block b covers groups
// [b*gpb, (b+1)*gpb) of the concatenated input+output group sequence and is
// keyed by the PrefixKey of its last group. A trailing run of groups shorter
// than one block is dropped. Blocks straddling the input/output boundary
// count as output blocks: they only exist once decode finishes.
struct RecordBlocks {
  size_t record_index = 0;
  double arrival = 0;
  double completion = 0;
  RequestCategory category;
  std::vector<BlockKey> input_blocks;
  std::vector<BlockKey> output_blocks;
};

std::vector<RecordBlocks> expand_blocks(const TraceContext& ctx,
                                        const BlockStreamOptions& opts);

struct BlockAccess {
  uint64_t key = 0;
  double time = 0;
  RequestCategory category;
  uint32_t offset = 0;
  bool is_input = true;  // false: insertion of a decode-produced block
  uint32_t record_index = 0;
};

// Flattens expanded records into the exact order the cache sees them:
// completions with time <= an arrival are drained ahead of it, and a record's
// own outputs always follow its inputs (relevant when the decode delay is 0).
std::vector<BlockAccess> build_block_stream(const std::vector<RecordBlocks>& blocks,
                                            bool include_outputs = true);

std::vector<BlockAccess> build_block_stream(const TraceContext& ctx,
                                            const BlockStreamOptions& opts);

}  // namespace kvsim
