#include "kvsim/blockstream.hpp"

#include <queue>
#include <stdexcept>

namespace kvsim {

std::vector<RecordBlocks> expand_blocks(const TraceContext& ctx,
                                        const BlockStreamOptions& opts) {
  if (opts.block_tokens < 4 || opts.block_tokens % 4 != 0)
    throw std::invalid_argument("block_tokens must be a positive multiple of 4");
  const size_t gpb = static_cast<size_t>(opts.block_tokens) / 4;

  std::vector<RecordBlocks> out;
  out.reserve(ctx.records.size());
  for (size_t i = 0; i < ctx.records.size(); ++i) {
    const TraceRecord& rec = ctx.records[i];
    RecordBlocks rb;
    rb.record_index = i;
    rb.arrival = rec.timestamp;
    rb.completion = rec.timestamp + opts.decode_delay_per_token *
                                        static_cast<double>(rec.output_tokens);
    rb.category = ctx.category_of(i, opts.turn_cap);

    std::vector<uint64_t> groups = expand_input(ctx, i, opts.mode);
    const size_t input_groups = groups.size();
    groups.insert(groups.end(), rec.output_hashes.begin(), rec.output_hashes.end());
    auto keys = prefix_keys(groups, opts.prefix_seed);

    const size_t full_blocks = groups.size() / gpb;
    const size_t input_full = input_groups / gpb;
    for (size_t b = 0; b < full_blocks; ++b) {
      BlockKey bk{keys[(b + 1) * gpb - 1].value, static_cast<uint32_t>(b)};
      (b < input_full ? rb.input_blocks : rb.output_blocks).push_back(bk);
    }
    out.push_back(std::move(rb));
  }
  return out;
}

std::vector<BlockAccess> build_block_stream(const std::vector<RecordBlocks>& blocks,
                                            bool include_outputs) {
  struct Pending {
    double time;
    size_t idx;  // into blocks
    bool operator>(const Pending& o) const {
      return time != o.time ? time > o.time : idx > o.idx;
    }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
  std::vector<BlockAccess> stream;

  auto emit_outputs = [&](size_t idx) {
    const RecordBlocks& rb = blocks[idx];
    for (const BlockKey& bk : rb.output_blocks)
      stream.push_back(BlockAccess{bk.key, rb.completion, rb.category, bk.offset, false,
                                   static_cast<uint32_t>(rb.record_index)});
  };

  for (size_t i = 0; i < blocks.size(); ++i) {
    const RecordBlocks& rb = blocks[i];
    while (!pending.empty() && pending.top().time <= rb.arrival) {
      emit_outputs(pending.top().idx);
      pending.pop();
    }
    for (const BlockKey& bk : rb.input_blocks)
      stream.push_back(BlockAccess{bk.key, rb.arrival, rb.category, bk.offset, true,
                                   static_cast<uint32_t>(rb.record_index)});
    if (include_outputs) pending.push(Pending{rb.completion, i});
  }
  while (!pending.empty()) {
    emit_outputs(pending.top().idx);
    pending.pop();
  }
  return stream;
}

std::vector<BlockAccess> build_block_stream(const TraceContext& ctx,
                                            const BlockStreamOptions& opts) {
  return build_block_stream(expand_blocks(ctx, opts), opts.include_outputs);
}

}  // namespace kvsim
