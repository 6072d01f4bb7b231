#include "kvsim/session.hpp"

#include <algorithm>
#include <stdexcept>

namespace kvsim {

LinkResult link_sessions(std::span<const TraceRecord> records) {
  LinkResult out;
  const size_t n = records.size();
  out.turn_number.assign(n, 0);
  out.session_of.assign(n, -1);

  std::unordered_map<std::string, size_t> by_id;
  by_id.reserve(n);
  for (size_t i = 0; i < n; ++i) by_id.emplace(records[i].chat_id, i);

  // parent index per record, -1 for roots (missing parents become roots, flagged)
  std::vector<ptrdiff_t> parent(n, -1);
  std::vector<std::vector<size_t>> children(n);
  std::vector<size_t> roots;
  for (size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    if (r.parent_chat_id.empty()) {
      roots.push_back(i);
      continue;
    }
    auto it = by_id.find(r.parent_chat_id);
    if (it == by_id.end()) {
      out.diagnostics.push_back(
          RowDiagnostic{0, "parent_chat_id",
                        "record '" + r.chat_id + "' references unknown parent '" +
                            r.parent_chat_id + "'; treated as session root"});
      roots.push_back(i);
      continue;
    }
    if (it->second == i) throw std::runtime_error("parent cycle at '" + r.chat_id + "'");
    parent[i] = static_cast<ptrdiff_t>(it->second);
    children[it->second].push_back(i);
    if (records[it->second].timestamp >= r.timestamp)
      out.diagnostics.push_back(
          RowDiagnostic{0, "timestamp",
                        "record '" + r.chat_id + "' is not later than its parent '" +
                            r.parent_chat_id + "'"});
  }

  // BFS from the roots; anything unreached sits on a parent cycle.
  size_t visited = 0;
  for (size_t root : roots) {
    Session s;
    s.session_id = records[root].chat_id;
    std::vector<size_t> queue{root};
    out.turn_number[root] = 1;
    int sess_idx = static_cast<int>(out.sessions.size());
    for (size_t qi = 0; qi < queue.size(); ++qi) {
      size_t cur = queue[qi];
      out.session_of[cur] = sess_idx;
      s.turns.push_back(cur);
      s.max_turn = std::max(s.max_turn, out.turn_number[cur]);
      ++visited;
      for (size_t child : children[cur]) {
        out.turn_number[child] = out.turn_number[cur] + 1;
        queue.push_back(child);
      }
    }
    std::sort(s.turns.begin(), s.turns.end(), [&](size_t a, size_t b) {
      if (out.turn_number[a] != out.turn_number[b])
        return out.turn_number[a] < out.turn_number[b];
      if (records[a].timestamp != records[b].timestamp)
        return records[a].timestamp < records[b].timestamp;
      return a < b;
    });
    out.sessions.push_back(std::move(s));
  }
  if (visited != n) {
    for (size_t i = 0; i < n; ++i)
      if (out.session_of[i] < 0)
        throw std::runtime_error("parent cycle at '" + records[i].chat_id + "'");
  }
  return out;
}

TraceContext build_context(std::vector<TraceRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const TraceRecord& a, const TraceRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  TraceContext ctx;
  ctx.records = std::move(records);
  ctx.links = link_sessions(ctx.records);
  ctx.by_chat_id.reserve(ctx.records.size());
  for (size_t i = 0; i < ctx.records.size(); ++i)
    ctx.by_chat_id.emplace(ctx.records[i].chat_id, i);
  return ctx;
}

std::vector<uint64_t> expand_input(const TraceContext& ctx, size_t idx, ExpandMode mode) {
  const TraceRecord& rec = ctx.records[idx];
  if (mode == ExpandMode::AsRecorded) return rec.input_hashes;

  // Walk to the root collecting the ancestor chain, then concatenate
  // input+output per ancestor in root-first order, ending with our own delta.
  std::vector<size_t> chain;
  size_t cur = idx;
  while (!ctx.records[cur].parent_chat_id.empty()) {
    auto it = ctx.by_chat_id.find(ctx.records[cur].parent_chat_id);
    if (it == ctx.by_chat_id.end()) break;  // dangling parent: treat as root
    cur = it->second;
    chain.push_back(cur);
    if (chain.size() > ctx.records.size())
      throw std::runtime_error("parent cycle while expanding '" + rec.chat_id + "'");
  }
  std::vector<uint64_t> groups;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const TraceRecord& a = ctx.records[*it];
    groups.insert(groups.end(), a.input_hashes.begin(), a.input_hashes.end());
    groups.insert(groups.end(), a.output_hashes.begin(), a.output_hashes.end());
  }
  groups.insert(groups.end(), rec.input_hashes.begin(), rec.input_hashes.end());
  return groups;
}

std::vector<TraceRecord> scale_trace(std::span<const TraceRecord> records,
                                     double qps_factor) {
  if (!(qps_factor > 0)) throw std::invalid_argument("qps_factor must be > 0");
  std::vector<TraceRecord> out(records.begin(), records.end());
  for (auto& r : out) r.timestamp /= qps_factor;
  return out;
}

}  // namespace kvsim
