#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kvsim/trace_io.hpp"

namespace kvsim {

// A conversation: the chain (or tree, if a turn was regenerated) of records
// reachable from one parentless root via parent_chat_id links.
struct Session {
  std::string session_id;  // root chat_id
  std::vector<size_t> turns;  // record indexes, ordered by (turn number, timestamp)
  int max_turn = 1;
};

struct LinkResult {
  std::vector<Session> sessions;
  std::vector<int> turn_number;  // per record index, 1-based
  std::vector<int> session_of;   // per record index, into sessions
  std::vector<RowDiagnostic> diagnostics;  // dangling parents, timestamp order violations
};

// Every record lands in exactly one session. A record whose parent_chat_id is
// unknown becomes its own session root and is flagged. Parent cycles throw.
LinkResult link_sessions(std::span<const TraceRecord> records);

enum class ExpandMode {
  AsRecorded,   // input_hashes already carry the full concatenated history
  Reconstruct,  // input_hashes are the per-turn delta; history is rebuilt from ancestors
};

// Parsed trace plus the linkage and lookups everything downstream needs.
struct TraceContext {
  std::vector<TraceRecord> records;  // time-ordered, stable on ties
  LinkResult links;
  std::unordered_map<std::string, size_t> by_chat_id;

  int turn_of(size_t idx) const { return links.turn_number[idx]; }
  RequestCategory category_of(size_t idx, int turn_cap = kTurnCap) const {
    return make_category(records[idx].type, turn_of(idx), turn_cap);
  }
};

// Sorts stably by timestamp and links. Throws on parent cycles.
TraceContext build_context(std::vector<TraceRecord> records);

// Full model-visible input of a record, as 4-token group hashes.
std::vector<uint64_t> expand_input(const TraceContext& ctx, size_t idx, ExpandMode mode);

// Compresses time: t -> t / qps_factor. factor 2 doubles offered load. Ids,
// hashes and token counts are untouched. Throws unless factor > 0.
std::vector<TraceRecord> scale_trace(std::span<const TraceRecord> records, double qps_factor);

}  // namespace kvsim
