#include "kvsim/policy.hpp"

#include <cassert>
#include <list>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

namespace kvsim {

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Lru: return "lru";
    case PolicyKind::Fifo: return "fifo";
    case PolicyKind::Lfu: return "lfu";
    case PolicyKind::S3Fifo: return "s3fifo";
    case PolicyKind::Gdfs: return "gdfs";
    case PolicyKind::Wa: return "wa";
  }
  return "lru";
}

std::optional<PolicyKind> policy_from_string(std::string_view s) {
  if (s == "lru") return PolicyKind::Lru;
  if (s == "fifo") return PolicyKind::Fifo;
  if (s == "lfu") return PolicyKind::Lfu;
  if (s == "s3fifo") return PolicyKind::S3Fifo;
  if (s == "gdfs") return PolicyKind::Gdfs;
  if (s == "wa") return PolicyKind::Wa;
  return std::nullopt;
}

double gdfs_priority(double clock, uint64_t frequency, double cost, double size) {
  if (!(size > 0)) throw std::invalid_argument("size must be > 0");
  return clock + static_cast<double>(frequency) * cost / size;
}

double wa_priority(const BlockEntry& e, const EvictContext& ctx) {
  const CategoryFit* fit = ctx.fits ? ctx.fits->find(e.category) : nullptr;
  // reuse_fraction 0 would flatten the whole category to priority 0 and the
  // rank would no longer be monotone in queue order; rank by age instead
  if (fit && fit->fitted && fit->reuse_fraction > 0)
    return *reuse_probability(*fit, ctx.now - e.last_access, ctx.life);
  return -(ctx.now - e.last_access);
}

namespace {

// Victim = lexicographic minimum of (primary, -offset, insert_time, seq).
// Ties on the primary evict the larger offset first, then the older block.
struct Rank {
  double primary;
  double neg_offset;
  double insert_time;
  uint64_t seq;
  uint64_t key;

  bool operator<(const Rank& o) const {
    return std::tie(primary, neg_offset, insert_time, seq) <
           std::tie(o.primary, o.neg_offset, o.insert_time, o.seq);
  }
};

class RankedPolicy : public TierPolicy {
 public:
  void on_insert(const BlockEntry& e) override {
    auto [it, ok] = ranks_.emplace(e.key, rank_of(e));
    assert(ok);
    order_.insert(it->second);
  }
  void on_access(const BlockEntry& before, const BlockEntry& after) override {
    (void)before;
    auto it = ranks_.find(after.key);
    assert(it != ranks_.end());
    order_.erase(it->second);
    it->second = rank_of(after);
    order_.insert(it->second);
  }
  void on_remove(const BlockEntry& e) override {
    auto it = ranks_.find(e.key);
    if (it == ranks_.end()) return;
    order_.erase(it->second);
    ranks_.erase(it);
  }
  uint64_t choose_victim(const EvictContext&) override {
    assert(!order_.empty());
    return order_.begin()->key;
  }

 protected:
  virtual double primary(const BlockEntry& e) const = 0;

  Rank rank_of(const BlockEntry& e) const {
    return Rank{primary(e), -static_cast<double>(e.offset), e.insert_time, e.seq, e.key};
  }

  std::set<Rank> order_;
  std::unordered_map<uint64_t, Rank> ranks_;
};

class LruPolicy final : public RankedPolicy {
  double primary(const BlockEntry& e) const override { return e.last_access; }
};

class FifoPolicy final : public RankedPolicy {
  double primary(const BlockEntry& e) const override { return e.insert_time; }
};

class LfuPolicy final : public RankedPolicy {
  double primary(const BlockEntry& e) const override {
    return static_cast<double>(e.frequency);
  }
};

// Priority frozen at insert/access time using the then-current clock; evicting
// a block inflates the clock to its priority.
class GdfsPolicy final : public RankedPolicy {
 public:
  explicit GdfsPolicy(double miss_cost) : cost_(miss_cost) {}

  uint64_t choose_victim(const EvictContext& ctx) override {
    uint64_t key = RankedPolicy::choose_victim(ctx);
    clock_ = order_.begin()->primary;
    return key;
  }

 private:
  double primary(const BlockEntry& e) const override {
    return gdfs_priority(clock_, e.frequency, cost_, 1.0);
  }

  double cost_;
  double clock_ = 0;
};

// Small/main/ghost queues. The 10% small target picks which queue the
// eviction scan starts from; total occupancy is enforced by the tier. Ghost
// holds keys only. Promotion uses accesses since the block entered the small
// queue so history from an earlier residency cannot leak in.
class S3FifoPolicy final : public TierPolicy {
 public:
  explicit S3FifoPolicy(size_t capacity)
      : small_target_(std::max<size_t>(1, capacity / 10)),
        ghost_cap_(std::max<size_t>(1, capacity - std::min(capacity, small_target_))) {}

  void on_insert(const BlockEntry& e) override {
    Node n;
    n.stint = 1;
    if (auto git = ghost_idx_.find(e.key); git != ghost_idx_.end()) {
      ghost_.erase(git->second);
      ghost_idx_.erase(git);
      n.in_main = true;
      n.it = main_.insert(main_.end(), e.key);
    } else {
      n.in_main = false;
      n.it = small_.insert(small_.end(), e.key);
    }
    nodes_.emplace(e.key, n);
  }

  void on_access(const BlockEntry&, const BlockEntry& after) override {
    auto it = nodes_.find(after.key);
    assert(it != nodes_.end());
    ++it->second.stint;
    if (it->second.in_main) it->second.second_chance = true;
  }

  void on_remove(const BlockEntry& e) override {
    auto it = nodes_.find(e.key);
    if (it == nodes_.end()) return;
    (it->second.in_main ? main_ : small_).erase(it->second.it);
    nodes_.erase(it);
  }

  uint64_t choose_victim(const EvictContext&) override {
    while (true) {
      bool scan_small = !small_.empty() && (small_.size() >= small_target_ || main_.empty());
      if (scan_small) {
        uint64_t key = small_.front();
        small_.pop_front();
        Node& n = nodes_.at(key);
        if (n.stint >= 2) {  // promote and keep scanning
          n.in_main = true;
          n.second_chance = false;
          n.it = main_.insert(main_.end(), key);
          continue;
        }
        ghost_push(key);
        nodes_.erase(key);
        return key;
      }
      assert(!main_.empty());
      uint64_t key = main_.front();
      main_.pop_front();
      Node& n = nodes_.at(key);
      if (n.second_chance) {
        n.second_chance = false;
        n.it = main_.insert(main_.end(), key);
        continue;
      }
      nodes_.erase(key);
      return key;
    }
  }

 private:
  struct Node {
    std::list<uint64_t>::iterator it;
    bool in_main = false;
    bool second_chance = false;
    uint32_t stint = 0;  // accesses since entering the small queue
  };

  void ghost_push(uint64_t key) {
    ghost_idx_.emplace(key, ghost_.insert(ghost_.end(), key));
    if (ghost_.size() > ghost_cap_) {
      ghost_idx_.erase(ghost_.front());
      ghost_.pop_front();
    }
  }

  size_t small_target_;
  size_t ghost_cap_;
  std::list<uint64_t> small_, main_, ghost_;
  std::unordered_map<uint64_t, Node> nodes_;
  std::unordered_map<uint64_t, std::list<uint64_t>::iterator> ghost_idx_;
};

// One recency queue per category; within a queue the eviction rank
// (wa_priority, -offset, insert_time, seq) is monotone in queue order because
// the fitted reuse probability strictly decreases with idle time. Evaluating
// only the queue heads therefore reproduces the full scan at O(categories).
class WaPolicy final : public TierPolicy {
 public:
  void on_insert(const BlockEntry& e) override {
    Node n{e.last_access, -static_cast<double>(e.offset), e.insert_time, e.seq, e.key};
    queues_[e.category].insert(n);
    index_.emplace(e.key, Slot{e.category, n});
  }

  void on_access(const BlockEntry& before, const BlockEntry& after) override {
    (void)before;
    auto it = index_.find(after.key);
    assert(it != index_.end());
    erase_node(it->second);
    Node n{after.last_access, -static_cast<double>(after.offset), after.insert_time,
           after.seq, after.key};
    queues_[after.category].insert(n);
    it->second = Slot{after.category, n};
  }

  void on_remove(const BlockEntry& e) override {
    auto it = index_.find(e.key);
    if (it == index_.end()) return;
    erase_node(it->second);
    index_.erase(it);
  }

  uint64_t choose_victim(const EvictContext& ctx) override {
    bool have = false;
    Rank best{};
    for (const auto& [cat, queue] : queues_) {
      const Node& head = *queue.begin();
      double prio;
      const CategoryFit* fit = ctx.fits ? ctx.fits->find(cat) : nullptr;
      if (fit && fit->fitted && fit->reuse_fraction > 0)
        prio = *reuse_probability(*fit, ctx.now - head.last_access, ctx.life);
      else
        prio = -(ctx.now - head.last_access);
      Rank r{prio, head.neg_offset, head.insert_time, head.seq, head.key};
      if (!have || r < best) {
        best = r;
        have = true;
      }
    }
    assert(have);
    return best.key;
  }

 private:
  struct Node {
    double last_access;
    double neg_offset;
    double insert_time;
    uint64_t seq;
    uint64_t key;

    bool operator<(const Node& o) const {
      return std::tie(last_access, neg_offset, insert_time, seq) <
             std::tie(o.last_access, o.neg_offset, o.insert_time, o.seq);
    }
  };
  struct Slot {
    RequestCategory category;
    Node node;
  };

  void erase_node(const Slot& s) {
    auto qit = queues_.find(s.category);
    assert(qit != queues_.end());
    qit->second.erase(s.node);
    if (qit->second.empty()) queues_.erase(qit);
  }

  std::map<RequestCategory, std::set<Node>> queues_;
  std::unordered_map<uint64_t, Slot> index_;
};

}  // namespace

std::unique_ptr<TierPolicy> make_policy(PolicyKind kind, size_t capacity, double miss_cost) {
  switch (kind) {
    case PolicyKind::Lru: return std::make_unique<LruPolicy>();
    case PolicyKind::Fifo: return std::make_unique<FifoPolicy>();
    case PolicyKind::Lfu: return std::make_unique<LfuPolicy>();
    case PolicyKind::S3Fifo: return std::make_unique<S3FifoPolicy>(capacity);
    case PolicyKind::Gdfs: return std::make_unique<GdfsPolicy>(miss_cost);
    case PolicyKind::Wa: return std::make_unique<WaPolicy>();
  }
  throw std::invalid_argument("unknown policy kind");
}

void Tier::insert(BlockEntry e) {
  assert(map_.size() < capacity_);
  uint64_t key = e.key;
  auto [it, ok] = map_.emplace(key, std::move(e));
  assert(ok);
  (void)ok;
  policy_->on_insert(it->second);
}

BlockEntry Tier::take(uint64_t key) {
  auto it = map_.find(key);
  assert(it != map_.end());
  BlockEntry e = it->second;
  map_.erase(it);
  policy_->on_remove(e);
  return e;
}

void Tier::touch(uint64_t key, double now, RequestCategory category) {
  auto it = map_.find(key);
  assert(it != map_.end());
  BlockEntry before = it->second;
  it->second.last_access = now;
  it->second.category = category;
  ++it->second.frequency;
  policy_->on_access(before, it->second);
}

}  // namespace kvsim
