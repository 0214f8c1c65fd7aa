#pragma once

// Warm pool (function snapshots), per-core hot tubs (idle UCs) and the OOM
// reclaimer that destroys idle UCs when resident memory runs high.

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "seuss/pagestore.hpp"
#include "seuss/uc.hpp"

namespace seuss {

struct MemoryBudget {
  std::uint64_t capacity_bytes = 0;
  std::uint64_t oom_threshold_bytes = 0;

  /// Threshold as a fraction of capacity (default 5%).
  static MemoryBudget with_fraction(std::uint64_t capacity_bytes, double fraction = 0.05);
  /// Throws std::invalid_argument unless 0 < threshold < capacity.
  void validate() const;
  std::uint64_t reclaim_above() const noexcept { return capacity_bytes - oom_threshold_bytes; }
};

/// At most one snapshot per function. Each stored snapshot carries one hold
/// reference owned by the pool; dropped snapshots are collected once their
/// last UC goes away.
class WarmPool {
 public:
  WarmPool() = default;
  WarmPool(const WarmPool&) = delete;
  WarmPool& operator=(const WarmPool&) = delete;
  ~WarmPool();

  const FunctionSnapshot* find(const std::string& fn_id) const;
  void admit(FunctionSnapshot fs);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  absl::flat_hash_map<std::string, FunctionSnapshot> entries_;
};

/// Idle UCs per core, with a global least-recently-idle order used for both
/// eviction and OOM reclaim.
class HotTub {
 public:
  HotTub(int cores, std::size_t capacity_per_core);

  /// Moves `uc` into the core's tub if there is room. On false the caller
  /// still owns `uc` and is expected to destroy it.
  bool admit(UnikernelContext& uc, std::uint64_t now);
  /// Removes and returns the most recently idled UC for fn_id on `core`.
  std::optional<UnikernelContext> take(const std::string& fn_id, int core);
  bool contains(const std::string& fn_id, int core) const;
  /// Destroys the least recently idled UC. False if the tub is empty.
  bool destroy_lru();

  std::size_t size() const noexcept { return lru_.size(); }
  std::size_t size(int core) const { return per_core_.at(static_cast<std::size_t>(core)); }
  std::size_t capacity_per_core() const noexcept { return capacity_; }
  int cores() const noexcept { return static_cast<int>(per_core_.size()); }
  /// uc_ids in least-recently-idle order.
  std::vector<std::uint64_t> lru_order() const;

 private:
  struct Entry {
    UnikernelContext uc;
    std::uint64_t idle_since;
    int core;
    std::string fn_id;
  };
  using Slot = std::list<Entry>::iterator;

  void unlink(Slot slot);

  std::size_t capacity_;
  std::list<Entry> lru_;
  std::vector<absl::flat_hash_map<std::string, std::vector<Slot>>> index_;
  std::vector<std::size_t> per_core_;
};

enum class PathKind { kHot, kWarm, kCold };

const char* to_string(PathKind kind);

struct PathDecision {
  PathKind kind = PathKind::kCold;
  std::optional<UnikernelContext> uc;       // kHot
  std::optional<FunctionSnapshot> snapshot;  // kWarm
};

/// Destroys idle UCs, least recently idle first, while the store holds more
/// than capacity - threshold bytes. Running UCs and warm snapshots are never
/// touched. Returns the number destroyed.
std::size_t reclaim_idle(const MemoryBudget& budget, const PageStore& store, HotTub& tubs);

class Caches {
 public:
  Caches(int cores, std::size_t hot_capacity_per_core, MemoryBudget budget);

  /// Hot if the core's tub has an idle UC for fn_id (removed from the tub),
  /// else Warm if the pool has a snapshot, else Cold.
  PathDecision lookup(const std::string& fn_id, int core);
  void admit_warm(FunctionSnapshot fs) { warm_.admit(std::move(fs)); }
  bool admit_hot(UnikernelContext& uc, std::uint64_t now) { return hot_.admit(uc, now); }
  std::size_t reclaim_idle(const PageStore& store) {
    return seuss::reclaim_idle(budget_, store, hot_);
  }

  WarmPool& warm() noexcept { return warm_; }
  const WarmPool& warm() const noexcept { return warm_; }
  HotTub& hot() noexcept { return hot_; }
  const HotTub& hot() const noexcept { return hot_; }
  const MemoryBudget& budget() const noexcept { return budget_; }

 private:
  WarmPool warm_;
  HotTub hot_;
  MemoryBudget budget_;
};

}  // namespace seuss
