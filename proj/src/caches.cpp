#include "seuss/caches.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seuss {

MemoryBudget MemoryBudget::with_fraction(std::uint64_t capacity_bytes, double fraction) {
  MemoryBudget b;
  b.capacity_bytes = capacity_bytes;
  b.oom_threshold_bytes =
      static_cast<std::uint64_t>(std::llround(static_cast<double>(capacity_bytes) * fraction));
  return b;
}

void MemoryBudget::validate() const {
  if (!(oom_threshold_bytes > 0 && oom_threshold_bytes < capacity_bytes))
    throw std::invalid_argument("memory budget requires 0 < oom_threshold < capacity");
}

const char* to_string(PathKind kind) {
  switch (kind) {
    case PathKind::kHot: return "hot";
    case PathKind::kWarm: return "warm";
    case PathKind::kCold: return "cold";
  }
  return "?";
}

// ---------------------------------------------------------------------------

WarmPool::~WarmPool() {
  for (auto& [fn, fs] : entries_) {
    release_snapshot(fs.snapshot);
    collect_when_unreferenced(fs.snapshot);
  }
}

const FunctionSnapshot* WarmPool::find(const std::string& fn_id) const {
  auto it = entries_.find(fn_id);
  return it == entries_.end() ? nullptr : &it->second;
}

void WarmPool::admit(FunctionSnapshot fs) {
  hold_snapshot(fs.snapshot);
  auto [it, inserted] = entries_.try_emplace(fs.fn_id, fs);
  if (!inserted) {
    SnapshotPtr old = std::move(it->second.snapshot);
    it->second = std::move(fs);
    release_snapshot(old);
    collect_when_unreferenced(old);
  }
}

// ---------------------------------------------------------------------------

HotTub::HotTub(int cores, std::size_t capacity_per_core)
    : capacity_(capacity_per_core),
      index_(static_cast<std::size_t>(cores)),
      per_core_(static_cast<std::size_t>(cores), 0) {
  if (cores < 1) throw std::invalid_argument("hot tub needs at least one core");
}

bool HotTub::admit(UnikernelContext& uc, std::uint64_t now) {
  if (uc.state() != UcState::kIdle)
    throw UcError(std::string("admit_hot: UC is ") + to_string(uc.state()));
  const auto core = static_cast<std::size_t>(uc.core());
  if (core >= per_core_.size()) throw std::out_of_range("admit_hot: bad core");
  if (per_core_[core] >= capacity_) return false;
  std::string fn = *uc.bound_fn();
  lru_.push_back(Entry{std::move(uc), now, static_cast<int>(core), fn});
  index_[core][fn].push_back(std::prev(lru_.end()));
  ++per_core_[core];
  return true;
}

void HotTub::unlink(Slot slot) {
  const auto core = static_cast<std::size_t>(slot->core);
  auto it = index_[core].find(slot->fn_id);
  auto& slots = it->second;
  slots.erase(std::find(slots.begin(), slots.end(), slot));
  if (slots.empty()) index_[core].erase(it);
  --per_core_[core];
}

std::optional<UnikernelContext> HotTub::take(const std::string& fn_id, int core) {
  auto& map = index_.at(static_cast<std::size_t>(core));
  auto it = map.find(fn_id);
  if (it == map.end()) return std::nullopt;
  Slot slot = it->second.back();
  UnikernelContext uc = std::move(slot->uc);
  unlink(slot);
  lru_.erase(slot);
  return uc;
}

bool HotTub::contains(const std::string& fn_id, int core) const {
  return index_.at(static_cast<std::size_t>(core)).contains(fn_id);
}

bool HotTub::destroy_lru() {
  if (lru_.empty()) return false;
  Slot slot = lru_.begin();
  destroy(slot->uc);
  unlink(slot);
  lru_.erase(slot);
  return true;
}

std::vector<std::uint64_t> HotTub::lru_order() const {
  std::vector<std::uint64_t> ids;
  ids.reserve(lru_.size());
  for (const Entry& e : lru_) ids.push_back(e.uc.uc_id());
  return ids;
}

// ---------------------------------------------------------------------------

std::size_t reclaim_idle(const MemoryBudget& budget, const PageStore& store, HotTub& tubs) {
  std::size_t reclaimed = 0;
  while (store.stats().bytes_resident > budget.reclaim_above() && tubs.destroy_lru())
    ++reclaimed;
  return reclaimed;
}

Caches::Caches(int cores, std::size_t hot_capacity_per_core, MemoryBudget budget)
    : hot_(cores, hot_capacity_per_core), budget_(budget) {
  budget_.validate();
}

PathDecision Caches::lookup(const std::string& fn_id, int core) {
  PathDecision d;
  if (auto uc = hot_.take(fn_id, core)) {
    d.kind = PathKind::kHot;
    d.uc = std::move(uc);
  } else if (const FunctionSnapshot* fs = warm_.find(fn_id)) {
    d.kind = PathKind::kWarm;
    d.snapshot = *fs;
  }
  return d;
}

}  // namespace seuss
