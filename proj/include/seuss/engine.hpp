#pragma once

// One simulated compute node behind the control plane. Clients submit
// requests; the control plane rate-limits and delays them; the node (SEUSS
// or the Linux container model) runs them on its worker cores.

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "seuss/baseline_linux.hpp"
#include "seuss/caches.hpp"
#include "seuss/cost_model.hpp"
#include "seuss/pagestore.hpp"
#include "seuss/sim.hpp"
#include "seuss/uc.hpp"
#include "seuss/workload.hpp"

namespace seuss {

enum class Backend { kSeuss, kLinux };

const char* to_string(Backend b);
/// Throws std::invalid_argument for anything but "seuss" or "linux".
Backend parse_backend(const std::string& name);

struct FunctionDefaults {
  std::uint32_t source_pages = 136;
  std::uint32_t exec_pages = 391;
  std::uint32_t hot_exec_pages = 13;
};

struct NodeConfig {
  Backend backend = Backend::kSeuss;
  int worker_cores = 16;
  std::uint64_t memory_bytes = 88ULL << 30;
  double oom_threshold_fraction = 0.05;
  std::size_t hot_tub_capacity_per_core = 64;
  std::size_t page_size = 4096;
  CostModel cost;
  ContainerModel containers;
  AnticipatoryConfig anticipatory;
  FunctionDefaults functions;
  /// Token bucket depth at the control plane; 0 means "number of clients".
  std::uint32_t control_plane_burst = 0;

  void validate() const;
};

struct SimulationResult {
  std::vector<RequestRecord> records;  // indexed by request_id
  std::vector<TimelineSample> timeline;
  std::uint64_t peak_bytes_resident = 0;
  std::uint64_t cache_entries = 0;
  Micros end_us = 0;
};

/// The SEUSS node: runtime template, warm pool, hot tubs and OOM reclaim
/// over a real page store.
class SeussNode final : public NodeBackend {
 public:
  SeussNode(const NodeConfig& cfg, EventQueue& events, CorePool& cores,
            CompletionFn on_complete);
  ~SeussNode() override;

  void arrive(const Arrival& a) override;
  TimelineSample sample() const override;
  std::uint64_t bytes_resident() const override { return store_.stats().bytes_resident; }
  std::uint64_t cache_entries() const override {
    return caches_->warm().size() + caches_->hot().size();
  }

  const PageStore& store() const noexcept { return store_; }
  const Caches& caches() const noexcept { return *caches_; }

 private:
  FunctionProfile profile_for(const RequestSpec& spec) const;
  CorePool::Work start_on(const Arrival& a, int core);
  void finish(const Arrival& a, int core, Path path, Micros server_us);

  NodeConfig cfg_;
  PathCosts costs_;
  EventQueue& events_;
  CorePool& cores_;
  CompletionFn on_complete_;
  FifoStage shim_;
  PageStore store_;
  RuntimeTemplate template_;
  std::unique_ptr<Caches> caches_;
  std::unordered_map<std::uint64_t, UnikernelContext> running_;  // by request id
  std::unordered_map<std::uint64_t, FunctionSnapshot> pending_warm_;
  std::uint64_t next_pending_ = 0;
};

/// Runs `w` to completion. Deterministic in (cfg, w, seed). Timeline samples
/// are taken every sample_interval_us (none if 0) plus one at the end.
SimulationResult run_until_idle(const NodeConfig& cfg, const Workload& w, std::uint64_t seed,
                                Micros sample_interval_us = 0);

}  // namespace seuss
