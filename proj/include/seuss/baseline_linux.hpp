#pragma once

// Analytic model of a Linux node running one Docker container per cached
// function instance: creation cost that grows with resident and concurrent
// containers, a bounded container cache with LRU eviction, a bridge endpoint
// limit and a pool of pre-initialized runtime containers.

#include <cstdint>
#include <list>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "seuss/sim.hpp"
#include "seuss/workload.hpp"

namespace seuss {

struct ContainerModel {
  double create_base_ms = 541.0;
  double create_per_instance_ms = (1900.0 - 541.0) / 3000.0;
  double create_per_concurrent_ms = 60.0;
  double delete_factor = 0.5;
  /// Log-normal multiplier on every create/delete, median 1.
  double jitter_sigma = 0.2134;
  double unpause_ms = 40.0;
  double hot_ms = 0.82;
  double import_compile_ms = 400.0;
  std::uint32_t density_limit = 3000;
  std::uint32_t cache_limit = 1024;
  std::uint32_t bridge_capacity = 1024;
  std::uint32_t prewarm_pool_size = 0;
  std::uint32_t prewarm_parallelism = 4;
  double microvm_create_ms = 3000.0;
  std::uint32_t microvm_density = 450;
  /// Per-instance memory, used for the memory timeline only.
  std::uint64_t container_footprint_kib = 30758;

  void validate() const;
};

/// Creation latency without jitter. `concurrent` counts lifecycle operations
/// in flight including this one; each one beyond the first adds
/// create_per_concurrent_ms.
double container_create_latency(const ContainerModel& cm, std::uint64_t resident,
                                std::uint64_t concurrent);

/// Counters exposed for tests and timelines.
struct ContainerCounts {
  std::uint64_t bound = 0;          // containers bound to a function, idle or busy
  std::uint64_t idle = 0;
  std::uint64_t prewarm_ready = 0;
  std::uint64_t creating = 0;       // bound-to-be and prewarm creations in flight
  std::uint64_t deleting = 0;

  std::uint64_t resident() const noexcept { return bound + prewarm_ready + creating + deleting; }
  std::uint64_t endpoints() const noexcept { return bound + prewarm_ready; }
};

class LinuxNode final : public NodeBackend {
 public:
  LinuxNode(const ContainerModel& model, EventQueue& events, CorePool& cores,
            std::uint64_t seed, CompletionFn on_complete);

  void arrive(const Arrival& a) override;
  TimelineSample sample() const override;
  std::uint64_t bytes_resident() const override;
  std::uint64_t cache_entries() const override { return counts_.bound + counts_.prewarm_ready; }

  const ContainerCounts& counts() const noexcept { return counts_; }
  std::uint64_t peak_resident() const noexcept { return peak_resident_; }

 private:
  struct Container {
    std::string fn_id;
    std::list<std::uint64_t>::iterator lru_pos;  // valid while idle
    bool idle = false;
  };

  Micros jittered(double ms);
  std::uint64_t lifecycle_ops() const noexcept { return counts_.creating + counts_.deleting; }
  void note_resident();

  std::uint64_t new_container(const std::string& fn_id);
  void make_idle(std::uint64_t id);
  std::uint64_t take_idle(const std::string& fn_id);
  /// Starts deleting the least recently used idle container; returns how
  /// long the deletion takes.
  Micros evict_lru();
  void start_cold(const Arrival& a);
  void connect(const Arrival& a, std::uint64_t container, Path path, Micros start);
  void refill();

  ContainerModel model_;
  EventQueue& events_;
  CorePool& cores_;
  Prng jitter_rng_;
  CompletionFn on_complete_;

  std::unordered_map<std::uint64_t, Container> containers_;
  std::unordered_map<std::string, std::vector<std::uint64_t>> idle_by_fn_;  // MRU at back
  std::list<std::uint64_t> idle_lru_;                                     // LRU at front
  std::uint64_t next_container_ = 1;
  std::uint64_t creating_prewarm_ = 0;
  std::uint64_t creating_bound_ = 0;
  ContainerCounts counts_;
  std::uint64_t peak_resident_ = 0;
};

}  // namespace seuss
