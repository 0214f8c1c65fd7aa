#pragma once

// The three experiments the CLI runs: the unique-function throughput sweep,
// the burst resiliency run and the instance density count.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seuss/config.hpp"
#include "seuss/engine.hpp"
#include "seuss/metrics.hpp"

namespace seuss {

/// start, 2*start, 4*start, ... up to and including end.
std::vector<std::uint64_t> sweep_points(std::uint64_t start, std::uint64_t end);

struct ThroughputTrial {
  std::uint64_t m = 0;
  Backend backend = Backend::kSeuss;
  SimulationResult sim;
  SummaryStats stats;
};

ThroughputTrial run_throughput_trial(const RunConfig& cfg, Backend backend, std::uint64_t m);

/// One trial per sweep point, in sweep order. Trials are independent and
/// run on up to `jobs` threads; results do not depend on `jobs`.
std::vector<ThroughputTrial> run_throughput_sweep(const RunConfig& cfg, Backend backend,
                                                  unsigned jobs = 1);

struct BurstWindow {
  int index = 0;  // window k covers [k * period, (k + 1) * period)
  std::uint64_t burst_hot = 0;
  std::uint64_t burst_warm = 0;
  std::uint64_t burst_cold = 0;
  std::uint64_t burst_fail = 0;
  std::uint64_t background_fail = 0;
};

struct BurstResult {
  Backend backend = Backend::kSeuss;
  double period_s = 0.0;
  SimulationResult sim;
  SummaryStats all;
  SummaryStats background;
  SummaryStats burst;
  std::vector<BurstWindow> windows;  // 0 .. count
  /// Window of the earliest submitted failed request, if any failed.
  std::optional<int> first_failure_window;
};

BurstResult run_burst(const RunConfig& cfg, Backend backend);

struct DensityRow {
  std::string mode;  // process, container, microvm, seuss
  std::uint64_t instances = 0;
  std::uint64_t bytes_per_instance = 0;  // average
  std::uint64_t bytes_used = 0;
};

/// floor(memory / footprint), capped at `limit` when limit > 0.
std::uint64_t analytic_density(std::uint64_t memory_bytes, std::uint64_t footprint_kib,
                               std::uint64_t limit);

struct SeussDensity {
  std::uint64_t instances = 0;
  std::uint64_t shared_pages = 0;  // runtime template plus the function snapshot
  std::uint64_t unique_frames = 0;
  std::uint64_t bytes_resident = 0;
};

/// Builds the runtime template, cold-starts one NOP function, then deploys
/// and runs warm instances of it, keeping each resident, until the next
/// instance's pages would not fit in `memory_bytes`.
SeussDensity simulate_seuss_density(std::uint64_t memory_bytes, std::size_t page_size,
                                    const AnticipatoryConfig& anticipatory,
                                    const FunctionDefaults& functions);

std::vector<DensityRow> run_density(const RunConfig& cfg);

}  // namespace seuss
