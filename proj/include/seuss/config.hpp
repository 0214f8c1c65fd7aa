#pragma once

// Run configuration: every tunable in one JSON document. Missing keys take
// their defaults; unknown keys, wrong types and out-of-range values are
// rejected before anything runs.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "seuss/engine.hpp"
#include "seuss/workload.hpp"

namespace seuss {

struct ThroughputConfig {
  std::uint64_t n = 20000;
  std::uint64_t m_start = 64;
  std::uint64_t m_end = 65536;
  int concurrency = 32;
  std::uint32_t prewarm_pool_size = 0;
};

struct BurstConfig {
  BurstSpec spec;
  std::uint32_t control_plane_burst = 128;
  std::uint32_t prewarm_pool_size = 256;
};

struct DensityConfig {
  double memory_gib = 88.0;
  std::uint64_t process_footprint_kib = 21970;
  std::uint64_t container_footprint_kib = 30758;
  std::uint64_t microvm_footprint_kib = 205054;
  std::uint32_t process_limit = 0;  // 0: memory bound only
};

struct OutputConfig {
  std::string dir = "out";
  double sample_interval_ms = 1000.0;
};

struct RunConfig {
  Backend backend = Backend::kSeuss;
  std::uint64_t seed = 1;
  NodeConfig node;
  ThroughputConfig throughput;
  BurstConfig burst;
  DensityConfig density;
  OutputConfig output;

  /// Throws ConfigError listing every problem found.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Parses a JSON document over the defaults. Throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Pretty-printed JSON with every key.
std::string dump_config(const RunConfig& cfg);

std::uint64_t gib_to_bytes(double gib);

/// Node settings for the two experiments: the throughput runs keep the
/// prewarm pool empty and let the bucket depth follow the client count; the
/// burst runs use their own pool size and bucket depth.
NodeConfig throughput_node(const RunConfig& cfg, Backend backend);
NodeConfig burst_node(const RunConfig& cfg, Backend backend);

}  // namespace seuss
