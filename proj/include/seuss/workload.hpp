#pragma once

// Request streams for the throughput and burst experiments, the seeded PRNG
// they are drawn from, and a JSON Lines trace format.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "seuss/cost_model.hpp"
#include "seuss/uc.hpp"

namespace seuss {

/// mt19937_64 (fully specified by the C++ standard) with distribution code
/// written out here, since std:: distributions differ between library
/// implementations.
///   uniform(n): rejection sampling on raw 64-bit outputs, then r % n.
///   unit():     (x >> 11) * 2^-53, in [0, 1).
///   normal():   Box-Muller on two unit draws, cosine branch only.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t next() { return gen_(); }
  std::uint64_t uniform(std::uint64_t n);
  double unit();
  double normal();

 private:
  std::mt19937_64 gen_;
};

template <class T>
void shuffle(std::vector<T>& v, Prng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform(i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

enum class WorkloadKind { kThroughput, kBurst, kCustom };

const char* to_string(WorkloadKind kind);

struct RequestSpec {
  std::string fn_id;
  Behavior behavior = Behavior::kNop;
  double exec_ms = 0.0;
  double io_wait_ms = 0.0;
  Micros not_before_us = 0;  // earliest issue time, 0 if unconstrained

  bool operator==(const RequestSpec&) const = default;
};

/// C clients issuing `requests` in order, each waiting for its previous
/// request to complete. Consecutive issues are at least min_spacing_us apart
/// and nothing is issued at or after end_us.
struct ClosedLoopStream {
  std::string name;
  int clients = 1;
  Micros start_us = 0;
  Micros end_us = std::numeric_limits<Micros>::max();
  Micros min_spacing_us = 0;
  std::vector<RequestSpec> requests;

  bool operator==(const ClosedLoopStream&) const = default;
};

/// Open-loop arrival at a fixed time.
struct TimedRequest {
  Micros at_us = 0;
  std::string stream;
  RequestSpec spec;

  bool operator==(const TimedRequest&) const = default;
};

struct Workload {
  WorkloadKind kind = WorkloadKind::kCustom;
  std::vector<ClosedLoopStream> streams;
  std::vector<TimedRequest> timed;  // sorted by at_us

  std::size_t request_count() const;
  bool operator==(const Workload&) const = default;
};

struct ThroughputSpec {
  std::uint64_t n = 20000;
  std::uint64_t m = 64;
  int concurrency = 32;
  std::uint64_t seed = 1;

  void validate() const;
};

struct BurstSpec {
  int background_threads = 128;
  int background_functions = 16;
  double io_wait_ms = 250.0;
  double rate_cap_rps = 72.0;
  int burst_size = 128;
  double period_s = 32.0;
  double cpu_ms = 150.0;
  int count = 10;
  std::uint64_t seed = 1;

  void validate() const;
  Micros period_us() const { return to_us(period_s * 1000.0); }
  /// Background traffic covers [0, (count + 1) * period).
  Micros span_us() const { return period_us() * (count + 1); }
  Micros background_spacing_us() const;
};

/// N NOP requests over f0..f{M-1}, each function appearing floor(N/M) or
/// ceil(N/M) times, in seeded shuffled order. When M > N only f0..f{N-1}
/// are used, once each.
Workload gen_throughput(const ThroughputSpec& spec);

/// Background closed-loop IO stream plus `count` bursts of identical CPU
/// requests to burst_1..burst_count at t = k * period.
Workload gen_burst(const BurstSpec& spec);

inline constexpr const char* kBackgroundStream = "background";
inline constexpr const char* kBurstStream = "burst";
inline constexpr const char* kClientStream = "clients";

/// One JSON object per line: stream headers, then stream requests in order,
/// then timed requests.
void export_trace(const Workload& w, std::ostream& out);
/// Throws std::runtime_error with the offending line number on bad input.
Workload import_trace(std::istream& in);

}  // namespace seuss
