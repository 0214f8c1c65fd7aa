#pragma once

// Calibrated per-path latencies for the SEUSS node and the control plane in
// front of it. Inputs are milliseconds; the simulator runs on integer
// microseconds.

#include <cstdint>

namespace seuss {

using Micros = std::int64_t;

/// Rounds a millisecond quantity to the nearest microsecond tick.
Micros to_us(double ms);
double to_ms(Micros us);

struct CostModel {
  // Server-side totals per path, each measured from core dispatch to the end
  // of the function's entry. Deploy and capture are components of these
  // totals, not extras on top.
  double hot_overhead_ms = 0.82;
  double warm_overhead_ms = 2.95;
  double cold_overhead_ms = 7.67;
  double uc_deploy_ms = 0.4;
  double snapshot_capture_ms = 0.4;

  double control_plane_latency_ms = 60.0;
  double control_plane_peak_rps = 220.0;

  // Extra round trip through the shim in front of a SEUSS node. The first
  // shim_serial_ms of it is spent in a single FIFO stage on the way in; the
  // remainder is a pure delay on the way out.
  double shim_extra_rtt_ms = 8.0;
  double shim_serial_ms = 5.5;

  /// Throws std::invalid_argument on negative values, misordered path totals
  /// or components that do not fit inside their totals.
  void validate() const;
};

/// The path totals split into the segments the simulator charges.
struct PathCosts {
  Micros hot = 0;
  Micros deploy = 0;       // warm and cold
  Micros warm_entry = 0;   // warm total minus deploy
  Micros compile = 0;      // cold only: import + compile
  Micros capture = 0;      // cold only
  Micros shim_serial = 0;
  Micros shim_return = 0;
  Micros control_plane = 0;

  Micros warm_total() const noexcept { return deploy + warm_entry; }
  Micros cold_total() const noexcept { return deploy + compile + capture + warm_entry; }
};

PathCosts compose(const CostModel& cm);

}  // namespace seuss
