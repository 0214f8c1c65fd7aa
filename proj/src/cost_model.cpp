#include "seuss/cost_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace seuss {

Micros to_us(double ms) { return static_cast<Micros>(std::llround(ms * 1000.0)); }

double to_ms(Micros us) { return static_cast<double>(us) / 1000.0; }

void CostModel::validate() const {
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(name) + " must be a finite value >= 0");
  };
  non_negative(hot_overhead_ms, "hot_overhead_ms");
  non_negative(warm_overhead_ms, "warm_overhead_ms");
  non_negative(cold_overhead_ms, "cold_overhead_ms");
  non_negative(uc_deploy_ms, "uc_deploy_ms");
  non_negative(snapshot_capture_ms, "snapshot_capture_ms");
  non_negative(control_plane_latency_ms, "control_plane_latency_ms");
  non_negative(shim_extra_rtt_ms, "shim_extra_rtt_ms");
  non_negative(shim_serial_ms, "shim_serial_ms");
  if (!(control_plane_peak_rps > 0.0))
    throw std::invalid_argument("control_plane_peak_rps must be > 0");
  if (!(cold_overhead_ms >= warm_overhead_ms && warm_overhead_ms >= hot_overhead_ms))
    throw std::invalid_argument("path overheads must satisfy cold >= warm >= hot");
  if (uc_deploy_ms > warm_overhead_ms)
    throw std::invalid_argument("uc_deploy_ms exceeds warm_overhead_ms");
  if (cold_overhead_ms - warm_overhead_ms < snapshot_capture_ms)
    throw std::invalid_argument("snapshot_capture_ms exceeds cold - warm overhead");
  if (shim_serial_ms > shim_extra_rtt_ms)
    throw std::invalid_argument("shim_serial_ms exceeds shim_extra_rtt_ms");
}

PathCosts compose(const CostModel& cm) {
  PathCosts p;
  p.hot = to_us(cm.hot_overhead_ms);
  p.deploy = to_us(cm.uc_deploy_ms);
  p.warm_entry = to_us(cm.warm_overhead_ms) - p.deploy;
  p.capture = to_us(cm.snapshot_capture_ms);
  p.compile = to_us(cm.cold_overhead_ms) - p.deploy - p.capture - p.warm_entry;
  p.shim_serial = to_us(cm.shim_serial_ms);
  p.shim_return = to_us(cm.shim_extra_rtt_ms) - p.shim_serial;
  p.control_plane = to_us(cm.control_plane_latency_ms);
  return p;
}

}  // namespace seuss
