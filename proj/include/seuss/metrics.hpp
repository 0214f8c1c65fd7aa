#pragma once

// Latency and throughput summaries, and the CSV files a run writes.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "seuss/sim.hpp"

namespace seuss {

/// Nearest rank: the value at 1-based index ceil(p * n / 100) of the sorted
/// sample. `sorted` must be nonempty and ascending; p in (0, 100].
Micros nearest_rank(std::span<const Micros> sorted, int p);

struct SummaryStats {
  std::uint64_t requests = 0;
  std::uint64_t completed = 0;  // non-failed
  double throughput_rps = 0.0;
  double mean_ms = 0.0;
  double p1_ms = 0.0;
  double p25_ms = 0.0;
  double p50_ms = 0.0;
  double p75_ms = 0.0;
  double p99_ms = 0.0;
  std::uint64_t hot = 0;
  std::uint64_t warm = 0;
  std::uint64_t cold = 0;
  std::uint64_t fail = 0;
  std::uint64_t peak_bytes_resident = 0;
  std::uint64_t cache_entries = 0;
};

/// Failed requests count toward `fail` and `requests` but are left out of
/// every latency figure and of the throughput numerator. Throughput is
/// completed / (last completion - first submission).
SummaryStats aggregate(std::span<const RequestRecord> records);

/// Records for which `keep` returns true.
std::vector<RequestRecord> select(std::span<const RequestRecord> records,
                                  const std::function<bool(const RequestRecord&)>& keep);

/// Milliseconds with exactly three decimals (one microsecond tick).
std::string format_ms(Micros us);

/// request_id,fn_id,submit_ms,complete_ms,latency_ms,path,status
void write_requests_csv(std::ostream& out, std::span<const RequestRecord> records);

/// t_ms,bytes_resident,unique_frames,warm_entries,hot_entries,containers
void write_timeline_csv(std::ostream& out, std::span<const TimelineSample> samples);

struct SummaryRow {
  std::string trial;
  std::string backend;
  std::string subset;
  SummaryStats stats;
};

/// trial,backend,subset,requests,throughput_rps,mean_ms,p1_ms,p25_ms,p50_ms,
/// p75_ms,p99_ms,hot,warm,cold,fail,peak_bytes_resident,cache_entries
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace seuss
