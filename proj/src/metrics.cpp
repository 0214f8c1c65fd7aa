#include "seuss/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace seuss {

Micros nearest_rank(std::span<const Micros> sorted, int p) {
  if (sorted.empty()) throw std::invalid_argument("nearest_rank of an empty sample");
  if (p <= 0 || p > 100) throw std::invalid_argument("percentile must be in (0, 100]");
  const std::uint64_t n = sorted.size();
  std::uint64_t rank = (static_cast<std::uint64_t>(p) * n + 99) / 100;
  rank = std::max<std::uint64_t>(rank, 1);
  return sorted[rank - 1];
}

SummaryStats aggregate(std::span<const RequestRecord> records) {
  SummaryStats s;
  s.requests = records.size();
  std::vector<Micros> lat;
  lat.reserve(records.size());
  Micros first_submit = std::numeric_limits<Micros>::max();
  Micros last_complete = std::numeric_limits<Micros>::min();
  for (const RequestRecord& r : records) {
    switch (r.path) {
      case Path::kHot: ++s.hot; break;
      case Path::kWarm: ++s.warm; break;
      case Path::kCold: ++s.cold; break;
      case Path::kFail: ++s.fail; break;
    }
    first_submit = std::min(first_submit, r.submit_us);
    if (r.failed()) continue;
    lat.push_back(r.latency_us());
    last_complete = std::max(last_complete, r.complete_us);
  }
  s.completed = lat.size();
  if (lat.empty()) return s;

  std::sort(lat.begin(), lat.end());
  long double sum = 0;
  for (Micros v : lat) sum += v;
  s.mean_ms = static_cast<double>(sum / lat.size()) / 1000.0;
  s.p1_ms = to_ms(nearest_rank(lat, 1));
  s.p25_ms = to_ms(nearest_rank(lat, 25));
  s.p50_ms = to_ms(nearest_rank(lat, 50));
  s.p75_ms = to_ms(nearest_rank(lat, 75));
  s.p99_ms = to_ms(nearest_rank(lat, 99));
  const Micros span = last_complete - first_submit;
  if (span > 0) s.throughput_rps = static_cast<double>(s.completed) * 1e6 / static_cast<double>(span);
  return s;
}

std::vector<RequestRecord> select(std::span<const RequestRecord> records,
                                  const std::function<bool(const RequestRecord&)>& keep) {
  std::vector<RequestRecord> out;
  for (const RequestRecord& r : records)
    if (keep(r)) out.push_back(r);
  return out;
}

std::string format_ms(Micros us) {
  const bool neg = us < 0;
  const std::uint64_t a = neg ? static_cast<std::uint64_t>(-us) : static_cast<std::uint64_t>(us);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%llu.%03llu", neg ? "-" : "",
                static_cast<unsigned long long>(a / 1000),
                static_cast<unsigned long long>(a % 1000));
  return buf;
}

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void write_requests_csv(std::ostream& out, std::span<const RequestRecord> records) {
  out << "request_id,fn_id,submit_ms,complete_ms,latency_ms,path,status\n";
  for (const RequestRecord& r : records) {
    out << r.request_id << ',' << r.fn_id << ',' << format_ms(r.submit_us) << ','
        << format_ms(r.complete_us) << ',' << format_ms(r.latency_us()) << ','
        << to_string(r.path) << ',' << r.status << '\n';
  }
}

void write_timeline_csv(std::ostream& out, std::span<const TimelineSample> samples) {
  out << "t_ms,bytes_resident,unique_frames,warm_entries,hot_entries,containers\n";
  for (const TimelineSample& s : samples) {
    out << format_ms(s.t_us) << ',' << s.bytes_resident << ',' << s.unique_frames << ','
        << s.warm_entries << ',' << s.hot_entries << ',' << s.containers << '\n';
  }
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "trial,backend,subset,requests,throughput_rps,mean_ms,p1_ms,p25_ms,p50_ms,p75_ms,"
         "p99_ms,hot,warm,cold,fail,peak_bytes_resident,cache_entries\n";
  for (const SummaryRow& row : rows) {
    const SummaryStats& s = row.stats;
    out << row.trial << ',' << row.backend << ',' << row.subset << ',' << s.requests << ','
        << fixed3(s.throughput_rps) << ',' << fixed3(s.mean_ms) << ',' << fixed3(s.p1_ms) << ','
        << fixed3(s.p25_ms) << ',' << fixed3(s.p50_ms) << ',' << fixed3(s.p75_ms) << ','
        << fixed3(s.p99_ms) << ',' << s.hot << ',' << s.warm << ',' << s.cold << ',' << s.fail
        << ',' << s.peak_bytes_resident << ',' << s.cache_entries << '\n';
  }
}

}  // namespace seuss
