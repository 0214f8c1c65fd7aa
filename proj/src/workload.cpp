#include "seuss/workload.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace seuss {

using nlohmann::json;

std::uint64_t Prng::uniform(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform(0)");
  // Largest multiple of n representable in 2^64, minus one.
  const std::uint64_t reject_from = std::numeric_limits<std::uint64_t>::max() -
                                    (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
  std::uint64_t r;
  do {
    r = gen_();
  } while (r > reject_from);
  return r % n;
}

double Prng::unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

double Prng::normal() {
  const double u1 = 1.0 - unit();  // (0, 1]
  const double u2 = unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const char* to_string(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::kThroughput: return "throughput";
    case WorkloadKind::kBurst: return "burst";
    case WorkloadKind::kCustom: return "custom";
  }
  return "?";
}

std::size_t Workload::request_count() const {
  std::size_t n = timed.size();
  for (const auto& s : streams) n += s.requests.size();
  return n;
}

void ThroughputSpec::validate() const {
  if (n < 1) throw std::invalid_argument("throughput: n must be >= 1");
  if (m < 1) throw std::invalid_argument("throughput: m must be >= 1");
  if (concurrency < 1) throw std::invalid_argument("throughput: concurrency must be >= 1");
}

void BurstSpec::validate() const {
  if (background_threads < 1) throw std::invalid_argument("burst: background_threads must be >= 1");
  if (background_functions < 1)
    throw std::invalid_argument("burst: background_functions must be >= 1");
  if (!(io_wait_ms >= 0)) throw std::invalid_argument("burst: io_wait_ms must be >= 0");
  if (!(rate_cap_rps > 0)) throw std::invalid_argument("burst: rate_cap_rps must be > 0");
  if (burst_size < 0) throw std::invalid_argument("burst: burst_size must be >= 0");
  if (!(period_s > 0)) throw std::invalid_argument("burst: period_s must be > 0");
  if (!(cpu_ms >= 0)) throw std::invalid_argument("burst: cpu_ms must be >= 0");
  if (count < 0) throw std::invalid_argument("burst: count must be >= 0");
}

Micros BurstSpec::background_spacing_us() const {
  return static_cast<Micros>(std::ceil(1e6 / rate_cap_rps));
}

Workload gen_throughput(const ThroughputSpec& spec) {
  spec.validate();
  const std::uint64_t used = std::min(spec.m, spec.n);
  std::vector<RequestSpec> reqs;
  reqs.reserve(spec.n);
  for (std::uint64_t f = 0; f < used; ++f) {
    const std::uint64_t count = spec.n / used + (f < spec.n % used ? 1 : 0);
    RequestSpec r;
    r.fn_id = "f" + std::to_string(f);
    for (std::uint64_t i = 0; i < count; ++i) reqs.push_back(r);
  }
  Prng rng(spec.seed);
  shuffle(reqs, rng);

  Workload w;
  w.kind = WorkloadKind::kThroughput;
  ClosedLoopStream s;
  s.name = kClientStream;
  s.clients = spec.concurrency;
  s.requests = std::move(reqs);
  w.streams.push_back(std::move(s));
  return w;
}

Workload gen_burst(const BurstSpec& spec) {
  spec.validate();
  Prng rng(spec.seed);
  const Micros spacing = spec.background_spacing_us();
  const Micros span = spec.span_us();

  ClosedLoopStream bg;
  bg.name = kBackgroundStream;
  bg.clients = spec.background_threads;
  bg.end_us = span;
  bg.min_spacing_us = spacing;
  for (Micros t = 0; t < span; t += spacing) {
    RequestSpec r;
    r.fn_id = "io" + std::to_string(rng.uniform(static_cast<std::uint64_t>(spec.background_functions)));
    r.behavior = Behavior::kIoBound;
    r.io_wait_ms = spec.io_wait_ms;
    r.not_before_us = t;
    bg.requests.push_back(std::move(r));
  }

  Workload w;
  w.kind = WorkloadKind::kBurst;
  w.streams.push_back(std::move(bg));
  for (int k = 1; k <= spec.count; ++k) {
    RequestSpec r;
    r.fn_id = "burst_" + std::to_string(k);
    r.behavior = Behavior::kCpuBound;
    r.exec_ms = spec.cpu_ms;
    for (int i = 0; i < spec.burst_size; ++i)
      w.timed.push_back(TimedRequest{spec.period_us() * k, kBurstStream, r});
  }
  return w;
}

// ---------------------------------------------------------------------------
// JSON Lines trace

namespace {

const char* behavior_name(Behavior b) {
  switch (b) {
    case Behavior::kNop: return "nop";
    case Behavior::kCpuBound: return "cpu";
    case Behavior::kIoBound: return "io";
  }
  return "?";
}

Behavior parse_behavior(const std::string& s) {
  if (s == "nop") return Behavior::kNop;
  if (s == "cpu") return Behavior::kCpuBound;
  if (s == "io") return Behavior::kIoBound;
  throw std::runtime_error("unknown behavior '" + s + "'");
}

WorkloadKind parse_kind(const std::string& s) {
  if (s == "throughput") return WorkloadKind::kThroughput;
  if (s == "burst") return WorkloadKind::kBurst;
  if (s == "custom") return WorkloadKind::kCustom;
  throw std::runtime_error("unknown workload kind '" + s + "'");
}

void put_spec(json& j, const RequestSpec& r) {
  j["fn_id"] = r.fn_id;
  j["behavior"] = behavior_name(r.behavior);
  j["exec_ms"] = r.exec_ms;
  j["io_wait_ms"] = r.io_wait_ms;
  j["not_before_us"] = r.not_before_us;
}

RequestSpec get_spec(const json& j) {
  RequestSpec r;
  r.fn_id = j.at("fn_id").get<std::string>();
  r.behavior = parse_behavior(j.value("behavior", std::string("nop")));
  r.exec_ms = j.value("exec_ms", 0.0);
  r.io_wait_ms = j.value("io_wait_ms", 0.0);
  r.not_before_us = j.value("not_before_us", Micros{0});
  if (r.exec_ms < 0 || r.io_wait_ms < 0 || r.not_before_us < 0)
    throw std::runtime_error("negative duration in request");
  return r;
}

}  // namespace

void export_trace(const Workload& w, std::ostream& out) {
  out << json{{"type", "workload"}, {"kind", to_string(w.kind)}}.dump() << '\n';
  for (const auto& s : w.streams) {
    json h{{"type", "stream"},        {"name", s.name},
           {"clients", s.clients},    {"start_us", s.start_us},
           {"min_spacing_us", s.min_spacing_us}};
    h["end_us"] = s.end_us == std::numeric_limits<Micros>::max() ? json(nullptr) : json(s.end_us);
    out << h.dump() << '\n';
  }
  for (const auto& s : w.streams) {
    for (const auto& r : s.requests) {
      json j{{"type", "request"}, {"stream", s.name}};
      put_spec(j, r);
      out << j.dump() << '\n';
    }
  }
  for (const auto& t : w.timed) {
    json j{{"type", "timed"}, {"stream", t.stream}, {"at_us", t.at_us}};
    put_spec(j, t.spec);
    out << j.dump() << '\n';
  }
}

Workload import_trace(std::istream& in) {
  Workload w;
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "workload") {
        w.kind = parse_kind(j.at("kind").get<std::string>());
      } else if (type == "stream") {
        ClosedLoopStream s;
        s.name = j.at("name").get<std::string>();
        s.clients = j.at("clients").get<int>();
        s.start_us = j.value("start_us", Micros{0});
        s.min_spacing_us = j.value("min_spacing_us", Micros{0});
        if (j.contains("end_us") && !j["end_us"].is_null()) s.end_us = j["end_us"].get<Micros>();
        if (s.clients < 1) throw std::runtime_error("stream needs at least one client");
        for (const auto& other : w.streams)
          if (other.name == s.name) throw std::runtime_error("duplicate stream '" + s.name + "'");
        w.streams.push_back(std::move(s));
      } else if (type == "request") {
        const std::string name = j.at("stream").get<std::string>();
        auto it = std::find_if(w.streams.begin(), w.streams.end(),
                               [&](const ClosedLoopStream& s) { return s.name == name; });
        if (it == w.streams.end()) throw std::runtime_error("request for undeclared stream '" + name + "'");
        it->requests.push_back(get_spec(j));
      } else if (type == "timed") {
        TimedRequest t;
        t.at_us = j.at("at_us").get<Micros>();
        t.stream = j.value("stream", std::string(kBurstStream));
        t.spec = get_spec(j);
        if (t.at_us < 0) throw std::runtime_error("negative arrival time");
        w.timed.push_back(std::move(t));
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("trace line " + std::to_string(lineno) + ": " + e.what());
  }
  std::stable_sort(w.timed.begin(), w.timed.end(),
                   [](const TimedRequest& a, const TimedRequest& b) { return a.at_us < b.at_us; });
  return w;
}

}  // namespace seuss
