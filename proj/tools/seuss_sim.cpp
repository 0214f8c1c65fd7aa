// seuss_sim: runs the throughput sweep, burst, density and trace experiments
// against the SEUSS node model or the Linux container baseline.
//
// Exit codes: 0 ok, 1 runtime failure, 2 bad arguments or configuration.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seuss/config.hpp"
#include "seuss/experiments.hpp"
#include "seuss/metrics.hpp"
#include "seuss/workload.hpp"

namespace fs = std::filesystem;
using namespace seuss;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string backend;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string export_trace;
};

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  if (const char* env = std::getenv("SEUSS_SIM_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw UsageError(std::string("SEUSS_SIM_SEED is not an integer: ") + env);
    cfg.seed = v;
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.backend.empty()) {
    try {
      cfg.backend = parse_backend(c.backend);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (!c.out.empty()) cfg.output.dir = c.out;
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void maybe_export(const Common& c, const Workload& w) {
  if (c.export_trace.empty()) return;
  auto f = open_out(fs::absolute(c.export_trace));
  export_trace(w, f);
}

std::string period_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

int cmd_throughput(const Common& c, std::optional<std::uint64_t> m_start,
                   std::optional<std::uint64_t> m_end, std::optional<int> concurrency,
                   std::optional<std::uint64_t> n, unsigned jobs) {
  RunConfig cfg = resolve(c);
  if (m_start) cfg.throughput.m_start = *m_start;
  if (m_end) cfg.throughput.m_end = *m_end;
  if (concurrency) cfg.throughput.concurrency = *concurrency;
  if (n) cfg.throughput.n = *n;
  cfg.validate();

  if (!c.export_trace.empty()) {
    ThroughputSpec spec{cfg.throughput.n, cfg.throughput.m_start, cfg.throughput.concurrency,
                        cfg.seed};
    maybe_export(c, gen_throughput(spec));
  }

  const std::string b = to_string(cfg.backend);
  const fs::path dir = cfg.output.dir;
  auto trials = run_throughput_sweep(cfg, cfg.backend, jobs);
  std::vector<SummaryRow> rows;
  std::printf("%-8s %8s %12s %10s %10s %7s %7s %7s %6s\n", "backend", "M", "rps", "mean_ms",
              "p99_ms", "hot", "warm", "cold", "fail");
  for (const auto& t : trials) {
    const std::string tag = "m" + std::to_string(t.m);
    rows.push_back(SummaryRow{std::to_string(t.m), b, "all", t.stats});
    auto rq = open_out(dir / ("throughput_" + b + "_" + tag + "_requests.csv"));
    write_requests_csv(rq, t.sim.records);
    auto tl = open_out(dir / ("throughput_" + b + "_" + tag + "_timeline.csv"));
    write_timeline_csv(tl, t.sim.timeline);
    const SummaryStats& s = t.stats;
    std::printf("%-8s %8llu %12.3f %10.3f %10.3f %7llu %7llu %7llu %6llu\n", b.c_str(),
                static_cast<unsigned long long>(t.m), s.throughput_rps, s.mean_ms, s.p99_ms,
                static_cast<unsigned long long>(s.hot), static_cast<unsigned long long>(s.warm),
                static_cast<unsigned long long>(s.cold), static_cast<unsigned long long>(s.fail));
  }
  auto sum = open_out(dir / ("throughput_" + b + "_summary.csv"));
  write_summary_csv(sum, rows);
  return 0;
}

int cmd_burst(const Common& c, std::optional<double> period, std::optional<int> count) {
  RunConfig cfg = resolve(c);
  if (period) cfg.burst.spec.period_s = *period;
  if (count) cfg.burst.spec.count = *count;
  cfg.validate();

  if (!c.export_trace.empty()) {
    BurstSpec spec = cfg.burst.spec;
    spec.seed = cfg.seed;
    maybe_export(c, gen_burst(spec));
  }

  const std::string b = to_string(cfg.backend);
  const std::string stem = "burst_" + b + "_p" + period_tag(cfg.burst.spec.period_s);
  const fs::path dir = cfg.output.dir;
  const BurstResult r = run_burst(cfg, cfg.backend);

  const std::string trial = period_tag(r.period_s);
  std::vector<SummaryRow> rows{{trial, b, "all", r.all},
                               {trial, b, "background", r.background},
                               {trial, b, "burst", r.burst}};
  auto sum = open_out(dir / (stem + "_summary.csv"));
  write_summary_csv(sum, rows);
  auto rq = open_out(dir / (stem + "_requests.csv"));
  write_requests_csv(rq, r.sim.records);
  auto tl = open_out(dir / (stem + "_timeline.csv"));
  write_timeline_csv(tl, r.sim.timeline);
  auto wf = open_out(dir / (stem + "_windows.csv"));
  wf << "window,start_ms,burst_hot,burst_warm,burst_cold,burst_fail,background_fail\n";
  const Micros p = cfg.burst.spec.period_us();
  std::printf("%-6s %9s %5s %5s %5s %5s %7s\n", "window", "start_s", "hot", "warm", "cold", "fail",
              "bg_fail");
  for (const auto& w : r.windows) {
    wf << w.index << ',' << format_ms(p * w.index) << ',' << w.burst_hot << ',' << w.burst_warm
       << ',' << w.burst_cold << ',' << w.burst_fail << ',' << w.background_fail << '\n';
    std::printf("%-6d %9.1f %5llu %5llu %5llu %5llu %7llu\n", w.index,
                static_cast<double>(p * w.index) / 1e6,
                static_cast<unsigned long long>(w.burst_hot),
                static_cast<unsigned long long>(w.burst_warm),
                static_cast<unsigned long long>(w.burst_cold),
                static_cast<unsigned long long>(w.burst_fail),
                static_cast<unsigned long long>(w.background_fail));
  }
  std::printf("background p99 %.3f ms, burst p99 %.3f ms, failed %llu of %llu\n",
              r.background.p99_ms, r.burst.p99_ms,
              static_cast<unsigned long long>(r.all.fail),
              static_cast<unsigned long long>(r.all.requests));
  if (r.first_failure_window)
    std::printf("first failure in window %d\n", *r.first_failure_window);
  return 0;
}

int cmd_density(const Common& c, std::optional<double> memory_gib) {
  RunConfig cfg = resolve(c);
  if (memory_gib) cfg.density.memory_gib = *memory_gib;
  cfg.validate();
  const auto rows = run_density(cfg);
  auto f = open_out(fs::path(cfg.output.dir) / "density.csv");
  f << "mode,instances,bytes_per_instance,bytes_used\n";
  std::printf("%-10s %10s %18s\n", "mode", "instances", "bytes_per_instance");
  for (const auto& r : rows) {
    f << r.mode << ',' << r.instances << ',' << r.bytes_per_instance << ',' << r.bytes_used << '\n';
    std::printf("%-10s %10llu %18llu\n", r.mode.c_str(),
                static_cast<unsigned long long>(r.instances),
                static_cast<unsigned long long>(r.bytes_per_instance));
  }
  return 0;
}

int cmd_trace(const Common& c, const std::string& input) {
  RunConfig cfg = resolve(c);
  cfg.validate();
  std::ifstream in(input);
  if (!in) throw UsageError("cannot read trace '" + input + "'");
  Workload w;
  try {
    w = import_trace(in);
  } catch (const std::runtime_error& e) {
    throw UsageError(std::string("bad trace: ") + e.what());
  }
  NodeConfig node = cfg.node;
  node.backend = cfg.backend;
  const SimulationResult sim =
      run_until_idle(node, w, cfg.seed, to_us(cfg.output.sample_interval_ms));
  SummaryStats s = aggregate(sim.records);
  s.peak_bytes_resident = sim.peak_bytes_resident;
  s.cache_entries = sim.cache_entries;

  const std::string b = to_string(cfg.backend);
  const fs::path dir = cfg.output.dir;
  std::vector<SummaryRow> rows{{"trace", b, "all", s}};
  auto sum = open_out(dir / ("trace_" + b + "_summary.csv"));
  write_summary_csv(sum, rows);
  auto rq = open_out(dir / ("trace_" + b + "_requests.csv"));
  write_requests_csv(rq, sim.records);
  auto tl = open_out(dir / ("trace_" + b + "_timeline.csv"));
  write_timeline_csv(tl, sim.timeline);
  std::printf("%llu requests, %.3f rps, p50 %.3f ms, p99 %.3f ms, fail %llu\n",
              static_cast<unsigned long long>(s.requests), s.throughput_rps, s.p50_ms, s.p99_ms,
              static_cast<unsigned long long>(s.fail));
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--backend", c.backend, "seuss or linux");
  sub->add_option("--seed", c.seed, "overrides SEUSS_SIM_SEED and the config seed");
  sub->add_option("--out", c.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEUSS node simulator"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-default-config", print_defaults, "print the default config and exit");

  Common common;
  std::optional<std::uint64_t> m_start, m_end, n;
  std::optional<int> concurrency, count;
  std::optional<double> period, memory_gib;
  unsigned jobs = 1;
  std::string trace_in;

  auto* tp = app.add_subcommand("throughput", "unique-function throughput sweep");
  add_common(tp, common);
  tp->add_option("--m-start", m_start, "first unique function count");
  tp->add_option("--m-end", m_end, "last unique function count");
  tp->add_option("--concurrency", concurrency, "closed-loop clients");
  tp->add_option("--n", n, "requests per trial");
  tp->add_option("--jobs", jobs, "trials run in parallel")->check(CLI::PositiveNumber);
  tp->add_option("--export-trace", common.export_trace, "write the first trial's workload");

  auto* bu = app.add_subcommand("burst", "background IO stream with periodic CPU bursts");
  add_common(bu, common);
  bu->add_option("--period", period, "seconds between bursts");
  bu->add_option("--count", count, "number of bursts");
  bu->add_option("--export-trace", common.export_trace, "write the generated workload");

  auto* de = app.add_subcommand("density", "instances that fit in node memory");
  add_common(de, common);
  de->add_option("--memory-gib", memory_gib, "memory budget");

  auto* tr = app.add_subcommand("trace", "run an imported JSON Lines trace");
  add_common(tr, common);
  tr->add_option("--input", trace_in, "trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (print_defaults) {
      std::cout << dump_config(RunConfig{});
      return 0;
    }
    if (*tp) return cmd_throughput(common, m_start, m_end, concurrency, n, jobs);
    if (*bu) return cmd_burst(common, period, count);
    if (*de) return cmd_density(common, memory_gib);
    if (*tr) return cmd_trace(common, trace_in);
    std::cerr << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
