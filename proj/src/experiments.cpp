#include "seuss/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

namespace seuss {

std::vector<std::uint64_t> sweep_points(std::uint64_t start, std::uint64_t end) {
  if (start == 0) throw std::invalid_argument("sweep start must be >= 1");
  std::vector<std::uint64_t> out;
  for (std::uint64_t m = start; m <= end; m *= 2) {
    out.push_back(m);
    if (m > end / 2) break;
  }
  return out;
}

ThroughputTrial run_throughput_trial(const RunConfig& cfg, Backend backend, std::uint64_t m) {
  ThroughputSpec spec;
  spec.n = cfg.throughput.n;
  spec.m = m;
  spec.concurrency = cfg.throughput.concurrency;
  spec.seed = cfg.seed;
  const Workload w = gen_throughput(spec);

  ThroughputTrial t;
  t.m = m;
  t.backend = backend;
  t.sim = run_until_idle(throughput_node(cfg, backend), w, cfg.seed,
                         to_us(cfg.output.sample_interval_ms));
  t.stats = aggregate(t.sim.records);
  t.stats.peak_bytes_resident = t.sim.peak_bytes_resident;
  t.stats.cache_entries = t.sim.cache_entries;
  return t;
}

std::vector<ThroughputTrial> run_throughput_sweep(const RunConfig& cfg, Backend backend,
                                                  unsigned jobs) {
  const auto points = sweep_points(cfg.throughput.m_start, cfg.throughput.m_end);
  std::vector<ThroughputTrial> out(points.size());
  jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(points.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < points.size(); ++i)
      out[i] = run_throughput_trial(cfg, backend, points[i]);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(points.size());
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < points.size(); i = next++) {
        try {
          out[i] = run_throughput_trial(cfg, backend, points[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

BurstResult run_burst(const RunConfig& cfg, Backend backend) {
  BurstSpec spec = cfg.burst.spec;
  spec.seed = cfg.seed;
  const Workload w = gen_burst(spec);

  BurstResult r;
  r.backend = backend;
  r.period_s = spec.period_s;
  r.sim = run_until_idle(burst_node(cfg, backend), w, cfg.seed,
                         to_us(cfg.output.sample_interval_ms));

  const auto& recs = r.sim.records;
  r.all = aggregate(recs);
  r.all.peak_bytes_resident = r.sim.peak_bytes_resident;
  r.all.cache_entries = r.sim.cache_entries;
  r.background = aggregate(select(recs, [](const RequestRecord& x) {
    return x.stream == kBackgroundStream;
  }));
  r.burst = aggregate(select(recs, [](const RequestRecord& x) {
    return x.stream == kBurstStream;
  }));

  const Micros period = spec.period_us();
  r.windows.resize(static_cast<std::size_t>(spec.count) + 1);
  for (std::size_t k = 0; k < r.windows.size(); ++k) r.windows[k].index = static_cast<int>(k);
  Micros first_fail = -1;
  for (const RequestRecord& x : recs) {
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(x.submit_us / period),
                                         r.windows.size() - 1);
    BurstWindow& win = r.windows[k];
    if (x.stream == kBurstStream) {
      switch (x.path) {
        case Path::kHot: ++win.burst_hot; break;
        case Path::kWarm: ++win.burst_warm; break;
        case Path::kCold: ++win.burst_cold; break;
        case Path::kFail: ++win.burst_fail; break;
      }
    } else if (x.failed()) {
      ++win.background_fail;
    }
    if (x.failed() && (first_fail < 0 || x.submit_us < first_fail)) {
      first_fail = x.submit_us;
      r.first_failure_window = static_cast<int>(k);
    }
  }
  return r;
}

std::uint64_t analytic_density(std::uint64_t memory_bytes, std::uint64_t footprint_kib,
                               std::uint64_t limit) {
  if (footprint_kib == 0) throw std::invalid_argument("footprint must be > 0");
  std::uint64_t n = memory_bytes / (footprint_kib * 1024);
  if (limit > 0) n = std::min(n, limit);
  return n;
}

SeussDensity simulate_seuss_density(std::uint64_t memory_bytes, std::size_t page_size,
                                    const AnticipatoryConfig& anticipatory,
                                    const FunctionDefaults& functions) {
  SeussDensity out;
  const std::uint64_t budget = memory_bytes / page_size;
  const std::uint64_t template_pages = anticipatory.image_pages + anticipatory.warmup_pages;
  FunctionProfile prof = nop_function("density_nop");
  prof.runtime_id = anticipatory.runtime_id;
  prof.source_pages = functions.source_pages;
  prof.exec_pages = functions.exec_pages;
  prof.hot_exec_pages = functions.hot_exec_pages;
  const std::uint32_t factor = anticipatory.warmup_enabled ? 1 : anticipatory.unwarmed_page_factor;
  const std::uint64_t per_instance = std::uint64_t{prof.exec_pages} * factor;
  const std::uint64_t cold_pages = std::uint64_t{prof.source_pages} * factor + per_instance;
  if (budget < template_pages + cold_pages) return out;

  PageStore store(StoreConfig{page_size, StoreConfig{}.register_size});
  store.reserve(static_cast<std::size_t>(budget));
  std::vector<UnikernelContext> instances;
  {
    RuntimeTemplate tpl = build_runtime_template(store, anticipatory);
    auto [first, snap] = cold_deploy(tpl, prof);
    run(first, prof);
    instances.push_back(std::move(first));
    out.shared_pages = store.stats().unique_frames - per_instance;
    instances.reserve(static_cast<std::size_t>((budget - out.shared_pages) / per_instance) + 1);
    while (store.stats().unique_frames + per_instance <= budget) {
      UnikernelContext uc = warm_deploy(snap, prof);
      run(uc, prof);
      instances.push_back(std::move(uc));
    }
    const StoreStats st = store.stats();
    out.instances = instances.size();
    out.unique_frames = st.unique_frames;
    out.bytes_resident = st.bytes_resident;
    for (auto& uc : instances) destroy(uc);
    instances.clear();
  }
  return out;
}

std::vector<DensityRow> run_density(const RunConfig& cfg) {
  const DensityConfig& d = cfg.density;
  const std::uint64_t mem = gib_to_bytes(d.memory_gib);
  auto row = [&](const char* mode, std::uint64_t footprint_kib, std::uint64_t limit) {
    DensityRow r;
    r.mode = mode;
    r.instances = analytic_density(mem, footprint_kib, limit);
    r.bytes_per_instance = footprint_kib * 1024;
    r.bytes_used = r.instances * r.bytes_per_instance;
    return r;
  };
  std::vector<DensityRow> rows;
  rows.push_back(row("process", d.process_footprint_kib, d.process_limit));
  rows.push_back(row("container", d.container_footprint_kib, cfg.node.containers.density_limit));
  rows.push_back(row("microvm", d.microvm_footprint_kib, cfg.node.containers.microvm_density));

  const SeussDensity s = simulate_seuss_density(mem, cfg.node.page_size, cfg.node.anticipatory,
                                                cfg.node.functions);
  DensityRow r;
  r.mode = "seuss";
  r.instances = s.instances;
  r.bytes_used = s.bytes_resident;
  r.bytes_per_instance = s.instances ? s.bytes_resident / s.instances : 0;
  rows.push_back(r);
  return rows;
}

}  // namespace seuss
