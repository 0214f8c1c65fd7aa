#include "seuss/engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace seuss {

const char* to_string(Backend b) {
  switch (b) {
    case Backend::kSeuss: return "seuss";
    case Backend::kLinux: return "linux";
  }
  return "?";
}

Backend parse_backend(const std::string& name) {
  if (name == "seuss") return Backend::kSeuss;
  if (name == "linux") return Backend::kLinux;
  throw std::invalid_argument("unknown backend '" + name + "' (expected seuss or linux)");
}

void NodeConfig::validate() const {
  if (worker_cores < 1) throw std::invalid_argument("worker_cores must be >= 1");
  if (page_size == 0) throw std::invalid_argument("page_size must be > 0");
  if (!(oom_threshold_fraction > 0.0 && oom_threshold_fraction < 1.0))
    throw std::invalid_argument("oom_threshold_fraction must be in (0, 1)");
  cost.validate();
  containers.validate();
  if (backend == Backend::kSeuss) MemoryBudget::with_fraction(memory_bytes, oom_threshold_fraction).validate();
}

// ---------------------------------------------------------------------------

SeussNode::SeussNode(const NodeConfig& cfg, EventQueue& events, CorePool& cores,
                     CompletionFn on_complete)
    : cfg_(cfg), costs_(compose(cfg.cost)), events_(events), cores_(cores),
      on_complete_(std::move(on_complete)),
      store_(StoreConfig{cfg.page_size, StoreConfig{}.register_size}) {
  template_ = build_runtime_template(store_, cfg_.anticipatory);
  caches_ = std::make_unique<Caches>(
      cfg_.worker_cores, cfg_.hot_tub_capacity_per_core,
      MemoryBudget::with_fraction(cfg_.memory_bytes, cfg_.oom_threshold_fraction));
}

SeussNode::~SeussNode() {
  running_.clear();
  pending_warm_.clear();
  caches_.reset();
}

FunctionProfile SeussNode::profile_for(const RequestSpec& spec) const {
  FunctionProfile p;
  p.fn_id = spec.fn_id;
  p.runtime_id = template_.runtime_id;
  p.source_pages = cfg_.functions.source_pages;
  p.exec_pages = cfg_.functions.exec_pages;
  p.hot_exec_pages = cfg_.functions.hot_exec_pages;
  p.exec_time_ms = spec.exec_ms;
  p.behavior = spec.behavior;
  p.io_wait_ms = spec.io_wait_ms;
  return p;
}

void SeussNode::arrive(const Arrival& a) {
  const Micros start = shim_.enter(events_.now(), costs_.shim_serial);
  events_.schedule(start + costs_.shim_serial, [this, a] {
    cores_.submit([this, a](int core) { return start_on(a, core); });
  });
}

// Everything that touches memory happens at dispatch; the core is then held
// for the path's calibrated time. A cold start's snapshot joins the warm pool
// at the point the capture finishes.
CorePool::Work SeussNode::start_on(const Arrival& a, int core) {
  const FunctionProfile prof = profile_for(*a.spec);
  PathDecision d = caches_->lookup(prof.fn_id, core);
  Micros busy = to_us(prof.exec_time_ms);
  Path path;
  std::optional<UnikernelContext> uc;
  switch (d.kind) {
    case PathKind::kHot:
      path = Path::kHot;
      uc = std::move(d.uc);
      uc->set_core(core);
      busy += costs_.hot;
      break;
    case PathKind::kWarm:
      path = Path::kWarm;
      uc = warm_deploy(*d.snapshot, prof, core);
      busy += costs_.warm_total();
      break;
    case PathKind::kCold:
    default: {
      path = Path::kCold;
      uc = deploy_for_import(template_, core);
      import_source(*uc, prof);
      const std::uint64_t token = next_pending_++;
      pending_warm_.emplace(token, capture_function_snapshot(*uc, prof));
      events_.schedule(events_.now() + costs_.deploy + costs_.compile + costs_.capture,
                       [this, token] {
                         auto it = pending_warm_.find(token);
                         caches_->admit_warm(std::move(it->second));
                         pending_warm_.erase(it);
                       });
      busy += costs_.cold_total();
      break;
    }
  }
  begin_run(*uc, prof);
  running_.emplace(a.request_id, std::move(*uc));
  caches_->reclaim_idle(store_);

  CorePool::Work w;
  w.busy_us = busy;
  if (prof.behavior == Behavior::kIoBound) {
    w.done = [this, a, path, busy, wait = to_us(prof.io_wait_ms)](int) {
      events_.schedule(events_.now() + wait, [this, a, path, busy] {
        cores_.submit([this, a, path, busy](int) {
          return CorePool::Work{0, [this, a, path, busy](int c) { finish(a, c, path, busy); }};
        });
      });
    };
  } else {
    w.done = [this, a, path, busy](int c) { finish(a, c, path, busy); };
  }
  return w;
}

void SeussNode::finish(const Arrival& a, int core, Path path, Micros server_us) {
  auto it = running_.find(a.request_id);
  UnikernelContext uc = std::move(it->second);
  running_.erase(it);
  finish_run(uc);
  uc.set_core(core);
  if (!caches_->admit_hot(uc, events_.now())) destroy(uc);
  caches_->reclaim_idle(store_);
  on_complete_(Outcome{a.request_id, events_.now() + costs_.shim_return, path, "ok", server_us});
}

TimelineSample SeussNode::sample() const {
  const StoreStats st = store_.stats();
  TimelineSample s;
  s.t_us = events_.now();
  s.bytes_resident = st.bytes_resident;
  s.unique_frames = st.unique_frames;
  s.warm_entries = caches_->warm().size();
  s.hot_entries = caches_->hot().size();
  return s;
}

// ---------------------------------------------------------------------------

SimulationResult run_until_idle(const NodeConfig& cfg, const Workload& w, std::uint64_t seed,
                                Micros sample_interval_us) {
  cfg.validate();
  SimulationResult res;
  res.records.reserve(w.request_count());

  std::uint32_t burst = cfg.control_plane_burst;
  if (burst == 0) {
    burst = 1;
    for (const auto& s : w.streams) burst = std::max<std::uint32_t>(burst, s.clients);
  }

  EventQueue events;
  CorePool cores(events, cfg.worker_cores);
  TokenBucket bucket(cfg.cost.control_plane_peak_rps, burst);
  const Micros cp_delay = to_us(cfg.cost.control_plane_latency_ms);

  struct StreamState {
    std::size_t next = 0;
    Micros last_issue = 0;
    bool issued = false;
  };
  std::vector<StreamState> streams(w.streams.size());
  std::vector<int> stream_of;  // by request id; -1 for timed arrivals
  stream_of.reserve(w.request_count());

  std::unique_ptr<NodeBackend> node;
  std::function<void(int)> issue;

  auto submit = [&](int stream, const RequestSpec* spec, const std::string& name) {
    const std::uint64_t id = res.records.size();
    RequestRecord r;
    r.request_id = id;
    r.fn_id = spec->fn_id;
    r.stream = name;
    r.submit_us = events.now();
    res.records.push_back(std::move(r));
    stream_of.push_back(stream);
    const Micros admitted = bucket.admit(events.now());
    events.schedule(admitted + cp_delay, [&node, id, spec] { node->arrive(Arrival{id, spec}); });
  };

  issue = [&](int s) {
    const ClosedLoopStream& stream = w.streams[static_cast<std::size_t>(s)];
    StreamState& st = streams[static_cast<std::size_t>(s)];
    if (st.next >= stream.requests.size()) return;
    const RequestSpec* spec = &stream.requests[st.next];
    Micros t = std::max({events.now(), stream.start_us, spec->not_before_us});
    if (st.issued) t = std::max(t, st.last_issue + stream.min_spacing_us);
    if (t >= stream.end_us) return;
    ++st.next;
    st.last_issue = t;
    st.issued = true;
    events.schedule(t, [&submit, s, spec, &stream] { submit(s, spec, stream.name); });
  };

  CompletionFn on_complete = [&](const Outcome& o) {
    RequestRecord& r = res.records[o.request_id];
    r.complete_us = o.complete_us;
    r.path = o.path;
    r.status = o.status;
    r.server_us = o.server_us;
    const int s = stream_of[o.request_id];
    if (s >= 0) events.schedule(o.complete_us, [&issue, s] { issue(s); });
  };

  if (cfg.backend == Backend::kSeuss)
    node = std::make_unique<SeussNode>(cfg, events, cores, on_complete);
  else
    node = std::make_unique<LinuxNode>(cfg.containers, events, cores, seed, on_complete);

  for (std::size_t s = 0; s < w.streams.size(); ++s)
    for (int c = 0; c < w.streams[s].clients; ++c)
      events.schedule(w.streams[s].start_us, [&issue, s] { issue(static_cast<int>(s)); });
  for (const auto& t : w.timed)
    events.schedule(t.at_us, [&submit, &t] { submit(-1, &t.spec, t.stream); });

  res.peak_bytes_resident = node->bytes_resident();
  Micros next_sample = 0;
  auto take_sample = [&](Micros t) {
    TimelineSample x = node->sample();
    x.t_us = t;
    res.timeline.push_back(x);
  };
  while (!events.empty()) {
    const Micros t = events.next_time();
    while (sample_interval_us > 0 && next_sample <= t) {
      take_sample(next_sample);
      next_sample += sample_interval_us;
    }
    events.step();
    res.peak_bytes_resident = std::max(res.peak_bytes_resident, node->bytes_resident());
  }
  take_sample(events.now());
  res.end_us = events.now();
  res.cache_entries = node->cache_entries();
  return res;
}

}  // namespace seuss
