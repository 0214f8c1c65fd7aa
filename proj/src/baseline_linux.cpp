#include "seuss/baseline_linux.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seuss {

void ContainerModel::validate() const {
  const double nonneg[] = {create_base_ms, create_per_instance_ms, create_per_concurrent_ms,
                           delete_factor,  jitter_sigma,           unpause_ms,
                           hot_ms,         import_compile_ms,      microvm_create_ms};
  for (double v : nonneg)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("container model: durations and factors must be >= 0");
  if (cache_limit > density_limit)
    throw std::invalid_argument("container model: cache_limit exceeds density_limit");
  if (prewarm_pool_size > 0 && prewarm_parallelism < 1)
    throw std::invalid_argument("container model: prewarm_parallelism must be >= 1");
}

double container_create_latency(const ContainerModel& cm, std::uint64_t resident,
                                std::uint64_t concurrent) {
  const std::uint64_t others = concurrent > 0 ? concurrent - 1 : 0;
  return cm.create_base_ms + cm.create_per_instance_ms * static_cast<double>(resident) +
         cm.create_per_concurrent_ms * static_cast<double>(others);
}

LinuxNode::LinuxNode(const ContainerModel& model, EventQueue& events, CorePool& cores,
                     std::uint64_t seed, CompletionFn on_complete)
    : model_(model), events_(events), cores_(cores), jitter_rng_(seed ^ 0x11d0c4e7ULL),
      on_complete_(std::move(on_complete)) {
  model_.validate();
  counts_.prewarm_ready = std::min<std::uint64_t>(model_.prewarm_pool_size, model_.density_limit);
  note_resident();
}

Micros LinuxNode::jittered(double ms) {
  if (model_.jitter_sigma == 0.0) return to_us(ms);
  return to_us(ms * std::exp(model_.jitter_sigma * jitter_rng_.normal()));
}

void LinuxNode::note_resident() { peak_resident_ = std::max(peak_resident_, counts_.resident()); }

std::uint64_t LinuxNode::new_container(const std::string& fn_id) {
  const std::uint64_t id = next_container_++;
  containers_.emplace(id, Container{fn_id, {}, false});
  ++counts_.bound;
  note_resident();
  return id;
}

void LinuxNode::make_idle(std::uint64_t id) {
  Container& c = containers_.at(id);
  c.idle = true;
  c.lru_pos = idle_lru_.insert(idle_lru_.end(), id);
  idle_by_fn_[c.fn_id].push_back(id);
  ++counts_.idle;
}

std::uint64_t LinuxNode::take_idle(const std::string& fn_id) {
  auto it = idle_by_fn_.find(fn_id);
  if (it == idle_by_fn_.end()) return 0;
  const std::uint64_t id = it->second.back();
  it->second.pop_back();
  if (it->second.empty()) idle_by_fn_.erase(it);
  Container& c = containers_.at(id);
  idle_lru_.erase(c.lru_pos);
  c.idle = false;
  --counts_.idle;
  return id;
}

Micros LinuxNode::evict_lru() {
  const std::uint64_t id = idle_lru_.front();
  const std::string fn = containers_.at(id).fn_id;
  auto& stack = idle_by_fn_.at(fn);
  stack.erase(std::find(stack.begin(), stack.end(), id));
  if (stack.empty()) idle_by_fn_.erase(fn);
  idle_lru_.pop_front();
  containers_.erase(id);
  --counts_.idle;
  --counts_.bound;

  // Same occupancy as before the container left the cache.
  const double create_ms = container_create_latency(model_, counts_.resident() + 1,
                                                    lifecycle_ops() + 1);
  ++counts_.deleting;
  const Micros took = jittered(create_ms * model_.delete_factor);
  events_.schedule(events_.now() + took, [this] { --counts_.deleting; });
  return took;
}

void LinuxNode::arrive(const Arrival& a) {
  const std::string& fn = a.spec->fn_id;
  if (const std::uint64_t id = take_idle(fn)) {
    connect(a, id, Path::kHot, events_.now());
    return;
  }
  if (counts_.prewarm_ready > 0) {
    --counts_.prewarm_ready;
    const std::uint64_t id = new_container(fn);
    connect(a, id, Path::kWarm, events_.now() + to_us(model_.unpause_ms));
    refill();
    return;
  }
  start_cold(a);
}

// Evict first if the cache is full, then create. The deletion and the
// creation both count as concurrent lifecycle operations while in flight.
void LinuxNode::start_cold(const Arrival& a) {
  if (counts_.resident() >= model_.density_limit) {
    on_complete_(Outcome{a.request_id, events_.now(), Path::kFail, "fail:density", 0});
    return;
  }
  Micros delay = 0;
  if (counts_.bound + creating_bound_ >= model_.cache_limit && !idle_lru_.empty())
    delay = evict_lru();
  ++creating_bound_;
  auto create = [this, a] {
    const double ms = container_create_latency(model_, counts_.resident(), lifecycle_ops() + 1);
    ++counts_.creating;
    note_resident();
    events_.schedule(events_.now() + jittered(ms), [this, a] {
      --counts_.creating;
      --creating_bound_;
      const std::uint64_t id = new_container(a.spec->fn_id);
      connect(a, id, Path::kCold, events_.now());
    });
  };
  if (delay == 0)
    create();
  else
    events_.schedule(events_.now() + delay, create);
}

void LinuxNode::connect(const Arrival& a, std::uint64_t container, Path path, Micros start) {
  auto go = [this, a, container, path] {
    if (counts_.endpoints() > model_.bridge_capacity) {
      make_idle(container);
      on_complete_(Outcome{a.request_id, events_.now(), Path::kFail, "fail:bridge", 0});
      return;
    }
    const RequestSpec& spec = *a.spec;
    Micros busy = to_us(model_.hot_ms) + to_us(spec.exec_ms);
    if (path != Path::kHot) busy += to_us(model_.import_compile_ms);
    auto finish = [this, a, container, path, busy](int) {
      make_idle(container);
      on_complete_(Outcome{a.request_id, events_.now(), path, "ok", busy});
    };
    cores_.submit([this, busy, finish, spec_ptr = a.spec](int) {
      CorePool::Work w;
      w.busy_us = busy;
      if (spec_ptr->behavior == Behavior::kIoBound) {
        w.done = [this, finish, wait = to_us(spec_ptr->io_wait_ms)](int) {
          events_.schedule(events_.now() + wait, [this, finish] {
            cores_.submit([finish](int) { return CorePool::Work{0, finish}; });
          });
        };
      } else {
        w.done = finish;
      }
      return w;
    });
  };
  if (start <= events_.now())
    go();
  else
    events_.schedule(start, go);
}

void LinuxNode::refill() {
  while (counts_.prewarm_ready + creating_prewarm_ < model_.prewarm_pool_size &&
         creating_prewarm_ < model_.prewarm_parallelism &&
         counts_.resident() < model_.density_limit) {
    const double ms = container_create_latency(model_, counts_.resident(), lifecycle_ops() + 1);
    ++counts_.creating;
    ++creating_prewarm_;
    note_resident();
    events_.schedule(events_.now() + jittered(ms), [this] {
      --counts_.creating;
      --creating_prewarm_;
      ++counts_.prewarm_ready;
      refill();
    });
  }
}

TimelineSample LinuxNode::sample() const {
  TimelineSample s;
  s.t_us = events_.now();
  s.containers = counts_.resident();
  s.bytes_resident = bytes_resident();
  s.warm_entries = counts_.prewarm_ready;
  s.hot_entries = counts_.idle;
  return s;
}

std::uint64_t LinuxNode::bytes_resident() const {
  return counts_.resident() * model_.container_footprint_kib * 1024;
}

}  // namespace seuss
