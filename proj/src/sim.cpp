#include "seuss/sim.hpp"

#include <cmath>
#include <stdexcept>

namespace seuss {

void EventQueue::schedule(Micros t, Action action) {
  if (t < now_)
    throw std::logic_error("event scheduled at " + std::to_string(t) + " before now " +
                           std::to_string(now_));
  heap_.push(Event{t, seq_++, std::move(action)});
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  // priority_queue::top is const; the action is moved out through a copy of
  // the handle before popping.
  Event ev = std::move(const_cast<Event&>(heap_.top()));
  heap_.pop();
  now_ = ev.t;
  ev.action();
  return true;
}

// ---------------------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_s, std::uint32_t burst) {
  if (!(rate_per_s >= 1.0) || rate_per_s != std::floor(rate_per_s))
    throw std::invalid_argument("token bucket rate must be a positive whole number per second");
  if (burst < 1) throw std::invalid_argument("token bucket burst must be >= 1");
  rate_ = static_cast<std::uint64_t>(rate_per_s);
  tolerance_ = (burst - 1) * 1'000'000ULL;
}

Micros TokenBucket::admit(Micros t) {
  // One admission advances the theoretical arrival time by 1/rate seconds,
  // which is 1e6 in units of us * rate.
  const std::uint64_t scaled = static_cast<std::uint64_t>(t) * rate_;
  std::uint64_t at = scaled;
  if (tat_ > tolerance_ && tat_ - tolerance_ > scaled) at = tat_ - tolerance_;
  tat_ = std::max(tat_, at) + 1'000'000ULL;
  return static_cast<Micros>((at + rate_ - 1) / rate_);
}

Micros FifoStage::enter(Micros t, Micros service) {
  const Micros start = std::max(t, free_at_);
  free_at_ = start + service;
  return start;
}

// ---------------------------------------------------------------------------

CorePool::CorePool(EventQueue& events, int cores) : events_(events) {
  if (cores < 1) throw std::invalid_argument("need at least one worker core");
  busy_.assign(static_cast<std::size_t>(cores), false);
}

void CorePool::submit(Task task) {
  queue_.push_back(std::move(task));
  request_dispatch();
}

// Dispatch runs as its own event so that every core freed at the same
// instant is idle before any of them picks up work; the lowest index wins.
void CorePool::request_dispatch() {
  if (dispatch_pending_) return;
  dispatch_pending_ = true;
  events_.schedule(events_.now(), [this] {
    dispatch_pending_ = false;
    dispatch();
  });
}

void CorePool::dispatch() {
  for (std::size_t core = 0; core < busy_.size() && !queue_.empty(); ++core) {
    if (busy_[core]) continue;
    Task task = std::move(queue_.front());
    queue_.pop_front();
    Work work = task(static_cast<int>(core));
    busy_[core] = true;
    ++busy_count_;
    events_.schedule(events_.now() + work.busy_us,
                     [this, core, done = std::move(work.done)] {
                       busy_[core] = false;
                       --busy_count_;
                       if (done) done(static_cast<int>(core));
                       if (!queue_.empty()) request_dispatch();
                     });
  }
}

const char* to_string(Path p) {
  switch (p) {
    case Path::kHot: return "hot";
    case Path::kWarm: return "warm";
    case Path::kCold: return "cold";
    case Path::kFail: return "fail";
  }
  return "?";
}

}  // namespace seuss
