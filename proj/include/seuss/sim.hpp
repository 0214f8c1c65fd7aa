#pragma once

// Discrete-event plumbing shared by both node backends: the event queue,
// the control-plane rate limiter, a single FIFO stage and the pool of worker
// cores fed from one shared work queue.

#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "seuss/cost_model.hpp"
#include "seuss/workload.hpp"

namespace seuss {

/// Time-ordered actions. Ties run in scheduling order.
class EventQueue {
 public:
  using Action = std::function<void()>;

  Micros now() const noexcept { return now_; }
  /// Throws std::logic_error if t is in the past.
  void schedule(Micros t, Action action);
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t pending() const noexcept { return heap_.size(); }
  Micros next_time() const { return heap_.top().t; }
  /// Pops and runs the earliest action. False if none was pending.
  bool step();

 private:
  struct Event {
    Micros t;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  Micros now_ = 0;
  std::uint64_t seq_ = 0;
};

/// Rate limiter as a generic cell rate algorithm: `rate` admissions per
/// second with up to `burst` back-to-back. Arithmetic is in microseconds
/// scaled by the rate, so no rounding accumulates. Callers must present
/// requests in nondecreasing time order; delayed requests keep that order.
class TokenBucket {
 public:
  TokenBucket(double rate_per_s, std::uint32_t burst);
  /// Admission time for a request presented at t.
  Micros admit(Micros t);

 private:
  std::uint64_t rate_;      // per second, integer
  std::uint64_t tolerance_; // (burst - 1) * 1e6, scaled units
  std::uint64_t tat_ = 0;   // theoretical arrival time, scaled units
};

/// One server, first come first served.
class FifoStage {
 public:
  /// Service start for a job arriving at t needing `service` us.
  Micros enter(Micros t, Micros service);

 private:
  Micros free_at_ = 0;
};

/// Worker cores pulling from a shared FIFO queue. Work is non-preemptive:
/// once started, a task holds its core for `busy_us`.
class CorePool {
 public:
  struct Work {
    Micros busy_us = 0;
    std::function<void(int core)> done;
  };
  /// Runs on the core that picks the task up, at pickup time.
  using Task = std::function<Work(int core)>;

  CorePool(EventQueue& events, int cores);

  void submit(Task task);
  int cores() const noexcept { return static_cast<int>(busy_.size()); }
  int busy() const noexcept { return busy_count_; }
  std::size_t queued() const noexcept { return queue_.size(); }

 private:
  void request_dispatch();
  void dispatch();

  EventQueue& events_;
  std::vector<bool> busy_;
  int busy_count_ = 0;
  std::deque<Task> queue_;
  bool dispatch_pending_ = false;
};

enum class Path { kHot, kWarm, kCold, kFail };

const char* to_string(Path p);

struct RequestRecord {
  std::uint64_t request_id = 0;
  std::string fn_id;
  std::string stream;
  Micros submit_us = 0;
  Micros complete_us = 0;
  Path path = Path::kFail;
  std::string status;      // "ok" or "fail:<reason>"
  Micros server_us = 0;    // time spent on a worker core

  Micros latency_us() const noexcept { return complete_us - submit_us; }
  bool failed() const noexcept { return path == Path::kFail; }
};

struct TimelineSample {
  Micros t_us = 0;
  std::uint64_t bytes_resident = 0;
  std::uint64_t unique_frames = 0;
  std::uint64_t warm_entries = 0;
  std::uint64_t hot_entries = 0;
  std::uint64_t containers = 0;
};

/// A request as it reaches the node, after the control plane.
struct Arrival {
  std::uint64_t request_id;
  const RequestSpec* spec;
};

struct Outcome {
  std::uint64_t request_id;
  Micros complete_us;
  Path path;
  std::string status;
  Micros server_us;
};

using CompletionFn = std::function<void(const Outcome&)>;

class NodeBackend {
 public:
  virtual ~NodeBackend() = default;
  /// Called at arrival time. The backend reports exactly one Outcome per
  /// arrival through the completion callback it was built with.
  virtual void arrive(const Arrival& a) = 0;
  virtual TimelineSample sample() const = 0;
  virtual std::uint64_t bytes_resident() const = 0;
  /// Cached function state at the end of the run (snapshots plus idle UCs,
  /// or cached containers).
  virtual std::uint64_t cache_entries() const = 0;
};

}  // namespace seuss
