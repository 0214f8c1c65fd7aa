#pragma once

// Unikernel contexts: an address space bound to a lifecycle state machine and
// a function identity, plus the runtime templates and function snapshots they
// are deployed from.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "seuss/pagestore.hpp"

namespace seuss {

enum class Behavior { kNop, kCpuBound, kIoBound };

struct FunctionProfile {
  std::string fn_id;
  std::string runtime_id = "nodejs";
  std::uint32_t source_pages = 136;   // written by import + compile
  std::uint32_t exec_pages = 391;     // written by the first execution
  std::uint32_t hot_exec_pages = 13;  // written by each later execution
  double exec_time_ms = 0.0;
  Behavior behavior = Behavior::kNop;
  double io_wait_ms = 0.0;
};

FunctionProfile nop_function(std::string fn_id);
FunctionProfile cpu_function(std::string fn_id, double exec_ms);
FunctionProfile io_function(std::string fn_id, double io_wait_ms);

/// Runtime snapshot construction. With warmup on, the runtime snapshot
/// absorbs `warmup_pages` pages and the per-function page counts in
/// FunctionProfile apply as-is; with warmup off they are multiplied by
/// `unwarmed_page_factor`.
struct AnticipatoryConfig {
  std::string runtime_id = "nodejs";
  std::size_t image_pages = 29312;  // 114.5 MiB of 4 KiB pages
  bool warmup_enabled = true;
  std::size_t warmup_pages = 1581;  // (4 - 1) * 527 pages moved out of every cold path
  std::uint32_t unwarmed_page_factor = 4;
  std::uint64_t seed = 0x5e055;
};

struct RuntimeTemplate {
  std::string runtime_id;
  ImagePtr base;
  SnapshotPtr runtime_snapshot;
  bool warmup_enabled = true;
  std::uint32_t page_factor = 1;
};

/// Function-specific snapshot as stored in the warm pool.
struct FunctionSnapshot {
  std::string fn_id;
  SnapshotPtr snapshot;
  std::uint32_t page_factor = 1;
};

enum class UcState { kAwaitingSource, kAwaitingInput, kRunning, kIdle, kDestroyed };

const char* to_string(UcState state);

class UcError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExecutionRecord {
  std::size_t pages_written = 0;
  std::size_t pages_allocated = 0;  // pages that became private in this run
  double simulated_duration_ms = 0.0;
};

class UnikernelContext {
 public:
  UnikernelContext(UnikernelContext&&) noexcept = default;
  UnikernelContext& operator=(UnikernelContext&&) noexcept = default;

  std::uint64_t uc_id() const noexcept { return uc_id_; }
  UcState state() const noexcept { return state_; }
  const std::optional<std::string>& bound_fn() const noexcept { return bound_fn_; }
  int core() const noexcept { return core_; }
  void set_core(int core) noexcept { core_ = core; }
  const RegisterBlob& registers() const noexcept { return registers_; }
  const AddressSpace& space() const noexcept { return space_; }
  AddressSpace& space() noexcept { return space_; }
  std::uint64_t run_count() const noexcept { return runs_; }
  /// Distinct pages this UC has privatized since it was deployed, across
  /// captures and runs.
  std::uint64_t pages_allocated() const noexcept { return pages_allocated_; }

 private:
  friend UnikernelContext deploy_for_import(const RuntimeTemplate&, int);
  friend std::size_t import_source(UnikernelContext&, const FunctionProfile&);
  friend FunctionSnapshot capture_function_snapshot(UnikernelContext&, const FunctionProfile&);
  friend UnikernelContext warm_deploy(const FunctionSnapshot&, const FunctionProfile&, int);
  friend ExecutionRecord begin_run(UnikernelContext&, const FunctionProfile&);
  friend void finish_run(UnikernelContext&);
  friend void destroy(UnikernelContext&);

  UnikernelContext(AddressSpace space, UcState state, int core, std::uint32_t page_factor);

  std::uint64_t uc_id_;
  AddressSpace space_;
  UcState state_;
  std::optional<std::string> bound_fn_;
  int core_;
  RegisterBlob registers_;
  std::uint32_t page_factor_;
  std::uint64_t runs_ = 0;
  std::uint64_t pages_allocated_ = 0;
};

RuntimeTemplate build_runtime_template(PageStore& store, const AnticipatoryConfig& cfg);

// The cold path in three steps, so a simulator can charge time between them.
UnikernelContext deploy_for_import(const RuntimeTemplate& tpl, int core = 0);
std::size_t import_source(UnikernelContext& uc, const FunctionProfile& prof);
FunctionSnapshot capture_function_snapshot(UnikernelContext& uc, const FunctionProfile& prof);

std::pair<UnikernelContext, FunctionSnapshot> cold_deploy(const RuntimeTemplate& tpl,
                                                          const FunctionProfile& prof,
                                                          int core = 0);
UnikernelContext warm_deploy(const FunctionSnapshot& fn_snap, const FunctionProfile& prof,
                             int core = 0);

// Execution split at the Running state; run() is both halves back to back.
ExecutionRecord begin_run(UnikernelContext& uc, const FunctionProfile& prof);
void finish_run(UnikernelContext& uc);
ExecutionRecord run(UnikernelContext& uc, const FunctionProfile& prof);
void destroy(UnikernelContext& uc);

/// Page addresses a function writes. Deterministic in (fn_id, run index);
/// import pages and execution pages come from disjoint regions.
std::vector<Addr> source_page_addrs(const std::string& fn_id, std::size_t count,
                                    std::size_t page_size);
std::vector<Addr> exec_page_addrs(const std::string& fn_id, std::uint64_t run_index,
                                  std::size_t count, std::size_t page_size);

std::uint64_t fnv1a(std::string_view text);

}  // namespace seuss
