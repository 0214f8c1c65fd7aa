#include "seuss/uc.hpp"

#include <atomic>

#include <absl/container/flat_hash_set.h>

namespace seuss {
namespace {

constexpr std::uint64_t kSourceRegion = 1ULL << 32;  // page index
constexpr std::uint64_t kSourceWindow = 1ULL << 24;
constexpr std::uint64_t kExecRegion = 1ULL << 33;
constexpr std::uint64_t kExecWindow = 1ULL << 28;

std::atomic<std::uint64_t> g_next_uc_id{1};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<Addr> distinct_pages(std::uint64_t seed, std::uint64_t region,
                                 std::uint64_t window, std::size_t count,
                                 std::size_t page_size) {
  std::vector<Addr> out;
  out.reserve(count);
  absl::flat_hash_set<std::uint64_t> seen;
  seen.reserve(count);
  std::uint64_t state = seed;
  while (out.size() < count) {
    state = mix(state);
    std::uint64_t index = state % window;
    if (seen.insert(index).second) out.push_back((region + index) * page_size);
  }
  return out;
}

void require_state(const UnikernelContext& uc, std::initializer_list<UcState> allowed,
                   const char* op) {
  for (UcState s : allowed)
    if (uc.state() == s) return;
  throw UcError(std::string(op) + ": illegal in state " + to_string(uc.state()));
}

void require_binding(const UnikernelContext& uc, const FunctionProfile& prof, const char* op) {
  if (!uc.bound_fn() || *uc.bound_fn() != prof.fn_id)
    throw UcError(std::string(op) + ": UC bound to '" + uc.bound_fn().value_or("") +
                  "', profile is '" + prof.fn_id + "'");
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

const char* to_string(UcState state) {
  switch (state) {
    case UcState::kAwaitingSource: return "AwaitingSource";
    case UcState::kAwaitingInput: return "AwaitingInput";
    case UcState::kRunning: return "Running";
    case UcState::kIdle: return "Idle";
    case UcState::kDestroyed: return "Destroyed";
  }
  return "?";
}

FunctionProfile nop_function(std::string fn_id) {
  FunctionProfile p;
  p.fn_id = std::move(fn_id);
  return p;
}

FunctionProfile cpu_function(std::string fn_id, double exec_ms) {
  FunctionProfile p = nop_function(std::move(fn_id));
  p.behavior = Behavior::kCpuBound;
  p.exec_time_ms = exec_ms;
  return p;
}

FunctionProfile io_function(std::string fn_id, double io_wait_ms) {
  FunctionProfile p = nop_function(std::move(fn_id));
  p.behavior = Behavior::kIoBound;
  p.io_wait_ms = io_wait_ms;
  return p;
}

std::vector<Addr> source_page_addrs(const std::string& fn_id, std::size_t count,
                                    std::size_t page_size) {
  return distinct_pages(fnv1a(fn_id) ^ 0x50a7ce, kSourceRegion, kSourceWindow, count,
                        page_size);
}

std::vector<Addr> exec_page_addrs(const std::string& fn_id, std::uint64_t run_index,
                                  std::size_t count, std::size_t page_size) {
  return distinct_pages(mix(fnv1a(fn_id)) + run_index * 0x2545f4914f6cdd1dULL, kExecRegion,
                        kExecWindow, count, page_size);
}

UnikernelContext::UnikernelContext(AddressSpace space, UcState state, int core,
                                   std::uint32_t page_factor)
    : uc_id_(g_next_uc_id.fetch_add(1)), space_(std::move(space)), state_(state),
      core_(core), registers_(space_.registers()), page_factor_(page_factor) {}

RuntimeTemplate build_runtime_template(PageStore& store, const AnticipatoryConfig& cfg) {
  auto regs = RegisterBlob::patterned(store.config().register_size, cfg.seed);
  ImagePtr base = create_synthetic_image(store, cfg.image_pages, cfg.seed, regs);
  AddressSpace boot = boot_address_space(base);
  if (cfg.warmup_enabled) {
    // Warm-up dirties runtime pages first (network stack, compiler paths),
    // then spills past the image once those are exhausted.
    for (std::size_t i = 0; i < cfg.warmup_pages; ++i)
      boot.fill_page(i * store.page_size(), mix(cfg.seed ^ 0x3a7d) + i);
  }
  SnapshotPtr runtime = boot.capture(RegisterBlob::patterned(store.config().register_size,
                                                             cfg.seed + 1));
  hold_snapshot(runtime);
  boot.destroy();

  RuntimeTemplate tpl;
  tpl.runtime_id = cfg.runtime_id;
  tpl.base = std::move(base);
  tpl.runtime_snapshot = std::move(runtime);
  tpl.warmup_enabled = cfg.warmup_enabled;
  tpl.page_factor = cfg.warmup_enabled ? 1 : cfg.unwarmed_page_factor;
  return tpl;
}

UnikernelContext deploy_for_import(const RuntimeTemplate& tpl, int core) {
  return UnikernelContext(deploy_from_snapshot(tpl.runtime_snapshot), UcState::kAwaitingSource,
                          core, tpl.page_factor);
}

std::size_t import_source(UnikernelContext& uc, const FunctionProfile& prof) {
  require_state(uc, {UcState::kAwaitingSource}, "import_source");
  const std::size_t page_size = uc.space_.store().page_size();
  const std::uint64_t salt = fnv1a(prof.fn_id);
  std::size_t allocated = 0;
  auto addrs = source_page_addrs(prof.fn_id, std::size_t{prof.source_pages} * uc.page_factor_,
                                 page_size);
  for (std::size_t i = 0; i < addrs.size(); ++i)
    allocated += uc.space_.fill_page(addrs[i], salt + i) ? 1 : 0;
  uc.pages_allocated_ += allocated;
  return allocated;
}

FunctionSnapshot capture_function_snapshot(UnikernelContext& uc, const FunctionProfile& prof) {
  require_state(uc, {UcState::kAwaitingSource}, "capture_function_snapshot");
  SnapshotPtr snap = uc.space_.capture(uc.registers_);
  uc.bound_fn_ = prof.fn_id;
  uc.state_ = UcState::kAwaitingInput;
  return FunctionSnapshot{prof.fn_id, std::move(snap), uc.page_factor_};
}

std::pair<UnikernelContext, FunctionSnapshot> cold_deploy(const RuntimeTemplate& tpl,
                                                          const FunctionProfile& prof,
                                                          int core) {
  UnikernelContext uc = deploy_for_import(tpl, core);
  import_source(uc, prof);
  FunctionSnapshot fs = capture_function_snapshot(uc, prof);
  return {std::move(uc), std::move(fs)};
}

UnikernelContext warm_deploy(const FunctionSnapshot& fn_snap, const FunctionProfile& prof,
                             int core) {
  if (fn_snap.fn_id != prof.fn_id)
    throw UcError("warm_deploy: snapshot of '" + fn_snap.fn_id + "' used for '" +
                  prof.fn_id + "'");
  UnikernelContext uc(deploy_from_snapshot(fn_snap.snapshot), UcState::kAwaitingInput, core,
                      fn_snap.page_factor);
  uc.bound_fn_ = prof.fn_id;
  return uc;
}

ExecutionRecord begin_run(UnikernelContext& uc, const FunctionProfile& prof) {
  require_state(uc, {UcState::kAwaitingInput, UcState::kIdle}, "run");
  require_binding(uc, prof, "run");
  const std::size_t page_size = uc.space_.store().page_size();
  const bool first = uc.runs_ == 0;
  const std::size_t count =
      first ? std::size_t{prof.exec_pages} * uc.page_factor_ : prof.hot_exec_pages;
  auto addrs = exec_page_addrs(prof.fn_id, uc.runs_, count, page_size);

  ExecutionRecord rec;
  const std::uint64_t salt = mix(fnv1a(prof.fn_id) ^ uc.runs_);
  for (std::size_t i = 0; i < addrs.size(); ++i)
    rec.pages_allocated += uc.space_.fill_page(addrs[i], salt + i) ? 1 : 0;
  rec.pages_written = addrs.size();
  rec.simulated_duration_ms =
      prof.exec_time_ms + (prof.behavior == Behavior::kIoBound ? prof.io_wait_ms : 0.0);
  uc.pages_allocated_ += rec.pages_allocated;
  ++uc.runs_;
  uc.state_ = UcState::kRunning;
  return rec;
}

void finish_run(UnikernelContext& uc) {
  require_state(uc, {UcState::kRunning}, "finish_run");
  uc.state_ = UcState::kIdle;
}

ExecutionRecord run(UnikernelContext& uc, const FunctionProfile& prof) {
  ExecutionRecord rec = begin_run(uc, prof);
  finish_run(uc);
  return rec;
}

void destroy(UnikernelContext& uc) {
  require_state(uc,
                {UcState::kAwaitingSource, UcState::kAwaitingInput, UcState::kRunning,
                 UcState::kIdle},
                "destroy");
  uc.space_.destroy();
  uc.state_ = UcState::kDestroyed;
}

}  // namespace seuss
