#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "seuss/uc.hpp"

using namespace seuss;

namespace {

AnticipatoryConfig small_runtime(bool warmup = true) {
  AnticipatoryConfig c;
  c.image_pages = 512;
  c.warmup_pages = 48;
  c.warmup_enabled = warmup;
  return c;
}

std::set<Addr> written_addrs(const UnikernelContext& uc) {
  std::set<Addr> s;
  uc.space().for_each_entry([&](Addr a, const AddressSpace::Entry&) { s.insert(a); });
  return s;
}

}  // namespace

TEST_CASE("runtime template: full size image, warm-up moves into the runtime snapshot") {
  PageStore store;
  SUBCASE("default nodejs, warmup off") {
    AnticipatoryConfig c;
    c.warmup_enabled = false;
    RuntimeTemplate t = build_runtime_template(store, c);
    CHECK(c.image_pages == 29312);  // 114.5 MiB / 4 KiB
    CHECK(t.runtime_snapshot->size_pages() == 0);
    CHECK(t.runtime_snapshot->stack_pages() == 29312);
    CHECK(t.page_factor == 4);
  }
  SUBCASE("warmup on") {
    AnticipatoryConfig c;
    RuntimeTemplate t = build_runtime_template(store, c);
    CHECK(t.runtime_snapshot->size_pages() == 1581);
    CHECK(t.page_factor == 1);
    CHECK(store.stats().unique_frames == 29312 + 1581);
    CHECK(std::get<ImagePtr>(t.runtime_snapshot->parent()) == t.base);
  }
  SUBCASE("empty base") {
    AnticipatoryConfig c;
    c.image_pages = 0;
    c.warmup_enabled = false;
    RuntimeTemplate t = build_runtime_template(store, c);
    CHECK(t.runtime_snapshot->stack_pages() == 0);
    auto [uc, fs] = cold_deploy(t, nop_function("f"));
    CHECK(fs.snapshot->size_pages() == 136 * 4);
  }
}

TEST_CASE("cold deploy") {
  PageStore store;
  RuntimeTemplate t = build_runtime_template(store, small_runtime());
  const auto before = store.stats().unique_frames;

  SUBCASE("snapshot holds the source pages") {
    auto [uc, fs] = cold_deploy(t, nop_function("f"));
    CHECK(fs.snapshot->size_pages() == 136);
    CHECK(uc.state() == UcState::kAwaitingInput);
    CHECK(uc.bound_fn() == "f");
    CHECK(store.stats().unique_frames == before + 136);
    CHECK(std::get<SnapshotPtr>(fs.snapshot->parent()) == t.runtime_snapshot);
  }
  SUBCASE("zero source pages") {
    FunctionProfile p = nop_function("f");
    p.source_pages = 0;
    auto [uc, fs] = cold_deploy(t, p);
    CHECK(fs.snapshot->size_pages() == 0);
    CHECK(store.stats().unique_frames == before);
  }
  SUBCASE("warmup off multiplies the cold path pages") {
    PageStore s2;
    RuntimeTemplate t2 = build_runtime_template(s2, small_runtime(false));
    auto [uc, fs] = cold_deploy(t2, nop_function("f"));
    CHECK(fs.snapshot->size_pages() == 4 * 136);
    run(uc, nop_function("f"));
    CHECK(uc.pages_allocated() == 4 * (136 + 391));
  }
  SUBCASE("step by step states") {
    UnikernelContext uc = deploy_for_import(t, 3);
    CHECK(uc.state() == UcState::kAwaitingSource);
    CHECK_FALSE(uc.bound_fn());
    CHECK(uc.core() == 3);
    CHECK(import_source(uc, nop_function("g")) == 136);
    CHECK(uc.state() == UcState::kAwaitingSource);
    FunctionSnapshot fs = capture_function_snapshot(uc, nop_function("g"));
    CHECK(uc.state() == UcState::kAwaitingInput);
    CHECK_THROWS_AS(import_source(uc, nop_function("g")), UcError);
    CHECK_THROWS_AS(capture_function_snapshot(uc, nop_function("g")), UcError);
  }
}

TEST_CASE("two functions from one template share the runtime stack") {
  PageStore store;
  RuntimeTemplate t = build_runtime_template(store, small_runtime());
  const auto runtime_frames = store.stats().unique_frames;
  auto [foo, foo_s] = cold_deploy(t, nop_function("foo"));
  auto [bar, bar_s] = cold_deploy(t, nop_function("bar"));
  CHECK(store.stats().unique_frames ==
        runtime_frames + foo_s.snapshot->size_pages() + bar_s.snapshot->size_pages());
  CHECK(std::get<SnapshotPtr>(foo_s.snapshot->parent()) == t.runtime_snapshot);
  CHECK(std::get<SnapshotPtr>(bar_s.snapshot->parent()) == t.runtime_snapshot);
}

TEST_CASE("run writes exec pages, then hot pages") {
  PageStore store;
  RuntimeTemplate t = build_runtime_template(store, small_runtime());
  const FunctionProfile p = nop_function("f");
  auto [cold, fs] = cold_deploy(t, p);
  UnikernelContext uc = warm_deploy(fs, p);
  const auto before = store.stats().unique_frames;

  ExecutionRecord r1 = run(uc, p);
  CHECK(r1.pages_written == 391);
  CHECK(r1.pages_allocated == 391);
  CHECK(store.stats().unique_frames == before + 391);
  CHECK(uc.state() == UcState::kIdle);

  ExecutionRecord r2 = run(uc, p);
  CHECK(r2.pages_written == 13);
  CHECK(uc.run_count() == 2);
  CHECK(uc.pages_allocated() == 391 + r2.pages_allocated);

  SUBCASE("cold path accounting matches the distinct addresses written") {
    ExecutionRecord rc = run(cold, p);
    CHECK(rc.pages_written == 391);
    std::set<Addr> src;
    for (Addr a : source_page_addrs("f", 136, 4096)) src.insert(a);
    std::set<Addr> exe;
    for (Addr a : exec_page_addrs("f", 0, 391, 4096)) exe.insert(a);
    std::set<Addr> all = src;
    all.insert(exe.begin(), exe.end());
    CHECK(cold.pages_allocated() == all.size());
    CHECK(all.size() == 136 + 391);
  }
}

TEST_CASE("warm deploy") {
  PageStore store;
  RuntimeTemplate t = build_runtime_template(store, small_runtime());
  const FunctionProfile p = cpu_function("f", 150);
  auto [cold, fs] = cold_deploy(t, p);
  cold.space().destroy();
  CHECK(fs.snapshot->refcount() == 0);

  SUBCASE("100 parallel deploys, snapshot intact") {
    std::vector<std::byte> before = fs.snapshot->read_page(source_page_addrs("f", 1, 4096)[0]);
    std::vector<UnikernelContext> ucs;
    for (int i = 0; i < 100; ++i) ucs.push_back(warm_deploy(fs, p, i % 16));
    CHECK(fs.snapshot->refcount() == 100);
    for (auto& uc : ucs) {
      CHECK(uc.state() == UcState::kAwaitingInput);
      CHECK(uc.bound_fn() == "f");
      run(uc, p);
    }
    for (auto& uc : ucs) destroy(uc);
    CHECK(fs.snapshot->refcount() == 0);
    CHECK(fs.snapshot->read_page(source_page_addrs("f", 1, 4096)[0]) == before);
  }
  SUBCASE("lineage is function snapshot, runtime snapshot, base") {
    UnikernelContext uc = warm_deploy(fs, p);
    auto s1 = std::get<SnapshotPtr>(uc.space().source());
    CHECK(s1 == fs.snapshot);
    auto s2 = std::get<SnapshotPtr>(s1->parent());
    CHECK(s2 == t.runtime_snapshot);
    CHECK(std::get<ImagePtr>(s2->parent()) == t.base);
  }
  SUBCASE("binding mismatch") {
    CHECK_THROWS_AS(warm_deploy(fs, nop_function("other")), UcError);
  }
  SUBCASE("deleted snapshot") {
    delete_snapshot(fs.snapshot);
    CHECK_THROWS_AS(warm_deploy(fs, p), StoreError);
  }
  SUBCASE("IO profile reports wait in the simulated duration") {
    FunctionSnapshot io = fs;
    FunctionProfile q = io_function("f", 250);
    UnikernelContext uc = warm_deploy(io, q);
    CHECK(run(uc, q).simulated_duration_ms == doctest::Approx(250));
  }
}

TEST_CASE("illegal operations leave the UC unchanged") {
  PageStore store;
  RuntimeTemplate t = build_runtime_template(store, small_runtime());
  const FunctionProfile p = nop_function("f");
  auto [uc, fs] = cold_deploy(t, p);

  CHECK_THROWS_AS(finish_run(uc), UcError);  // not running
  CHECK(uc.state() == UcState::kAwaitingInput);
  CHECK_THROWS_AS(run(uc, nop_function("g")), UcError);
  CHECK(uc.state() == UcState::kAwaitingInput);
  CHECK(uc.run_count() == 0);

  begin_run(uc, p);
  CHECK(uc.state() == UcState::kRunning);
  CHECK_THROWS_AS(begin_run(uc, p), UcError);
  finish_run(uc);

  destroy(uc);
  CHECK(uc.state() == UcState::kDestroyed);
  CHECK_THROWS_AS(run(uc, p), UcError);
  CHECK_THROWS_AS(destroy(uc), UcError);
  CHECK(uc.state() == UcState::kDestroyed);
}

TEST_CASE("random operation sequences respect the state machine") {
  PageStore store;
  RuntimeTemplate t = build_runtime_template(store, small_runtime());
  const FunctionProfile p = nop_function("f");
  std::mt19937_64 rng(7);
  auto legal = [](UcState from, int op) {
    switch (op) {
      case 0: return from == UcState::kAwaitingSource;                              // import
      case 1: return from == UcState::kAwaitingSource;                              // capture
      case 2: return from == UcState::kAwaitingInput || from == UcState::kIdle;     // begin_run
      case 3: return from == UcState::kRunning;                                     // finish_run
      default: return from != UcState::kDestroyed;                                  // destroy
    }
  };
  std::vector<FunctionSnapshot> keep;
  for (int trial = 0; trial < 200; ++trial) {
    UnikernelContext uc = deploy_for_import(t);
    for (int step = 0; step < 12; ++step) {
      const int op = static_cast<int>(rng() % 5);
      const UcState before = uc.state();
      const auto runs = uc.run_count();
      bool threw = false;
      try {
        switch (op) {
          case 0: import_source(uc, p); break;
          case 1: keep.push_back(capture_function_snapshot(uc, p)); break;
          case 2: begin_run(uc, p); break;
          case 3: finish_run(uc); break;
          default: destroy(uc); break;
        }
      } catch (const UcError&) {
        threw = true;
      }
      CHECK(threw == !legal(before, op));
      if (threw) {
        CHECK(uc.state() == before);
        CHECK(uc.run_count() == runs);
      }
      if (uc.state() != UcState::kDestroyed)
        CHECK(uc.bound_fn().has_value() == (uc.state() != UcState::kAwaitingSource));
    }
  }
}

TEST_CASE("page address generators are deterministic and disjoint") {
  auto a = source_page_addrs("f", 136, 4096);
  auto b = source_page_addrs("f", 136, 4096);
  CHECK(a == b);
  CHECK(std::set<Addr>(a.begin(), a.end()).size() == 136);
  auto e0 = exec_page_addrs("f", 0, 391, 4096);
  auto e1 = exec_page_addrs("f", 1, 13, 4096);
  std::set<Addr> src(a.begin(), a.end());
  for (Addr x : e0) CHECK_FALSE(src.contains(x));
  CHECK(e0 != exec_page_addrs("g", 0, 391, 4096));
  CHECK(e1.size() == 13);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("written pages are exactly what the UC maps privately") {
  PageStore store;
  RuntimeTemplate t = build_runtime_template(store, small_runtime());
  const FunctionProfile p = nop_function("f");
  auto [cold, fs] = cold_deploy(t, p);
  UnikernelContext uc = warm_deploy(fs, p);
  run(uc, p);
  auto mapped = written_addrs(uc);
  auto exe = exec_page_addrs("f", 0, 391, 4096);
  CHECK(mapped == std::set<Addr>(exe.begin(), exe.end()));
}
