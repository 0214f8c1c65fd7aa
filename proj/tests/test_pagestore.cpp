#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "seuss/pagestore.hpp"
#include "support/flat_oracle.hpp"

using namespace seuss;

namespace {

constexpr std::size_t kPage = 4096;

std::vector<std::byte> page_of(std::uint8_t v, std::size_t size = kPage) {
  return std::vector<std::byte>(size, std::byte{v});
}

RegisterBlob regs() { return RegisterBlob(256); }

ImagePtr two_page_image(PageStore& store) {
  std::vector<PageInit> pages{{0x0000, page_of(1)}, {0x1000, page_of(2)}};
  return create_base_image(store, pages, regs());
}

}  // namespace

TEST_CASE("empty image holds no frames") {
  PageStore store;
  auto img = create_base_image(store, {}, regs());
  CHECK(img->page_count() == 0);
  CHECK(store.stats() == StoreStats{0, 0, 0});
  AddressSpace s = boot_address_space(img);
  CHECK(s.entry_count() == 0);
}

TEST_CASE("two page image: one frame per page, refcount 1") {
  PageStore store;
  auto img = two_page_image(store);
  CHECK(img->page_count() == 2);
  for (const PageRef& p : img->pages()) CHECK(store.refcount(p.frame) == 1);
  CHECK(store.stats().unique_frames == 2);
}

TEST_CASE("identical bytes are not deduplicated") {
  PageStore store;
  std::vector<PageInit> pages{{0x0000, page_of(7)}, {0x1000, page_of(7)}};
  auto img = create_base_image(store, pages, regs());
  CHECK(store.stats().unique_frames == 2);
  CHECK(img->pages()[0].frame != img->pages()[1].frame);
}

TEST_CASE("image construction errors") {
  PageStore store;
  std::vector<PageInit> misaligned{{0x10, page_of(1)}};
  CHECK_THROWS_AS(create_base_image(store, misaligned, regs()), StoreError);
  std::vector<PageInit> short_page{{0x0, page_of(1, 100)}};
  CHECK_THROWS_AS(create_base_image(store, short_page, regs()), StoreError);
  std::vector<PageInit> dup{{0x0, page_of(1)}, {0x0, page_of(2)}};
  CHECK_THROWS_AS(create_base_image(store, dup, regs()), StoreError);
  CHECK_THROWS_AS(create_base_image(store, {}, RegisterBlob(3)), StoreError);
  CHECK_THROWS_AS(PageStore(StoreConfig{0, 256}), StoreError);
}

TEST_CASE("boot maps every page read-only and shares frames") {
  PageStore store;
  auto img = two_page_image(store);
  AddressSpace a = boot_address_space(img);
  AddressSpace b = boot_address_space(img);
  CHECK(a.entry_count() == 2);
  CHECK(a.private_page_count() == 0);
  for (const PageRef& p : img->pages()) {
    auto ea = a.entry(p.addr);
    auto eb = b.entry(p.addr);
    REQUIRE(ea);
    REQUIRE(eb);
    CHECK_FALSE(ea->writable);
    CHECK_FALSE(ea->dirty);
    CHECK(ea->frame == eb->frame);
    CHECK(store.refcount(p.frame) == 3);
  }
  // one 2-page image, two boots
  CHECK(store.stats() == StoreStats{2, 6, 2 * kPage});
}

TEST_CASE("reads") {
  PageStore store;
  auto img = two_page_image(store);
  AddressSpace s = boot_address_space(img);
  CHECK(s.read_page(0x1000) == page_of(2));
  CHECK(s.read_page(0x9000) == page_of(0));
  CHECK_THROWS_AS(s.read_page(0x1001), StoreError);
}

TEST_CASE("copy-on-write leaves the shared frame alone") {
  PageStore store;
  auto img = two_page_image(store);
  AddressSpace s = boot_address_space(img);
  const FrameId shared = img->pages()[0].frame;
  const std::uint32_t before = store.refcount(shared);
  s.write_page(0x0, page_of(9));
  CHECK(s.private_page_count() == 1);
  CHECK(store.refcount(shared) == before - 1);  // the space dropped its mapping
  std::vector<std::byte> raw(kPage);
  store.read(shared, raw);
  CHECK(raw == page_of(1));
  s.write_page(0x0, page_of(10));
  CHECK(s.private_page_count() == 1);
  CHECK(s.read_page(0x0) == page_of(10));
  auto e = s.entry(0x0);
  CHECK(e->dirty);
  CHECK(e->writable);
}

TEST_CASE("13 distinct writes make a 13 page snapshot") {
  PageStore store;
  auto img = create_synthetic_image(store, 64, 1, regs());
  AddressSpace s = boot_address_space(img);
  auto root = s.capture(regs());
  AddressSpace d = deploy_from_snapshot(root);
  for (int i = 0; i < 13; ++i) d.fill_page(static_cast<Addr>(i) * kPage, 100 + i);
  d.fill_page(0, 5);  // same page again
  auto snap = d.capture(regs());
  CHECK(snap->size_pages() == 13);
}

TEST_CASE("capture") {
  PageStore store;
  auto img = two_page_image(store);
  AddressSpace s = boot_address_space(img);

  SUBCASE("zero dirty pages") {
    auto snap = s.capture(regs());
    CHECK(snap->size_pages() == 0);
    CHECK(std::get<SnapshotPtr>(s.source()) == snap);
    CHECK(s.entry_count() == 2);
  }
  SUBCASE("diff is the dirty set") {
    s.write_page(0x0, page_of(3));
    s.write_page(0x1000, page_of(4));
    s.write_page(0x5000, page_of(5));
    auto snap = s.capture(regs());
    CHECK(snap->size_pages() == 3);
    CHECK(s.private_page_count() == 0);
    s.for_each_entry([](Addr, const AddressSpace::Entry& e) {
      CHECK_FALSE(e.dirty);
      CHECK_FALSE(e.writable);
    });
  }
  SUBCASE("stacked captures") {
    s.write_page(0x0, page_of(0xA));       // A
    s.write_page(0x1000, page_of(0xB));    // B
    auto s1 = s.capture(regs());
    s.write_page(0x1000, page_of(0xBB));   // B again
    s.write_page(0x2000, page_of(0xC));    // C
    auto s2 = s.capture(regs());
    CHECK(s2->size_pages() == 2);
    CHECK(std::get<SnapshotPtr>(s2->parent()) == s1);
    CHECK(s2->read_page(0x0) == page_of(0xA));
    CHECK(s2->read_page(0x1000) == page_of(0xBB));
    CHECK(s1->read_page(0x1000) == page_of(0xB));
    CHECK(s2->depth() == 2);
    CHECK(s1->depth() == 1);
    CHECK(&s2->root() == img.get());
  }
  SUBCASE("captured bytes never change afterwards") {
    s.write_page(0x0, page_of(0x11));
    auto snap = s.capture(regs());
    s.write_page(0x0, page_of(0x22));
    AddressSpace d = deploy_from_snapshot(snap);
    d.write_page(0x0, page_of(0x33));
    CHECK(snap->read_page(0x0) == page_of(0x11));
  }
  SUBCASE("registers round trip") {
    RegisterBlob r = RegisterBlob::patterned(256, 42);
    auto snap = s.capture(r);
    CHECK(snap->registers() == r);
    AddressSpace d = deploy_from_snapshot(snap);
    CHECK(d.registers() == r);
  }
}

TEST_CASE("write in one space, read in a space deployed from its capture") {
  PageStore store;
  auto img = two_page_image(store);
  AddressSpace uc1 = boot_address_space(img);
  uc1.write_page(0x3000, page_of(0x5A));
  auto snap = uc1.capture(regs());
  AddressSpace uc2 = deploy_from_snapshot(snap);
  CHECK(uc2.entry_count() == 0);  // lazy
  CHECK(uc2.read_page(0x3000) == page_of(0x5A));
  CHECK(uc2.entry_count() == 1);
  CHECK_FALSE(uc2.entry(0x3000)->dirty);
}

TEST_CASE("deploying many spaces adds no frames") {
  PageStore store;
  auto img = create_synthetic_image(store, 32, 9, regs());
  AddressSpace s = boot_address_space(img);
  s.fill_page(0, 1);
  auto snap = s.capture(regs());
  const auto before = store.stats().unique_frames;
  std::vector<AddressSpace> spaces;
  for (int i = 0; i < 1000; ++i) spaces.push_back(deploy_from_snapshot(snap));
  for (auto& d : spaces) d.read_page(0);
  CHECK(store.stats().unique_frames == before);
  CHECK(snap->refcount() == 1001);
}

TEST_CASE("destroy reclaims private frames") {
  PageStore store;
  auto img = create_synthetic_image(store, 16, 3, regs());
  AddressSpace s = boot_address_space(img);
  auto snap = s.capture(regs());
  const auto before = store.stats();

  AddressSpace d = deploy_from_snapshot(snap);
  for (int i = 0; i < 10; ++i) d.fill_page(static_cast<Addr>(i + 100) * kPage, i);
  CHECK(store.stats().unique_frames == before.unique_frames + 10);
  d.destroy();
  CHECK(store.stats() == before);
  CHECK_THROWS_AS(d.destroy(), StoreError);
  CHECK_THROWS_AS(d.read_page(0), StoreError);
  CHECK_THROWS_AS(d.write_page(0, page_of(1)), StoreError);
  CHECK_THROWS_AS(d.capture(regs()), StoreError);
}

TEST_CASE("destroying a fresh boot leaks nothing") {
  PageStore store;
  auto img = two_page_image(store);
  const auto before = store.stats();
  AddressSpace s = boot_address_space(img);
  s.destroy();
  CHECK(store.stats() == before);
}

TEST_CASE("snapshot deletion") {
  PageStore store;
  auto img = two_page_image(store);
  AddressSpace s = boot_address_space(img);
  s.write_page(0x0, page_of(8));
  auto parent = s.capture(regs());
  s.write_page(0x1000, page_of(9));
  auto child = s.capture(regs());
  const auto image_only = StoreStats{2, 2, 2 * kPage};

  SUBCASE("blocked while a space depends on it") {
    CHECK(child->refcount() == 1);
    try {
      delete_snapshot(child);
      FAIL("expected DeletionBlocked");
    } catch (const StoreError& e) {
      CHECK(e.code() == StoreErrorCode::kDeletionBlocked);
    }
  }
  SUBCASE("destroying the last space makes it deletable") {
    s.destroy();
    CHECK(child->refcount() == 0);
    CHECK_THROWS_AS(delete_snapshot(parent), StoreError);  // child still there
    delete_snapshot(child);
    CHECK(parent->refcount() == 0);
    delete_snapshot(parent);
    CHECK(store.stats() == image_only);
    CHECK(img->page_count() == 2);
    CHECK_THROWS_AS(delete_snapshot(parent), StoreError);
    CHECK_THROWS_AS(deploy_from_snapshot(parent), StoreError);
  }
  SUBCASE("a hold blocks deletion; collect_when_unreferenced waits for the last user") {
    s.destroy();
    hold_snapshot(child);
    CHECK_THROWS_AS(delete_snapshot(child), StoreError);
    AddressSpace d = deploy_from_snapshot(child);
    release_snapshot(child);
    collect_when_unreferenced(child);
    CHECK_FALSE(child->deleted());
    d.destroy();
    CHECK(child->deleted());
    CHECK(parent->refcount() == 0);
  }
}

TEST_CASE("stats: bytes_resident is frames times page size") {
  PageStore store(StoreConfig{1024, 256});
  auto img = create_synthetic_image(store, 5, 1, regs());
  CHECK(store.stats().bytes_resident == 5 * 1024);
}

TEST_CASE("pattern frames read back their expansion") {
  PageStore store;
  FrameId f = store.allocate_pattern(77);
  std::vector<std::byte> a(kPage), b(kPage);
  store.read(f, a);
  PageStore::expand_pattern(77, b);
  CHECK(a == b);
  store.release(f);
  CHECK_FALSE(store.is_live(f));
}

TEST_CASE("random programs agree with the flat-replay model") {
  oracle::ProgramOptions opt;
  opt.page_size = 512;
  oracle::ProgramReport total;
  for (std::uint64_t seed = 1; seed <= 400; ++seed) total.add(oracle::run_program(seed, opt));
  CHECK(total.read_mismatches == 0);
  CHECK(total.conservation_failures == 0);
  CHECK(total.minimality_failures == 0);
  CHECK(total.delete_mismatches == 0);
  CHECK(total.leaked_frames == 0);
  CHECK(total.reads > 10000);
  CHECK(total.captures > 100);
  CHECK(total.deletes > 100);
}

TEST_CASE("the model itself replays lineage") {
  oracle::Model m;
  const int img = m.add_image({{0, page_of(1, 8)}});
  const int s = m.add_space(img);
  m.write(s, 8, page_of(2, 8));
  const int snap = m.capture(s);
  m.write(s, 0, page_of(3, 8));
  auto flat = m.materialize(snap);
  CHECK(flat.at(0) == page_of(1, 8));
  CHECK(flat.at(8) == page_of(2, 8));
  CHECK(m.materialize(s).at(0) == page_of(3, 8));
  CHECK(m.dependents(snap) == 1);
}
