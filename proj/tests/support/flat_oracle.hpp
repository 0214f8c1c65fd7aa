#pragma once

// Brute-force reference for the page store. Every object keeps only its own
// write log and a parent link; a page's contents are found by replaying the
// whole lineage from the base image into a flat map. Random programs drive
// the real store and this model side by side and count disagreements.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "seuss/pagestore.hpp"

namespace oracle {

using seuss::Addr;
using Bytes = std::vector<std::byte>;
using Flat = std::map<Addr, Bytes>;

struct ProgramOptions {
  std::size_t page_size = 4096;
  std::size_t max_pages = 64;     // addresses 0 .. max_pages-1 pages
  std::size_t max_objects = 16;   // images + spaces + snapshots created
  std::size_t steps = 48;
};

struct ProgramReport {
  std::uint64_t steps = 0;
  std::uint64_t reads = 0;
  std::uint64_t read_mismatches = 0;
  std::uint64_t conservation_checks = 0;
  std::uint64_t conservation_failures = 0;
  std::uint64_t captures = 0;
  std::uint64_t minimality_failures = 0;
  std::uint64_t deletes = 0;
  std::uint64_t delete_mismatches = 0;
  std::uint64_t leaked_frames = 0;

  bool clean() const {
    return read_mismatches == 0 && conservation_failures == 0 && minimality_failures == 0 &&
           delete_mismatches == 0 && leaked_frames == 0;
  }
  void add(const ProgramReport& o) {
    steps += o.steps;
    reads += o.reads;
    read_mismatches += o.read_mismatches;
    conservation_checks += o.conservation_checks;
    conservation_failures += o.conservation_failures;
    captures += o.captures;
    minimality_failures += o.minimality_failures;
    deletes += o.deletes;
    delete_mismatches += o.delete_mismatches;
    leaked_frames += o.leaked_frames;
  }
};

class Model {
 public:
  enum class Kind { kImage, kSnapshot, kSpace };

  struct Node {
    Kind kind;
    int parent = -1;  // -1 only for images
    std::vector<std::pair<Addr, Bytes>> log;  // images: initial pages
    bool alive = true;
  };

  int add_image(std::vector<std::pair<Addr, Bytes>> pages) {
    nodes_.push_back(Node{Kind::kImage, -1, std::move(pages), true});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int add_space(int source) {
    nodes_.push_back(Node{Kind::kSpace, source, {}, true});
    return static_cast<int>(nodes_.size()) - 1;
  }
  void write(int space, Addr a, Bytes b) { nodes_[space].log.emplace_back(a, std::move(b)); }
  /// Moves the space's log into a new snapshot and re-parents the space.
  int capture(int space) {
    Node snap{Kind::kSnapshot, nodes_[space].parent, std::move(nodes_[space].log), true};
    nodes_[space].log.clear();
    nodes_.push_back(std::move(snap));
    const int id = static_cast<int>(nodes_.size()) - 1;
    nodes_[space].parent = id;
    return id;
  }
  void kill(int n) { nodes_[n].alive = false; }

  Flat materialize(int n) const {
    std::vector<int> chain;
    for (int x = n; x >= 0; x = nodes_[x].parent) chain.push_back(x);
    Flat flat;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it)
      for (const auto& [a, b] : nodes_[*it].log) flat[a] = b;
    return flat;
  }

  std::size_t distinct_pending(int space) const {
    std::set<Addr> s;
    for (const auto& [a, b] : nodes_[space].log) s.insert(a);
    return s.size();
  }
  std::set<Addr> pending_addrs(int space) const {
    std::set<Addr> s;
    for (const auto& [a, b] : nodes_[space].log) s.insert(a);
    return s;
  }

  /// Live snapshots whose parent is n plus live spaces sourced from n.
  int dependents(int n) const {
    int c = 0;
    for (const Node& x : nodes_)
      if (x.alive && x.kind != Kind::kImage && x.parent == n) ++c;
    return c;
  }

  const Node& node(int n) const { return nodes_[n]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

inline Bytes random_page(std::mt19937_64& rng, std::size_t page_size) {
  Bytes b(page_size);
  for (std::size_t i = 0; i < page_size; i += 8) {
    std::uint64_t v = rng();
    for (std::size_t k = 0; k < 8 && i + k < page_size; ++k)
      b[i + k] = static_cast<std::byte>(v >> (8 * k));
  }
  return b;
}

/// Drives one random program of boot / write / read / capture / deploy /
/// destroy / delete against a fresh store and the model.
inline ProgramReport run_program(std::uint64_t seed, const ProgramOptions& opt) {
  using namespace seuss;
  ProgramReport rep;
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  PageStore store(StoreConfig{opt.page_size, 64});
  Model model;
  const Bytes zero(opt.page_size);

  struct Real {
    ImagePtr image;
    SnapshotPtr snap;
    std::optional<AddressSpace> space;
  };
  std::vector<Real> real;

  auto random_addr = [&] { return static_cast<Addr>(pick(opt.max_pages) * opt.page_size); };

  auto live_of = [&](Model::Kind k) {
    std::vector<int> v;
    for (std::size_t i = 0; i < model.size(); ++i)
      if (model.node(static_cast<int>(i)).alive && model.node(static_cast<int>(i)).kind == k)
        v.push_back(static_cast<int>(i));
    return v;
  };

  auto check_read = [&](int n, Addr a) {
    const Flat flat = model.materialize(n);
    auto it = flat.find(a);
    const Bytes& want = it == flat.end() ? zero : it->second;
    Bytes got;
    if (model.node(n).kind == Model::Kind::kSpace)
      got = real[n].space->read_page(a);
    else
      got = real[n].snap->read_page(a);
    ++rep.reads;
    if (got != want) ++rep.read_mismatches;
  };

  auto check_conservation = [&] {
    std::map<FrameId, std::uint32_t> expect;
    std::uint64_t mappings = 0;
    for (std::size_t i = 0; i < model.size(); ++i) {
      const auto& n = model.node(static_cast<int>(i));
      if (!n.alive) continue;
      if (n.kind == Model::Kind::kImage) {
        for (const PageRef& p : real[i].image->pages()) ++expect[p.frame], ++mappings;
      } else if (n.kind == Model::Kind::kSnapshot) {
        for (const PageRef& p : real[i].snap->diff()) ++expect[p.frame], ++mappings;
      } else {
        real[i].space->for_each_entry([&](Addr, const AddressSpace::Entry& e) {
          ++expect[e.frame];
          ++mappings;
        });
      }
    }
    std::map<FrameId, std::uint32_t> got;
    std::uint64_t sum = 0;
    for (const auto& [f, rc] : store.live_frames()) {
      got[f] = rc;
      sum += rc;
    }
    const StoreStats st = store.stats();
    ++rep.conservation_checks;
    if (got != expect || sum != mappings || st.total_mappings != mappings ||
        st.unique_frames != got.size() || st.bytes_resident != got.size() * opt.page_size)
      ++rep.conservation_failures;
  };

  // Every program starts from one image.
  auto make_image = [&] {
    std::vector<std::pair<Addr, Bytes>> pages;
    std::vector<PageInit> init;
    const std::size_t count = pick(opt.max_pages + 1);
    std::set<Addr> used;
    for (std::size_t i = 0; i < count; ++i) {
      const Addr a = random_addr();
      if (!used.insert(a).second) continue;
      Bytes b = random_page(rng, opt.page_size);
      init.push_back(PageInit{a, b});
      pages.emplace_back(a, std::move(b));
    }
    real.push_back(Real{create_base_image(store, init, RegisterBlob(64)), nullptr, std::nullopt});
    model.add_image(std::move(pages));
  };
  make_image();
  check_conservation();

  for (std::size_t step = 0; step < opt.steps; ++step) {
    ++rep.steps;
    const bool room = model.size() < opt.max_objects;
    const auto spaces = live_of(Model::Kind::kSpace);
    const auto snaps = live_of(Model::Kind::kSnapshot);
    const auto images = live_of(Model::Kind::kImage);
    switch (pick(8)) {
      case 0:  // boot
        if (room) {
          const int img = images[pick(images.size())];
          real.push_back(Real{nullptr, nullptr, boot_address_space(real[img].image)});
          model.add_space(img);
        }
        break;
      case 1:
      case 2:  // write
        if (!spaces.empty()) {
          const int s = spaces[pick(spaces.size())];
          const Addr a = random_addr();
          Bytes b = random_page(rng, opt.page_size);
          real[s].space->write_page(a, b);
          model.write(s, a, std::move(b));
          check_read(s, a);
        }
        break;
      case 3:  // read
        if (!spaces.empty()) check_read(spaces[pick(spaces.size())], random_addr());
        if (!snaps.empty()) check_read(snaps[pick(snaps.size())], random_addr());
        break;
      case 4:  // capture
        if (room && !spaces.empty()) {
          const int s = spaces[pick(spaces.size())];
          const std::set<Addr> pending = model.pending_addrs(s);
          SnapshotPtr snap = real[s].space->capture(RegisterBlob::patterned(64, rng()));
          std::set<Addr> diff;
          for (const PageRef& p : snap->diff()) diff.insert(p.addr);
          ++rep.captures;
          if (snap->size_pages() != pending.size() || diff != pending ||
              real[s].space->private_page_count() != 0)
            ++rep.minimality_failures;
          real.push_back(Real{nullptr, snap, std::nullopt});
          model.capture(s);
        }
        break;
      case 5:  // deploy
        if (room && !snaps.empty()) {
          const int sn = snaps[pick(snaps.size())];
          real.push_back(Real{nullptr, nullptr, deploy_from_snapshot(real[sn].snap)});
          model.add_space(sn);
        }
        break;
      case 6:  // destroy
        if (!spaces.empty()) {
          const int s = spaces[pick(spaces.size())];
          real[s].space->destroy();
          model.kill(s);
        }
        break;
      case 7:  // delete
        if (!snaps.empty()) {
          const int sn = snaps[pick(snaps.size())];
          const bool expect_ok = model.dependents(sn) == 0;
          bool ok = true;
          try {
            delete_snapshot(real[sn].snap);
          } catch (const StoreError& e) {
            ok = false;
            if (e.code() != StoreErrorCode::kDeletionBlocked) ++rep.delete_mismatches;
          }
          ++rep.deletes;
          if (ok != expect_ok) ++rep.delete_mismatches;
          if (ok) model.kill(sn);
        }
        break;
    }
    check_conservation();
  }

  // Final sweep: every page of every live space and snapshot.
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& n = model.node(static_cast<int>(i));
    if (!n.alive || n.kind == Model::Kind::kImage) continue;
    for (std::size_t p = 0; p < opt.max_pages; ++p)
      check_read(static_cast<int>(i), static_cast<Addr>(p * opt.page_size));
  }
  check_conservation();

  // Tear down children first; nothing may be left behind.
  for (std::size_t i = 0; i < model.size(); ++i)
    if (model.node(static_cast<int>(i)).alive &&
        model.node(static_cast<int>(i)).kind == Model::Kind::kSpace) {
      real[i].space->destroy();
      model.kill(static_cast<int>(i));
    }
  for (std::size_t i = model.size(); i-- > 0;)
    if (model.node(static_cast<int>(i)).alive &&
        model.node(static_cast<int>(i)).kind == Model::Kind::kSnapshot) {
      delete_snapshot(real[i].snap);
      model.kill(static_cast<int>(i));
    }
  for (auto& r : real) {
    r.space.reset();
    r.snap.reset();
    r.image.reset();
  }
  rep.leaked_frames = store.stats().unique_frames;
  return rep;
}

}  // namespace oracle
