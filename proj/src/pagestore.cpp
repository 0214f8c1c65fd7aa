#include "seuss/pagestore.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>

namespace seuss {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::atomic<std::uint64_t> g_next_object_id{1};

std::uint64_t next_object_id() { return g_next_object_id.fetch_add(1); }

std::optional<FrameId> find_in(std::span<const PageRef> pages, Addr addr) {
  auto it = std::lower_bound(pages.begin(), pages.end(), addr,
                             [](const PageRef& p, Addr a) { return p.addr < a; });
  if (it != pages.end() && it->addr == addr) return it->frame;
  return std::nullopt;
}

}  // namespace

RegisterBlob RegisterBlob::patterned(std::size_t size, std::uint64_t seed) {
  std::vector<std::byte> bytes(size);
  for (std::size_t i = 0; i < size; ++i)
    bytes[i] = static_cast<std::byte>(splitmix64(seed + i / 8) >> (8 * (i % 8)));
  return RegisterBlob(std::move(bytes));
}

// ---------------------------------------------------------------------------
// PageStore

PageStore::PageStore(StoreConfig config) : config_(config) {
  if (config_.page_size == 0)
    throw StoreError(StoreErrorCode::kBadPageSize, "page_size must be positive");
}

void PageStore::expand_pattern(std::uint64_t pattern, std::span<std::byte> out) {
  std::size_t i = 0;
  std::uint64_t word = 0;
  for (; i + 8 <= out.size(); i += 8) {
    word = splitmix64(pattern ^ (i * 0x100000001b3ULL));
    std::memcpy(out.data() + i, &word, 8);
  }
  if (i < out.size()) {
    word = splitmix64(pattern ^ (i * 0x100000001b3ULL));
    std::memcpy(out.data() + i, &word, out.size() - i);
  }
}

void PageStore::check_aligned(Addr addr) const {
  if (addr % config_.page_size != 0)
    throw StoreError(StoreErrorCode::kMisalignedAddress,
                     "address " + std::to_string(addr) + " is not page-aligned");
}

void PageStore::check_page(std::span<const std::byte> bytes) const {
  if (bytes.size() != config_.page_size)
    throw StoreError(StoreErrorCode::kBadPageSize,
                     "page block of " + std::to_string(bytes.size()) +
                         " bytes, expected " + std::to_string(config_.page_size));
}

void PageStore::check_registers(const RegisterBlob& regs) const {
  if (regs.size() != config_.register_size)
    throw StoreError(StoreErrorCode::kBadRegisterSize,
                     "register blob of " + std::to_string(regs.size()) +
                         " bytes, expected " + std::to_string(config_.register_size));
}

void PageStore::reserve(std::size_t frames) {
  std::lock_guard lock(mutex_);
  frames_.reserve(frames);
}

FrameId PageStore::take_slot() {
  if (!free_frames_.empty()) {
    FrameId id = free_frames_.back();
    free_frames_.pop_back();
    return id;
  }
  frames_.emplace_back();
  return static_cast<FrameId>(frames_.size() - 1);
}

std::uint32_t PageStore::store_blob(std::span<const std::byte> bytes) {
  std::uint32_t index;
  if (!free_blobs_.empty()) {
    index = free_blobs_.back();
    free_blobs_.pop_back();
  } else {
    index = static_cast<std::uint32_t>(blobs_.size());
    blobs_.push_back(nullptr);
  }
  blobs_[index] = std::make_unique<std::byte[]>(config_.page_size);
  std::memcpy(blobs_[index].get(), bytes.data(), config_.page_size);
  return index;
}

void PageStore::drop_content(Frame& frame) {
  if (frame.kind == FrameKind::kBytes) {
    auto index = static_cast<std::uint32_t>(frame.content);
    blobs_[index].reset();
    free_blobs_.push_back(index);
  }
  frame.content = 0;
}

PageStore::Frame& PageStore::live_frame(FrameId id) {
  if (id >= frames_.size() || frames_[id].kind == FrameKind::kFree)
    throw std::logic_error("frame " + std::to_string(id) + " is not live");
  return frames_[id];
}

const PageStore::Frame& PageStore::live_frame(FrameId id) const {
  if (id >= frames_.size() || frames_[id].kind == FrameKind::kFree)
    throw std::logic_error("frame " + std::to_string(id) + " is not live");
  return frames_[id];
}

FrameId PageStore::allocate(std::span<const std::byte> bytes) {
  check_page(bytes);
  std::lock_guard lock(mutex_);
  FrameId id = take_slot();
  Frame& f = frames_[id];
  f.content = store_blob(bytes);
  f.kind = FrameKind::kBytes;
  f.refcount = 1;
  ++live_count_;
  ++mapping_count_;
  return id;
}

FrameId PageStore::allocate_pattern(std::uint64_t pattern) {
  std::lock_guard lock(mutex_);
  FrameId id = take_slot();
  Frame& f = frames_[id];
  f.content = pattern;
  f.kind = FrameKind::kPattern;
  f.refcount = 1;
  ++live_count_;
  ++mapping_count_;
  return id;
}

void PageStore::retain(FrameId id) {
  std::lock_guard lock(mutex_);
  ++live_frame(id).refcount;
  ++mapping_count_;
}

void PageStore::release(FrameId id) {
  std::lock_guard lock(mutex_);
  Frame& f = live_frame(id);
  --mapping_count_;
  if (--f.refcount == 0) {
    drop_content(f);
    f.kind = FrameKind::kFree;
    free_frames_.push_back(id);
    --live_count_;
  }
}

void PageStore::overwrite(FrameId id, std::span<const std::byte> bytes) {
  check_page(bytes);
  std::lock_guard lock(mutex_);
  Frame& f = live_frame(id);
  if (f.kind == FrameKind::kBytes) {
    std::memcpy(blobs_[f.content].get(), bytes.data(), config_.page_size);
    return;
  }
  f.content = store_blob(bytes);
  f.kind = FrameKind::kBytes;
}

void PageStore::overwrite_pattern(FrameId id, std::uint64_t pattern) {
  std::lock_guard lock(mutex_);
  Frame& f = live_frame(id);
  drop_content(f);
  f.content = pattern;
  f.kind = FrameKind::kPattern;
}

void PageStore::read(FrameId id, std::span<std::byte> out) const {
  std::lock_guard lock(mutex_);
  const Frame& f = live_frame(id);
  if (f.kind == FrameKind::kBytes)
    std::memcpy(out.data(), blobs_[f.content].get(), config_.page_size);
  else
    expand_pattern(f.content, out.first(config_.page_size));
}

std::uint32_t PageStore::refcount(FrameId id) const {
  std::lock_guard lock(mutex_);
  if (id >= frames_.size() || frames_[id].kind == FrameKind::kFree) return 0;
  return frames_[id].refcount;
}

bool PageStore::is_live(FrameId id) const {
  std::lock_guard lock(mutex_);
  return id < frames_.size() && frames_[id].kind != FrameKind::kFree;
}

std::vector<std::pair<FrameId, std::uint32_t>> PageStore::live_frames() const {
  std::lock_guard lock(mutex_);
  std::vector<std::pair<FrameId, std::uint32_t>> out;
  out.reserve(live_count_);
  for (std::size_t i = 0; i < frames_.size(); ++i)
    if (frames_[i].kind != FrameKind::kFree)
      out.emplace_back(static_cast<FrameId>(i), frames_[i].refcount);
  return out;
}

StoreStats PageStore::stats() const {
  std::lock_guard lock(mutex_);
  return {live_count_, mapping_count_, live_count_ * config_.page_size};
}

// ---------------------------------------------------------------------------
// BaseImage

BaseImage::BaseImage(PageStore& store, std::uint64_t id, std::vector<PageRef> pages,
                     RegisterBlob entry_registers)
    : store_(&store), id_(id), pages_(std::move(pages)),
      entry_registers_(std::move(entry_registers)) {}

BaseImage::~BaseImage() {
  for (const PageRef& p : pages_) store_->release(p.frame);
}

std::optional<FrameId> BaseImage::find(Addr addr) const { return find_in(pages_, addr); }

ImagePtr create_base_image(PageStore& store, std::span<const PageInit> pages,
                           RegisterBlob registers) {
  store.check_registers(registers);
  std::vector<Addr> addrs;
  addrs.reserve(pages.size());
  for (const PageInit& p : pages) {
    store.check_aligned(p.addr);
    store.check_page(p.bytes);
    addrs.push_back(p.addr);
  }
  std::sort(addrs.begin(), addrs.end());
  if (std::adjacent_find(addrs.begin(), addrs.end()) != addrs.end())
    throw StoreError(StoreErrorCode::kDuplicateAddress, "duplicate page address in image");

  std::vector<PageRef> refs;
  refs.reserve(pages.size());
  for (const PageInit& p : pages) refs.push_back({p.addr, store.allocate(p.bytes)});
  std::sort(refs.begin(), refs.end(),
            [](const PageRef& a, const PageRef& b) { return a.addr < b.addr; });
  return std::make_shared<const BaseImage>(store, next_object_id(), std::move(refs),
                                           std::move(registers));
}

ImagePtr create_synthetic_image(PageStore& store, std::size_t page_count,
                                std::uint64_t seed, RegisterBlob registers, Addr base) {
  store.check_registers(registers);
  store.check_aligned(base);
  std::vector<PageRef> refs;
  refs.reserve(page_count);
  for (std::size_t i = 0; i < page_count; ++i)
    refs.push_back({base + i * store.page_size(),
                    store.allocate_pattern(splitmix64(seed ^ (i + 1)))});
  return std::make_shared<const BaseImage>(store, next_object_id(), std::move(refs),
                                           std::move(registers));
}

// ---------------------------------------------------------------------------
// Snapshot

Snapshot::Snapshot(PageStore& store, std::uint64_t id, StackSource parent,
                   std::vector<PageRef> diff, RegisterBlob registers)
    : store_(&store), id_(id), parent_(std::move(parent)), diff_(std::move(diff)),
      size_pages_(diff_.size()), registers_(std::move(registers)) {
  depth_ = std::holds_alternative<SnapshotPtr>(parent_)
               ? std::get<SnapshotPtr>(parent_)->depth() + 1
               : 1;
}

Snapshot::~Snapshot() {
  if (refcount_.load() != kDeleted) reclaim();
}

std::uint32_t Snapshot::refcount() const noexcept {
  auto rc = refcount_.load();
  return rc == kDeleted ? 0 : rc;
}

bool Snapshot::deleted() const noexcept { return refcount_.load() == kDeleted; }

void Snapshot::add_ref() {
  auto rc = refcount_.load();
  do {
    if (rc == kDeleted)
      throw StoreError(StoreErrorCode::kSnapshotDeleted,
                       "snapshot " + std::to_string(id_) + " has been deleted");
  } while (!refcount_.compare_exchange_weak(rc, rc + 1));
}

void Snapshot::drop_ref() {
  auto prev = refcount_.fetch_sub(1);
  if (prev == 1 && collectable_.load()) {
    std::uint32_t zero = 0;
    if (refcount_.compare_exchange_strong(zero, kDeleted)) reclaim();
  }
}

// Releases the diff and the parent reference. Caller has made the snapshot
// unreachable for new references.
void Snapshot::reclaim() {
  refcount_.store(kDeleted);
  for (const PageRef& p : diff_) store_->release(p.frame);
  diff_.clear();
  diff_.shrink_to_fit();
  if (auto* parent = std::get_if<SnapshotPtr>(&parent_)) (*parent)->drop_ref();
}

std::optional<FrameId> Snapshot::resolve(Addr addr) const {
  for (const Snapshot* s = this;;) {
    if (auto f = find_in(s->diff_, addr)) return f;
    if (auto* p = std::get_if<SnapshotPtr>(&s->parent_)) {
      s = p->get();
    } else {
      return std::get<ImagePtr>(s->parent_)->find(addr);
    }
  }
}

std::vector<std::byte> Snapshot::read_page(Addr addr) const {
  store_->check_aligned(addr);
  if (deleted())
    throw StoreError(StoreErrorCode::kSnapshotDeleted, "read through deleted snapshot");
  std::vector<std::byte> out(store_->page_size());
  if (auto f = resolve(addr)) store_->read(*f, out);
  return out;
}

std::size_t Snapshot::stack_pages() const {
  std::vector<Addr> addrs;
  const Snapshot* s = this;
  for (;;) {
    for (const PageRef& p : s->diff_) addrs.push_back(p.addr);
    if (auto* parent = std::get_if<SnapshotPtr>(&s->parent_)) {
      s = parent->get();
    } else {
      for (const PageRef& p : std::get<ImagePtr>(s->parent_)->pages()) addrs.push_back(p.addr);
      break;
    }
  }
  std::sort(addrs.begin(), addrs.end());
  return static_cast<std::size_t>(std::unique(addrs.begin(), addrs.end()) - addrs.begin());
}

const BaseImage& Snapshot::root() const {
  const Snapshot* s = this;
  while (auto* p = std::get_if<SnapshotPtr>(&s->parent_)) s = p->get();
  return *std::get<ImagePtr>(s->parent_);
}

std::optional<FrameId> resolve(const StackSource& source, Addr addr) {
  if (auto* snap = std::get_if<SnapshotPtr>(&source)) return (*snap)->resolve(addr);
  return std::get<ImagePtr>(source)->find(addr);
}

void delete_snapshot(const SnapshotPtr& snap) {
  std::uint32_t zero = 0;
  if (snap->refcount_.compare_exchange_strong(zero, Snapshot::kDeleted)) {
    snap->reclaim();
    return;
  }
  if (zero == Snapshot::kDeleted)
    throw StoreError(StoreErrorCode::kSnapshotDeleted,
                     "snapshot " + std::to_string(snap->id()) + " already deleted");
  throw StoreError(StoreErrorCode::kDeletionBlocked,
                   "snapshot " + std::to_string(snap->id()) + " has " +
                       std::to_string(zero) + " live dependents");
}

void hold_snapshot(const SnapshotPtr& snap) { snap->add_ref(); }

void release_snapshot(const SnapshotPtr& snap) { snap->drop_ref(); }

void collect_when_unreferenced(const SnapshotPtr& snap) {
  snap->collectable_.store(true);
  std::uint32_t zero = 0;
  if (snap->refcount_.compare_exchange_strong(zero, Snapshot::kDeleted)) snap->reclaim();
}

// ---------------------------------------------------------------------------
// AddressSpace

AddressSpace::AddressSpace(PageStore& store, StackSource source, RegisterBlob registers)
    : store_(&store), source_(std::move(source)), registers_(std::move(registers)) {}

AddressSpace::AddressSpace(AddressSpace&& other) noexcept
    : store_(other.store_), source_(std::move(other.source_)),
      entries_(std::move(other.entries_)), private_pages_(other.private_pages_),
      registers_(std::move(other.registers_)), live_(other.live_) {
  other.entries_.clear();
  other.private_pages_ = 0;
  other.live_ = false;
}

AddressSpace& AddressSpace::operator=(AddressSpace&& other) noexcept {
  if (this != &other) {
    release_all();
    store_ = other.store_;
    source_ = std::move(other.source_);
    entries_ = std::move(other.entries_);
    private_pages_ = other.private_pages_;
    registers_ = std::move(other.registers_);
    live_ = other.live_;
    other.entries_.clear();
    other.private_pages_ = 0;
    other.live_ = false;
  }
  return *this;
}

AddressSpace::~AddressSpace() { release_all(); }

void AddressSpace::release_all() noexcept {
  if (!live_) return;
  for (const auto& [addr, e] : entries_) store_->release(e.frame);
  entries_.clear();
  private_pages_ = 0;
  if (auto* snap = std::get_if<SnapshotPtr>(&source_)) (*snap)->drop_ref();
  live_ = false;
}

void AddressSpace::require_live() const {
  if (!live_) throw StoreError(StoreErrorCode::kSpaceDestroyed, "address space destroyed");
}

std::optional<AddressSpace::Entry> AddressSpace::entry(Addr addr) const {
  auto it = entries_.find(addr);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AddressSpace::read_page(Addr addr, std::span<std::byte> out) {
  require_live();
  store_->check_aligned(addr);
  if (auto it = entries_.find(addr); it != entries_.end()) {
    store_->read(it->second.frame, out);
    return;
  }
  if (auto f = resolve(source_, addr)) {
    store_->retain(*f);
    entries_.emplace(addr, Entry{*f, false, false});
    store_->read(*f, out);
    return;
  }
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(store_->page_size()),
            std::byte{0});
}

std::vector<std::byte> AddressSpace::read_page(Addr addr) {
  std::vector<std::byte> out(store_->page_size());
  read_page(addr, out);
  return out;
}

template <class Alloc, class Overwrite>
bool AddressSpace::privatize(Addr addr, Alloc&& alloc, Overwrite&& overwrite) {
  auto [it, inserted] = entries_.try_emplace(addr, Entry{0, false, false});
  if (!inserted && it->second.dirty) {
    overwrite(it->second.frame);
    return false;
  }
  FrameId fresh;
  try {
    fresh = alloc();
  } catch (...) {
    if (inserted) entries_.erase(it);
    throw;
  }
  if (!inserted) store_->release(it->second.frame);
  it->second = Entry{fresh, true, true};
  ++private_pages_;
  return true;
}

void AddressSpace::write_page(Addr addr, std::span<const std::byte> bytes) {
  require_live();
  store_->check_aligned(addr);
  store_->check_page(bytes);
  // A full-page write overwrites whatever the copy would have carried, so the
  // private frame is initialized directly from `bytes`.
  privatize(
      addr, [&] { return store_->allocate(bytes); },
      [&](FrameId f) { store_->overwrite(f, bytes); });
}

bool AddressSpace::fill_page(Addr addr, std::uint64_t pattern) {
  require_live();
  store_->check_aligned(addr);
  return privatize(
      addr, [&] { return store_->allocate_pattern(pattern); },
      [&](FrameId f) { store_->overwrite_pattern(f, pattern); });
}

SnapshotPtr AddressSpace::capture(RegisterBlob registers) {
  require_live();
  store_->check_registers(registers);
  std::vector<PageRef> diff;
  diff.reserve(private_pages_);
  for (const auto& [addr, e] : entries_)
    if (e.dirty) diff.push_back({addr, e.frame});
  std::sort(diff.begin(), diff.end(),
            [](const PageRef& a, const PageRef& b) { return a.addr < b.addr; });

  auto snap = std::make_shared<Snapshot>(*store_, next_object_id(), source_,
                                         std::move(diff), std::move(registers));
  // The diff shares the frames; this space keeps its own mapping to each.
  for (const PageRef& p : snap->diff()) store_->retain(p.frame);
  for (auto& [addr, e] : entries_) e.writable = e.dirty = false;
  private_pages_ = 0;
  // The space's reference on the old source becomes the new snapshot's
  // reference on its parent.
  snap->refcount_.store(1);
  source_ = snap;
  return snap;
}

void AddressSpace::destroy() {
  require_live();
  release_all();
}

AddressSpace boot_address_space(const ImagePtr& image) {
  AddressSpace space(image->store(), image, image->entry_registers());
  space.entries_.reserve(image->page_count());
  for (const PageRef& p : image->pages()) {
    image->store().retain(p.frame);
    space.entries_.emplace(p.addr, AddressSpace::Entry{p.frame, false, false});
  }
  return space;
}

AddressSpace deploy_from_snapshot(const SnapshotPtr& snap) {
  snap->add_ref();
  return AddressSpace(snap->store(), snap, snap->registers());
}

SnapshotPtr capture_snapshot(AddressSpace& space, RegisterBlob registers) {
  return space.capture(std::move(registers));
}

void destroy_address_space(AddressSpace& space) { space.destroy(); }

}  // namespace seuss
