#pragma once

/// @file pagestore.hpp
/// @brief Reference-counted page frames, base images, snapshots and
/// copy-on-write address spaces.
///
/// The store is the lowest layer: it owns every page frame and counts the
/// mappings that reference each one. Base images and snapshots are immutable
/// page maps layered on top of it; an AddressSpace is the mutable view a
/// unikernel context runs in. Reads resolve through the space's own entries,
/// then the snapshot stack it was deployed from, then the base image at the
/// bottom of that stack. Writes never touch a shared frame: the first write
/// to a page allocates a private frame and marks the entry dirty, and the
/// next capture turns exactly the dirty set into a new snapshot diff.
///
/// Lifetime: a PageStore must outlive every image, snapshot and address space
/// created against it.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <absl/container/flat_hash_map.h>

namespace seuss {

using Addr = std::uint64_t;
using FrameId = std::uint32_t;

enum class StoreErrorCode {
  kMisalignedAddress,
  kBadPageSize,
  kBadRegisterSize,
  kDuplicateAddress,
  kSpaceDestroyed,
  kSnapshotDeleted,
  kDeletionBlocked,
};

class StoreError : public std::runtime_error {
 public:
  StoreError(StoreErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  StoreErrorCode code() const noexcept { return code_; }

 private:
  StoreErrorCode code_;
};

/// Opaque captured register state. Never interpreted, only round-tripped.
class RegisterBlob {
 public:
  RegisterBlob() = default;
  explicit RegisterBlob(std::size_t size) : bytes_(size) {}
  explicit RegisterBlob(std::vector<std::byte> bytes) : bytes_(std::move(bytes)) {}

  /// Deterministic non-zero contents, handy for tests and synthetic images.
  static RegisterBlob patterned(std::size_t size, std::uint64_t seed);

  std::span<const std::byte> bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size(); }

  bool operator==(const RegisterBlob&) const = default;

 private:
  std::vector<std::byte> bytes_;
};

struct StoreConfig {
  std::size_t page_size = 4096;
  std::size_t register_size = 256;
};

struct StoreStats {
  std::uint64_t unique_frames = 0;
  std::uint64_t total_mappings = 0;
  std::uint64_t bytes_resident = 0;

  bool operator==(const StoreStats&) const = default;
};

/// Pool of page frames. Frames are created with refcount 1 and reclaimed the
/// moment their count reaches zero. Frame table updates are serialized by an
/// internal mutex, so owners on different threads may retain and release
/// concurrently.
class PageStore {
 public:
  explicit PageStore(StoreConfig config = {});
  PageStore(const PageStore&) = delete;
  PageStore& operator=(const PageStore&) = delete;

  const StoreConfig& config() const noexcept { return config_; }
  std::size_t page_size() const noexcept { return config_.page_size; }

  /// Preallocates frame-table capacity.
  void reserve(std::size_t frames);

  FrameId allocate(std::span<const std::byte> bytes);
  /// Frame whose contents are the deterministic expansion of `pattern`
  /// (see expand_pattern). Costs no page-sized buffer.
  FrameId allocate_pattern(std::uint64_t pattern);

  void retain(FrameId id);
  void release(FrameId id);

  /// Replaces the contents of a frame in place. Only valid for a frame with a
  /// single owner (a dirty address-space entry).
  void overwrite(FrameId id, std::span<const std::byte> bytes);
  void overwrite_pattern(FrameId id, std::uint64_t pattern);

  void read(FrameId id, std::span<std::byte> out) const;
  std::uint32_t refcount(FrameId id) const;
  bool is_live(FrameId id) const;

  /// Every live frame with its count, in frame-id order.
  std::vector<std::pair<FrameId, std::uint32_t>> live_frames() const;

  StoreStats stats() const;

  void check_aligned(Addr addr) const;
  void check_page(std::span<const std::byte> bytes) const;
  void check_registers(const RegisterBlob& regs) const;

  /// Fills `out` with the page contents a pattern frame stands for.
  static void expand_pattern(std::uint64_t pattern, std::span<std::byte> out);

 private:
  enum class FrameKind : std::uint32_t { kFree, kPattern, kBytes };
  struct Frame {
    std::uint64_t content = 0;  // pattern, or index into blobs_
    std::uint32_t refcount = 0;
    FrameKind kind = FrameKind::kFree;
  };

  FrameId take_slot();
  std::uint32_t store_blob(std::span<const std::byte> bytes);
  void drop_content(Frame& frame);
  Frame& live_frame(FrameId id);
  const Frame& live_frame(FrameId id) const;

  StoreConfig config_;
  mutable std::mutex mutex_;
  std::vector<Frame> frames_;
  std::vector<FrameId> free_frames_;
  std::vector<std::unique_ptr<std::byte[]>> blobs_;
  std::vector<std::uint32_t> free_blobs_;
  std::uint64_t live_count_ = 0;
  std::uint64_t mapping_count_ = 0;
};

struct PageRef {
  Addr addr;
  FrameId frame;
};

struct PageInit {
  Addr addr;
  std::vector<std::byte> bytes;
};

class BaseImage;
class Snapshot;
class AddressSpace;
using ImagePtr = std::shared_ptr<const BaseImage>;
using SnapshotPtr = std::shared_ptr<Snapshot>;
using StackSource = std::variant<ImagePtr, SnapshotPtr>;

/// Bottom of every snapshot stack: the booted unikernel binary.
class BaseImage {
 public:
  BaseImage(PageStore& store, std::uint64_t id, std::vector<PageRef> pages,
            RegisterBlob entry_registers);
  ~BaseImage();
  BaseImage(const BaseImage&) = delete;
  BaseImage& operator=(const BaseImage&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  std::span<const PageRef> pages() const noexcept { return pages_; }
  std::size_t page_count() const noexcept { return pages_.size(); }
  const RegisterBlob& entry_registers() const noexcept { return entry_registers_; }
  std::optional<FrameId> find(Addr addr) const;
  PageStore& store() const noexcept { return *store_; }

 private:
  PageStore* store_;
  std::uint64_t id_;
  std::vector<PageRef> pages_;  // sorted by addr
  RegisterBlob entry_registers_;
};

/// Immutable capture: parent link, dirty-page diff and registers.
///
/// refcount() counts child snapshots, live address spaces deployed from (or
/// re-parented onto) this snapshot, and external holds such as a warm pool
/// entry. A snapshot can be deleted only at zero.
class Snapshot {
 public:
  Snapshot(PageStore& store, std::uint64_t id, StackSource parent,
           std::vector<PageRef> diff, RegisterBlob registers);
  ~Snapshot();
  Snapshot(const Snapshot&) = delete;
  Snapshot& operator=(const Snapshot&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  const StackSource& parent() const noexcept { return parent_; }
  std::span<const PageRef> diff() const noexcept { return diff_; }
  std::size_t size_pages() const noexcept { return size_pages_; }
  const RegisterBlob& registers() const noexcept { return registers_; }
  /// Number of captures in this snapshot's lineage (1 when the parent is a
  /// base image).
  std::size_t depth() const noexcept { return depth_; }
  std::uint32_t refcount() const noexcept;
  bool deleted() const noexcept;

  /// Frame visible at `addr` through this stack, if any.
  std::optional<FrameId> resolve(Addr addr) const;
  /// Reads through the stack without installing anything anywhere.
  std::vector<std::byte> read_page(Addr addr) const;
  /// Total distinct pages resolvable through the stack.
  std::size_t stack_pages() const;
  const BaseImage& root() const;
  PageStore& store() const noexcept { return *store_; }

 private:
  friend class AddressSpace;
  friend void delete_snapshot(const SnapshotPtr& snap);
  friend void hold_snapshot(const SnapshotPtr& snap);
  friend void release_snapshot(const SnapshotPtr& snap);
  friend void collect_when_unreferenced(const SnapshotPtr& snap);
  friend AddressSpace deploy_from_snapshot(const SnapshotPtr& snap);

  static constexpr std::uint32_t kDeleted = ~std::uint32_t{0};

  void add_ref();
  void drop_ref();
  void reclaim();

  PageStore* store_;
  std::uint64_t id_;
  StackSource parent_;
  std::vector<PageRef> diff_;  // sorted by addr
  std::size_t size_pages_;
  RegisterBlob registers_;
  std::size_t depth_;
  std::atomic<std::uint32_t> refcount_{0};
  std::atomic<bool> collectable_{false};
};

/// Mutable, single-owner view of a snapshot stack. Destroyed explicitly or on
/// destruction; either way every mapping it holds is released.
class AddressSpace {
 public:
  struct Entry {
    FrameId frame;
    bool writable;
    bool dirty;
  };

  AddressSpace(AddressSpace&& other) noexcept;
  AddressSpace& operator=(AddressSpace&& other) noexcept;
  AddressSpace(const AddressSpace&) = delete;
  AddressSpace& operator=(const AddressSpace&) = delete;
  ~AddressSpace();

  bool live() const noexcept { return live_; }
  const StackSource& source() const noexcept { return source_; }
  /// Dirty entries: exactly what a capture right now would put in its diff.
  std::size_t private_page_count() const noexcept { return private_pages_; }
  std::size_t entry_count() const noexcept { return entries_.size(); }
  std::optional<Entry> entry(Addr addr) const;
  const RegisterBlob& registers() const noexcept { return registers_; }
  PageStore& store() const noexcept { return *store_; }

  std::vector<std::byte> read_page(Addr addr);
  void read_page(Addr addr, std::span<std::byte> out);
  void write_page(Addr addr, std::span<const std::byte> bytes);
  /// Whole-page write of synthetic contents. Same fault semantics as
  /// write_page. Returns true if the write privatized a page.
  bool fill_page(Addr addr, std::uint64_t pattern);

  SnapshotPtr capture(RegisterBlob registers);
  void destroy();

  /// Visits (addr, entry) pairs. Order is unspecified.
  template <class Fn>
  void for_each_entry(Fn&& fn) const {
    for (const auto& [addr, e] : entries_) fn(addr, e);
  }

 private:
  friend AddressSpace boot_address_space(const ImagePtr& image);
  friend AddressSpace deploy_from_snapshot(const SnapshotPtr& snap);

  AddressSpace(PageStore& store, StackSource source, RegisterBlob registers);

  void require_live() const;
  /// Gives `addr` a private writable frame; true if one was allocated.
  template <class Alloc, class Overwrite>
  bool privatize(Addr addr, Alloc&& alloc, Overwrite&& overwrite);
  void release_all() noexcept;

  PageStore* store_;
  StackSource source_;
  absl::flat_hash_map<Addr, Entry> entries_;
  std::size_t private_pages_ = 0;
  RegisterBlob registers_;
  bool live_ = true;
};

/// Frame visible at `addr` through an image or snapshot stack.
std::optional<FrameId> resolve(const StackSource& source, Addr addr);

ImagePtr create_base_image(PageStore& store, std::span<const PageInit> pages,
                           RegisterBlob registers);
/// Image of `page_count` consecutive pages starting at `base`, each holding
/// pattern-derived contents seeded from `seed`.
ImagePtr create_synthetic_image(PageStore& store, std::size_t page_count,
                                std::uint64_t seed, RegisterBlob registers,
                                Addr base = 0);

AddressSpace boot_address_space(const ImagePtr& image);
AddressSpace deploy_from_snapshot(const SnapshotPtr& snap);
SnapshotPtr capture_snapshot(AddressSpace& space, RegisterBlob registers);
void destroy_address_space(AddressSpace& space);

/// Throws StoreError{kDeletionBlocked} while refcount > 0.
void delete_snapshot(const SnapshotPtr& snap);
/// External reference (a cache entry) that blocks deletion.
void hold_snapshot(const SnapshotPtr& snap);
void release_snapshot(const SnapshotPtr& snap);
/// Deletes the snapshot now if unreferenced, otherwise as soon as its last
/// reference goes away. Cascades to collectable parents.
void collect_when_unreferenced(const SnapshotPtr& snap);

inline StoreStats store_stats(const PageStore& store) { return store.stats(); }

}  // namespace seuss
