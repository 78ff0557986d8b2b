#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace p2plab {

/// A contiguous range of the virtual address space that traces refer to.
/// Buffers get deterministic virtual bases so that traces, and every cache
/// statistic derived from them, do not depend on where the allocator put
/// the real storage.
struct Region {
  std::uint64_t base = 0;
  std::uint64_t bytes = 0;

  std::uint64_t end() const { return base + bytes; }
  std::uint64_t at(std::uint64_t offset) const { return base + offset; }
  bool contains(std::uint64_t address, std::uint64_t size) const {
    return address >= base && address + size <= end();
  }
};

class AddressMap {
 public:
  static constexpr std::uint64_t kAlignment = 4096;

  explicit AddressMap(std::uint64_t start = 1ull << 20) : next_(start) {}

  Region allocate(std::uint64_t bytes) {
    Region r{next_, bytes};
    // one empty page between regions keeps their lines disjoint
    next_ = (next_ + bytes + 2 * kAlignment - 1) / kAlignment * kAlignment;
    return r;
  }

 private:
  std::uint64_t next_;
};

enum class AccessKind : std::uint8_t { data, index, output };

struct Access {
  std::uint64_t address = 0;
  std::uint32_t size = 0;
  AccessKind kind = AccessKind::data;
};

/// Per-logical-thread ordered address streams, stored back to back.
struct MemoryTrace {
  std::vector<Access> accesses;
  std::vector<std::uint64_t> thread_begin{0};

  std::size_t threads() const { return thread_begin.size() - 1; }
  std::span<const Access> thread(std::size_t i) const {
    return std::span<const Access>(accesses).subspan(thread_begin[i],
                                                      thread_begin[i + 1] - thread_begin[i]);
  }
  void record(std::uint64_t address, std::uint32_t size, AccessKind kind) {
    accesses.push_back(Access{address, size, kind});
  }
  void end_thread() { thread_begin.push_back(accesses.size()); }

  /// Builds a trace from explicit per-thread lists.
  static MemoryTrace from_threads(const std::vector<std::vector<Access>>& threads) {
    MemoryTrace t;
    for (const auto& th : threads) {
      t.accesses.insert(t.accesses.end(), th.begin(), th.end());
      t.end_thread();
    }
    return t;
  }
};

}  // namespace p2plab
