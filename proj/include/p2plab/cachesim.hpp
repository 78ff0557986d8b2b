#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "p2plab/trace.hpp"

namespace p2plab {

/// Single-level set-associative LRU cache. `group` threads run in lockstep:
/// their accesses are interleaved round-robin before the next group starts.
struct CacheConfig {
  static constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();

  std::uint64_t capacity_bytes = 2ull << 20;
  std::uint32_t line_bytes = 128;
  std::uint32_t ways = 16;
  std::uint32_t group = 32;

  bool unbounded() const { return capacity_bytes == kUnbounded; }
  std::uint64_t lines() const { return unbounded() ? kUnbounded : capacity_bytes / line_bytes; }
  /// Throws when the geometry is inconsistent.
  void validate() const;

  static CacheConfig infinite(std::uint32_t line_bytes = 128, std::uint32_t group = 32);
  static CacheConfig fully_associative(std::uint64_t capacity_bytes, std::uint32_t line_bytes,
                                       std::uint32_t group = 32);
};

enum class AccessFilter { all, without_index };

/// Number of maximal runs of consecutive line ids among the distinct lines
/// each thread touches.
std::vector<std::uint64_t> dispersion(const MemoryTrace& trace, std::uint32_t line_bytes,
                                      AccessFilter filter = AccessFilter::all);

/// Distinct bytes each thread touches (union of its access intervals).
std::vector<std::uint64_t> volume(const MemoryTrace& trace,
                                  AccessFilter filter = AccessFilter::all);

/// Distinct bytes touched by each lockstep group of `group` threads.
std::vector<std::uint64_t> group_volume(const MemoryTrace& trace, std::uint32_t group,
                                        AccessFilter filter = AccessFilter::all);

struct CacheStats {
  std::uint64_t misses = 0;
  std::uint64_t hits = 0;
  std::uint64_t accesses() const { return misses + hits; }
  double miss_rate() const { return accesses() ? double(misses) / double(accesses()) : 0.0; }
};

/// Line-granular simulation; an access spanning k lines counts k times.
CacheStats simulate_cache(const MemoryTrace& trace, const CacheConfig& config);

/// Simulates an explicit line-id sequence as one thread.
CacheStats simulate_lines(const std::vector<std::uint64_t>& lines, const CacheConfig& config);

struct LocalityReport {
  std::vector<std::uint64_t> dispersion;
  std::vector<std::uint64_t> volume;
  double mean_d = 0.0;
  double max_d = 0.0;
  double mean_v = 0.0;
  double max_v = 0.0;
  /// Same statistics with index reads filtered out.
  double mean_d_without_index = 0.0;
  double mean_v_without_index = 0.0;
  /// Largest footprint of a resident lockstep group.
  double max_group_v = 0.0;
  CacheStats cache;
};

LocalityReport analyze_locality(const MemoryTrace& trace, const CacheConfig& config);

enum class LocalityRegime { fits_cache, exceeds_cache };
std::string to_string(LocalityRegime regime);

struct LocalitySpeedup {
  double value = 1.0;
  double dispersion_ratio = 1.0;  // D' = D_base / D_rest
  double volume_ratio = 1.0;      // V' = V_base / V_rest
  LocalityRegime regime = LocalityRegime::fits_cache;
};

/// D'*V' when the restructured footprint fits in `capacity`, V'/D'
/// otherwise. The footprint defaults to v_rest; callers comparing against
/// a resident thread group pass the group footprint instead. `scale` is a
/// calibration constant applied to the result.
LocalitySpeedup locality_speedup(double d_base, double v_base, double d_rest, double v_rest,
                                 double capacity, double footprint = -1.0, double scale = 1.0);

}  // namespace p2plab
