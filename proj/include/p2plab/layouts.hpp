#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p2plab/neighbors.hpp"
#include "p2plab/trace.hpp"
#include "p2plab/tree.hpp"

namespace p2plab {

inline constexpr std::uint32_t kPaddingSentinel = 0xFFFFFFFFu;

enum class Phase : std::uint8_t { collect = 0, transfer = 1, compute = 2, update = 3 };
inline constexpr std::array<Phase, 4> kAllPhases{Phase::collect, Phase::transfer, Phase::compute,
                                                 Phase::update};
std::string to_string(Phase phase);

enum class Layout : std::uint8_t { indexing, redundant };
std::string to_string(Layout layout);

/// Byte volume per runtime phase.
/// collect: bytes written while packing. transfer: packed input plus
/// results copied back. compute: bytes resident while the kernel runs.
/// update: result bytes read plus bytes scattered to particle order.
struct VolumeReport {
  Layout layout = Layout::indexing;
  std::array<std::uint64_t, 4> bytes{};

  std::uint64_t operator[](Phase p) const { return bytes[static_cast<std::size_t>(p)]; }
  std::uint64_t& operator[](Phase p) { return bytes[static_cast<std::size_t>(p)]; }
};

// ---------------------------------------------------------------------------
// Indexing layout (SoA)

/// Padded neighbour index table for one interaction kind.
struct NeighborTable {
  InteractionKind kind = InteractionKind::local;
  std::uint32_t max_e2 = 0;
  std::vector<std::uint32_t> index;      // n_leaves * max_e2, sentinel padded
  std::vector<std::uint8_t> shift_code;  // same shape; 13 means no shift
  Region index_region;
  Region shift_region;

  std::uint64_t bytes() const { return index.size() * 4 + shift_code.size(); }
};

struct IndexingBuffers {
  int dim = 3;
  std::uint32_t n_particles = 0;
  std::uint32_t n_leaves = 0;
  std::array<std::vector<double>, 3> position;  // only the first `dim` used
  std::vector<double> mass;
  std::vector<std::uint32_t> leaf_begin;     // n_leaves + 1 prefix offsets
  std::vector<std::uint32_t> particle_leaf;  // leaf of each particle slot
  std::vector<NeighborTable> tables;         // one per kind present, in kind order

  std::array<Region, 3> position_region;
  Region mass_region;
  Region leaf_begin_region;
  Region particle_leaf_region;
  Region force_region;  // kernel output, n_particles * dim doubles

  std::uint64_t particle_bytes() const;
  std::uint64_t range_bytes() const;
  std::uint64_t neighbor_bytes() const;
  std::uint64_t force_bytes() const { return std::uint64_t{n_particles} * dim * 8; }
  std::uint64_t packed_bytes() const { return particle_bytes() + range_bytes() + neighbor_bytes(); }
};

struct IndexingPack {
  IndexingBuffers buffers;
  VolumeReport volume;
};

/// SoA arrays plus per-kind neighbour tables padded to the kind's Max_E2.
IndexingPack pack_indexing(const Tree& tree, std::span<const InteractionPair> pairs);

// ---------------------------------------------------------------------------
// Redundant layout (AoS pair records)

/// 16-byte record header; followed by n_target then n_source tuples of
/// (position[dim], mass), 8 bytes per component.
struct RecordHeader {
  std::uint32_t target_leaf = 0;
  std::uint32_t source_leaf = 0;
  std::uint32_t n_target = 0;
  std::uint32_t n_source = 0;
};
static_assert(sizeof(RecordHeader) == 16);

inline constexpr std::uint64_t kDefaultBatchByteCap = 64ull << 20;

struct RedundantOptions {
  std::size_t batch_size = 20000;
  std::uint64_t batch_byte_cap = kDefaultBatchByteCap;
};

struct RedundantBuffers {
  int dim = 3;
  std::vector<std::byte> blob;               // concatenated records
  std::vector<std::uint64_t> record_offset;  // records + 1
  std::vector<std::uint64_t> slot_offset;    // records + 1; one slot per target particle
  std::vector<std::uint32_t> slot_target;    // particle slot each output slot belongs to
  std::vector<InteractionPair> record_pair;  // the pair each record was built from
  std::vector<std::size_t> batch_begin;      // batches + 1, record indices
  std::uint32_t n_particles = 0;
  Region blob_region;
  Region partial_region;  // kernel output, slots * dim doubles

  std::size_t records() const { return record_offset.size() - 1; }
  std::size_t batches() const { return batch_begin.size() - 1; }
  std::size_t slots() const { return slot_target.size(); }
  std::uint64_t tuple_bytes() const { return 8ull * (dim + 1); }
  std::uint64_t record_bytes(std::size_t r) const { return record_offset[r + 1] - record_offset[r]; }
  RecordHeader header(std::size_t r) const;
  std::uint64_t partial_bytes() const { return slots() * dim * 8ull; }
};

struct RedundantPack {
  RedundantBuffers buffers;
  VolumeReport volume;
};

/// One self-contained record per pair. Periodic sources are stored at their
/// image position. Records are grouped into ceil(pairs / batch_size)
/// batches; a single record above the byte cap is rejected.
RedundantPack pack_redundant(std::span<const InteractionPair> pairs, const Tree& tree,
                             const RedundantOptions& options = {});

/// A particle tuple as stored in, or recovered from, a packed layout.
struct ParticleTuple {
  Vec3 position{};
  double mass = 0.0;
  friend bool operator==(const ParticleTuple&, const ParticleTuple&) = default;
};

/// Tuple of `slot` as referenced by `pair` (source positions shifted to
/// the image).
ParticleTuple referenced_tuple(const Tree& tree, const InteractionPair& pair, bool source,
                               std::uint32_t slot);

/// Reads back (targets, sources) of a redundant record.
std::pair<std::vector<ParticleTuple>, std::vector<ParticleTuple>> unpack_record(
    const RedundantBuffers& buffers, std::size_t record);

/// Reads back the tuples of leaf-ordered slots [begin, end) from the SoA
/// arrays, applying `shift`.
std::vector<ParticleTuple> unpack_indexing(const IndexingBuffers& buffers, std::uint32_t begin,
                                           std::uint32_t end, const ImageShift& shift);

// ---------------------------------------------------------------------------
// Block-level redundancy over a shared interaction-pattern table

inline constexpr std::uint64_t kPatternEntryBytes = 16;
inline constexpr std::uint64_t kDbimUnknownBytes = 48;

/// Precomputed interaction weights between every sample of a box and every
/// sample of each of its 9 E2 boxes (offset index (dy+1)*3 + (dx+1)),
/// stored `rf` times back to back.
struct PatternTable {
  std::uint32_t t = 0;
  std::uint32_t grid = 0;  // sqrt(t)
  std::uint32_t rf = 1;
  std::vector<std::complex<double>> entries;  // rf * 9 t^2
  Region region;

  std::uint64_t entries_per_copy() const { return 9ull * t * t; }
  std::uint64_t bytes_per_copy() const { return entries_per_copy() * kPatternEntryBytes; }
  std::uint64_t bytes() const { return bytes_per_copy() * rf; }
  std::size_t index(std::uint32_t copy, int offset, std::uint32_t i, std::uint32_t j) const {
    return copy * entries_per_copy() + (static_cast<std::uint64_t>(offset) * t + i) * t + j;
  }
  std::span<const std::complex<double>> copy(std::uint32_t c) const {
    return std::span<const std::complex<double>>(entries).subspan(c * entries_per_copy(),
                                                                  entries_per_copy());
  }
};

/// Wave number (per box length) of the pattern weights.
inline constexpr double kPatternWaveNumber = 3.141592653589793;

/// Interaction weight between two samples separated by `r` box lengths:
/// exp(i k r) / r, zero at r = 0.
std::complex<double> pattern_weight(double r);

struct PatternPack {
  PatternTable table;
  VolumeReport volume;
};

/// Builds the shared pattern for `t` samples per box and replicates it
/// `rf` times. t must be a power of two and a perfect square.
PatternPack pack_pattern_redundant(std::uint32_t t, std::uint32_t rf);

/// A DBIM-style unknown: complex value, 2D coordinate, complex auxiliary.
struct DbimUnknown {
  std::complex<double> value;
  double x = 0.0;
  double y = 0.0;
  std::complex<double> aux;
};
static_assert(sizeof(DbimUnknown) == kDbimUnknownBytes);

struct DbimBuffers {
  std::uint32_t side = 0;  // boxes per axis
  std::uint32_t t = 0;
  std::vector<DbimUnknown> unknowns;           // leaf ordered
  std::vector<std::uint32_t> box_at_cell;      // side*side, row-major cell -> leaf
  std::vector<std::array<std::uint32_t, 2>> box_cell;
  Region unknown_region;
  Region field_region;  // kernel output, one complex per unknown

  std::size_t n() const { return unknowns.size(); }
};

struct DbimPack {
  DbimBuffers buffers;
  VolumeReport volume;
};

/// Unknowns of a uniform 2D tree with seeded complex values. The volume
/// report counts 48 bytes per unknown for transfer; the resident pattern
/// table is not part of the per-call transfer.
DbimPack pack_dbim(const Tree& tree, std::uint64_t seed);

/// Volume of the redundant DBIM variant: the base volume plus every pattern
/// copy in transfer.
VolumeReport dbim_redundant_volume(const VolumeReport& base, const PatternTable& table);

}  // namespace p2plab
