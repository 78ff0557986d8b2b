#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p2plab/tree.hpp"

namespace p2plab {

/// Periodic image offset in units of the domain length, per axis.
using ImageShift = std::array<std::int8_t, 3>;

inline bool is_zero(const ImageShift& s) { return s[0] == 0 && s[1] == 0 && s[2] == 0; }

/// Packs a shift into one byte: (sx+1) + 3(sy+1) + 9(sz+1). 13 is no shift.
inline std::uint8_t shift_code(const ImageShift& s) {
  return static_cast<std::uint8_t>((s[0] + 1) + 3 * (s[1] + 1) + 9 * (s[2] + 1));
}

inline ImageShift shift_from_code(std::uint8_t code) {
  return {static_cast<std::int8_t>(code % 3 - 1), static_cast<std::int8_t>(code / 3 % 3 - 1),
          static_cast<std::int8_t>(code / 9 - 1)};
}

struct Neighbor {
  std::uint32_t leaf = 0;
  /// The source is seen at position + shift; non-zero only for wrapped
  /// adjacency in periodic trees.
  ImageShift shift{};
};

/// neighbors[target] is sorted by (source leaf, wrapped) and holds at most one
/// entry per (source, wrapped) combination. A leaf's own periodic images
/// are never listed.
using NeighborLists = std::vector<std::vector<Neighbor>>;

/// E2 adjacency. Uniform trees use the grid offsets {-1,0,1}^d. Adaptive
/// trees list every leaf whose box overlaps the target box dilated by one
/// target extent per axis, then add the reverse relations so that the
/// lists are symmetric.
NeighborLists e2_neighbors(const Tree& tree, bool include_self);

enum class InteractionKind : std::uint8_t { local = 0, remote = 1, periodic = 2 };

inline constexpr std::array<InteractionKind, 3> kAllKinds{
    InteractionKind::local, InteractionKind::remote, InteractionKind::periodic};

std::string to_string(InteractionKind kind);

struct InteractionPair {
  std::uint32_t target_leaf = 0;
  std::uint32_t source_leaf = 0;
  InteractionKind kind = InteractionKind::local;
  ImageShift shift{};

  friend bool operator==(const InteractionPair&, const InteractionPair&) = default;
};

/// Total order used for every pair list: kind, target, source, then image
/// shift.
bool pair_order(const InteractionPair& a, const InteractionPair& b);

struct TreeStats {
  std::size_t n_leaves = 0;
  std::array<std::size_t, 3> n_by_kind{};
  std::size_t n_interactions = 0;
  double avg_e2 = 0.0;
  std::size_t max_e2 = 0;
  /// Particle-particle interactions per kind (sum over pairs of n_t * n_s).
  std::array<std::uint64_t, 3> work_by_kind{};
};

struct Classification {
  std::vector<InteractionPair> pairs;  // sorted by pair_order
  TreeStats stats;
};

/// Synthetic sub-domain of a leaf when leaves are striped into
/// `partitions` contiguous groups.
std::uint32_t stripe_of(std::uint32_t leaf, std::size_t n_leaves, std::uint32_t partitions);

/// Turns neighbour lists into typed pairs: periodic when the adjacency
/// wrapped, remote when target and source fall into different stripes,
/// local otherwise.
Classification classify_interactions(const Tree& tree, const NeighborLists& neighbors,
                                     std::uint32_t partitions);

}  // namespace p2plab
