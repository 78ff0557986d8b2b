#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p2plab/particles.hpp"

namespace p2plab {

enum class TreeMode { uniform, adaptive };

/// A final-level box. Particles of the leaf occupy [begin, end) of the
/// tree's leaf-ordered particle array.
struct LeafBox {
  std::uint32_t box_id = 0;
  int level = 0;
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  Vec3 center{};
  Vec3 half_extent{};
  /// Grid cell (uniform mode only).
  std::array<std::uint32_t, 3> cell{};
  /// Holds more than the threshold because it could not be split further.
  bool overfull = false;

  std::uint32_t size() const { return end - begin; }
  Vec3 lo() const;
  Vec3 hi() const;
};

/// Binary-tree node used for neighbour queries in adaptive mode.
struct TreeNode {
  Vec3 lo{};
  Vec3 hi{};
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;
};

struct Tree {
  TreeMode mode = TreeMode::uniform;
  int dim = 2;
  /// Uniform: the level L. Adaptive: maximum depth reached.
  int levels = 0;
  /// Uniform: samples per box. Adaptive: clustering threshold.
  std::uint32_t threshold = 1;
  bool periodic = false;
  std::vector<LeafBox> leaves;
  /// Leaf-ordered; `Particle::id` keeps the caller's original index.
  std::vector<Particle> particles;
  std::vector<TreeNode> nodes;  // adaptive only; nodes[0] is the root
  std::size_t overfull_leaves = 0;
  bool depth_capped = false;

  std::size_t size() const { return particles.size(); }
  /// Boxes per axis in uniform mode.
  std::uint32_t side() const { return 1u << levels; }
};

/// Regular quadtree over N grid samples: 4^L boxes, each holding a
/// sqrt(t) x sqrt(t) grid of samples at sub-cell centres. Leaves are
/// ordered along the Morton curve.
Tree build_uniform_tree(std::size_t n, int level, bool periodic = false);

/// Samples per box for a uniform tree, validating every precondition.
std::uint32_t uniform_samples_per_box(std::size_t n, int level);

struct AdaptiveOptions {
  std::uint32_t threshold = 8;
  int dim = 3;
  int max_depth = 64;
  bool periodic = false;
};

/// Binary tree by longest-axis median split until every leaf holds at most
/// `threshold` particles. Leaves that cannot be split (coincident points or
/// the depth cap) are kept and flagged as overfull.
Tree build_adaptive_tree(std::span<const Particle> particles,
                         const AdaptiveOptions& options);

/// Leaf index containing each leaf-ordered particle slot.
std::vector<std::uint32_t> particle_leaf_map(const Tree& tree);

}  // namespace p2plab
