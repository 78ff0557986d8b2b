#include "p2plab/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace p2plab {

Vec3 LeafBox::lo() const {
  return {center[0] - half_extent[0], center[1] - half_extent[1],
          center[2] - half_extent[2]};
}

Vec3 LeafBox::hi() const {
  return {center[0] + half_extent[0], center[1] + half_extent[1],
          center[2] + half_extent[2]};
}

namespace {

std::uint32_t compact_even_bits(std::uint64_t x) {
  x &= 0x5555555555555555ull;
  x = (x | (x >> 1)) & 0x3333333333333333ull;
  x = (x | (x >> 2)) & 0x0F0F0F0F0F0F0F0Full;
  x = (x | (x >> 4)) & 0x00FF00FF00FF00FFull;
  x = (x | (x >> 8)) & 0x0000FFFF0000FFFFull;
  x = (x | (x >> 16)) & 0x00000000FFFFFFFFull;
  return static_cast<std::uint32_t>(x);
}

}  // namespace

std::uint32_t uniform_samples_per_box(std::size_t n, int level) {
  if (level < 0 || level > 15) {
    throw Error("uniform tree level must be in [0, 15], got " +
                std::to_string(level));
  }
  const std::uint64_t boxes = 1ull << (2 * level);
  if (n == 0 || n % boxes != 0) {
    throw Error("N = 4^L * t violated: N=" + std::to_string(n) +
                " is not a positive multiple of 4^" + std::to_string(level) +
                "=" + std::to_string(boxes));
  }
  const std::uint64_t t = n / boxes;
  const auto root = static_cast<std::uint64_t>(std::llround(std::sqrt(double(t))));
  if (root * root != t) {
    throw Error("samples per box t=" + std::to_string(t) +
                " is not a perfect square; a box needs a sqrt(t) x sqrt(t) grid");
  }
  return static_cast<std::uint32_t>(t);
}

Tree build_uniform_tree(std::size_t n, int level, bool periodic) {
  const std::uint32_t t = uniform_samples_per_box(n, level);
  const auto grid = static_cast<std::uint32_t>(std::llround(std::sqrt(double(t))));
  Tree tree;
  tree.mode = TreeMode::uniform;
  tree.dim = 2;
  tree.levels = level;
  tree.threshold = t;
  tree.periodic = periodic;

  const std::uint32_t side = tree.side();
  const std::uint64_t boxes = std::uint64_t{side} * side;
  const double h = 1.0 / side;
  tree.leaves.reserve(boxes);
  tree.particles.reserve(n);
  for (std::uint64_t code = 0; code < boxes; ++code) {
    const std::uint32_t bx = compact_even_bits(code);
    const std::uint32_t by = compact_even_bits(code >> 1);
    LeafBox leaf;
    leaf.box_id = static_cast<std::uint32_t>(code);
    leaf.level = level;
    leaf.begin = static_cast<std::uint32_t>(tree.particles.size());
    leaf.center = {(bx + 0.5) * h, (by + 0.5) * h, 0.0};
    leaf.half_extent = {0.5 * h, 0.5 * h, 0.0};
    leaf.cell = {bx, by, 0};
    for (std::uint32_t iy = 0; iy < grid; ++iy) {
      for (std::uint32_t ix = 0; ix < grid; ++ix) {
        Particle p;
        p.position = {(bx + (ix + 0.5) / grid) * h, (by + (iy + 0.5) / grid) * h, 0.0};
        p.mass = 1.0;
        p.id = static_cast<std::uint32_t>(tree.particles.size());
        tree.particles.push_back(p);
      }
    }
    leaf.end = static_cast<std::uint32_t>(tree.particles.size());
    tree.leaves.push_back(leaf);
  }
  return tree;
}

namespace {

class AdaptiveBuilder {
 public:
  AdaptiveBuilder(Tree& tree, const AdaptiveOptions& opts) : tree_(tree), opts_(opts) {}

  std::int32_t build(const Vec3& lo, const Vec3& hi, std::uint32_t begin,
                     std::uint32_t end, int depth) {
    const auto node_index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{lo, hi, -1, -1, -1});
    tree_.levels = std::max(tree_.levels, depth);

    const std::uint32_t count = end - begin;
    if (count <= opts_.threshold) {
      make_leaf(node_index, lo, hi, begin, end, depth, false);
      return node_index;
    }
    if (depth >= opts_.max_depth) {
      tree_.depth_capped = true;
      make_leaf(node_index, lo, hi, begin, end, depth, true);
      return node_index;
    }

    std::uint32_t split = 0;
    int axis = -1;
    double plane = 0.0;
    if (!choose_split(lo, hi, begin, end, axis, split, plane)) {
      // every particle coincides; no plane can separate them
      make_leaf(node_index, lo, hi, begin, end, depth, true);
      return node_index;
    }

    Vec3 left_hi = hi;
    Vec3 right_lo = lo;
    left_hi[axis] = plane;
    right_lo[axis] = plane;
    const auto left = build(lo, left_hi, begin, split, depth + 1);
    const auto right = build(right_lo, hi, split, end, depth + 1);
    tree_.nodes[node_index].left = left;
    tree_.nodes[node_index].right = right;
    return node_index;
  }

 private:
  // Sorts the range along candidate axes (longest box extent first) and
  // places the split at the median, moved to the nearest tie boundary so
  // that left < plane <= right holds exactly.
  bool choose_split(const Vec3& lo, const Vec3& hi, std::uint32_t begin,
                    std::uint32_t end, int& axis, std::uint32_t& split,
                    double& plane) {
    std::array<int, 3> axes{0, 1, 2};
    std::stable_sort(axes.begin(), axes.begin() + opts_.dim, [&](int a, int b) {
      return (hi[a] - lo[a]) > (hi[b] - lo[b]);
    });
    auto first = tree_.particles.begin() + begin;
    auto last = tree_.particles.begin() + end;
    for (int c = 0; c < opts_.dim; ++c) {
      const int ax = axes[c];
      std::sort(first, last, [ax](const Particle& a, const Particle& b) {
        if (a.position[ax] != b.position[ax]) return a.position[ax] < b.position[ax];
        return a.id < b.id;
      });
      const std::uint32_t n = end - begin;
      const std::uint32_t mid = n / 2;
      const double median = (first + mid)->position[ax];
      auto below = std::partition_point(first, last, [&](const Particle& p) {
        return p.position[ax] < median;
      });
      auto above = std::partition_point(first, last, [&](const Particle& p) {
        return p.position[ax] <= median;
      });
      const auto lo_split = static_cast<std::uint32_t>(below - first);
      const auto hi_split = static_cast<std::uint32_t>(above - first);
      std::uint32_t chosen = 0;
      const bool lo_ok = lo_split > 0;
      const bool hi_ok = hi_split < n;
      if (lo_ok && hi_ok) {
        chosen = (mid - lo_split <= hi_split - mid) ? lo_split : hi_split;
      } else if (lo_ok) {
        chosen = lo_split;
      } else if (hi_ok) {
        chosen = hi_split;
      } else {
        continue;
      }
      axis = ax;
      split = begin + chosen;
      plane = (first + chosen)->position[ax];
      return true;
    }
    return false;
  }

  void make_leaf(std::int32_t node_index, const Vec3& lo, const Vec3& hi,
                 std::uint32_t begin, std::uint32_t end, int depth,
                 bool overfull) {
    LeafBox leaf;
    leaf.box_id = static_cast<std::uint32_t>(tree_.leaves.size());
    leaf.level = depth;
    leaf.begin = begin;
    leaf.end = end;
    for (int k = 0; k < 3; ++k) {
      leaf.center[k] = 0.5 * (lo[k] + hi[k]);
      leaf.half_extent[k] = 0.5 * (hi[k] - lo[k]);
    }
    leaf.overfull = overfull;
    if (overfull) ++tree_.overfull_leaves;
    tree_.nodes[node_index].leaf = static_cast<std::int32_t>(leaf.box_id);
    tree_.leaves.push_back(leaf);
  }

  Tree& tree_;
  const AdaptiveOptions& opts_;
};

}  // namespace

Tree build_adaptive_tree(std::span<const Particle> particles,
                         const AdaptiveOptions& options) {
  if (options.threshold < 1) throw Error("clustering threshold must be >= 1");
  if (particles.empty()) throw Error("adaptive tree needs at least one particle");
  if (options.dim != 2 && options.dim != 3) throw Error("dimension must be 2 or 3");
  if (options.max_depth < 0) throw Error("max_depth must be non-negative");

  Tree tree;
  tree.mode = TreeMode::adaptive;
  tree.dim = options.dim;
  tree.threshold = options.threshold;
  tree.periodic = options.periodic;
  tree.particles.assign(particles.begin(), particles.end());
  for (const auto& p : tree.particles) {
    for (int k = 0; k < options.dim; ++k) {
      if (!(p.position[k] >= 0.0 && p.position[k] < 1.0)) {
        throw Error("particle " + std::to_string(p.id) +
                    " lies outside the unit box");
      }
    }
  }

  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{1.0, 1.0, options.dim == 3 ? 1.0 : 0.0};
  AdaptiveBuilder builder(tree, options);
  builder.build(lo, hi, 0, static_cast<std::uint32_t>(tree.particles.size()), 0);
  return tree;
}

std::vector<std::uint32_t> particle_leaf_map(const Tree& tree) {
  std::vector<std::uint32_t> map(tree.particles.size());
  for (std::uint32_t l = 0; l < tree.leaves.size(); ++l) {
    std::fill(map.begin() + tree.leaves[l].begin, map.begin() + tree.leaves[l].end, l);
  }
  return map;
}

}  // namespace p2plab
