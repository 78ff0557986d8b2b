#include "p2plab/neighbors.hpp"

#include <algorithm>
#include <set>

namespace p2plab {

std::string to_string(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::local:
      return "local";
    case InteractionKind::remote:
      return "remote";
    case InteractionKind::periodic:
      return "periodic";
  }
  return "?";
}

bool pair_order(const InteractionPair& a, const InteractionPair& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.target_leaf != b.target_leaf) return a.target_leaf < b.target_leaf;
  if (a.source_leaf != b.source_leaf) return a.source_leaf < b.source_leaf;
  return shift_code(a.shift) < shift_code(b.shift);
}

namespace {

ImageShift negated(const ImageShift& s) {
  return {static_cast<std::int8_t>(-s[0]), static_cast<std::int8_t>(-s[1]),
          static_cast<std::int8_t>(-s[2])};
}

// Keeps one entry per (source, wrapped) and orders by source. Among several
// wrapped images of one source the choice is made so that the reverse list
// keeps the opposite shift: the smallest code of the shift seen from the
// lower leaf index.
void normalize(std::uint32_t self, std::vector<Neighbor>& list) {
  auto rank = [self](const Neighbor& n) {
    return shift_code(n.leaf > self ? n.shift : negated(n.shift));
  };
  std::sort(list.begin(), list.end(), [&](const Neighbor& a, const Neighbor& b) {
    if (a.leaf != b.leaf) return a.leaf < b.leaf;
    if (is_zero(a.shift) != is_zero(b.shift)) return is_zero(a.shift);
    return rank(a) < rank(b);
  });
  std::vector<Neighbor> out;
  out.reserve(list.size());
  for (const auto& n : list) {
    if (n.leaf == self && !is_zero(n.shift)) continue;
    if (!out.empty() && out.back().leaf == n.leaf &&
        is_zero(out.back().shift) == is_zero(n.shift)) {
      continue;
    }
    out.push_back(n);
  }
  list = std::move(out);
}

NeighborLists uniform_neighbors(const Tree& tree, bool include_self) {
  const auto side = static_cast<std::int64_t>(tree.side());
  // leaf index by grid cell
  std::vector<std::uint32_t> by_cell(tree.leaves.size());
  for (std::uint32_t l = 0; l < tree.leaves.size(); ++l) {
    const auto& c = tree.leaves[l].cell;
    by_cell[c[1] * side + c[0]] = l;
  }
  NeighborLists lists(tree.leaves.size());
  for (std::uint32_t l = 0; l < tree.leaves.size(); ++l) {
    const auto& c = tree.leaves[l].cell;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && !include_self) continue;
        std::int64_t x = static_cast<std::int64_t>(c[0]) + dx;
        std::int64_t y = static_cast<std::int64_t>(c[1]) + dy;
        ImageShift shift{};
        if (x < 0 || x >= side || y < 0 || y >= side) {
          if (!tree.periodic) continue;
          if (x < 0) { x += side; shift[0] = -1; }
          if (x >= side) { x -= side; shift[0] = 1; }
          if (y < 0) { y += side; shift[1] = -1; }
          if (y >= side) { y -= side; shift[1] = 1; }
        }
        lists[l].push_back(Neighbor{by_cell[y * side + x], shift});
      }
    }
    normalize(l, lists[l]);
    if (!include_self) {
      std::erase_if(lists[l], [l](const Neighbor& n) { return n.leaf == l; });
    }
  }
  return lists;
}

constexpr double kOverlapSlack = 1e-12;

// Strict overlap of [lo, hi) boxes; touching faces alone do not count.
bool overlaps(const Vec3& alo, const Vec3& ahi, const Vec3& blo, const Vec3& bhi, int dim) {
  for (int k = 0; k < dim; ++k) {
    if (!(blo[k] < ahi[k] - kOverlapSlack && bhi[k] > alo[k] + kOverlapSlack)) return false;
  }
  return true;
}

void query(const Tree& tree, std::int32_t node, const Vec3& lo, const Vec3& hi,
           const ImageShift& shift, std::vector<Neighbor>& out) {
  const auto& n = tree.nodes[node];
  if (!overlaps(lo, hi, n.lo, n.hi, tree.dim)) return;
  if (n.leaf >= 0) {
    out.push_back(Neighbor{static_cast<std::uint32_t>(n.leaf), shift});
    return;
  }
  query(tree, n.left, lo, hi, shift, out);
  query(tree, n.right, lo, hi, shift, out);
}

NeighborLists adaptive_neighbors(const Tree& tree, bool include_self) {
  NeighborLists lists(tree.leaves.size());
  const int dim = tree.dim;
  const int images = tree.periodic ? (dim == 3 ? 27 : 9) : 1;
  for (std::uint32_t l = 0; l < tree.leaves.size(); ++l) {
    const auto& leaf = tree.leaves[l];
    Vec3 lo = leaf.lo();
    Vec3 hi = leaf.hi();
    for (int k = 0; k < dim; ++k) {
      const double w = 2.0 * leaf.half_extent[k];
      lo[k] -= w;
      hi[k] += w;
    }
    for (int img = 0; img < images; ++img) {
      ImageShift shift{};
      if (tree.periodic) {
        shift = {static_cast<std::int8_t>(img % 3 - 1), static_cast<std::int8_t>(img / 3 % 3 - 1),
                 static_cast<std::int8_t>(dim == 3 ? img / 9 - 1 : 0)};
      }
      // a source image at p + shift overlaps the region iff the source box
      // overlaps the region moved by -shift
      Vec3 qlo = lo;
      Vec3 qhi = hi;
      bool reaches = true;
      for (int k = 0; k < dim; ++k) {
        qlo[k] -= shift[k];
        qhi[k] -= shift[k];
        if (qhi[k] <= 0.0 || qlo[k] >= 1.0) reaches = false;
      }
      if (!reaches) continue;
      query(tree, 0, qlo, qhi, shift, lists[l]);
    }
  }
  // symmetric closure
  std::vector<std::vector<Neighbor>> reverse(tree.leaves.size());
  for (std::uint32_t l = 0; l < lists.size(); ++l) {
    for (const auto& n : lists[l]) {
      reverse[n.leaf].push_back(Neighbor{l, negated(n.shift)});
    }
  }
  for (std::uint32_t l = 0; l < lists.size(); ++l) {
    lists[l].insert(lists[l].end(), reverse[l].begin(), reverse[l].end());
    normalize(l, lists[l]);
    if (!include_self) {
      std::erase_if(lists[l], [l](const Neighbor& n) { return n.leaf == l; });
    }
  }
  return lists;
}

}  // namespace

NeighborLists e2_neighbors(const Tree& tree, bool include_self) {
  if (tree.mode == TreeMode::uniform) return uniform_neighbors(tree, include_self);
  return adaptive_neighbors(tree, include_self);
}

std::uint32_t stripe_of(std::uint32_t leaf, std::size_t n_leaves, std::uint32_t partitions) {
  return static_cast<std::uint32_t>(std::uint64_t{leaf} * partitions / n_leaves);
}

Classification classify_interactions(const Tree& tree, const NeighborLists& neighbors,
                                     std::uint32_t partitions) {
  if (partitions < 1) throw Error("partition count must be >= 1");
  if (neighbors.size() != tree.leaves.size()) {
    throw Error("neighbour lists do not match the tree's leaf count");
  }
  Classification out;
  const std::size_t n_leaves = tree.leaves.size();
  std::size_t total_e2 = 0;
  for (std::uint32_t t = 0; t < n_leaves; ++t) {
    total_e2 += neighbors[t].size();
    out.stats.max_e2 = std::max(out.stats.max_e2, neighbors[t].size());
    for (const auto& n : neighbors[t]) {
      InteractionPair p;
      p.target_leaf = t;
      p.source_leaf = n.leaf;
      p.shift = n.shift;
      if (!is_zero(n.shift)) {
        p.kind = InteractionKind::periodic;
      } else if (stripe_of(t, n_leaves, partitions) != stripe_of(n.leaf, n_leaves, partitions)) {
        p.kind = InteractionKind::remote;
      } else {
        p.kind = InteractionKind::local;
      }
      out.pairs.push_back(p);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(), pair_order);
  out.stats.n_leaves = n_leaves;
  out.stats.avg_e2 = n_leaves ? static_cast<double>(total_e2) / n_leaves : 0.0;
  for (const auto& p : out.pairs) {
    const auto k = static_cast<std::size_t>(p.kind);
    ++out.stats.n_by_kind[k];
    out.stats.work_by_kind[k] +=
        std::uint64_t{tree.leaves[p.target_leaf].size()} * tree.leaves[p.source_leaf].size();
  }
  out.stats.n_interactions = out.pairs.size();
  return out;
}

}  // namespace p2plab
