#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "p2plab/layouts.hpp"

using namespace p2plab;

namespace {

struct Built {
  Tree tree;
  Classification c;
};

Built adaptive(std::size_t n, std::uint32_t t, std::uint64_t seed, bool periodic, int dim = 3,
               std::uint32_t partitions = 3) {
  Built b;
  b.tree = build_adaptive_tree(generate_uniform(n, dim, seed), {t, dim, 64, periodic});
  b.c = classify_interactions(b.tree, e2_neighbors(b.tree, true), partitions);
  return b;
}

Tree two_particle_tree() {
  std::vector<Particle> p{Particle{{0.2, 0.3, 0.4}, 0.5, 0}, Particle{{0.6, 0.7, 0.8}, 0.25, 1}};
  return build_adaptive_tree(p, {2, 3, 64, false});
}

}  // namespace

TEST_CASE("indexing pack of one leaf without neighbours") {
  const Tree tree = two_particle_tree();
  const auto pack = pack_indexing(tree, {});
  CHECK(pack.buffers.particle_bytes() == 64);
  CHECK(pack.buffers.tables.empty());
  CHECK(pack.buffers.neighbor_bytes() == 0);
  CHECK(pack.volume[Phase::collect] == pack.buffers.packed_bytes());
}

TEST_CASE("indexing tables are padded with the sentinel") {
  const auto b = adaptive(3000, 8, 3, true);
  const auto pack = pack_indexing(b.tree, b.c.pairs);
  const auto& buf = pack.buffers;
  CHECK(buf.position[0].size() == 3000);
  CHECK(buf.mass.size() == 3000);
  CHECK(buf.leaf_begin.size() == b.tree.leaves.size() + 1);
  std::size_t kinds_present = 0;
  for (auto k : b.c.stats.n_by_kind) kinds_present += k > 0;
  CHECK(buf.tables.size() == kinds_present);
  for (const auto& table : buf.tables) {
    const auto kind_count = b.c.stats.n_by_kind[static_cast<std::size_t>(table.kind)];
    const auto real = std::count_if(table.index.begin(), table.index.end(),
                                    [](std::uint32_t v) { return v != kPaddingSentinel; });
    CHECK(std::size_t(real) == kind_count);
    CHECK(table.index.size() == std::size_t{buf.n_leaves} * table.max_e2);
  }
  CHECK(pack.volume[Phase::collect] ==
        buf.particle_bytes() + buf.range_bytes() + buf.neighbor_bytes());
}

TEST_CASE("indexing volume against the closed form on 1024 leaves, t=64") {
  const Tree tree = build_uniform_tree(65536, 5);
  const auto c = classify_interactions(tree, e2_neighbors(tree, false), 1);
  REQUIRE(c.stats.max_e2 == 8);
  const auto pack = pack_indexing(tree, c.pairs);
  const double measured = double(pack.volume[Phase::transfer]);
  const double closed = 16.0 * 1024 * (3 * 64 + 1 + 8 + 3 * 64 * 8);
  CHECK(pack.buffers.particle_bytes() == 65536ull * 8 * 3);
  CHECK(measured > 0);
  const double ratio = measured / closed;
  MESSAGE("indexing transfer bytes " << measured << " vs closed form " << closed << " ratio "
                                     << ratio);
  CHECK(ratio > 0.1);
  CHECK(ratio < 10);
}

TEST_CASE("redundant record for a self pair of two particles is 144 bytes") {
  const Tree tree = two_particle_tree();
  const std::vector<InteractionPair> pairs{InteractionPair{0, 0, InteractionKind::local, {}}};
  const auto pack = pack_redundant(pairs, tree);
  REQUIRE(pack.buffers.records() == 1);
  CHECK(pack.buffers.record_bytes(0) == 144);
  CHECK(pack.buffers.blob.size() == 144);
  const auto h = pack.buffers.header(0);
  CHECK(h.n_target == 2);
  CHECK(h.n_source == 2);
  const auto [targets, sources] = unpack_record(pack.buffers, 0);
  CHECK(targets == sources);  // stored twice by design
}

TEST_CASE("40001 pairs in batches of 20000 make three batches") {
  const Tree tree = build_uniform_tree(65536, 7);
  const auto c = classify_interactions(tree, e2_neighbors(tree, true), 1);
  REQUIRE(c.pairs.size() >= 40001);
  const std::vector<InteractionPair> pairs(c.pairs.begin(), c.pairs.begin() + 40001);
  const auto pack = pack_redundant(pairs, tree, {20000, kDefaultBatchByteCap});
  CHECK(pack.buffers.batches() == 3);
  CHECK(pack.buffers.batch_begin.back() == 40001);
}

TEST_CASE("redundant packing errors") {
  const auto b = adaptive(500, 8, 2, false);
  CHECK_THROWS_AS(pack_redundant({}, b.tree), Error);
  CHECK_THROWS_AS(pack_redundant(b.c.pairs, b.tree, {0, kDefaultBatchByteCap}), Error);
  CHECK_THROWS_WITH_AS(pack_redundant(b.c.pairs, b.tree, {100, 64}),
                       doctest::Contains("target"), Error);
}

TEST_CASE("both layouts round-trip every referenced tuple bit-exactly") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto b = adaptive(1500, 4 << (seed % 3), seed, seed % 2 == 0, seed == 3 ? 2 : 3);
    const auto ipack = pack_indexing(b.tree, b.c.pairs);
    const auto rpack = pack_redundant(b.c.pairs, b.tree, {997, kDefaultBatchByteCap});
    REQUIRE(rpack.buffers.records() == b.c.pairs.size());
    for (std::size_t r = 0; r < b.c.pairs.size(); ++r) {
      const auto& pair = b.c.pairs[r];
      CHECK(rpack.buffers.record_pair[r] == pair);
      const auto& tl = b.tree.leaves[pair.target_leaf];
      const auto& sl = b.tree.leaves[pair.source_leaf];
      const auto [targets, sources] = unpack_record(rpack.buffers, r);
      REQUIRE(targets.size() == tl.size());
      REQUIRE(sources.size() == sl.size());
      const auto itargets = unpack_indexing(ipack.buffers, tl.begin, tl.end, ImageShift{});
      const auto isources = unpack_indexing(ipack.buffers, sl.begin, sl.end, pair.shift);
      for (std::uint32_t i = 0; i < tl.size(); ++i) {
        const auto expect = referenced_tuple(b.tree, pair, false, tl.begin + i);
        CHECK(targets[i] == expect);
        CHECK(itargets[i] == expect);
      }
      for (std::uint32_t j = 0; j < sl.size(); ++j) {
        const auto expect = referenced_tuple(b.tree, pair, true, sl.begin + j);
        CHECK(sources[j] == expect);
        CHECK(isources[j] == expect);
      }
    }
  }
}

TEST_CASE("redundant volume equals the sum of record sizes and grows with pairs") {
  const auto b = adaptive(2000, 8, 5, true);
  std::uint64_t previous = 0;
  for (std::size_t count : {1ul, 10ul, 100ul, 1000ul, b.c.pairs.size()}) {
    const std::vector<InteractionPair> prefix(b.c.pairs.begin(), b.c.pairs.begin() + count);
    const auto pack = pack_redundant(prefix, b.tree);
    std::uint64_t sum = 0;
    for (std::size_t r = 0; r < pack.buffers.records(); ++r) {
      const auto h = pack.buffers.header(r);
      const std::uint64_t expect = 16 + (h.n_target + h.n_source) * pack.buffers.tuple_bytes();
      CHECK(pack.buffers.record_bytes(r) == expect);
      sum += expect;
    }
    CHECK(pack.buffers.blob.size() == sum);
    CHECK(sum >= previous);
    previous = sum;
  }
}

TEST_CASE("redundant volume grows with t at a fixed box count") {
  std::uint64_t previous = 0;
  for (std::size_t t : {1ul, 4ul, 16ul, 64ul}) {
    const Tree tree = build_uniform_tree(256 * t, 4);
    const auto c = classify_interactions(tree, e2_neighbors(tree, true), 1);
    const auto pack = pack_redundant(c.pairs, tree);
    CHECK(pack.buffers.blob.size() > previous);
    previous = pack.buffers.blob.size();
  }
}

TEST_CASE("pattern table sizes") {
  CHECK(pack_pattern_redundant(64, 2).table.bytes() == 1179648);
  CHECK(pack_pattern_redundant(64, 2).volume[Phase::transfer] == 1179648);
  CHECK(pack_pattern_redundant(16, 2).table.bytes() == 73728);
  const auto one = pack_pattern_redundant(16, 1);
  CHECK(one.table.bytes() == one.table.bytes_per_copy());
  CHECK(one.table.bytes_per_copy() == 144ull * 16 * 16);
}

TEST_CASE("pattern copies are bit-identical") {
  const auto pack = pack_pattern_redundant(16, 3);
  const auto first = pack.table.copy(0);
  for (std::uint32_t c = 1; c < 3; ++c) {
    const auto other = pack.table.copy(c);
    CHECK(std::memcmp(first.data(), other.data(), first.size_bytes()) == 0);
  }
}

TEST_CASE("pattern weights match the sample geometry") {
  const auto pack = pack_pattern_redundant(4, 1);
  const auto& table = pack.table;
  // sample i of the target box and sample j of the box at offset (dx, dy)
  for (int off = 0; off < 9; ++off) {
    const int dx = off % 3 - 1, dy = off / 3 - 1;
    for (std::uint32_t i = 0; i < 4; ++i) {
      for (std::uint32_t j = 0; j < 4; ++j) {
        const double xi = (i % 2 + 0.5) / 2, yi = (i / 2 + 0.5) / 2;
        const double xj = dx + (j % 2 + 0.5) / 2, yj = dy + (j / 2 + 0.5) / 2;
        const auto w = pattern_weight(std::hypot(xj - xi, yj - yi));
        const auto got = table.entries[table.index(0, off, i, j)];
        CHECK(got.real() == doctest::Approx(w.real()).epsilon(1e-14));
        CHECK(got.imag() == doctest::Approx(w.imag()).epsilon(1e-14));
      }
    }
  }
  CHECK(pattern_weight(0.0) == std::complex<double>(0.0, 0.0));
}

TEST_CASE("pattern table preconditions") {
  CHECK_THROWS_AS(pack_pattern_redundant(8, 2), Error);
  CHECK_THROWS_AS(pack_pattern_redundant(36, 2), Error);
  CHECK_THROWS_AS(pack_pattern_redundant(16, 0), Error);
}

TEST_CASE("DBIM volumes: 48 bytes per unknown and an exact rf*144t^2 transfer delta") {
  for (std::uint32_t t : {4u, 16u, 64u}) {
    const std::size_t n = 16 * 16 * t;
    const Tree tree = build_uniform_tree(n, 4);
    const auto base = pack_dbim(tree, 1);
    CHECK(base.volume[Phase::transfer] == 48ull * n);
    CHECK(base.buffers.n() == n);
    for (std::uint32_t rf : {1u, 2u, 3u}) {
      const auto table = pack_pattern_redundant(t, rf).table;
      const auto rest = dbim_redundant_volume(base.volume, table);
      CHECK(rest[Phase::transfer] - base.volume[Phase::transfer] == rf * 144ull * t * t);
    }
  }
}

TEST_CASE("virtual regions of one layout do not overlap") {
  const auto b = adaptive(1000, 8, 9, true);
  const auto pack = pack_indexing(b.tree, b.c.pairs);
  std::vector<Region> regions{pack.buffers.position_region[0], pack.buffers.position_region[1],
                              pack.buffers.position_region[2], pack.buffers.mass_region,
                              pack.buffers.leaf_begin_region, pack.buffers.particle_leaf_region,
                              pack.buffers.force_region};
  for (const auto& t : pack.buffers.tables) {
    regions.push_back(t.index_region);
    regions.push_back(t.shift_region);
  }
  std::sort(regions.begin(), regions.end(), [](auto a, auto b) { return a.base < b.base; });
  for (std::size_t i = 1; i < regions.size(); ++i) CHECK(regions[i - 1].end() <= regions[i].base);
}
