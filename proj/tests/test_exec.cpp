#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "p2plab/exec.hpp"

using namespace p2plab;

namespace {

struct Built {
  Tree tree;
  Classification c;
};

Built build(std::vector<Particle> particles, std::uint32_t t, bool periodic,
            std::uint32_t partitions = 1, int dim = 3) {
  Built b;
  b.tree = build_adaptive_tree(particles, {t, dim, 64, periodic});
  b.c = classify_interactions(b.tree, e2_neighbors(b.tree, true), partitions);
  return b;
}

ForceAccumulator redundant_forces(const Built& b, const GravityKernel& k, std::size_t batch = 20000) {
  const auto pack = pack_redundant(b.c.pairs, b.tree, {batch, kDefaultBatchByteCap});
  const auto run = run_p2p_redundant(pack.buffers, k);
  return reduce_partials(run.partials, SlotMap::from(pack.buffers), b.tree.particles.size());
}

ForceAccumulator indexing_forces(const Built& b, const GravityKernel& k) {
  return run_p2p_indexing(pack_indexing(b.tree, b.c.pairs).buffers, k).forces;
}

// Force on slot i in original-id order.
std::array<double, 3> force_of(const Built& b, const ForceAccumulator& f, std::uint32_t id) {
  for (std::size_t i = 0; i < b.tree.particles.size(); ++i) {
    if (b.tree.particles[i].id == id) return {f.at(i, 0), f.at(i, 1), f.at(i, 2)};
  }
  FAIL("missing id");
  return {};
}

}  // namespace

TEST_CASE("two particles attract with unit force") {
  // m = 0.5, r = 0.5: m^2 / r^2 = 1
  const std::vector<Particle> p{Particle{{0.25, 0.5, 0.5}, 0.5, 0},
                                Particle{{0.75, 0.5, 0.5}, 0.5, 1}};
  const auto b = build(p, 1, false);
  const GravityKernel k{0.0};
  for (const auto& f : {indexing_forces(b, k), redundant_forces(b, k),
                        brute_force_oracle(b.tree, b.c.pairs, k)}) {
    const auto f0 = force_of(b, f, 0);
    const auto f1 = force_of(b, f, 1);
    CHECK(f0[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f1[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(f0[1] == 0.0);
    CHECK(f1[2] == 0.0);
  }
}

TEST_CASE("middle of three equal particles feels no net force") {
  const std::vector<Particle> p{Particle{{0.25, 0.5, 0.5}, 1.0, 0},
                                Particle{{0.5, 0.5, 0.5}, 1.0, 1},
                                Particle{{0.75, 0.5, 0.5}, 1.0, 2}};
  for (std::uint32_t t : {1u, 3u}) {
    const auto b = build(p, t, false);
    const GravityKernel k{0.0};
    for (const auto& f : {indexing_forces(b, k), redundant_forces(b, k)}) {
      const auto mid = force_of(b, f, 1);
      for (double v : mid) CHECK(std::abs(v) <= 1e-12);
    }
  }
}

TEST_CASE("1000 random particles at t=8 match the oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto b = build(generate_uniform(1000, 3, seed), 8, seed % 2 == 1, 3);
    const GravityKernel k;
    const auto oracle = brute_force_oracle(b.tree, b.c.pairs, k);
    const auto idx = indexing_forces(b, k);
    const auto red = redundant_forces(b, k, 777);
    CHECK(relative_error(idx, oracle) <= 1e-12);
    CHECK(relative_error(red, oracle) <= 1e-12);
    CHECK(relative_error(red, idx) <= 1e-12);
    CHECK(idx.values == red.values);  // same summation order
  }
}

TEST_CASE("single record of two particles gives the direct pair force") {
  const std::vector<Particle> p{Particle{{0.2, 0.3, 0.4}, 0.5, 0},
                                Particle{{0.6, 0.7, 0.8}, 0.25, 1}};
  const auto b = build(p, 2, false);
  REQUIRE(b.c.pairs.size() == 1);
  const GravityKernel k{0.0};
  const auto pack = pack_redundant(b.c.pairs, b.tree);
  const auto run = run_p2p_redundant(pack.buffers, k);
  REQUIRE(run.partials.values.size() == 6);
  const double d[3] = {0.4, 0.4, 0.4};
  const double r2 = 0.48;
  const double s = 0.5 * 0.25 / (r2 * std::sqrt(r2));
  for (std::uint32_t slot = 0; slot < 2; ++slot) {
    const double sign = b.tree.particles[pack.buffers.slot_target[slot]].id == 0 ? 1.0 : -1.0;
    for (int c = 0; c < 3; ++c) {
      CHECK(run.partials.values[slot * 3 + c] == doctest::Approx(sign * s * d[c]).epsilon(1e-13));
    }
  }
}

TEST_CASE("record with an empty source side gives zero partials") {
  Tree tree = build_adaptive_tree(
      std::vector<Particle>{Particle{{0.2, 0.3, 0.4}, 1.0, 0}, Particle{{0.3, 0.3, 0.4}, 1.0, 1}},
      {2, 3, 64, false});
  LeafBox empty = tree.leaves[0];
  empty.box_id = 1;
  empty.begin = empty.end = 2;
  tree.leaves.push_back(empty);
  const std::vector<InteractionPair> pairs{InteractionPair{0, 1, InteractionKind::local, {}}};
  const auto pack = pack_redundant(pairs, tree);
  const auto run = run_p2p_redundant(pack.buffers, GravityKernel{});
  REQUIRE(run.partials.values.size() == 6);
  for (double v : run.partials.values) CHECK(v == 0.0);
}

TEST_CASE("redundant launches equal the batch count") {
  const Tree tree = build_uniform_tree(65536, 7);
  const auto c = classify_interactions(tree, e2_neighbors(tree, true), 1);
  const std::vector<InteractionPair> pairs(c.pairs.begin(), c.pairs.begin() + 40001);
  const auto pack = pack_redundant(pairs, tree, {20000, kDefaultBatchByteCap});
  const auto run = run_p2p_redundant(pack.buffers, GravityKernel{});
  CHECK(run.times.launches == 3);
}

TEST_CASE("indexing launches once per interaction kind present") {
  const auto b = build(generate_uniform(2000, 3, 3), 8, true, 4);
  std::size_t kinds = 0;
  for (auto n : b.c.stats.n_by_kind) kinds += n > 0;
  CHECK(kinds == 3);
  const auto run = run_p2p_indexing(pack_indexing(b.tree, b.c.pairs).buffers, GravityKernel{});
  CHECK(run.times.launches == kinds);
  const auto local_only = build(generate_uniform(2000, 3, 3), 8, false, 1);
  CHECK(run_p2p_indexing(pack_indexing(local_only.tree, local_only.c.pairs).buffers, GravityKernel{})
            .times.launches == 1);
}

TEST_CASE("reduce_partials sums slots per target") {
  PartialResults partials{1, {1.5, 2.5}, {0, 1, 2}};
  const InteractionPair a{0, 0, InteractionKind::local, {}};
  const InteractionPair b{0, 1, InteractionKind::local, {}};
  const SlotMap map{{0, 0}, {a, b}};
  const auto f = reduce_partials(partials, map, 1);
  CHECK(f.values == std::vector<double>{4.0});

  const auto empty = reduce_partials(PartialResults{3, {}, {0}}, SlotMap{}, 5);
  CHECK(empty.values == std::vector<double>(15, 0.0));

  const SlotMap bad{{0, 7}, {a, b}};
  CHECK_THROWS_AS(reduce_partials(partials, bad, 1), InvariantViolation);
}

TEST_CASE("permuted record order reduces to the same forces") {
  const auto b = build(generate_uniform(1500, 3, 12), 8, true, 2);
  const GravityKernel k;
  const auto reference = redundant_forces(b, k);
  auto shuffled = b.c.pairs;
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto pack = pack_redundant(shuffled, b.tree);
  const auto run = run_p2p_redundant(pack.buffers, k);
  const auto f = reduce_partials(run.partials, SlotMap::from(pack.buffers), b.tree.particles.size());
  CHECK(relative_error(f, reference) <= 1e-12);
  CHECK(f.values == reference.values);
}

TEST_CASE("oracle edge cases and conservation") {
  const auto single = build({Particle{{0.5, 0.5, 0.5}, 1.0, 0}}, 1, false);
  const auto none = brute_force_oracle(single.tree, {}, GravityKernel{});
  for (double v : none.values) CHECK(v == 0.0);

  for (std::size_t n : {1000ul, 10000ul}) {
    const auto b = build(generate_uniform(n, 3, n), 8, true, 4);
    const auto f = brute_force_oracle(b.tree, b.c.pairs, GravityKernel{});
    for (int c = 0; c < 3; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) total += f.at(i, c);
      CHECK(std::abs(total) <= 1e-9);
    }
  }
}

TEST_CASE("zero softening rejects coincident interacting particles") {
  const std::vector<Particle> p{Particle{{0.5, 0.5, 0.5}, 1.0, 0},
                                Particle{{0.5, 0.5, 0.5}, 1.0, 1}};
  const auto b = build(p, 2, false);
  CHECK_THROWS_AS(indexing_forces(b, GravityKernel{0.0}), Error);
  CHECK_THROWS_AS(redundant_forces(b, GravityKernel{0.0}), Error);
  CHECK_NOTHROW(indexing_forces(b, GravityKernel{1e-3}));
}

TEST_CASE("indexing results are deterministic") {
  const auto b = build(generate_plummer(3000, 3, 4), 16, true, 2);
  const auto f1 = indexing_forces(b, GravityKernel{});
  const auto f2 = indexing_forces(b, GravityKernel{});
  CHECK(std::memcmp(f1.values.data(), f2.values.data(), f1.values.size() * 8) == 0);
}

TEST_CASE("redundant traces stay inside the record and its output slots") {
  const auto b = build(generate_uniform(1200, 3, 6), 8, true, 3);
  const auto pack = pack_redundant(b.c.pairs, b.tree, {500, kDefaultBatchByteCap});
  const auto run = run_p2p_redundant(pack.buffers, GravityKernel{}, {true});
  const auto& buf = pack.buffers;
  REQUIRE(run.trace.threads() == buf.records());
  const std::uint64_t slot_bytes = 3 * 8;
  for (std::size_t r = 0; r < buf.records(); ++r) {
    const Region record{buf.blob_region.at(buf.record_offset[r]), buf.record_bytes(r)};
    const Region slots{buf.partial_region.at(buf.slot_offset[r] * slot_bytes),
                       (buf.slot_offset[r + 1] - buf.slot_offset[r]) * slot_bytes};
    for (const auto& a : run.trace.thread(r)) {
      CHECK((record.contains(a.address, a.size) || slots.contains(a.address, a.size)));
    }
  }
}

TEST_CASE("indexing traces stay inside the packed regions and skip padding") {
  const auto b = build(generate_uniform(800, 3, 2), 4, true, 2);
  const auto pack = pack_indexing(b.tree, b.c.pairs);
  const auto& buf = pack.buffers;
  const auto run = run_p2p_indexing(buf, GravityKernel{}, {true});
  std::vector<Region> regions{buf.position_region[0], buf.position_region[1],
                              buf.position_region[2], buf.mass_region, buf.leaf_begin_region,
                              buf.particle_leaf_region, buf.force_region};
  for (const auto& t : buf.tables) {
    regions.push_back(t.index_region);
    regions.push_back(t.shift_region);
  }
  std::size_t index_reads = 0;
  for (const auto& a : run.trace.accesses) {
    bool inside = false;
    for (const auto& r : regions) inside = inside || r.contains(a.address, a.size);
    CHECK(inside);
    index_reads += a.kind == AccessKind::index;
  }
  CHECK(index_reads > 0);
  // one thread per target particle per launch
  CHECK(run.trace.threads() == buf.n_particles * buf.tables.size());
}

TEST_CASE("trace thread cap") {
  const auto b = build(generate_uniform(800, 3, 2), 4, false, 1);
  const auto run = run_p2p_indexing(pack_indexing(b.tree, b.c.pairs).buffers, GravityKernel{},
                                    {true, 100});
  CHECK(run.trace.threads() == 100);
}

TEST_CASE("pattern-table kernel matches direct evaluation") {
  for (std::uint32_t t : {4u, 16u}) {
    const Tree tree = build_uniform_tree(64 * t, 3);
    const auto pack = pack_dbim(tree, 3);
    const auto oracle = dbim_oracle(pack.buffers);
    for (std::uint32_t rf : {1u, 2u}) {
      const auto table = pack_pattern_redundant(t, rf).table;
      const auto run = run_dbim(pack.buffers, table);
      double diff = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        diff = std::max(diff, std::abs(run.field[i] - oracle[i]));
        scale = std::max(scale, std::abs(oracle[i]));
      }
      CHECK(diff / scale <= 1e-12);
    }
  }
  const Tree tree = build_uniform_tree(64 * 4, 3);
  CHECK_THROWS_AS(run_dbim(pack_dbim(tree, 1).buffers, pack_pattern_redundant(16, 1).table), Error);
}

TEST_CASE("phase measurement") {
  const auto particles = generate_uniform(2000, 3, 1);
  Scenario s = make_photons_scenario(particles, {8, 3, 64, true}, 2);
  MeasureOptions opt;
  opt.repetitions = 3;
  SUBCASE("volumes and launches match the packers") {
    const auto idx = measure_phases(s, Layout::indexing, opt);
    const auto red = measure_phases(s, Layout::redundant, opt);
    const auto ipack = pack_indexing(s.tree, s.interactions.pairs);
    const auto rpack = pack_redundant(s.interactions.pairs, s.tree, opt.redundant);
    CHECK(idx.volume.bytes == ipack.volume.bytes);
    CHECK(red.volume.bytes == rpack.volume.bytes);
    CHECK(red.launches == rpack.buffers.batches());
    for (auto ph : kAllPhases) {
      CHECK(idx[ph] >= 0.0);
      CHECK(red[ph] >= 0.0);
    }
    CHECK(idx.compute > 0.0);
  }
  SUBCASE("an empty workload takes no time and no launches") {
    s.interactions.pairs.clear();
    const auto pt = measure_phases(s, Layout::redundant, opt);
    CHECK(pt.compute == 0.0);
    CHECK(pt.launches == 0);
  }
}

TEST_CASE("doubling N roughly doubles collect time") {
  MeasureOptions opt;
  opt.repetitions = 7;
  bool ok = false;
  double ratio = 0.0;
  // wall-clock: allow a couple of attempts on a noisy machine
  for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
    const auto small = make_photons_scenario(generate_uniform(20000, 3, 2), {8, 3, 64, true}, 1);
    const auto large = make_photons_scenario(generate_uniform(40000, 3, 2), {8, 3, 64, true}, 1);
    ratio = measure_phases(large, Layout::redundant, opt).collect /
            measure_phases(small, Layout::redundant, opt).collect;
    ok = ratio >= 1.5 && ratio <= 3.0;
  }
  MESSAGE("collect time ratio " << ratio);
  CHECK(ok);
}

TEST_CASE("DBIM phase measurement reports the pattern copies in transfer") {
  const Scenario s = make_dbim_scenario(64 * 16, 3, 2, 1);
  MeasureOptions opt;
  opt.repetitions = 2;
  const auto base = measure_phases(s, Layout::indexing, opt);
  const auto rest = measure_phases(s, Layout::redundant, opt);
  CHECK(rest.volume[Phase::transfer] - base.volume[Phase::transfer] == 2ull * 144 * 16 * 16);
  CHECK(base.launches == 1);
}
