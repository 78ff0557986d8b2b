#include "p2plab/exec.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>

namespace p2plab {

double PhaseTimes::operator[](Phase p) const {
  switch (p) {
    case Phase::collect:
      return collect;
    case Phase::transfer:
      return transfer;
    case Phase::compute:
      return compute;
    case Phase::update:
      return update;
  }
  return 0.0;
}

double& PhaseTimes::operator[](Phase p) {
  switch (p) {
    case Phase::collect:
      return collect;
    case Phase::transfer:
      return transfer;
    case Phase::compute:
      return compute;
    case Phase::update:
      break;
  }
  return update;
}

std::string to_string(Mode mode) { return mode == Mode::dbim ? "dbim" : "photons"; }

Mode parse_mode(const std::string& name) {
  if (name == "dbim") return Mode::dbim;
  if (name == "photons") return Mode::photons;
  throw Error("unknown mode '" + name + "' (expected dbim or photons)");
}

double relative_error(const ForceAccumulator& a, const ForceAccumulator& reference) {
  if (a.values.size() != reference.values.size()) {
    throw Error("relative_error: accumulators differ in size");
  }
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    diff = std::max(diff, std::abs(a.values[i] - reference.values[i]));
    scale = std::max(scale, std::abs(reference.values[i]));
  }
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Adds the interaction of target (xi, mi) with source (xj, mj) to f.
inline void gravity_add(const double* xi, double mi, const double* xj, double mj, int dim,
                        double eps2, double* f) {
  double d[3];
  double r2 = eps2;
  for (int k = 0; k < dim; ++k) {
    d[k] = xj[k] - xi[k];
    r2 += d[k] * d[k];
  }
  if (r2 == 0.0) {
    throw Error("coincident interacting particles with zero softening");
  }
  const double inv = 1.0 / (r2 * std::sqrt(r2));
  const double s = mi * mj * inv;
  for (int k = 0; k < dim; ++k) f[k] += s * d[k];
}

template <bool Trace>
void indexing_launch(const IndexingBuffers& b, const NeighborTable& table, double eps2,
                     double* force, MemoryTrace* trace, std::size_t& traced,
                     std::size_t max_threads) {
  const int dim = b.dim;
  const std::uint32_t n = b.n_particles;
  for (std::uint32_t i = 0; i < n; ++i) {
    const bool rec = Trace && traced < max_threads;
    const std::uint32_t leaf = b.particle_leaf[i];
    if (rec) trace->record(b.particle_leaf_region.at(4ull * i), 4, AccessKind::index);
    double xi[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) {
      xi[k] = b.position[k][i];
      if (rec) trace->record(b.position_region[k].at(8ull * i), 8, AccessKind::data);
    }
    const double mi = b.mass[i];
    if (rec) trace->record(b.mass_region.at(8ull * i), 8, AccessKind::data);

    double acc[3];
    for (int k = 0; k < dim; ++k) acc[k] = force[std::size_t{i} * dim + k];

    const std::uint64_t row = std::uint64_t{leaf} * table.max_e2;
    for (std::uint32_t e = 0; e < table.max_e2; ++e) {
      const std::uint32_t src = table.index[row + e];
      if (rec) trace->record(table.index_region.at(4 * (row + e)), 4, AccessKind::index);
      if (src == kPaddingSentinel) break;
      if (src >= b.n_leaves) {
        throw InvariantViolation("neighbour table holds leaf " + std::to_string(src) +
                                 " outside the tree");
      }
      const ImageShift shift = shift_from_code(table.shift_code[row + e]);
      if (rec) {
        trace->record(table.shift_region.at(row + e), 1, AccessKind::index);
        trace->record(b.leaf_begin_region.at(4ull * src), 8, AccessKind::index);
      }
      const std::uint32_t jb = b.leaf_begin[src];
      const std::uint32_t je = b.leaf_begin[src + 1];
      double partial[3] = {0.0, 0.0, 0.0};
      for (std::uint32_t j = jb; j < je; ++j) {
        double xj[3];
        for (int k = 0; k < dim; ++k) {
          xj[k] = b.position[k][j] + static_cast<double>(shift[k]);
          if (rec) trace->record(b.position_region[k].at(8ull * j), 8, AccessKind::data);
        }
        if (rec) trace->record(b.mass_region.at(8ull * j), 8, AccessKind::data);
        if (j == i && src == leaf) continue;
        gravity_add(xi, mi, xj, b.mass[j], dim, eps2, partial);
      }
      for (int k = 0; k < dim; ++k) acc[k] += partial[k];
    }
    for (int k = 0; k < dim; ++k) force[std::size_t{i} * dim + k] = acc[k];
    if (rec) {
      trace->record(b.force_region.at(8ull * dim * i), 8 * dim, AccessKind::output);
      trace->end_thread();
      ++traced;
    }
  }
}

template <bool Trace>
void redundant_launch(const RedundantBuffers& b, std::size_t first, std::size_t last,
                      double eps2, double* out, MemoryTrace* trace, std::size_t& traced,
                      std::size_t max_threads) {
  const int dim = b.dim;
  const std::uint64_t tuple = b.tuple_bytes();
  for (std::size_t r = first; r < last; ++r) {
    const bool rec = Trace && traced < max_threads;
    const std::uint64_t base = b.record_offset[r];
    const Region record{b.blob_region.at(base), b.record_bytes(r)};
    const std::uint64_t slot0 = b.slot_offset[r];
    const Region slots{b.partial_region.at(8ull * dim * slot0),
                       8ull * dim * (b.slot_offset[r + 1] - slot0)};
    auto touch = [&](std::uint64_t address, std::uint32_t size, AccessKind kind) {
      const Region& allowed = kind == AccessKind::output ? slots : record;
      if (!allowed.contains(address, size)) {
        throw InvariantViolation("record " + std::to_string(r) +
                                 " accesses bytes outside its own interval");
      }
      trace->record(address, size, kind);
    };

    if (rec) touch(record.base, sizeof(RecordHeader), AccessKind::data);
    RecordHeader h;
    std::memcpy(&h, b.blob.data() + base, sizeof h);
    const std::byte* targets = b.blob.data() + base + sizeof h;
    const std::byte* sources = targets + tuple * h.n_target;
    const bool same_leaf = h.target_leaf == h.source_leaf;
    for (std::uint32_t i = 0; i < h.n_target; ++i) {
      double xi[3] = {0.0, 0.0, 0.0};
      double mi;
      if (rec) touch(record.at(sizeof h + tuple * i), static_cast<std::uint32_t>(tuple), AccessKind::data);
      std::memcpy(xi, targets + tuple * i, 8 * dim);
      std::memcpy(&mi, targets + tuple * i + 8 * dim, 8);
      double partial[3] = {0.0, 0.0, 0.0};
      for (std::uint32_t j = 0; j < h.n_source; ++j) {
        const std::uint64_t off = sizeof h + tuple * (h.n_target + j);
        if (rec) touch(record.at(off), static_cast<std::uint32_t>(tuple), AccessKind::data);
        if (same_leaf && i == j) continue;
        double xj[3];
        double mj;
        std::memcpy(xj, sources + tuple * j, 8 * dim);
        std::memcpy(&mj, sources + tuple * j + 8 * dim, 8);
        gravity_add(xi, mi, xj, mj, dim, eps2, partial);
      }
      const std::uint64_t slot = slot0 + i;
      if (rec) touch(b.partial_region.at(8ull * dim * slot), 8 * dim, AccessKind::output);
      for (int k = 0; k < dim; ++k) out[slot * dim + k] = partial[k];
    }
    if (rec) {
      trace->end_thread();
      ++traced;
    }
  }
}

}  // namespace

IndexingRun run_p2p_indexing(const IndexingBuffers& buffers, const GravityKernel& kernel,
                             const TraceOptions& trace) {
  IndexingRun run;
  run.forces = ForceAccumulator::zeros(buffers.n_particles, buffers.dim);
  const double eps2 = kernel.softening * kernel.softening;
  std::size_t traced = 0;
  const auto t0 = Clock::now();
  for (const auto& table : buffers.tables) {
    const auto tk = Clock::now();
    if (trace.enabled) {
      indexing_launch<true>(buffers, table, eps2, run.forces.values.data(), &run.trace, traced,
                            trace.max_threads);
    } else {
      indexing_launch<false>(buffers, table, eps2, run.forces.values.data(), nullptr, traced, 0);
    }
    run.kind_seconds[static_cast<std::size_t>(table.kind)] += seconds_since(tk);
    ++run.times.launches;
  }
  run.times.compute = seconds_since(t0);
  return run;
}

RedundantRun run_p2p_redundant(const RedundantBuffers& buffers, const GravityKernel& kernel,
                               const TraceOptions& trace) {
  RedundantRun run;
  run.partials.components = buffers.dim;
  run.partials.values.assign(buffers.slots() * buffers.dim, 0.0);
  run.partials.record_slots = buffers.slot_offset;
  const double eps2 = kernel.softening * kernel.softening;
  std::size_t traced = 0;
  const auto t0 = Clock::now();
  for (std::size_t batch = 0; batch < buffers.batches(); ++batch) {
    const std::size_t first = buffers.batch_begin[batch];
    const std::size_t last = buffers.batch_begin[batch + 1];
    if (trace.enabled) {
      redundant_launch<true>(buffers, first, last, eps2, run.partials.values.data(), &run.trace,
                             traced, trace.max_threads);
    } else {
      redundant_launch<false>(buffers, first, last, eps2, run.partials.values.data(), nullptr,
                              traced, 0);
    }
    ++run.times.launches;
  }
  run.times.compute = seconds_since(t0);
  return run;
}

ForceAccumulator reduce_partials(const PartialResults& partials, const SlotMap& map,
                                 std::size_t n_particles) {
  const int dim = partials.components;
  auto acc = ForceAccumulator::zeros(n_particles, dim);
  if (partials.record_slots.empty()) return acc;
  const std::size_t records = partials.record_slots.size() - 1;
  const std::size_t slots = partials.record_slots.back();
  if (partials.values.size() != slots * dim) {
    throw InvariantViolation("partial values do not match the slot count");
  }
  if (map.slot_target.size() != slots || map.record_key.size() != records) {
    throw InvariantViolation("slot map covers " + std::to_string(map.slot_target.size()) +
                             " of " + std::to_string(slots) + " slots");
  }
  std::vector<std::size_t> order(records);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pair_order(map.record_key[a], map.record_key[b]);
  });
  for (const std::size_t r : order) {
    for (std::uint64_t s = partials.record_slots[r]; s < partials.record_slots[r + 1]; ++s) {
      const std::uint32_t target = map.slot_target[s];
      if (target >= n_particles) {
        throw InvariantViolation("slot " + std::to_string(s) + " is not mapped to a particle");
      }
      for (int k = 0; k < dim; ++k) acc.values[std::size_t{target} * dim + k] += partials.values[s * dim + k];
    }
  }
  return acc;
}

ForceAccumulator brute_force_oracle(const Tree& tree, std::span<const InteractionPair> pairs,
                                    const GravityKernel& kernel) {
  const int dim = tree.dim;
  auto acc = ForceAccumulator::zeros(tree.particles.size(), dim);
  const double eps2 = kernel.softening * kernel.softening;
  for (const auto& p : pairs) {
    const auto& tl = tree.leaves[p.target_leaf];
    const auto& sl = tree.leaves[p.source_leaf];
    for (std::uint32_t i = tl.begin; i < tl.end; ++i) {
      const auto& a = tree.particles[i];
      for (std::uint32_t j = sl.begin; j < sl.end; ++j) {
        if (i == j) continue;
        const auto& b = tree.particles[j];
        double r2 = eps2;
        double d[3] = {0.0, 0.0, 0.0};
        for (int k = 0; k < dim; ++k) {
          d[k] = (b.position[k] + p.shift[k]) - a.position[k];
          r2 += d[k] * d[k];
        }
        if (r2 == 0.0) throw Error("coincident interacting particles with zero softening");
        const double s = a.mass * b.mass / (r2 * std::sqrt(r2));
        for (int k = 0; k < dim; ++k) acc.values[std::size_t{i} * dim + k] += s * d[k];
      }
    }
  }
  return acc;
}

namespace {

template <bool Trace>
void dbim_launch(const DbimBuffers& b, const PatternTable& table, std::complex<double>* field,
                 MemoryTrace* trace, std::size_t max_threads) {
  const std::uint32_t t = b.t;
  const std::int64_t side = b.side;
  const Region& pattern = table.region;
  for (std::size_t u = 0; u < b.n(); ++u) {
    const bool rec = Trace && u < max_threads;
    const auto box = static_cast<std::uint32_t>(u / t);
    const auto i = static_cast<std::uint32_t>(u % t);
    const std::uint32_t copy = box % table.rf;
    const auto cell = b.box_cell[box];
    double re = 0.0;
    double im = 0.0;
    for (int off = 0; off < 9; ++off) {
      const std::int64_t cx = std::int64_t{cell[0]} + off % 3 - 1;
      const std::int64_t cy = std::int64_t{cell[1]} + off / 3 - 1;
      if (cx < 0 || cy < 0 || cx >= side || cy >= side) continue;
      const std::uint32_t nb = b.box_at_cell[cy * side + cx];
      const std::size_t w0 = table.index(copy, off, i, 0);
      const DbimUnknown* src = b.unknowns.data() + std::size_t{nb} * t;
      for (std::uint32_t j = 0; j < t; ++j) {
        const auto w = table.entries[w0 + j];
        const auto v = src[j].value;
        if (rec) {
          trace->record(pattern.at(kPatternEntryBytes * (w0 + j)), 16, AccessKind::data);
          trace->record(b.unknown_region.at(kDbimUnknownBytes * (std::size_t{nb} * t + j)), 16,
                        AccessKind::data);
        }
        re += w.real() * v.real() - w.imag() * v.imag();
        im += w.real() * v.imag() + w.imag() * v.real();
      }
    }
    field[u] = {re, im};
    if (rec) {
      trace->record(b.field_region.at(16ull * u), 16, AccessKind::output);
      trace->end_thread();
    }
  }
}

}  // namespace

DbimRun run_dbim(const DbimBuffers& buffers, const PatternTable& table, const TraceOptions& trace) {
  if (table.t != buffers.t) {
    throw Error("pattern table built for t=" + std::to_string(table.t) + " but the tree has t=" +
                std::to_string(buffers.t));
  }
  DbimRun run;
  run.field.assign(buffers.n(), {0.0, 0.0});
  const auto t0 = Clock::now();
  if (trace.enabled) {
    dbim_launch<true>(buffers, table, run.field.data(), &run.trace, trace.max_threads);
  } else {
    dbim_launch<false>(buffers, table, run.field.data(), nullptr, 0);
  }
  run.times.compute = seconds_since(t0);
  run.times.launches = 1;
  return run;
}

std::vector<std::complex<double>> dbim_oracle(const DbimBuffers& buffers) {
  const double h = 1.0 / buffers.side;
  std::vector<std::complex<double>> field(buffers.n());
  for (std::size_t u = 0; u < buffers.n(); ++u) {
    const auto& a = buffers.unknowns[u];
    const auto ca = buffers.box_cell[u / buffers.t];
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t v = 0; v < buffers.n(); ++v) {
      const auto cb = buffers.box_cell[v / buffers.t];
      const auto dx = std::int64_t{cb[0]} - std::int64_t{ca[0]};
      const auto dy = std::int64_t{cb[1]} - std::int64_t{ca[1]};
      if (dx < -1 || dx > 1 || dy < -1 || dy > 1) continue;
      const auto& b = buffers.unknowns[v];
      const double r = std::hypot(b.x - a.x, b.y - a.y) / h;
      if (u == v) continue;
      sum += pattern_weight(r) * b.value;
    }
    field[u] = sum;
  }
  return field;
}

// ---------------------------------------------------------------------------

Scenario make_photons_scenario(std::span<const Particle> particles, const AdaptiveOptions& tree,
                               std::uint32_t partitions) {
  Scenario s;
  s.mode = Mode::photons;
  s.tree = build_adaptive_tree(particles, tree);
  s.neighbors = e2_neighbors(s.tree, true);
  s.interactions = classify_interactions(s.tree, s.neighbors, partitions);
  s.rf = 1;
  return s;
}

Scenario make_dbim_scenario(std::size_t n, int level, std::uint32_t rf, std::uint64_t seed) {
  Scenario s;
  s.mode = Mode::dbim;
  s.tree = build_uniform_tree(n, level, false);
  s.neighbors = e2_neighbors(s.tree, true);
  s.interactions = classify_interactions(s.tree, s.neighbors, 1);
  s.rf = rf;
  s.seed = seed;
  return s;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

template <typename T>
T copy_of(const T& value) {
  return value;
}

// Keeps the scattered results observable so the scatter is not elided.
void keep(const std::vector<double>& v) {
  static volatile double sink = 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  sink = sum;
}

PhaseTimes time_once_photons(const Scenario& s, Layout layout, const MeasureOptions& opt) {
  PhaseTimes pt;
  const auto& pairs = s.interactions.pairs;
  const std::size_t n = s.tree.particles.size();
  const int dim = s.tree.dim;
  std::vector<double> scattered(n * dim);
  if (pairs.empty()) return pt;

  if (layout == Layout::indexing) {
    auto t0 = Clock::now();
    IndexingPack pack = pack_indexing(s.tree, pairs);
    pt.collect = seconds_since(t0);
    t0 = Clock::now();
    const IndexingBuffers device = copy_of(pack.buffers);
    pt.transfer = seconds_since(t0);
    IndexingRun run = run_p2p_indexing(device, opt.kernel);
    pt.compute = run.times.compute;
    pt.launches = run.times.launches;
    t0 = Clock::now();
    const std::vector<double> host = copy_of(run.forces.values);
    pt.transfer += seconds_since(t0);
    t0 = Clock::now();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t id = s.tree.particles[i].id;
      for (int k = 0; k < dim; ++k) scattered[id * dim + k] = host[i * dim + k];
    }
    pt.update = seconds_since(t0);
    keep(scattered);
    pt.volume = pack.volume;
  } else {
    auto t0 = Clock::now();
    RedundantPack pack = pack_redundant(pairs, s.tree, opt.redundant);
    pt.collect = seconds_since(t0);
    t0 = Clock::now();
    const RedundantBuffers device = copy_of(pack.buffers);
    pt.transfer = seconds_since(t0);
    RedundantRun run = run_p2p_redundant(device, opt.kernel);
    pt.compute = run.times.compute;
    pt.launches = run.times.launches;
    t0 = Clock::now();
    PartialResults host = copy_of(run.partials);
    pt.transfer += seconds_since(t0);
    t0 = Clock::now();
    const auto forces = reduce_partials(host, SlotMap::from(pack.buffers), n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t id = s.tree.particles[i].id;
      for (int k = 0; k < dim; ++k) scattered[id * dim + k] = forces.values[i * dim + k];
    }
    pt.update = seconds_since(t0);
    keep(scattered);
    pt.volume = pack.volume;
  }
  return pt;
}

PhaseTimes time_once_dbim(const Scenario& s, Layout layout, const PatternTable& base_table) {
  PhaseTimes pt;
  auto t0 = Clock::now();
  DbimPack pack = pack_dbim(s.tree, s.seed);
  PatternPack extra;
  if (layout == Layout::redundant) extra = pack_pattern_redundant(s.tree.threshold, s.rf);
  pt.collect = seconds_since(t0);

  t0 = Clock::now();
  const DbimBuffers device = copy_of(pack.buffers);
  PatternTable device_table;
  if (layout == Layout::redundant) device_table = copy_of(extra.table);
  pt.transfer = seconds_since(t0);

  const PatternTable& table = layout == Layout::redundant ? device_table : base_table;
  DbimRun run = run_dbim(device, table);
  pt.compute = run.times.compute;
  pt.launches = run.times.launches;
  t0 = Clock::now();
  const auto host = copy_of(run.field);
  pt.transfer += seconds_since(t0);
  if (!host.empty()) {
    static volatile double sink = 0.0;
    sink = host.back().real();
  }
  pt.volume = layout == Layout::redundant ? dbim_redundant_volume(pack.volume, extra.table)
                                          : pack.volume;
  return pt;
}

}  // namespace

PhaseTimes measure_phases(const Scenario& scenario, Layout layout, const MeasureOptions& options) {
  const int reps = std::max(1, options.repetitions);
  std::vector<PhaseTimes> samples;
  PatternTable base_table;
  if (scenario.mode == Mode::dbim) base_table = pack_pattern_redundant(scenario.tree.threshold, 1).table;
  for (int r = 0; r <= reps; ++r) {
    PhaseTimes pt = scenario.mode == Mode::photons ? time_once_photons(scenario, layout, options)
                                                   : time_once_dbim(scenario, layout, base_table);
    if (r > 0) samples.push_back(pt);  // r == 0 is the warm-up
  }
  PhaseTimes out = samples.front();
  for (auto phase : kAllPhases) {
    std::vector<double> v;
    for (const auto& s : samples) v.push_back(s[phase]);
    out[phase] = median(std::move(v));
  }
  return out;
}

}  // namespace p2plab
