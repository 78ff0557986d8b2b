#include "p2plab/layouts.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>

namespace p2plab {

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::collect:
      return "collect";
    case Phase::transfer:
      return "transfer";
    case Phase::compute:
      return "compute";
    case Phase::update:
      return "update";
  }
  return "?";
}

std::string to_string(Layout layout) {
  return layout == Layout::indexing ? "indexing" : "redundant";
}

std::uint64_t IndexingBuffers::particle_bytes() const {
  return std::uint64_t{n_particles} * 8 * (dim + 1);
}

std::uint64_t IndexingBuffers::range_bytes() const {
  return (leaf_begin.size() + particle_leaf.size()) * 4ull;
}

std::uint64_t IndexingBuffers::neighbor_bytes() const {
  std::uint64_t total = 0;
  for (const auto& t : tables) total += t.bytes();
  return total;
}

IndexingPack pack_indexing(const Tree& tree, std::span<const InteractionPair> pairs) {
  IndexingPack out;
  auto& b = out.buffers;
  b.dim = tree.dim;
  b.n_particles = static_cast<std::uint32_t>(tree.particles.size());
  b.n_leaves = static_cast<std::uint32_t>(tree.leaves.size());

  for (int k = 0; k < b.dim; ++k) b.position[k].resize(b.n_particles);
  b.mass.resize(b.n_particles);
  for (std::uint32_t i = 0; i < b.n_particles; ++i) {
    const auto& p = tree.particles[i];
    for (int k = 0; k < b.dim; ++k) b.position[k][i] = p.position[k];
    b.mass[i] = p.mass;
  }
  b.leaf_begin.resize(b.n_leaves + 1);
  for (std::uint32_t l = 0; l < b.n_leaves; ++l) b.leaf_begin[l] = tree.leaves[l].begin;
  b.leaf_begin[b.n_leaves] = b.n_particles;
  b.particle_leaf = particle_leaf_map(tree);

  for (auto kind : kAllKinds) {
    std::vector<std::uint32_t> count(b.n_leaves, 0);
    bool present = false;
    for (const auto& p : pairs) {
      if (p.kind != kind) continue;
      if (p.target_leaf >= b.n_leaves || p.source_leaf >= b.n_leaves) {
        throw Error("interaction pair references a leaf outside the tree");
      }
      ++count[p.target_leaf];
      present = true;
    }
    if (!present) continue;
    NeighborTable table;
    table.kind = kind;
    for (auto c : count) table.max_e2 = std::max(table.max_e2, c);
    table.index.assign(std::uint64_t{b.n_leaves} * table.max_e2, kPaddingSentinel);
    table.shift_code.assign(table.index.size(), shift_code(ImageShift{}));
    std::fill(count.begin(), count.end(), 0);
    for (const auto& p : pairs) {
      if (p.kind != kind) continue;
      const std::uint64_t slot = std::uint64_t{p.target_leaf} * table.max_e2 + count[p.target_leaf]++;
      table.index[slot] = p.source_leaf;
      table.shift_code[slot] = shift_code(p.shift);
    }
    b.tables.push_back(std::move(table));
  }

  AddressMap map;
  for (int k = 0; k < b.dim; ++k) b.position_region[k] = map.allocate(b.n_particles * 8ull);
  b.mass_region = map.allocate(b.n_particles * 8ull);
  b.leaf_begin_region = map.allocate(b.leaf_begin.size() * 4ull);
  b.particle_leaf_region = map.allocate(b.particle_leaf.size() * 4ull);
  for (auto& t : b.tables) {
    t.index_region = map.allocate(t.index.size() * 4ull);
    t.shift_region = map.allocate(t.shift_code.size());
  }
  b.force_region = map.allocate(b.force_bytes());

  auto& v = out.volume;
  v.layout = Layout::indexing;
  v[Phase::collect] = b.packed_bytes();
  v[Phase::transfer] = b.packed_bytes() + b.force_bytes();
  v[Phase::compute] = b.packed_bytes() + b.force_bytes();
  v[Phase::update] = 2 * b.force_bytes();
  return out;
}

RecordHeader RedundantBuffers::header(std::size_t r) const {
  RecordHeader h;
  std::memcpy(&h, blob.data() + record_offset[r], sizeof h);
  return h;
}

namespace {

void put_tuple(std::byte* dst, const Particle& p, const ImageShift& shift, int dim) {
  for (int k = 0; k < dim; ++k) {
    const double x = p.position[k] + static_cast<double>(shift[k]);
    std::memcpy(dst + 8 * k, &x, 8);
  }
  std::memcpy(dst + 8 * dim, &p.mass, 8);
}

ParticleTuple get_tuple(const std::byte* src, int dim) {
  ParticleTuple t;
  for (int k = 0; k < dim; ++k) std::memcpy(&t.position[k], src + 8 * k, 8);
  std::memcpy(&t.mass, src + 8 * dim, 8);
  return t;
}

}  // namespace

RedundantPack pack_redundant(std::span<const InteractionPair> pairs, const Tree& tree,
                             const RedundantOptions& options) {
  if (pairs.empty()) throw Error("redundant packing needs at least one interaction pair");
  if (options.batch_size < 1) throw Error("batch size must be >= 1");

  RedundantPack out;
  auto& b = out.buffers;
  b.dim = tree.dim;
  b.n_particles = static_cast<std::uint32_t>(tree.particles.size());
  const std::uint64_t tuple = b.tuple_bytes();

  b.record_offset.reserve(pairs.size() + 1);
  b.slot_offset.reserve(pairs.size() + 1);
  b.record_offset.push_back(0);
  b.slot_offset.push_back(0);
  std::uint64_t total = 0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto& p = pairs[r];
    if (p.target_leaf >= tree.leaves.size() || p.source_leaf >= tree.leaves.size()) {
      throw Error("interaction pair references a leaf outside the tree");
    }
    const std::uint64_t size =
        sizeof(RecordHeader) +
        tuple * (tree.leaves[p.target_leaf].size() + tree.leaves[p.source_leaf].size());
    if (size > options.batch_byte_cap) {
      throw Error("record for pair (target " + std::to_string(p.target_leaf) + ", source " +
                  std::to_string(p.source_leaf) + ", " + to_string(p.kind) + ") needs " +
                  std::to_string(size) + " bytes, above the per-batch cap of " +
                  std::to_string(options.batch_byte_cap));
    }
    total += size;
    b.record_offset.push_back(total);
    b.slot_offset.push_back(b.slot_offset.back() + tree.leaves[p.target_leaf].size());
  }

  b.blob.resize(total);
  b.slot_target.resize(b.slot_offset.back());
  b.record_pair.assign(pairs.begin(), pairs.end());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto& p = pairs[r];
    const auto& tl = tree.leaves[p.target_leaf];
    const auto& sl = tree.leaves[p.source_leaf];
    RecordHeader h{p.target_leaf, p.source_leaf, tl.size(), sl.size()};
    std::byte* dst = b.blob.data() + b.record_offset[r];
    std::memcpy(dst, &h, sizeof h);
    dst += sizeof h;
    for (std::uint32_t i = tl.begin; i < tl.end; ++i, dst += tuple) {
      put_tuple(dst, tree.particles[i], ImageShift{}, b.dim);
    }
    for (std::uint32_t j = sl.begin; j < sl.end; ++j, dst += tuple) {
      put_tuple(dst, tree.particles[j], p.shift, b.dim);
    }
    for (std::uint32_t i = 0; i < tl.size(); ++i) {
      b.slot_target[b.slot_offset[r] + i] = tl.begin + i;
    }
  }

  for (std::size_t r = 0; r < pairs.size(); r += options.batch_size) b.batch_begin.push_back(r);
  b.batch_begin.push_back(pairs.size());

  AddressMap map;
  b.blob_region = map.allocate(b.blob.size());
  b.partial_region = map.allocate(b.partial_bytes());

  const std::uint64_t index_bytes = (b.record_offset.size() + b.slot_offset.size()) * 8ull;
  const std::uint64_t map_bytes = b.slot_target.size() * 4ull;
  const std::uint64_t force_bytes = std::uint64_t{b.n_particles} * b.dim * 8;
  auto& v = out.volume;
  v.layout = Layout::redundant;
  v[Phase::collect] = b.blob.size() + index_bytes + map_bytes;
  v[Phase::transfer] = b.blob.size() + index_bytes + b.partial_bytes();
  v[Phase::compute] = b.blob.size() + index_bytes + b.partial_bytes();
  v[Phase::update] = b.partial_bytes() + map_bytes + force_bytes;
  return out;
}

ParticleTuple referenced_tuple(const Tree& tree, const InteractionPair& pair, bool source,
                               std::uint32_t slot) {
  const auto& p = tree.particles[slot];
  ParticleTuple t;
  for (int k = 0; k < tree.dim; ++k) {
    t.position[k] = p.position[k] + (source ? static_cast<double>(pair.shift[k]) : 0.0);
  }
  t.mass = p.mass;
  return t;
}

std::pair<std::vector<ParticleTuple>, std::vector<ParticleTuple>> unpack_record(
    const RedundantBuffers& buffers, std::size_t record) {
  const RecordHeader h = buffers.header(record);
  const std::byte* src = buffers.blob.data() + buffers.record_offset[record] + sizeof h;
  std::vector<ParticleTuple> targets, sources;
  for (std::uint32_t i = 0; i < h.n_target; ++i, src += buffers.tuple_bytes()) {
    targets.push_back(get_tuple(src, buffers.dim));
  }
  for (std::uint32_t j = 0; j < h.n_source; ++j, src += buffers.tuple_bytes()) {
    sources.push_back(get_tuple(src, buffers.dim));
  }
  return {std::move(targets), std::move(sources)};
}

std::vector<ParticleTuple> unpack_indexing(const IndexingBuffers& buffers, std::uint32_t begin,
                                           std::uint32_t end, const ImageShift& shift) {
  std::vector<ParticleTuple> out;
  for (std::uint32_t i = begin; i < end; ++i) {
    ParticleTuple t;
    for (int k = 0; k < buffers.dim; ++k) {
      t.position[k] = buffers.position[k][i] + static_cast<double>(shift[k]);
    }
    t.mass = buffers.mass[i];
    out.push_back(t);
  }
  return out;
}

std::complex<double> pattern_weight(double r) {
  if (r == 0.0) return {0.0, 0.0};
  return std::polar(1.0 / r, kPatternWaveNumber * r);
}

PatternPack pack_pattern_redundant(std::uint32_t t, std::uint32_t rf) {
  if (rf < 1) throw Error("redundancy factor must be >= 1");
  if (t == 0 || !std::has_single_bit(t)) {
    throw Error("samples per box t=" + std::to_string(t) + " must be a power of 2");
  }
  const auto grid = static_cast<std::uint32_t>(std::llround(std::sqrt(double(t))));
  if (grid * grid != t) {
    throw Error("samples per box t=" + std::to_string(t) + " must be a perfect square");
  }
  PatternPack out;
  auto& table = out.table;
  table.t = t;
  table.grid = grid;
  table.rf = rf;
  table.entries.resize(table.entries_per_copy() * rf);
  for (int off = 0; off < 9; ++off) {
    const int ox = off % 3 - 1;
    const int oy = off / 3 - 1;
    for (std::uint32_t i = 0; i < t; ++i) {
      const double xi = (i % grid + 0.5) / grid;
      const double yi = (i / grid + 0.5) / grid;
      for (std::uint32_t j = 0; j < t; ++j) {
        const double xj = ox + (j % grid + 0.5) / grid;
        const double yj = oy + (j / grid + 0.5) / grid;
        table.entries[table.index(0, off, i, j)] = pattern_weight(std::hypot(xj - xi, yj - yi));
      }
    }
  }
  for (std::uint32_t c = 1; c < rf; ++c) {
    std::copy_n(table.entries.begin(), table.entries_per_copy(),
                table.entries.begin() + c * table.entries_per_copy());
  }
  AddressMap map;
  table.region = map.allocate(table.bytes());

  auto& v = out.volume;
  v.layout = rf > 1 ? Layout::redundant : Layout::indexing;
  v[Phase::collect] = table.bytes();
  v[Phase::transfer] = table.bytes();
  v[Phase::compute] = table.bytes();
  return out;
}

DbimPack pack_dbim(const Tree& tree, std::uint64_t seed) {
  if (tree.mode != TreeMode::uniform || tree.dim != 2) {
    throw Error("DBIM packing needs a uniform 2D tree");
  }
  DbimPack out;
  auto& b = out.buffers;
  b.side = tree.side();
  b.t = tree.threshold;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  b.unknowns.resize(tree.particles.size());
  for (std::size_t i = 0; i < tree.particles.size(); ++i) {
    auto& u = b.unknowns[i];
    const double re = unit(rng);
    const double im = unit(rng);
    u.value = {re, im};
    u.x = tree.particles[i].position[0];
    u.y = tree.particles[i].position[1];
    u.aux = {0.0, 0.0};
  }
  b.box_at_cell.resize(std::size_t{b.side} * b.side);
  b.box_cell.resize(tree.leaves.size());
  for (std::uint32_t l = 0; l < tree.leaves.size(); ++l) {
    const auto& c = tree.leaves[l].cell;
    b.box_at_cell[c[1] * b.side + c[0]] = l;
    b.box_cell[l] = {c[0], c[1]};
  }
  // pattern tables live low in the virtual space, unknowns far above them
  AddressMap map(1ull << 40);
  b.unknown_region = map.allocate(b.n() * kDbimUnknownBytes);
  b.field_region = map.allocate(b.n() * 16ull);

  auto& v = out.volume;
  v.layout = Layout::indexing;
  v[Phase::collect] = b.n() * kDbimUnknownBytes;
  v[Phase::transfer] = b.n() * kDbimUnknownBytes;
  v[Phase::compute] = b.n() * kDbimUnknownBytes + 16ull * b.n() +
                      9ull * b.t * b.t * kPatternEntryBytes;
  v[Phase::update] = 0;
  return out;
}

VolumeReport dbim_redundant_volume(const VolumeReport& base, const PatternTable& table) {
  VolumeReport v = base;
  v.layout = Layout::redundant;
  v[Phase::collect] += table.bytes();
  v[Phase::transfer] += table.bytes();
  v[Phase::compute] += table.bytes() - table.bytes_per_copy();
  return v;
}

}  // namespace p2plab
