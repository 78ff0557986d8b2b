#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "p2plab/layouts.hpp"
#include "p2plab/neighbors.hpp"
#include "p2plab/trace.hpp"
#include "p2plab/tree.hpp"

namespace p2plab {

/// f_ij = m_i m_j (x_j - x_i) / (|x_j - x_i|^2 + eps^2)^(3/2)
struct GravityKernel {
  double softening = 1e-3;
};

/// Per-particle values over leaf-ordered particle slots.
struct ForceAccumulator {
  int components = 3;
  std::vector<double> values;

  static ForceAccumulator zeros(std::size_t n, int components) {
    return ForceAccumulator{components, std::vector<double>(n * components, 0.0)};
  }
  std::size_t size() const { return components ? values.size() / components : 0; }
  double at(std::size_t i, int k) const { return values[i * components + k]; }
};

/// Largest component difference over the largest reference component
/// (zero when both are identically zero).
double relative_error(const ForceAccumulator& a, const ForceAccumulator& reference);

/// One contribution per target particle per pair record.
struct PartialResults {
  int components = 3;
  std::vector<double> values;               // slots * components
  std::vector<std::uint64_t> record_slots;  // records + 1 prefix offsets
};

/// Where each partial slot goes: the particle slot, and the pair key that
/// fixes the summation order.
struct SlotMap {
  std::vector<std::uint32_t> slot_target;
  std::vector<InteractionPair> record_key;

  static SlotMap from(const RedundantBuffers& buffers) {
    return SlotMap{buffers.slot_target, buffers.record_pair};
  }
};

struct PhaseTimes {
  double collect = 0.0;
  double transfer = 0.0;
  double compute = 0.0;
  double update = 0.0;
  std::uint64_t launches = 0;
  VolumeReport volume;

  double operator[](Phase p) const;
  double& operator[](Phase p);
  double total() const { return collect + transfer + compute + update; }
};

struct TraceOptions {
  bool enabled = false;
  /// Only the first `max_threads` logical threads are recorded.
  std::size_t max_threads = std::numeric_limits<std::size_t>::max();
};

struct IndexingRun {
  ForceAccumulator forces;
  MemoryTrace trace;
  PhaseTimes times;
  /// Kernel seconds per interaction kind (local, remote, periodic).
  std::array<double, 3> kind_seconds{};
};

/// One launch per interaction kind present; one logical thread per target
/// particle per launch.
IndexingRun run_p2p_indexing(const IndexingBuffers& buffers, const GravityKernel& kernel,
                             const TraceOptions& trace = {});

struct RedundantRun {
  PartialResults partials;
  MemoryTrace trace;
  PhaseTimes times;
};

/// One launch per batch; one logical thread per pair record. With tracing
/// on, every access is checked against the record's own byte interval and
/// its output slots.
RedundantRun run_p2p_redundant(const RedundantBuffers& buffers, const GravityKernel& kernel,
                               const TraceOptions& trace = {});

/// Per-target sums of the partial slots. Records are visited in pair order
/// (kind, target, source), then by record index; slots ascending.
ForceAccumulator reduce_partials(const PartialResults& partials, const SlotMap& map,
                                 std::size_t n_particles);

/// Direct double loop over the (target, source) particles of every pair.
ForceAccumulator brute_force_oracle(const Tree& tree, std::span<const InteractionPair> pairs,
                                    const GravityKernel& kernel);

// ---------------------------------------------------------------------------
// Pattern-table kernel over a uniform 2D tree.

struct DbimRun {
  std::vector<std::complex<double>> field;
  MemoryTrace trace;
  PhaseTimes times;
};

/// One logical thread per unknown. Box b reads pattern copy b % rf.
DbimRun run_dbim(const DbimBuffers& buffers, const PatternTable& table,
                 const TraceOptions& trace = {});

/// Direct evaluation of the weights from unknown coordinates, without the
/// table.
std::vector<std::complex<double>> dbim_oracle(const DbimBuffers& buffers);

// ---------------------------------------------------------------------------
// Phase timing

enum class Mode { dbim, photons };
std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct Scenario {
  Mode mode = Mode::photons;
  Tree tree;
  NeighborLists neighbors;
  Classification interactions;
  std::uint32_t rf = 2;
  std::uint64_t seed = 0;
};

Scenario make_photons_scenario(std::span<const Particle> particles, const AdaptiveOptions& tree,
                               std::uint32_t partitions);
Scenario make_dbim_scenario(std::size_t n, int level, std::uint32_t rf, std::uint64_t seed);

struct MeasureOptions {
  int repetitions = 5;
  GravityKernel kernel;
  RedundantOptions redundant;
};

/// Median over `repetitions` timed runs after one discarded warm-up.
/// collect: packing. transfer: copying the packed buffers into a second
/// allocation and the results back. compute: kernel. update: reduction and
/// scatter to the caller's particle order.
PhaseTimes measure_phases(const Scenario& scenario, Layout layout, const MeasureOptions& options);

}  // namespace p2plab
