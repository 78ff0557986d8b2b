#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "p2plab/cachesim.hpp"
#include "p2plab/exec.hpp"
#include "p2plab/model.hpp"
#include "p2plab/particles.hpp"

namespace p2plab {

/// Everything one sweep needs. Loaded from an INI file:
///
///   [experiment] mode, seeds, repetitions, iterations, jitter, out
///   [particles]  n, distribution, dim
///   [tree]       t, max_depth, periodic, partitions
///   [exec]       softening, batch_size, batch_byte_cap, rf, trace_threads
///   [cache]      capacity, line, ways, group
///   [model]      compute_form, locality_scale, share_p2p, shares, measured
///
/// List-valued keys (seeds, n, t) take comma-separated values.
struct ExperimentConfig {
  Mode mode = Mode::photons;
  std::vector<std::uint64_t> seeds;
  int repetitions = 5;
  int iterations = 20;
  double jitter = 1e-3;
  std::filesystem::path out_dir = "out";

  std::vector<std::size_t> n_values{20000};
  Distribution distribution = Distribution::uniform;
  int dim = 3;

  std::vector<std::uint32_t> t_values{2, 4, 8, 16, 32, 64};
  int max_depth = 64;
  bool periodic = true;
  std::uint32_t partitions = 4;

  double softening = 1e-3;
  std::size_t batch_size = 20000;
  std::uint64_t batch_byte_cap = kDefaultBatchByteCap;
  std::uint32_t rf = 2;
  std::size_t trace_threads = 4096;

  CacheConfig cache;

  model::DbimComputeForm compute_form = model::DbimComputeForm::reciprocal;
  double locality_scale = 1.0;
  double share_p2p = -1.0;
  /// "default" uses the built-in share rows, "fit" fits them to `measured`.
  std::string shares = "default";
  std::filesystem::path measured;

  /// Throws Error naming the first bad field.
  void validate() const;
  MeasureOptions measure_options() const;
  AdaptiveOptions tree_options(std::uint32_t t) const;
};

/// Level for a uniform tree with n samples and t per box; throws when n/t
/// is not a power of four.
int uniform_level(std::size_t n, std::uint32_t t);

/// Parses an INI file. `seed_override` (from the command line) replaces the
/// seed list, as does the P2PLAB_SEED environment variable when no
/// command-line seed is given.
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

/// Same, from INI text.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace p2plab
