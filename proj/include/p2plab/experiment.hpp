#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "p2plab/cachesim.hpp"
#include "p2plab/config.hpp"
#include "p2plab/exec.hpp"
#include "p2plab/model.hpp"

namespace p2plab {

/// Identifies one sweep point across the measured and predicted tables.
struct PointKey {
  Mode mode = Mode::photons;
  std::size_t n = 0;
  int level = 0;
  std::uint32_t t = 0;
  std::uint32_t rf = 1;
  std::uint64_t seed = 0;

  std::vector<std::string> fields() const;
  std::string str() const;
  friend auto operator<=>(const PointKey&, const PointKey&) = default;
};

inline const std::vector<std::string> kKeyColumns{"mode", "N", "L", "t", "rf", "seed"};

/// Layout-independent inputs of one sweep point: tree statistics, volumes,
/// launch counts and the locality of both layouts.
struct StaticPoint {
  PointKey key;
  TreeStats stats;
  VolumeReport volume_base;
  VolumeReport volume_rest;
  std::uint64_t launches_base = 0;
  std::uint64_t launches_rest = 0;
  LocalityReport locality_base;
  LocalityReport locality_rest;
  model::PhotonsParams photons;      // photons mode only
  model::LocalityInputs locality;
};

/// Builds the point's scenario from its seed and analyses it (no timing).
StaticPoint analyze_point(const ExperimentConfig& config, Mode mode, std::size_t n,
                          std::uint32_t t, std::uint64_t seed);

struct MeasuredPoint {
  StaticPoint statics;
  PhaseTimes base;  // summed over iterations
  PhaseTimes rest;
  std::array<double, 4> shares{};  // measured shares of the indexing run
  std::array<double, 4> x{};       // base / restructured per component
  double x_p2p = 1.0;
};

struct RunResult {
  std::vector<MeasuredPoint> points;
  std::vector<std::string> errors;
};

/// Column from which measured.csv holds wall-clock values; every column
/// before it is deterministic.
inline const std::string kFirstTimingColumn = "indexing_collect";

/// Writes experiment.csv (phase rows), locality.csv and measured.csv into
/// the output directory. A failing point becomes a row in errors.csv and
/// the sweep continues.
RunResult cmd_run(const ExperimentConfig& config);

/// Writes tree_stats.csv; one row per (seed, N, t).
std::vector<StaticPoint> cmd_tree_stats(const ExperimentConfig& config);

struct PredictedPoint {
  PointKey key;
  model::SpeedupBreakdown breakdown;
};

/// Writes predictions.csv. With `shares = fit` the component shares come
/// from fitting the measured file; otherwise from the default rows.
std::vector<PredictedPoint> cmd_predict(const ExperimentConfig& config);

/// Writes fit.csv from the measured shares in `measured`.
std::vector<std::pair<model::Component, model::ShareFit>> cmd_fit_shares(
    const std::filesystem::path& measured, const std::filesystem::path& out_dir);

struct ComparedQuantity {
  std::string name;
  std::vector<PointKey> keys;
  std::vector<double> predicted;
  std::vector<double> measured;
  model::TrendMetrics metrics;
  bool metrics_defined = true;
};

/// Joins measured.csv and predictions.csv on the key columns and writes
/// compare.csv, compare_metrics.csv and one chart per quantity. Keys present
/// in only one file are an error that lists them.
std::vector<ComparedQuantity> cmd_compare(const std::filesystem::path& measured,
                                          const std::filesystem::path& predicted,
                                          const std::filesystem::path& out_dir);

}  // namespace p2plab
