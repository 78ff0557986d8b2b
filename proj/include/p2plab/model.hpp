#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "p2plab/cachesim.hpp"

namespace p2plab::model {

// ---------------------------------------------------------------------------
// Composition

/// Speedup of the whole when a part holding `share` of the baseline time
/// runs `x` times faster: 1 / (share/x + 1 - share).
double composite_speedup(double share, double x);

/// Weighted harmonic mean 1 / sum(share_i / x_i) over the four runtime
/// components. Shares off from 1 by at most 1e-6 are renormalised; larger
/// deviations are rejected.
double p2p_speedup(std::span<const double, 4> shares, std::span<const double, 4> xs);

/// Application-level speedup from the P2P share and the P2P speedup.
double total_speedup(double share_p2p, double x_p2p);

/// (complexity_base / complexity_rest) * (v_base / v_rest)
double memop_speedup(double complexity_base, double complexity_rest, double v_base, double v_rest);

/// v_base / v_rest
double transfer_speedup(double v_base, double v_rest);

/// Product of the kernel complexity, locality and launch factors.
double compute_speedup(double x_complexity_kernel, double x_locality, double x_launch);

/// Component speedup when only the local interactions are restructured:
/// 1 / (share_local / x_local + 1 - share_local).
double local_share_adjust(double x_local, double share_local);

// ---------------------------------------------------------------------------
// Regular-tree (DBIM) closed forms

/// 1 / (1 + 6 t^2 / N)
double dbim_transfer_speedup(double n, double t);

enum class DbimComputeForm {
  /// 1 + 288 t^2 / (32 N + 288 t^2 + 9 N / t), evaluated as printed.
  printed,
  /// Reciprocal of `printed`: the printed ratio is restructured over base
  /// time, so its inverse is the speedup.
  reciprocal,
  /// Base over restructured operation counts,
  /// (32N + 288t^2 + 9Nt^2) / (32N + RF*288t^2 + 9Nt^2).
  column_ratio,
};

std::string to_string(DbimComputeForm form);
DbimComputeForm parse_dbim_compute_form(const std::string& name);

double dbim_compute_speedup(double n, double t, DbimComputeForm form = DbimComputeForm::printed,
                            double rf = 2.0);

/// Transfer bytes of the base and redundant layouts: 48N and 48N + RF*144t^2.
double dbim_transfer_bytes_base(double n);
double dbim_transfer_bytes_redundant(double n, double t, double rf);

// ---------------------------------------------------------------------------
// Share functions

enum class Profile { dbim, photons };
enum class Component { collect, transfer, compute, update, nearfield };

std::string to_string(Component c);
Component parse_component(const std::string& name);
Profile parse_profile(const std::string& name);

/// share(t) = a + b ln t, clamped to [0, 1].
struct ShareFunction {
  Component component = Component::transfer;
  double a = 0.0;
  double b = 0.0;
};

struct ShareValue {
  double value = 0.0;
  bool clamped = false;
};

ShareValue evaluate(const ShareFunction& f, double t);

/// Default share rows. DBIM: transfer 0.5 - 0.087 ln t, compute is its
/// complement, collect and update are zero. PhotoNs: collect
/// 0.05 - 0.005 ln t, transfer 0.5 - 0.087 ln t, kernel 0.18 ln t, update
/// 0.5 - 0.11 ln t, near-field 0.4 + 0.14 ln t.
ShareValue share_function(Profile profile, Component component, double t);

struct ShareFit {
  double a = 0.0;
  double b = 0.0;
  double rms = 0.0;
};

/// Least squares of share against ln t.
ShareFit fit_log_share(std::span<const std::pair<double, double>> points);

/// Shares of one profile at one t, normalised to sum to one.
struct ShareSet {
  std::array<double, 4> raw{};
  std::array<double, 4> normalized{};
  bool clamped = false;
};

ShareSet default_shares(Profile profile, double t);
ShareSet normalize_shares(const std::array<double, 4>& raw);

// ---------------------------------------------------------------------------
// Operation and byte accounting for the irregular tree (local interactions)

struct PhotonsParams {
  double t = 8;
  double leafs = 1;
  double interactions = 1;
  double e2 = 1;
  double max_e2 = 1;
  double launches_base = 1;
  double launches_rest = 1;
  double share_local = 1.0;
};

struct PhotonsColumns {
  double collect_complexity_base, collect_complexity_rest;
  double collect_memory_base, collect_memory_rest;
  double transfer_memory_base, transfer_memory_rest;
  double kernel_complexity_base, kernel_complexity_rest;
  double kernel_dispersion_base, kernel_dispersion_rest;
  double update_complexity_base, update_complexity_rest;
  double update_memory_base, update_memory_rest;
};

/// Base and restructured columns evaluated verbatim.
PhotonsColumns photons_columns(const PhotonsParams& p);

/// 16 leafs (3t + 1 + Max_E2 + 3t Max_E2)
double indexing_transfer_closed_form(double leafs, double t, double max_e2);
/// 8 interactions (9t + 1.5)
double redundant_transfer_closed_form(double interactions, double t);

// ---------------------------------------------------------------------------
// Prediction

struct LocalityInputs {
  double d_base = 1;
  double v_base = 1;
  double d_rest = 1;
  double v_rest = 1;
  double footprint = 1;  // resident-group footprint of the restructured layout
  double capacity = 1;
};

struct SpeedupBreakdown {
  double x_collect = 1;
  double x_transfer = 1;
  double x_compute = 1;
  double x_update = 1;
  double x_p2p = 1;
  double x_total = 1;
  std::array<double, 4> shares{};  // normalized shares used in the P2P composition
  double share_p2p = 0;
  LocalityRegime regime = LocalityRegime::fits_cache;
  bool shares_clamped = false;
  /// Every intermediate factor by name.
  std::map<std::string, double> factors;
};

struct DbimParams {
  double n = 65536;
  int level = 5;
  double t = 64;
  double rf = 2;
  double share_p2p = 0.47;
};

struct DbimOptions {
  DbimComputeForm compute_form = DbimComputeForm::reciprocal;
  /// Overrides the default transfer share when set (>= 0).
  double transfer_share = -1;
};

/// Transfer and compute only; collect and update do not change.
SpeedupBreakdown predict_dbim(const DbimParams& params, const DbimOptions& options = {});

struct PhotonsOptions {
  /// Shares to use instead of the default rows (normalised internally).
  bool override_shares = false;
  std::array<double, 4> shares{};
  double share_p2p = -1;  // default: near-field row
  double locality_scale = 1.0;
  /// When false every column ratio is forced to one (identity pipeline).
  bool use_columns = true;
  bool use_locality = true;
};

SpeedupBreakdown predict_photons(const PhotonsParams& params, const LocalityInputs& locality,
                                 const PhotonsOptions& options = {});

/// Recomputes X_p2p from a breakdown's own parts.
double recompose_p2p(const SpeedupBreakdown& b);

// ---------------------------------------------------------------------------
// Trend metrics

struct TrendMetrics {
  double pearson = 0;
  double spearman = 0;
  double mean_abs_rel_err = 0;
};

double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);
/// Mean of |predicted - measured| / |measured|.
double mean_abs_rel_err(std::span<const double> predicted, std::span<const double> measured);
TrendMetrics trend_metrics(std::span<const double> predicted, std::span<const double> measured);

}  // namespace p2plab::model
