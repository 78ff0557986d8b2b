#include "p2plab/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "p2plab/particles.hpp"

namespace p2plab::model {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(std::string(what) + " must be positive and finite, got " + std::to_string(v));
  }
}

void require_share(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error("share must lie in [0, 1], got " + std::to_string(s));
}

}  // namespace

double composite_speedup(double share, double x) {
  require_share(share);
  require_positive(x, "speedup");
  return 1.0 / (share / x + (1.0 - share));
}

double p2p_speedup(std::span<const double, 4> shares, std::span<const double, 4> xs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(shares[i] >= 0.0)) throw Error("component shares must be non-negative");
    require_positive(xs[i], "component speedup");
    sum += shares[i];
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error("component shares sum to " + std::to_string(sum) + ", not 1");
  }
  double denom = 0.0;
  for (std::size_t i = 0; i < 4; ++i) denom += (shares[i] / sum) / xs[i];
  return 1.0 / denom;
}

double total_speedup(double share_p2p, double x_p2p) { return composite_speedup(share_p2p, x_p2p); }

double memop_speedup(double complexity_base, double complexity_rest, double v_base, double v_rest) {
  require_positive(complexity_base, "base complexity");
  require_positive(complexity_rest, "restructured complexity");
  require_positive(v_base, "base volume");
  require_positive(v_rest, "restructured volume");
  return (complexity_base / complexity_rest) * (v_base / v_rest);
}

double transfer_speedup(double v_base, double v_rest) {
  require_positive(v_base, "base volume");
  require_positive(v_rest, "restructured volume");
  return v_base / v_rest;
}

double compute_speedup(double x_complexity_kernel, double x_locality, double x_launch) {
  require_positive(x_complexity_kernel, "kernel complexity factor");
  require_positive(x_locality, "locality factor");
  require_positive(x_launch, "launch factor");
  return x_complexity_kernel * x_locality * x_launch;
}

double local_share_adjust(double x_local, double share_local) {
  require_positive(x_local, "local speedup");
  if (!(share_local > 0.0 && share_local <= 1.0)) {
    throw Error("local share must lie in (0, 1], got " + std::to_string(share_local));
  }
  return 1.0 / (share_local / x_local + (1.0 - share_local));
}

double dbim_transfer_speedup(double n, double t) {
  require_positive(n, "N");
  require_positive(t, "t");
  return 1.0 / (1.0 + 6.0 * t * t / n);
}

std::string to_string(DbimComputeForm form) {
  switch (form) {
    case DbimComputeForm::printed:
      return "printed";
    case DbimComputeForm::reciprocal:
      return "reciprocal";
    case DbimComputeForm::column_ratio:
      return "column_ratio";
  }
  return "?";
}

DbimComputeForm parse_dbim_compute_form(const std::string& name) {
  if (name == "printed") return DbimComputeForm::printed;
  if (name == "reciprocal") return DbimComputeForm::reciprocal;
  if (name == "column_ratio") return DbimComputeForm::column_ratio;
  throw Error("unknown DBIM compute form '" + name + "'");
}

double dbim_compute_speedup(double n, double t, DbimComputeForm form, double rf) {
  require_positive(n, "N");
  require_positive(t, "t");
  const double t2 = t * t;
  const double printed = 1.0 + 288.0 * t2 / (32.0 * n + 288.0 * t2 + 9.0 * n / t);
  switch (form) {
    case DbimComputeForm::printed:
      return printed;
    case DbimComputeForm::reciprocal:
      return 1.0 / printed;
    case DbimComputeForm::column_ratio: {
      const double base = 32.0 * n + 288.0 * t2 + 9.0 * n * t2;
      const double rest = 32.0 * n + rf * 288.0 * t2 + 9.0 * n * t2;
      return base / rest;
    }
  }
  return printed;
}

double dbim_transfer_bytes_base(double n) { return 48.0 * n; }

double dbim_transfer_bytes_redundant(double n, double t, double rf) {
  return 48.0 * n + rf * 144.0 * t * t;
}

std::string to_string(Component c) {
  switch (c) {
    case Component::collect:
      return "collect";
    case Component::transfer:
      return "transfer";
    case Component::compute:
      return "compute";
    case Component::update:
      return "update";
    case Component::nearfield:
      return "nearfield";
  }
  return "?";
}

Component parse_component(const std::string& name) {
  if (name == "collect") return Component::collect;
  if (name == "transfer") return Component::transfer;
  if (name == "compute" || name == "kernel") return Component::compute;
  if (name == "update") return Component::update;
  if (name == "nearfield") return Component::nearfield;
  throw Error("unknown component '" + name + "'");
}

Profile parse_profile(const std::string& name) {
  if (name == "dbim") return Profile::dbim;
  if (name == "photons") return Profile::photons;
  throw Error("unknown share profile '" + name + "'");
}

ShareValue evaluate(const ShareFunction& f, double t) {
  if (!(t >= 1.0)) throw Error("share functions need t >= 1, got " + std::to_string(t));
  const double raw = f.a + f.b * std::log(t);
  ShareValue v;
  v.value = std::clamp(raw, 0.0, 1.0);
  v.clamped = v.value != raw;
  return v;
}

ShareValue share_function(Profile profile, Component component, double t) {
  if (profile == Profile::dbim) {
    const ShareValue transfer = evaluate({Component::transfer, 0.5, -0.087}, t);
    switch (component) {
      case Component::transfer:
        return transfer;
      case Component::compute:
        return {1.0 - transfer.value, transfer.clamped};
      case Component::collect:
      case Component::update:
        return {0.0, false};
      case Component::nearfield:
        throw Error("the dbim profile has no near-field share row");
    }
  }
  switch (component) {
    case Component::collect:
      return evaluate({component, 0.05, -0.005}, t);
    case Component::transfer:
      return evaluate({component, 0.5, -0.087}, t);
    case Component::compute:
      return evaluate({component, 0.0, 0.18}, t);
    case Component::update:
      return evaluate({component, 0.5, -0.11}, t);
    case Component::nearfield:
      return evaluate({component, 0.4, 0.14}, t);
  }
  throw Error("unknown component");
}

ShareFit fit_log_share(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw Error("share fitting needs at least two points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n);
  double first = 0.0;
  bool distinct = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [t, share] = points[static_cast<std::size_t>(i)];
    require_positive(t, "t");
    design(i, 0) = 1.0;
    design(i, 1) = std::log(t);
    y(i) = share;
    if (i == 0) first = design(i, 1);
    distinct = distinct || design(i, 1) != first;
  }
  if (!distinct) throw Error("share fitting needs at least two distinct t values");
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd residual = design * coef - y;
  return ShareFit{coef(0), coef(1), std::sqrt(residual.squaredNorm() / static_cast<double>(n))};
}

ShareSet normalize_shares(const std::array<double, 4>& raw) {
  ShareSet s;
  s.raw = raw;
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0)) throw Error("shares must be non-negative");
    sum += v;
  }
  if (!(sum > 0.0)) throw Error("shares sum to zero");
  for (std::size_t i = 0; i < 4; ++i) s.normalized[i] = raw[i] / sum;
  return s;
}

ShareSet default_shares(Profile profile, double t) {
  std::array<double, 4> raw{};
  bool clamped = false;
  const std::array<Component, 4> comps{Component::collect, Component::transfer, Component::compute,
                                       Component::update};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto v = share_function(profile, comps[i], t);
    raw[i] = v.value;
    clamped = clamped || v.clamped;
  }
  ShareSet s = normalize_shares(raw);
  s.clamped = clamped;
  return s;
}

PhotonsColumns photons_columns(const PhotonsParams& p) {
  const double t = p.t;
  const double leafs = p.leafs;
  const double inter = p.interactions;
  const double e2 = p.e2;
  PhotonsColumns c{};
  c.collect_complexity_base = 3.0 * leafs * t + 2.0 * inter;
  c.collect_complexity_rest = 6.0 * t * inter;
  c.collect_memory_base = leafs * (152.0 * t + 24394.0);
  c.collect_memory_rest = leafs * (24.0 * e2 * (1.0 + 4.0 * t) + 104.0 * t + 8376.0);
  c.transfer_memory_base = indexing_transfer_closed_form(leafs, t, p.max_e2);
  c.transfer_memory_rest = redundant_transfer_closed_form(inter, t);
  c.kernel_complexity_base = 4.0 + 6.0 * t + 3.0 * t * t;
  c.kernel_complexity_rest = 2.0 + 6.0 * t + 3.0 * t * t;
  c.kernel_dispersion_base = t * t + 2.0 * t + 2.0;
  c.kernel_dispersion_rest = t + 1.0;
  c.update_complexity_base = inter * (2.0 + 15.0 * t);
  c.update_complexity_rest = inter * (2.0 + 15.0 * t);
  c.update_memory_base = 8.0 * inter + leafs * (376.0 + 104.0 * e2 + 48000.0 * t);
  c.update_memory_rest = 8.0 * inter + leafs * (376.0 + 24.0 * e2);
  return c;
}

double indexing_transfer_closed_form(double leafs, double t, double max_e2) {
  return 16.0 * leafs * (3.0 * t + 1.0 + max_e2 + 3.0 * t * max_e2);
}

double redundant_transfer_closed_form(double interactions, double t) {
  return 8.0 * interactions * (9.0 * t + 1.5);
}

SpeedupBreakdown predict_dbim(const DbimParams& p, const DbimOptions& options) {
  SpeedupBreakdown b;
  const double x_transfer = dbim_transfer_speedup(p.n, p.t);
  const double x_compute = dbim_compute_speedup(p.n, p.t, options.compute_form, p.rf);
  double share_transfer = 0.0;
  if (options.transfer_share >= 0.0) {
    require_share(options.transfer_share);
    share_transfer = options.transfer_share;
  } else {
    const auto v = share_function(Profile::dbim, Component::transfer, p.t);
    share_transfer = v.value;
    b.shares_clamped = v.clamped;
  }
  b.x_transfer = x_transfer;
  b.x_compute = x_compute;
  b.shares = {0.0, share_transfer, 1.0 - share_transfer, 0.0};
  b.x_p2p = p2p_speedup(b.shares, std::array<double, 4>{1.0, x_transfer, x_compute, 1.0});
  b.share_p2p = p.share_p2p;
  b.x_total = total_speedup(p.share_p2p, b.x_p2p);
  b.factors["transfer_bytes_base"] = dbim_transfer_bytes_base(p.n);
  b.factors["transfer_bytes_rest"] = dbim_transfer_bytes_redundant(p.n, p.t, p.rf);
  b.factors["compute_printed"] = dbim_compute_speedup(p.n, p.t, DbimComputeForm::printed, p.rf);
  b.factors["compute_reciprocal"] = dbim_compute_speedup(p.n, p.t, DbimComputeForm::reciprocal, p.rf);
  b.factors["compute_column_ratio"] =
      dbim_compute_speedup(p.n, p.t, DbimComputeForm::column_ratio, p.rf);
  return b;
}

SpeedupBreakdown predict_photons(const PhotonsParams& p, const LocalityInputs& loc,
                                 const PhotonsOptions& options) {
  SpeedupBreakdown b;
  const PhotonsColumns c = photons_columns(p);

  double x_collect = 1.0, x_transfer = 1.0, x_kernel = 1.0, x_update = 1.0;
  if (options.use_columns) {
    x_collect = memop_speedup(c.collect_complexity_base, c.collect_complexity_rest,
                              c.collect_memory_base, c.collect_memory_rest);
    x_transfer = transfer_speedup(c.transfer_memory_base, c.transfer_memory_rest);
    x_kernel = c.kernel_complexity_base / c.kernel_complexity_rest;
    x_update = memop_speedup(c.update_complexity_base, c.update_complexity_rest,
                             c.update_memory_base, c.update_memory_rest);
  }
  double x_locality = 1.0;
  if (options.use_locality) {
    const auto l = locality_speedup(loc.d_base, loc.v_base, loc.d_rest, loc.v_rest, loc.capacity,
                                    loc.footprint, options.locality_scale);
    x_locality = l.value;
    b.regime = l.regime;
    b.factors["dispersion_ratio"] = l.dispersion_ratio;
    b.factors["volume_ratio"] = l.volume_ratio;
  }
  require_positive(p.launches_base, "base launch count");
  require_positive(p.launches_rest, "restructured launch count");
  const double x_launch = p.launches_base / p.launches_rest;
  const double x_compute_local = compute_speedup(x_kernel, x_locality, x_launch);

  b.factors["collect_local"] = x_collect;
  b.factors["transfer_local"] = x_transfer;
  b.factors["kernel_complexity"] = x_kernel;
  b.factors["locality"] = x_locality;
  b.factors["launch"] = x_launch;
  b.factors["compute_local"] = x_compute_local;
  b.factors["update_local"] = x_update;
  b.factors["share_local"] = p.share_local;

  b.x_collect = local_share_adjust(x_collect, p.share_local);
  b.x_transfer = local_share_adjust(x_transfer, p.share_local);
  b.x_compute = local_share_adjust(x_compute_local, p.share_local);
  b.x_update = local_share_adjust(x_update, p.share_local);

  ShareSet shares;
  if (options.override_shares) {
    shares = normalize_shares(options.shares);
  } else {
    shares = default_shares(Profile::photons, p.t);
  }
  b.shares = shares.normalized;
  b.shares_clamped = shares.clamped;
  b.x_p2p = p2p_speedup(b.shares,
                        std::array<double, 4>{b.x_collect, b.x_transfer, b.x_compute, b.x_update});
  if (options.share_p2p >= 0.0) {
    b.share_p2p = options.share_p2p;
  } else {
    const auto nf = share_function(Profile::photons, Component::nearfield, p.t);
    b.share_p2p = nf.value;
    b.shares_clamped = b.shares_clamped || nf.clamped;
  }
  b.x_total = total_speedup(b.share_p2p, b.x_p2p);
  return b;
}

double recompose_p2p(const SpeedupBreakdown& b) {
  return 1.0 / (b.shares[0] / b.x_collect + b.shares[1] / b.x_transfer +
                b.shares[2] / b.x_compute + b.shares[3] / b.x_update);
}

namespace {

void require_pairable(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("trend metrics need equal-length series");
  if (a.size() < 2) throw Error("trend metrics need at least two points");
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
  require_pairable(a, b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw Error("correlation undefined for a zero-variance series");
  return sab / std::sqrt(saa * sbb);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require_pairable(a, b);
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  return pearson(ra, rb);
}

double mean_abs_rel_err(std::span<const double> predicted, std::span<const double> measured) {
  require_pairable(predicted, measured);
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (measured[i] == 0.0) throw Error("relative error undefined for a zero measurement");
    sum += std::abs(predicted[i] - measured[i]) / std::abs(measured[i]);
  }
  return sum / static_cast<double>(predicted.size());
}

TrendMetrics trend_metrics(std::span<const double> predicted, std::span<const double> measured) {
  return TrendMetrics{pearson(predicted, measured), spearman(predicted, measured),
                      mean_abs_rel_err(predicted, measured)};
}

}  // namespace p2plab::model
