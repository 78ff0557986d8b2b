#include "p2plab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "p2plab/csv.hpp"
#include "p2plab/svg.hpp"

namespace p2plab {

namespace {

const std::array<std::string, 4> kComponentNames{"collect", "transfer", "compute", "update"};

std::string str(std::uint64_t v) { return std::to_string(v); }
std::string num(double v) { return format_double(v); }

std::vector<std::string> with_key(const PointKey& key, std::vector<std::string> rest) {
  auto out = key.fields();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::vector<std::string> header_with_key(std::vector<std::string> rest) {
  auto out = kKeyColumns;
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

double capacity_of(const CacheConfig& cache) {
  return cache.unbounded() ? std::numeric_limits<double>::infinity()
                           : static_cast<double>(cache.capacity_bytes);
}

double ratio(double base, double rest) {
  if (base == 0.0 && rest == 0.0) return 1.0;
  if (rest == 0.0) return std::numeric_limits<double>::infinity();
  return base / rest;
}

TraceOptions trace_options(const ExperimentConfig& c) {
  TraceOptions t;
  t.enabled = true;
  t.max_threads = c.trace_threads;
  return t;
}

StaticPoint analyze_photons(const ExperimentConfig& c, const Scenario& s, PointKey key) {
  StaticPoint p;
  p.key = key;
  p.stats = s.interactions.stats;
  const auto& pairs = s.interactions.pairs;
  const GravityKernel kernel{c.softening};
  const auto trace = trace_options(c);

  auto ipack = pack_indexing(s.tree, pairs);
  p.volume_base = ipack.volume;
  auto irun = run_p2p_indexing(ipack.buffers, kernel, trace);
  p.launches_base = irun.times.launches;
  p.locality_base = analyze_locality(irun.trace, c.cache);

  if (!pairs.empty()) {
    RedundantOptions ro;
    ro.batch_size = c.batch_size;
    ro.batch_byte_cap = c.batch_byte_cap;
    auto rpack = pack_redundant(pairs, s.tree, ro);
    p.volume_rest = rpack.volume;
    auto rrun = run_p2p_redundant(rpack.buffers, kernel, trace);
    p.launches_rest = rrun.times.launches;
    p.locality_rest = analyze_locality(rrun.trace, c.cache);
  }

  const auto& st = p.stats;
  const double work_total =
      static_cast<double>(st.work_by_kind[0] + st.work_by_kind[1] + st.work_by_kind[2]);
  auto& pp = p.photons;
  pp.t = key.t;
  pp.leafs = static_cast<double>(st.n_leaves);
  pp.interactions = static_cast<double>(st.n_by_kind[0]);
  pp.e2 = st.avg_e2;
  pp.max_e2 = static_cast<double>(st.max_e2);
  pp.launches_base = static_cast<double>(p.launches_base);
  pp.launches_rest = static_cast<double>(p.launches_rest);
  pp.share_local = work_total > 0 ? static_cast<double>(st.work_by_kind[0]) / work_total : 1.0;

  auto& loc = p.locality;
  loc.d_base = p.locality_base.mean_d;
  loc.v_base = p.locality_base.mean_v;
  loc.d_rest = p.locality_rest.mean_d;
  loc.v_rest = p.locality_rest.mean_v;
  loc.footprint = p.locality_rest.max_group_v;
  loc.capacity = capacity_of(c.cache);
  return p;
}

StaticPoint analyze_dbim(const ExperimentConfig& c, const Scenario& s, PointKey key) {
  StaticPoint p;
  p.key = key;
  p.stats = s.interactions.stats;
  const auto trace = trace_options(c);
  auto dpack = pack_dbim(s.tree, key.seed);
  const auto base_table = pack_pattern_redundant(key.t, 1).table;
  const auto rest_table = pack_pattern_redundant(key.t, key.rf).table;
  p.volume_base = dpack.volume;
  p.volume_rest = dbim_redundant_volume(dpack.volume, rest_table);
  auto brun = run_dbim(dpack.buffers, base_table, trace);
  auto rrun = run_dbim(dpack.buffers, rest_table, trace);
  p.launches_base = brun.times.launches;
  p.launches_rest = rrun.times.launches;
  p.locality_base = analyze_locality(brun.trace, c.cache);
  p.locality_rest = analyze_locality(rrun.trace, c.cache);
  auto& loc = p.locality;
  loc.d_base = p.locality_base.mean_d;
  loc.v_base = p.locality_base.mean_v;
  loc.d_rest = p.locality_rest.mean_d;
  loc.v_rest = p.locality_rest.mean_v;
  loc.footprint = p.locality_rest.max_group_v;
  loc.capacity = capacity_of(c.cache);
  return p;
}

Scenario build_scenario(const ExperimentConfig& c, Mode mode, std::size_t n, std::uint32_t t,
                        std::uint64_t seed, std::span<const Particle> particles) {
  if (mode == Mode::dbim) return make_dbim_scenario(n, uniform_level(n, t), c.rf, seed);
  return make_photons_scenario(particles, c.tree_options(t), c.partitions);
}

PointKey key_of(const ExperimentConfig& c, Mode mode, std::size_t n, std::uint32_t t,
                std::uint64_t seed, const Scenario& s) {
  PointKey k;
  k.mode = mode;
  k.n = n;
  k.level = s.tree.levels;
  k.t = t;
  k.rf = mode == Mode::dbim ? c.rf : 1;
  k.seed = seed;
  return k;
}

const std::vector<std::string>& measured_header() {
  static const std::vector<std::string> h = [] {
    std::vector<std::string> rest{"leafs",
                                  "interactions",
                                  "local",
                                  "remote",
                                  "periodic",
                                  "avg_e2",
                                  "max_e2",
                                  "share_local",
                                  "launches_indexing",
                                  "launches_redundant",
                                  "bytes_transfer_indexing",
                                  "bytes_transfer_redundant"};
    for (const char* layout : {"indexing", "redundant"})
      for (const auto& c : kComponentNames) rest.push_back(std::string(layout) + "_" + c);
    for (const auto& c : kComponentNames) rest.push_back("share_" + c);
    for (const auto& c : kComponentNames) rest.push_back("x_" + c);
    rest.push_back("x_p2p");
    return header_with_key(rest);
  }();
  return h;
}

const std::vector<std::string>& predicted_header() {
  static const std::vector<std::string> h =
      header_with_key({"x_collect", "x_transfer", "x_compute", "x_update", "x_p2p", "x_total",
                       "regime", "share_p2p", "shares_clamped", "x_locality", "x_launch"});
  return h;
}

std::vector<std::string> locality_row(const PointKey& key, Layout layout, const LocalityReport& r) {
  return with_key(key, {to_string(layout), num(r.mean_d), num(r.max_d), num(r.mean_v),
                        num(r.max_v), str(r.cache.misses), str(r.cache.hits),
                        num(r.cache.miss_rate()), num(r.mean_d_without_index),
                        num(r.mean_v_without_index), num(r.max_group_v)});
}

double factor(const model::SpeedupBreakdown& b, const std::string& name, double fallback) {
  const auto it = b.factors.find(name);
  return it == b.factors.end() ? fallback : it->second;
}

}  // namespace

std::vector<std::string> PointKey::fields() const {
  return {to_string(mode), std::to_string(n), std::to_string(level), std::to_string(t),
          std::to_string(rf), std::to_string(seed)};
}

std::string PointKey::str() const { return join(fields()); }

StaticPoint analyze_point(const ExperimentConfig& c, Mode mode, std::size_t n, std::uint32_t t,
                          std::uint64_t seed) {
  std::vector<Particle> particles;
  if (mode == Mode::photons) particles = generate(c.distribution, n, c.dim, seed);
  const Scenario s = build_scenario(c, mode, n, t, seed, particles);
  const PointKey key = key_of(c, mode, n, t, seed, s);
  return mode == Mode::photons ? analyze_photons(c, s, key) : analyze_dbim(c, s, key);
}

std::vector<StaticPoint> cmd_tree_stats(const ExperimentConfig& c) {
  CsvWriter out(c.out_dir / "tree_stats.csv",
                header_with_key({"leafs", "interactions", "local", "remote", "periodic", "avg_e2",
                                 "max_e2", "overfull_leaves", "depth_capped"}));
  std::vector<StaticPoint> points;
  for (auto seed : c.seeds) {
    for (auto n : c.n_values) {
      std::vector<Particle> particles;
      if (c.mode == Mode::photons) particles = generate(c.distribution, n, c.dim, seed);
      for (auto t : c.t_values) {
        const Scenario s = build_scenario(c, c.mode, n, t, seed, particles);
        StaticPoint p;
        p.key = key_of(c, c.mode, n, t, seed, s);
        p.stats = s.interactions.stats;
        const auto& st = p.stats;
        out.row(with_key(p.key, {str(st.n_leaves), str(st.n_interactions), str(st.n_by_kind[0]),
                                 str(st.n_by_kind[1]), str(st.n_by_kind[2]), num(st.avg_e2),
                                 str(st.max_e2), str(s.tree.overfull_leaves),
                                 s.tree.depth_capped ? "1" : "0"}));
        points.push_back(std::move(p));
      }
    }
  }
  return points;
}

RunResult cmd_run(const ExperimentConfig& c) {
  CsvWriter experiment(c.out_dir / "experiment.csv",
                       {"mode", "layout", "N", "L", "t", "rf", "phase", "seconds", "launches",
                        "bytes", "seed"});
  CsvWriter locality(c.out_dir / "locality.csv",
                     header_with_key({"layout", "mean_D", "max_D", "mean_V", "max_V", "misses",
                                      "hits", "miss_rate", "mean_D_without_index",
                                      "mean_V_without_index", "max_group_V"}));
  CsvWriter measured(c.out_dir / "measured.csv", measured_header());
  CsvWriter errors(c.out_dir / "errors.csv", {"mode", "N", "t", "seed", "message"});
  const MeasureOptions mopt = c.measure_options();

  RunResult result;
  for (auto seed : c.seeds) {
    for (auto n : c.n_values) {
      for (auto t : c.t_values) {
        try {
          std::vector<Particle> particles;
          if (c.mode == Mode::photons) particles = generate(c.distribution, n, c.dim, seed);
          MeasuredPoint mp;
          for (int it = 0; it < c.iterations; ++it) {
            if (it > 0 && c.mode == Mode::photons) {
              jitter(particles, c.dim, c.jitter, seed * 1000003ull + static_cast<std::uint64_t>(it));
            }
            const Scenario s = build_scenario(c, c.mode, n, t, seed, particles);
            if (it == 0) {
              const PointKey key = key_of(c, c.mode, n, t, seed, s);
              mp.statics = c.mode == Mode::photons ? analyze_photons(c, s, key)
                                                   : analyze_dbim(c, s, key);
            }
            const PhaseTimes b = measure_phases(s, Layout::indexing, mopt);
            const PhaseTimes r = measure_phases(s, Layout::redundant, mopt);
            for (auto ph : kAllPhases) {
              mp.base[ph] += b[ph];
              mp.rest[ph] += r[ph];
              mp.base.volume[ph] += b.volume[ph];
              mp.rest.volume[ph] += r.volume[ph];
            }
            mp.base.launches += b.launches;
            mp.rest.launches += r.launches;
          }

          double base_sum = 0.0, rest_sum = 0.0;
          for (std::size_t i = 0; i < 4; ++i) {
            const auto ph = kAllPhases[i];
            mp.x[i] = ratio(mp.base[ph], mp.rest[ph]);
            if (c.mode == Mode::dbim && (ph == Phase::collect || ph == Phase::update)) continue;
            base_sum += mp.base[ph];
            rest_sum += mp.rest[ph];
          }
          for (std::size_t i = 0; i < 4; ++i) {
            const auto ph = kAllPhases[i];
            const bool counted =
                c.mode == Mode::photons || ph == Phase::transfer || ph == Phase::compute;
            mp.shares[i] = counted && base_sum > 0 ? mp.base[ph] / base_sum : 0.0;
          }
          mp.x_p2p = ratio(base_sum, rest_sum);

          const auto& sp = mp.statics;
          const auto& key = sp.key;
          for (const auto& [layout, times] :
               {std::pair{Layout::indexing, &mp.base}, std::pair{Layout::redundant, &mp.rest}}) {
            for (auto ph : kAllPhases) {
              experiment.row({to_string(key.mode), to_string(layout), str(key.n),
                              std::to_string(key.level), str(key.t), str(key.rf), to_string(ph),
                              num((*times)[ph]), str(times->launches), str(times->volume[ph]),
                              str(key.seed)});
            }
          }
          locality.row(locality_row(key, Layout::indexing, sp.locality_base));
          locality.row(locality_row(key, Layout::redundant, sp.locality_rest));

          const auto& st = sp.stats;
          std::vector<std::string> row{str(st.n_leaves),
                                       str(st.n_interactions),
                                       str(st.n_by_kind[0]),
                                       str(st.n_by_kind[1]),
                                       str(st.n_by_kind[2]),
                                       num(st.avg_e2),
                                       str(st.max_e2),
                                       num(sp.photons.share_local),
                                       str(sp.launches_base),
                                       str(sp.launches_rest),
                                       str(sp.volume_base[Phase::transfer]),
                                       str(sp.volume_rest[Phase::transfer])};
          for (const auto* times : {&mp.base, &mp.rest})
            for (auto ph : kAllPhases) row.push_back(num((*times)[ph]));
          for (double v : mp.shares) row.push_back(num(v));
          for (double v : mp.x) row.push_back(num(v));
          row.push_back(num(mp.x_p2p));
          measured.row(with_key(key, row));
          experiment.flush();
          locality.flush();
          measured.flush();
          result.points.push_back(std::move(mp));
        } catch (const Error& e) {
          errors.row({to_string(c.mode), str(n), str(t), str(seed), e.what()});
          result.errors.push_back(e.what());
        }
      }
    }
  }
  return result;
}

namespace {

struct FittedShares {
  std::array<model::ShareFit, 4> fits{};
};

FittedShares fit_measured(const CsvTable& table) {
  FittedShares f;
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<std::pair<double, double>> points;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      points.emplace_back(table.number(r, "t"), table.number(r, "share_" + kComponentNames[k]));
    }
    f.fits[k] = model::fit_log_share(points);
  }
  return f;
}

}  // namespace

std::vector<std::pair<model::Component, model::ShareFit>> cmd_fit_shares(
    const std::filesystem::path& measured, const std::filesystem::path& out_dir) {
  const CsvTable table = read_csv(measured);
  const FittedShares f = fit_measured(table);
  CsvWriter out(out_dir / "fit.csv", {"component", "a", "b", "rms"});
  std::vector<std::pair<model::Component, model::ShareFit>> result;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto comp = model::parse_component(kComponentNames[k]);
    out.row({kComponentNames[k], num(f.fits[k].a), num(f.fits[k].b), num(f.fits[k].rms)});
    result.emplace_back(comp, f.fits[k]);
  }
  return result;
}

std::vector<PredictedPoint> cmd_predict(const ExperimentConfig& c) {
  std::optional<FittedShares> fitted;
  if (c.shares == "fit") {
    if (c.measured.empty()) throw Error("share fitting requested but [model] measured is not set");
    if (!std::filesystem::exists(c.measured)) {
      throw Error("measured file " + c.measured.string() + " does not exist");
    }
    fitted = fit_measured(read_csv(c.measured));
  }
  auto fitted_shares = [&](double t) {
    std::array<double, 4> raw{};
    for (std::size_t k = 0; k < 4; ++k) {
      raw[k] = model::evaluate({model::Component::collect, fitted->fits[k].a, fitted->fits[k].b}, t)
                   .value;
    }
    return raw;
  };

  CsvWriter out(c.out_dir / "predictions.csv", predicted_header());
  std::vector<PredictedPoint> points;
  for (auto seed : c.seeds) {
    for (auto n : c.n_values) {
      for (auto t : c.t_values) {
        PredictedPoint pp;
        if (c.mode == Mode::dbim) {
          pp.key.mode = Mode::dbim;
          pp.key.n = n;
          pp.key.level = uniform_level(n, t);
          pp.key.t = t;
          pp.key.rf = c.rf;
          pp.key.seed = seed;
          model::DbimParams params;
          params.n = static_cast<double>(n);
          params.level = pp.key.level;
          params.t = t;
          params.rf = c.rf;
          if (c.share_p2p >= 0) params.share_p2p = c.share_p2p;
          model::DbimOptions opt;
          opt.compute_form = c.compute_form;
          if (fitted) {
            const auto raw = fitted_shares(t);
            const double tc = raw[1] + raw[2];
            opt.transfer_share = tc > 0 ? raw[1] / tc : 0.5;
          }
          pp.breakdown = model::predict_dbim(params, opt);
        } else {
          const StaticPoint sp = analyze_point(c, Mode::photons, n, t, seed);
          pp.key = sp.key;
          model::PhotonsOptions opt;
          opt.share_p2p = c.share_p2p;
          opt.locality_scale = c.locality_scale;
          if (fitted) {
            opt.override_shares = true;
            opt.shares = fitted_shares(t);
          }
          pp.breakdown = model::predict_photons(sp.photons, sp.locality, opt);
        }
        const auto& b = pp.breakdown;
        out.row(with_key(pp.key, {num(b.x_collect), num(b.x_transfer), num(b.x_compute),
                                  num(b.x_update), num(b.x_p2p), num(b.x_total),
                                  c.mode == Mode::dbim ? "none" : to_string(b.regime),
                                  num(b.share_p2p), b.shares_clamped ? "1" : "0",
                                  num(factor(b, "locality", 1.0)), num(factor(b, "launch", 1.0))}));
        points.push_back(std::move(pp));
      }
    }
  }
  return points;
}

std::vector<ComparedQuantity> cmd_compare(const std::filesystem::path& measured_path,
                                          const std::filesystem::path& predicted_path,
                                          const std::filesystem::path& out_dir) {
  const CsvTable measured = read_csv(measured_path);
  const CsvTable predicted = read_csv(predicted_path);
  auto key_of_row = [](const CsvTable& t, std::size_t r) {
    std::string k;
    for (const auto& col : kKeyColumns) k += (k.empty() ? "" : ",") + t.text(r, col);
    return k;
  };
  std::map<std::string, std::size_t> m_rows, p_rows;
  for (std::size_t r = 0; r < measured.rows.size(); ++r) {
    if (!m_rows.emplace(key_of_row(measured, r), r).second) {
      throw Error("duplicate key in measured file: " + key_of_row(measured, r));
    }
  }
  for (std::size_t r = 0; r < predicted.rows.size(); ++r) {
    if (!p_rows.emplace(key_of_row(predicted, r), r).second) {
      throw Error("duplicate key in predicted file: " + key_of_row(predicted, r));
    }
  }
  std::vector<std::string> unmatched;
  for (const auto& [k, r] : m_rows)
    if (!p_rows.count(k)) unmatched.push_back("measured only: " + k);
  for (const auto& [k, r] : p_rows)
    if (!m_rows.count(k)) unmatched.push_back("predicted only: " + k);
  if (!unmatched.empty()) {
    std::string msg = "sweep keys do not match (" + join(kKeyColumns) + "):";
    for (const auto& u : unmatched) msg += "\n  " + u;
    throw Error(msg);
  }

  std::vector<ComparedQuantity> result;
  const std::vector<std::string> quantities{"x_collect", "x_transfer", "x_compute", "x_update",
                                            "x_p2p"};
  std::vector<std::string> header = kKeyColumns;
  for (const auto& q : quantities) {
    header.push_back("predicted_" + q);
    header.push_back("measured_" + q);
  }
  CsvWriter joined(out_dir / "compare.csv", header);
  for (const auto& [k, mr] : m_rows) {
    const std::size_t pr = p_rows.at(k);
    std::vector<std::string> row = split(k);
    for (const auto& q : quantities) {
      row.push_back(predicted.text(pr, q));
      row.push_back(measured.text(mr, q));
    }
    joined.row(row);
  }

  CsvWriter metrics(out_dir / "compare_metrics.csv",
                    {"quantity", "points", "pearson", "spearman", "mean_abs_rel_err"});
  for (const auto& q : quantities) {
    ComparedQuantity cq;
    cq.name = q;
    for (const auto& [k, mr] : m_rows) {
      const std::size_t pr = p_rows.at(k);
      PointKey key;
      key.mode = parse_mode(measured.text(mr, "mode"));
      key.n = static_cast<std::size_t>(measured.number(mr, "N"));
      key.level = static_cast<int>(measured.number(mr, "L"));
      key.t = static_cast<std::uint32_t>(measured.number(mr, "t"));
      key.rf = static_cast<std::uint32_t>(measured.number(mr, "rf"));
      key.seed = std::stoull(measured.text(mr, "seed"));
      cq.keys.push_back(key);
      cq.predicted.push_back(predicted.number(pr, q));
      cq.measured.push_back(measured.number(mr, q));
    }
    try {
      cq.metrics = model::trend_metrics(cq.predicted, cq.measured);
    } catch (const Error&) {
      cq.metrics_defined = false;
      cq.metrics.pearson = cq.metrics.spearman = std::numeric_limits<double>::quiet_NaN();
      try {
        cq.metrics.mean_abs_rel_err = model::mean_abs_rel_err(cq.predicted, cq.measured);
      } catch (const Error&) {
        cq.metrics.mean_abs_rel_err = std::numeric_limits<double>::quiet_NaN();
      }
    }
    metrics.row({q, str(cq.keys.size()), num(cq.metrics.pearson), num(cq.metrics.spearman),
                 num(cq.metrics.mean_abs_rel_err)});

    std::map<std::uint32_t, std::pair<double, double>> by_t;
    std::map<std::uint32_t, int> count;
    for (std::size_t i = 0; i < cq.keys.size(); ++i) {
      by_t[cq.keys[i].t].first += cq.predicted[i];
      by_t[cq.keys[i].t].second += cq.measured[i];
      ++count[cq.keys[i].t];
    }
    Series ps{"predicted", {}, {}}, ms{"measured", {}, {}};
    for (const auto& [t, sums] : by_t) {
      ps.x.push_back(t);
      ms.x.push_back(t);
      ps.y.push_back(sums.first / count[t]);
      ms.y.push_back(sums.second / count[t]);
    }
    bool finite = true;
    for (double v : ps.y) finite = finite && std::isfinite(v);
    for (double v : ms.y) finite = finite && std::isfinite(v);
    if (finite && !by_t.empty()) {
      ChartOptions opt;
      opt.title = q + ": predicted vs measured";
      opt.x_label = "t";
      opt.y_label = "speedup";
      opt.log_x = true;
      write_line_chart(out_dir / ("compare_" + q + ".svg"), {ps, ms}, opt);
    }
    result.push_back(std::move(cq));
  }
  return result;
}

}  // namespace p2plab
