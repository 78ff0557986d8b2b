// p2plab: near-field layout experiments.
//
//   p2plab tree-stats --config sweep.ini
//   p2plab run        --config sweep.ini --seed 7 --out results/
//   p2plab predict    --config sweep.ini [--measured results/measured.csv]
//   p2plab compare    --measured m.csv --predicted p.csv --out report/
//   p2plab fit-shares --measured m.csv --out fit/

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <stdexcept>

#include "p2plab/config.hpp"
#include "p2plab/experiment.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field operator layout laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "INI experiment config");
  app.add_option("--seed", seed, "overrides the config seed list");
  app.add_option("--out", out_dir, "output directory");

  auto* tree_stats = app.add_subcommand("tree-stats", "leafs, interactions and E2 per sweep point");
  auto* run = app.add_subcommand("run", "measure both layouts over the sweep");
  auto* predict = app.add_subcommand("predict", "evaluate the speedup model over the sweep");
  std::string predict_measured;
  predict->add_option("--measured", predict_measured, "fit shares to this measured.csv");

  auto* compare = app.add_subcommand("compare", "join measured and predicted speedups");
  std::string measured, predicted;
  compare->add_option("--measured", measured, "measured.csv from run")->required();
  compare->add_option("--predicted", predicted, "predictions.csv from predict")->required();

  auto* fit = app.add_subcommand("fit-shares", "least-squares share rows from measured.csv");
  std::string fit_measured;
  fit->add_option("--measured", fit_measured, "measured.csv from run")->required();

  for (auto* sub : {tree_stats, run, predict, compare, fit}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  auto load = [&]() {
    if (config_path.empty()) throw UsageError("--config is required for this command");
    p2plab::ExperimentConfig cfg;
    try {
      cfg = p2plab::load_config(config_path, seed);
    } catch (const p2plab::Error& e) {
      throw UsageError(e.what());
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
  };

  try {
    if (tree_stats->parsed()) {
      const auto cfg = load();
      const auto points = p2plab::cmd_tree_stats(cfg);
      std::cout << points.size() << " rows -> " << (cfg.out_dir / "tree_stats.csv").string() << '\n';
    } else if (run->parsed()) {
      const auto cfg = load();
      const auto result = p2plab::cmd_run(cfg);
      std::cout << result.points.size() << " points measured, " << result.errors.size()
                << " failed -> " << cfg.out_dir.string() << '\n';
      for (const auto& e : result.errors) std::cerr << "error: " << e << '\n';
      if (!result.errors.empty() && result.points.empty()) return kFailure;
    } else if (predict->parsed()) {
      auto cfg = load();
      if (!predict_measured.empty()) {
        cfg.shares = "fit";
        cfg.measured = predict_measured;
      }
      const auto points = p2plab::cmd_predict(cfg);
      std::cout << points.size() << " rows -> " << (cfg.out_dir / "predictions.csv").string()
                << '\n';
    } else if (compare->parsed()) {
      const std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
      const auto quantities = p2plab::cmd_compare(measured, predicted, dir);
      for (const auto& q : quantities) {
        std::cout << q.name << ": pearson " << q.metrics.pearson << ", spearman "
                  << q.metrics.spearman << ", mean abs rel err " << q.metrics.mean_abs_rel_err
                  << '\n';
      }
    } else if (fit->parsed()) {
      const std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
      for (const auto& [component, f] : p2plab::cmd_fit_shares(fit_measured, dir)) {
        std::cout << p2plab::model::to_string(component) << ": " << f.a << " + " << f.b
                  << " ln t (rms " << f.rms << ")\n";
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const p2plab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kFailure;
  }
  return 0;
}
