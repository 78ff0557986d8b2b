#include "p2plab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "p2plab/csv.hpp"

namespace p2plab {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    const auto v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  }
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error("config key '" + key + "': expected a boolean, got '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  const std::string body = trim(text);
  if (body.empty()) return out;
  for (const auto& item : split(body, ',')) out.push_back(static_cast<T>(parse_u64(key, item)));
  return out;
}

ExperimentConfig from_tree(const pt::ptree& tree, std::optional<std::uint64_t> seed_override) {
  for (const auto& [section, body] : tree) {
    static const std::vector<std::string> known{"experiment", "particles", "tree",
                                                "exec",       "cache",     "model"};
    if (std::find(known.begin(), known.end(), section) == known.end()) {
      throw Error("unknown config section [" + section + "]");
    }
    (void)body;
  }
  ExperimentConfig c;
  auto get = [&](const std::string& key) { return tree.get_optional<std::string>(key); };

  if (auto v = get("experiment.mode")) c.mode = parse_mode(trim(*v));
  if (auto v = get("experiment.seeds")) c.seeds = parse_list<std::uint64_t>("seeds", *v);
  if (auto v = get("experiment.seed")) c.seeds = {parse_u64("seed", *v)};
  if (auto v = get("experiment.repetitions"))
    c.repetitions = static_cast<int>(parse_u64("repetitions", *v));
  if (auto v = get("experiment.iterations"))
    c.iterations = static_cast<int>(parse_u64("iterations", *v));
  if (auto v = get("experiment.jitter")) c.jitter = parse_real("jitter", *v);
  if (auto v = get("experiment.out")) c.out_dir = trim(*v);

  if (auto v = get("particles.n")) c.n_values = parse_list<std::size_t>("n", *v);
  if (auto v = get("particles.distribution")) c.distribution = parse_distribution(trim(*v));
  if (auto v = get("particles.dim")) c.dim = static_cast<int>(parse_u64("dim", *v));

  if (auto v = get("tree.t")) c.t_values = parse_list<std::uint32_t>("t", *v);
  if (auto v = get("tree.max_depth")) c.max_depth = static_cast<int>(parse_u64("max_depth", *v));
  if (auto v = get("tree.periodic")) c.periodic = parse_bool("periodic", *v);
  if (auto v = get("tree.partitions"))
    c.partitions = static_cast<std::uint32_t>(parse_u64("partitions", *v));

  if (auto v = get("exec.softening")) c.softening = parse_real("softening", *v);
  if (auto v = get("exec.batch_size")) c.batch_size = parse_u64("batch_size", *v);
  if (auto v = get("exec.batch_byte_cap")) c.batch_byte_cap = parse_u64("batch_byte_cap", *v);
  if (auto v = get("exec.rf")) c.rf = static_cast<std::uint32_t>(parse_u64("rf", *v));
  if (auto v = get("exec.trace_threads")) c.trace_threads = parse_u64("trace_threads", *v);

  if (auto v = get("cache.capacity")) {
    c.cache.capacity_bytes =
        trim(*v) == "inf" ? CacheConfig::kUnbounded : parse_u64("capacity", *v);
  }
  if (auto v = get("cache.line")) c.cache.line_bytes = static_cast<std::uint32_t>(parse_u64("line", *v));
  if (auto v = get("cache.ways")) c.cache.ways = static_cast<std::uint32_t>(parse_u64("ways", *v));
  if (auto v = get("cache.group")) c.cache.group = static_cast<std::uint32_t>(parse_u64("group", *v));

  if (auto v = get("model.compute_form")) c.compute_form = model::parse_dbim_compute_form(trim(*v));
  if (auto v = get("model.locality_scale")) c.locality_scale = parse_real("locality_scale", *v);
  if (auto v = get("model.share_p2p")) c.share_p2p = parse_real("share_p2p", *v);
  if (auto v = get("model.shares")) c.shares = trim(*v);
  if (auto v = get("model.measured")) c.measured = trim(*v);

  if (seed_override) {
    c.seeds = {*seed_override};
  } else if (const char* env = std::getenv("P2PLAB_SEED"); env && *env) {
    c.seeds = {parse_u64("P2PLAB_SEED", env)};
  }
  c.validate();
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw Error("a seed is mandatory: set [experiment] seed or pass --seed");
  if (n_values.empty()) throw Error("particle count list [particles] n is empty");
  if (t_values.empty()) throw Error("threshold list [tree] t is empty");
  if (repetitions < 1) throw Error("repetitions must be >= 1");
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (dim != 2 && dim != 3) throw Error("dim must be 2 or 3");
  if (partitions < 1) throw Error("partitions must be >= 1");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (rf < 1) throw Error("rf must be >= 1");
  if (!(softening >= 0.0)) throw Error("softening must be >= 0");
  if (!(locality_scale > 0.0)) throw Error("locality_scale must be positive");
  if (shares != "default" && shares != "fit") throw Error("shares must be 'default' or 'fit'");
  for (auto t : t_values)
    if (t < 1) throw Error("every t must be >= 1");
  for (auto n : n_values)
    if (n < 1) throw Error("every n must be >= 1");
  cache.validate();
  if (mode == Mode::dbim) {
    for (auto n : n_values)
      for (auto t : t_values) uniform_level(n, t);
  }
}

MeasureOptions ExperimentConfig::measure_options() const {
  MeasureOptions m;
  m.repetitions = repetitions;
  m.kernel.softening = softening;
  m.redundant.batch_size = batch_size;
  m.redundant.batch_byte_cap = batch_byte_cap;
  return m;
}

AdaptiveOptions ExperimentConfig::tree_options(std::uint32_t t) const {
  AdaptiveOptions o;
  o.threshold = t;
  o.dim = dim;
  o.max_depth = max_depth;
  o.periodic = periodic;
  return o;
}

int uniform_level(std::size_t n, std::uint32_t t) {
  if (t == 0 || n % t != 0) {
    throw Error("N=" + std::to_string(n) + " is not a multiple of t=" + std::to_string(t));
  }
  std::size_t boxes = n / t;
  int level = 0;
  while (boxes > 1 && boxes % 4 == 0) {
    boxes /= 4;
    ++level;
  }
  if (boxes != 1) {
    throw Error("N/t = " + std::to_string(n / t) + " is not a power of 4 (N = 4^L * t violated)");
  }
  uniform_samples_per_box(n, level);
  return level;
}

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return from_tree(tree, seed_override);
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), seed_override);
}

}  // namespace p2plab
