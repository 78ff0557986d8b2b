#include "p2plab/cachesim.hpp"

#include <algorithm>
#include <bit>
#include <list>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "p2plab/particles.hpp"

namespace p2plab {

void CacheConfig::validate() const {
  if (line_bytes == 0 || !std::has_single_bit(line_bytes)) {
    throw Error("cache line size must be a power of 2, got " + std::to_string(line_bytes));
  }
  if (group < 1) throw Error("interleave group must be >= 1");
  if (unbounded()) return;
  if (capacity_bytes == 0 || capacity_bytes % line_bytes != 0) {
    throw Error("cache capacity must be a positive multiple of the line size");
  }
  if (ways == 0 || lines() % ways != 0) {
    throw Error("line count " + std::to_string(lines()) + " is not divisible by " +
                std::to_string(ways) + " ways");
  }
}

CacheConfig CacheConfig::infinite(std::uint32_t line_bytes, std::uint32_t group) {
  return CacheConfig{kUnbounded, line_bytes, 1, group};
}

CacheConfig CacheConfig::fully_associative(std::uint64_t capacity_bytes, std::uint32_t line_bytes,
                                           std::uint32_t group) {
  return CacheConfig{capacity_bytes, line_bytes,
                     static_cast<std::uint32_t>(capacity_bytes / line_bytes), group};
}

namespace {

bool keep(const Access& a, AccessFilter filter) {
  return a.size > 0 && !(filter == AccessFilter::without_index && a.kind == AccessKind::index);
}

std::uint64_t runs_of(std::vector<std::uint64_t>& lines) {
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  std::uint64_t runs = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 || lines[i] != lines[i - 1] + 1) ++runs;
  }
  return runs;
}

std::uint64_t union_bytes(std::vector<std::pair<std::uint64_t, std::uint64_t>>& iv) {
  std::sort(iv.begin(), iv.end());
  std::uint64_t total = 0;
  std::uint64_t cur_lo = 0;
  std::uint64_t cur_hi = 0;
  bool open = false;
  for (const auto& [lo, hi] : iv) {
    if (!open || lo > cur_hi) {
      if (open) total += cur_hi - cur_lo;
      cur_lo = lo;
      cur_hi = hi;
      open = true;
    } else {
      cur_hi = std::max(cur_hi, hi);
    }
  }
  if (open) total += cur_hi - cur_lo;
  return total;
}

class LruCache {
 public:
  explicit LruCache(const CacheConfig& c) : config_(c) {
    if (c.unbounded()) return;
    sets_ = c.lines() / c.ways;
    if (sets_ == 1) return;  // fully associative: list + map
    tags_.assign(c.lines(), kEmpty);
    stamps_.assign(c.lines(), 0);
  }

  bool access(std::uint64_t line) {
    if (config_.unbounded()) return !seen_.insert(line).second;
    if (sets_ == 1) return access_full(line);
    const std::uint64_t set = line % sets_;
    const std::uint64_t first = set * config_.ways;
    ++clock_;
    std::uint64_t victim = first;
    for (std::uint64_t w = first; w < first + config_.ways; ++w) {
      if (tags_[w] == line) {
        stamps_[w] = clock_;
        return true;
      }
      if (stamps_[w] < stamps_[victim]) victim = w;
    }
    tags_[victim] = line;
    stamps_[victim] = clock_;
    return false;
  }

 private:
  static constexpr std::uint64_t kEmpty = ~0ull;

  bool access_full(std::uint64_t line) {
    auto it = where_.find(line);
    if (it != where_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return true;
    }
    if (order_.size() == config_.lines()) {
      where_.erase(order_.back());
      order_.pop_back();
    }
    order_.push_front(line);
    where_[line] = order_.begin();
    return false;
  }

  CacheConfig config_;
  std::uint64_t sets_ = 0;
  std::vector<std::uint64_t> tags_;
  std::vector<std::uint64_t> stamps_;
  std::uint64_t clock_ = 0;
  std::unordered_set<std::uint64_t> seen_;
  std::list<std::uint64_t> order_;
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> where_;
};

void touch_lines(LruCache& cache, const Access& a, std::uint32_t line_bytes, CacheStats& stats) {
  const std::uint64_t first = a.address / line_bytes;
  const std::uint64_t last = (a.address + a.size - 1) / line_bytes;
  for (std::uint64_t l = first; l <= last; ++l) {
    if (cache.access(l)) {
      ++stats.hits;
    } else {
      ++stats.misses;
    }
  }
}

}  // namespace

std::vector<std::uint64_t> dispersion(const MemoryTrace& trace, std::uint32_t line_bytes,
                                      AccessFilter filter) {
  if (line_bytes == 0 || !std::has_single_bit(line_bytes)) {
    throw Error("cache line size must be a power of 2");
  }
  std::vector<std::uint64_t> out(trace.threads());
  std::vector<std::uint64_t> lines;
  for (std::size_t t = 0; t < trace.threads(); ++t) {
    lines.clear();
    for (const auto& a : trace.thread(t)) {
      if (!keep(a, filter)) continue;
      for (std::uint64_t l = a.address / line_bytes; l <= (a.address + a.size - 1) / line_bytes; ++l) {
        lines.push_back(l);
      }
    }
    out[t] = runs_of(lines);
  }
  return out;
}

std::vector<std::uint64_t> volume(const MemoryTrace& trace, AccessFilter filter) {
  std::vector<std::uint64_t> out(trace.threads());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> iv;
  for (std::size_t t = 0; t < trace.threads(); ++t) {
    iv.clear();
    for (const auto& a : trace.thread(t)) {
      if (keep(a, filter)) iv.emplace_back(a.address, a.address + a.size);
    }
    out[t] = union_bytes(iv);
  }
  return out;
}

std::vector<std::uint64_t> group_volume(const MemoryTrace& trace, std::uint32_t group,
                                        AccessFilter filter) {
  if (group < 1) throw Error("interleave group must be >= 1");
  std::vector<std::uint64_t> out;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> iv;
  for (std::size_t g = 0; g < trace.threads(); g += group) {
    iv.clear();
    for (std::size_t t = g; t < std::min(trace.threads(), g + group); ++t) {
      for (const auto& a : trace.thread(t)) {
        if (keep(a, filter)) iv.emplace_back(a.address, a.address + a.size);
      }
    }
    out.push_back(union_bytes(iv));
  }
  return out;
}

CacheStats simulate_cache(const MemoryTrace& trace, const CacheConfig& config) {
  config.validate();
  LruCache cache(config);
  CacheStats stats;
  std::vector<std::size_t> cursor;
  for (std::size_t g = 0; g < trace.threads(); g += config.group) {
    const std::size_t end = std::min(trace.threads(), g + config.group);
    cursor.assign(end - g, 0);
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (std::size_t t = g; t < end; ++t) {
        const auto th = trace.thread(t);
        auto& c = cursor[t - g];
        if (c >= th.size()) continue;
        const Access& a = th[c++];
        progressed = true;
        if (a.size == 0) continue;
        touch_lines(cache, a, config.line_bytes, stats);
      }
    }
  }
  return stats;
}

CacheStats simulate_lines(const std::vector<std::uint64_t>& lines, const CacheConfig& config) {
  config.validate();
  LruCache cache(config);
  CacheStats stats;
  for (const auto l : lines) {
    touch_lines(cache, Access{l * config.line_bytes, 1, AccessKind::data}, config.line_bytes, stats);
  }
  return stats;
}

namespace {

void summarize(const std::vector<std::uint64_t>& v, double& mean, double& max) {
  mean = 0.0;
  max = 0.0;
  if (v.empty()) return;
  long double sum = 0.0;
  for (auto x : v) {
    sum += x;
    max = std::max(max, static_cast<double>(x));
  }
  mean = static_cast<double>(sum / v.size());
}

}  // namespace

LocalityReport analyze_locality(const MemoryTrace& trace, const CacheConfig& config) {
  config.validate();
  LocalityReport r;
  r.dispersion = dispersion(trace, config.line_bytes);
  r.volume = volume(trace);
  summarize(r.dispersion, r.mean_d, r.max_d);
  summarize(r.volume, r.mean_v, r.max_v);
  double ignored = 0.0;
  summarize(dispersion(trace, config.line_bytes, AccessFilter::without_index),
            r.mean_d_without_index, ignored);
  summarize(volume(trace, AccessFilter::without_index), r.mean_v_without_index, ignored);
  double mean_group = 0.0;
  summarize(group_volume(trace, config.group), mean_group, r.max_group_v);
  r.cache = simulate_cache(trace, config);
  return r;
}

std::string to_string(LocalityRegime regime) {
  return regime == LocalityRegime::fits_cache ? "eq10" : "eq11";
}

LocalitySpeedup locality_speedup(double d_base, double v_base, double d_rest, double v_rest,
                                 double capacity, double footprint, double scale) {
  if (!(d_base > 0 && v_base > 0 && d_rest > 0 && v_rest > 0 && capacity > 0)) {
    throw Error("locality speedup needs positive dispersion, volume and capacity");
  }
  if (footprint < 0) footprint = v_rest;
  LocalitySpeedup out;
  out.dispersion_ratio = d_base / d_rest;
  out.volume_ratio = v_base / v_rest;
  if (footprint <= capacity) {
    out.regime = LocalityRegime::fits_cache;
    out.value = scale * out.dispersion_ratio * out.volume_ratio;
  } else {
    out.regime = LocalityRegime::exceeds_cache;
    out.value = scale * out.volume_ratio / out.dispersion_ratio;
  }
  return out;
}

}  // namespace p2plab
