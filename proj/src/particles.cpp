#include "p2plab/particles.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace p2plab {

namespace {

void check_dim(int dim) {
  if (dim != 2 && dim != 3) {
    throw Error("dimension must be 2 or 3, got " + std::to_string(dim));
  }
}

double wrap_unit(double x) {
  x -= std::floor(x);
  // floor can leave exactly 1.0 for tiny negative inputs
  return x >= 1.0 ? 0.0 : x;
}

}  // namespace

Distribution parse_distribution(const std::string& name) {
  if (name == "uniform") return Distribution::uniform;
  if (name == "plummer") return Distribution::plummer;
  throw Error("unknown particle distribution '" + name + "'");
}

std::vector<Particle> generate_uniform(std::size_t n, int dim,
                                       std::uint64_t seed) {
  check_dim(dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Particle> out(n);
  const double m = n ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) out[i].position[k] = unit(rng);
    out[i].mass = m;
    out[i].id = static_cast<std::uint32_t>(i);
  }
  return out;
}

std::vector<Particle> generate_plummer(std::size_t n, int dim,
                                       std::uint64_t seed,
                                       double scale_radius) {
  check_dim(dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Particle> out(n);
  const double m = n ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p{};
    for (;;) {
      // inverse CDF of the Plummer cumulative mass profile
      const double u = std::max(unit(rng), 1e-12);
      const double r = scale_radius / std::sqrt(std::pow(u, -2.0 / 3.0) - 1.0);
      Vec3 dir{};
      double norm = 0.0;
      for (int k = 0; k < dim; ++k) {
        dir[k] = normal(rng);
        norm += dir[k] * dir[k];
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      bool inside = true;
      for (int k = 0; k < dim; ++k) {
        p[k] = 0.5 + r * dir[k] / norm;
        inside = inside && p[k] >= 0.0 && p[k] < 1.0;
      }
      if (inside) break;
    }
    out[i].position = p;
    out[i].mass = m;
    out[i].id = static_cast<std::uint32_t>(i);
  }
  return out;
}

std::vector<Particle> generate(Distribution dist, std::size_t n, int dim,
                               std::uint64_t seed) {
  switch (dist) {
    case Distribution::uniform:
      return generate_uniform(n, dim, seed);
    case Distribution::plummer:
      return generate_plummer(n, dim, seed);
  }
  throw Error("unhandled distribution");
}

void jitter(std::span<Particle> particles, int dim, double amplitude,
            std::uint64_t seed) {
  check_dim(dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> step(-amplitude, amplitude);
  for (auto& p : particles) {
    for (int k = 0; k < dim; ++k) p.position[k] = wrap_unit(p.position[k] + step(rng));
  }
}

void write_particles_csv(std::ostream& os, std::span<const Particle> particles,
                         int dim) {
  check_dim(dim);
  os << (dim == 3 ? "id,x,y,z,mass\n" : "id,x,y,mass\n");
  std::ostringstream line;
  line.precision(17);
  for (const auto& p : particles) {
    line.str({});
    line << p.id;
    for (int k = 0; k < dim; ++k) line << ',' << p.position[k];
    line << ',' << p.mass << '\n';
    os << line.str();
  }
}

ParticleFile read_particles_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error("particle CSV is empty");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  ParticleFile file;
  if (header == "id,x,y,z,mass") {
    file.dim = 3;
  } else if (header == "id,x,y,mass") {
    file.dim = 2;
  } else {
    throw Error("unexpected particle CSV header '" + header + "'");
  }
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> values;
    std::uint64_t id = 0;
    bool first = true;
    while (std::getline(fields, cell, ',')) {
      try {
        if (first) {
          id = std::stoull(cell);
          first = false;
        } else {
          values.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw Error("particle CSV line " + std::to_string(lineno) +
                    ": cannot parse '" + cell + "'");
      }
    }
    if (values.size() != static_cast<std::size_t>(file.dim + 1)) {
      throw Error("particle CSV line " + std::to_string(lineno) +
                  ": expected " + std::to_string(file.dim + 2) + " fields");
    }
    Particle p;
    p.id = static_cast<std::uint32_t>(id);
    for (int k = 0; k < file.dim; ++k) p.position[k] = values[k];
    p.mass = values[file.dim];
    file.particles.push_back(p);
  }
  for (std::size_t i = 0; i < file.particles.size(); ++i) {
    if (file.particles[i].id != i) {
      throw Error("particle ids must be contiguous from 0; row " +
                  std::to_string(i) + " has id " +
                  std::to_string(file.particles[i].id));
    }
  }
  return file;
}

}  // namespace p2plab
