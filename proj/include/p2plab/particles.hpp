#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace p2plab {

using Vec3 = std::array<double, 3>;

/// Per-particle state entering the P2P kernel. Components past `dim` are zero.
struct Particle {
  Vec3 position{};
  double mass = 1.0;
  std::uint32_t id = 0;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an internal invariant is broken (the layout or kernel is wrong,
/// not the input).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Distribution { uniform, plummer };

Distribution parse_distribution(const std::string& name);

/// Uniform random positions in the unit box, total mass 1.
std::vector<Particle> generate_uniform(std::size_t n, int dim,
                                       std::uint64_t seed);

/// Plummer-like clustered cloud centred in the unit box. Samples falling
/// outside [0,1)^dim are redrawn. Total mass 1.
std::vector<Particle> generate_plummer(std::size_t n, int dim,
                                       std::uint64_t seed,
                                       double scale_radius = 0.05);

std::vector<Particle> generate(Distribution dist, std::size_t n, int dim,
                               std::uint64_t seed);

/// Displaces every particle by a uniform offset in [-amplitude, amplitude]
/// per axis and wraps back into [0,1). Stands in for one step of motion.
void jitter(std::span<Particle> particles, int dim, double amplitude,
            std::uint64_t seed);

/// CSV with header `id,x,y,z,mass` (`id,x,y,mass` for dim 2).
void write_particles_csv(std::ostream& os, std::span<const Particle> particles,
                         int dim);

struct ParticleFile {
  int dim = 3;
  std::vector<Particle> particles;
};

ParticleFile read_particles_csv(std::istream& is);

}  // namespace p2plab
