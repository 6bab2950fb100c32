#pragma once

#include <cstddef>
#include <span>

#include "mbias/linalg.hpp"
#include "mbias/rng.hpp"

namespace mbias {

/// Uniform draw from the sphere of radius sqrt(d) centred at the origin.
/// Standard normal vector rescaled to norm sqrt(d); a zero draw is redrawn.
Vec sample_sphere(std::size_t d, RngStream& rng);

/// A spherical direction u and the perturbed point it induces,
///   x_tilde = sqrt(1 - alpha) * x0 + sqrt(alpha) * u.
struct SphericalSample {
  Vec u;
  Vec x_tilde;
  Vec x0;
  double alpha = 0.0;
};

/// Builds x_tilde from x0 and u. Requires |u| = sqrt(d) within 1e-9 and
/// alpha in (0, 1]. x_tilde lies on the sphere of radius sqrt(alpha d)
/// around sqrt(1 - alpha) x0.
SphericalSample perturb(std::span<const double> x0, double alpha, std::span<const double> u);

/// alpha for a given perturbation strength alpha * sqrt(d).
inline double alpha_from_strength(double strength, std::size_t d) {
  return strength / std::sqrt(static_cast<double>(d));
}

/// alpha whose perturbation sphere has the given radius sqrt(alpha d).
inline double alpha_from_radius(double radius, std::size_t d) {
  return radius * radius / static_cast<double>(d);
}

/// Norm statistics of standard normal vectors in R^d.
struct ShellStats {
  std::size_t d = 0;
  std::size_t n = 0;
  double mean_norm = 0.0;
  double var_norm = 0.0;  ///< unbiased sample variance
};

ShellStats shell_stats(std::size_t d, std::size_t n, RngStream& rng);

}  // namespace mbias
