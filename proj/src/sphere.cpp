#include "mbias/sphere.hpp"

#include <cmath>
#include <stdexcept>

namespace mbias {

Vec sample_sphere(std::size_t d, RngStream& rng) {
  if (d == 0) throw std::invalid_argument("sphere dimension must be at least 1");
  Vec u(d);
  double n = 0.0;
  while (n == 0.0) {
    for (double& v : u) v = rng.normal();
    n = norm2(u);
  }
  // divide first so that d = 1 lands exactly on +-1
  const double root_d = std::sqrt(static_cast<double>(d));
  for (double& v : u) v = v / n * root_d;
  return u;
}

SphericalSample perturb(std::span<const double> x0, double alpha, std::span<const double> u) {
  if (x0.size() != u.size()) throw std::invalid_argument("x0 and u differ in dimension");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const double expected = std::sqrt(static_cast<double>(u.size()));
  if (std::abs(norm2(u) - expected) > 1e-9) throw std::invalid_argument("u must have norm sqrt(d)");
  SphericalSample s;
  s.u.assign(u.begin(), u.end());
  s.x0.assign(x0.begin(), x0.end());
  s.alpha = alpha;
  s.x_tilde.resize(u.size());
  const double keep = std::sqrt(1.0 - alpha);
  const double noise = std::sqrt(alpha);
  for (std::size_t i = 0; i < u.size(); ++i) s.x_tilde[i] = keep * x0[i] + noise * u[i];
  return s;
}

ShellStats shell_stats(std::size_t d, std::size_t n, RngStream& rng) {
  if (n < 2) throw std::invalid_argument("shell_stats needs n >= 2");
  if (d == 0) throw std::invalid_argument("dimension must be positive");
  Vec norms(n);
  for (std::size_t k = 0; k < n; ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double z = rng.normal();
      sq += z * z;
    }
    norms[k] = std::sqrt(sq);
  }
  const MeanStd ms = mean_std(norms);
  return ShellStats{d, n, ms.mean, ms.std * ms.std};
}

}  // namespace mbias
