#pragma once

// Log-probability surfaces used as ground truth: diagonal Gaussian mixtures
// (any dimension), the normalized peaks function, and regular 1-D/2-D grids
// with finite-difference gradient and total-variation curvature operators.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mbias/linalg.hpp"
#include "mbias/rng.hpp"

namespace mbias {

// ---------------------------------------------------------------------------
// Gaussian mixtures
// ---------------------------------------------------------------------------

/// Weighted mixture of diagonal-covariance Gaussians in R^d. Immutable once
/// constructed; the constructor enforces the invariants (weights sum to one
/// within 1e-12, positive variances, consistent dimensions).
class GaussianMixture {
 public:
  GaussianMixture(std::vector<Vec> means, std::vector<Vec> variances, Vec weights);

  std::size_t dim() const { return means_.front().size(); }
  std::size_t size() const { return means_.size(); }
  const std::vector<Vec>& means() const { return means_; }
  const std::vector<Vec>& variances() const { return variances_; }
  const Vec& weights() const { return weights_; }

 private:
  std::vector<Vec> means_;
  std::vector<Vec> variances_;
  Vec weights_;
};

/// The three-mode planar mixture: means (-5,-5), (0,-5), (-5,0), isotropic
/// variance 0.1, equal weights.
GaussianMixture three_mode_mixture();

double gmm_logpdf(const GaussianMixture& gmm, std::span<const double> x);

/// Analytic score: responsibility-weighted sum of (mu_k - x) / sigma_k^2.
Vec gmm_score(const GaussianMixture& gmm, std::span<const double> x);

/// Exact law of sqrt(1-alpha) x0 + sqrt(alpha) eps for x0 ~ gmm:
/// means scale by sqrt(1-alpha), variances become (1-alpha) s^2 + alpha.
GaussianMixture gmm_perturbed(const GaussianMixture& gmm, double alpha);

/// Mahalanobis distance from x to component k.
double gmm_mahalanobis(const GaussianMixture& gmm, std::size_t k, std::span<const double> x);

/// Draw one point; writes the chosen component to `component` when non-null.
Vec gmm_sample(const GaussianMixture& gmm, RngStream& rng, std::size_t* component = nullptr);

// ---------------------------------------------------------------------------
// Regular grids
// ---------------------------------------------------------------------------

struct GridSpec {
  Vec origin;
  Vec spacing;
  std::vector<std::size_t> shape;

  std::size_t dim() const { return shape.size(); }
  std::size_t count() const;
  double cell_volume() const;
};

/// Dense scalar field on a regular grid, row-major (last axis fastest).
/// Node (i, j) sits at origin + (i * spacing[0], j * spacing[1]).
class ScalarFieldGrid {
 public:
  ScalarFieldGrid(GridSpec spec, Vec values);
  static ScalarFieldGrid sample(const GridSpec& spec, const std::function<double(std::span<const double>)>& f);

  const GridSpec& spec() const { return spec_; }
  std::size_t dim() const { return spec_.dim(); }
  const Vec& values() const { return values_; }
  Vec& mutable_values() { return values_; }

  double& at(std::size_t i) { return values_[i]; }
  double at(std::size_t i) const { return values_[i]; }
  double& at(std::size_t i, std::size_t j) { return values_[i * spec_.shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * spec_.shape[1] + j]; }

  double coord(std::size_t axis, std::size_t index) const {
    return spec_.origin[axis] + static_cast<double>(index) * spec_.spacing[axis];
  }

  /// Multilinear interpolation; coordinates outside the grid clamp to the border.
  double interpolate(std::span<const double> x) const;

  /// Riemann sum of the values times the cell volume.
  double integral() const;

 private:
  GridSpec spec_;
  Vec values_;
};

/// One scalar grid per axis component.
struct VectorFieldGrid {
  std::vector<ScalarFieldGrid> components;

  ScalarFieldGrid magnitude() const;
  Vec interpolate(std::span<const double> x) const;
};

/// Central differences in the interior, first-order one-sided at borders.
/// Requires d <= 2 and at least 3 nodes per axis.
VectorFieldGrid grid_gradient(const ScalarFieldGrid& grid);

/// -div( grad f / (|grad f| + eps) ) by central differences; d = 2 only.
ScalarFieldGrid grid_tv_curvature(const ScalarFieldGrid& grid, double eps = 1e-8);

/// Strict local maxima over the 8-neighbourhood, interior nodes only.
struct GridPeak {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
};
std::vector<GridPeak> grid_local_maxima(const ScalarFieldGrid& grid);

// ---------------------------------------------------------------------------
// Peaks function
// ---------------------------------------------------------------------------

/// The three-exponential peaks surface scaled by 1/C, with values below the
/// floor threshold set to zero. C makes the floored function integrate to one
/// over the canonical domain [-3,3]^2 sampled at spacing 0.01.
class PeaksFunction {
 public:
  explicit PeaksFunction(double floor_threshold = 1e-5);

  static double raw(double x, double y);
  static GridSpec canonical_domain();

  double operator()(double x, double y) const;
  double normalization() const { return normalization_; }
  double floor_threshold() const { return floor_; }

  ScalarFieldGrid sample(const GridSpec& spec) const;

 private:
  double normalization_ = 1.0;
  double floor_ = 1e-5;
};

enum class PointKind { kLocalMax, kLocalMin, kSaddle, kDegenerate };

/// Sign pattern of the Hessian of f at (x, y), from central differences.
PointKind classify_by_hessian(const std::function<double(double, double)>& f, double x, double y,
                              double step = 1e-4);

// ---------------------------------------------------------------------------
// Bumpy manifold simulation
// ---------------------------------------------------------------------------

/// Log-density of points spread uniformly on a circle of the given radius,
/// blurred by isotropic Gaussian noise. A ridge-shaped base surface.
ScalarFieldGrid ring_log_density(const GridSpec& spec, double ring_radius, double noise_std,
                                 std::size_t curve_points = 720);

struct BumpySurface {
  ScalarFieldGrid log_density;
  ScalarFieldGrid bump_density;  ///< added bump mass before renormalization
  std::vector<Vec> centers;
};

/// Adds `bump_count` isotropic Gaussian bumps in density space at cells drawn
/// with probability proportional to the base density among cells holding at
/// least half the peak density, then renormalizes to unit mass. Bump height
/// is bump_scale times the base peak density.
BumpySurface plant_bumps(const ScalarFieldGrid& base_log_density, int bump_count, double bump_scale,
                         double bump_width, std::uint64_t seed);

ScalarFieldGrid bumpy_surface(const ScalarFieldGrid& base_log_density, int bump_count,
                              double bump_scale, double bump_width, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Score oracles
// ---------------------------------------------------------------------------

enum class OracleKind { kAnalyticGmm, kGridInterpolated, kDenoiserBacked, kCustom };

/// Uniform handle mapping a point to an approximate score vector.
class ScoreOracle {
 public:
  using Fn = std::function<Vec(std::span<const double>)>;

  ScoreOracle(OracleKind kind, std::size_t dim, Fn fn, double alpha = 0.0);

  /// Score of the mixture perturbed with scheduling scalar alpha; alpha = 0
  /// means the unperturbed mixture.
  static ScoreOracle analytic(const GaussianMixture& gmm, double alpha = 0.0);

  /// Gradient of a grid field, interpolated from its central differences.
  static ScoreOracle from_grid(const ScalarFieldGrid& field);

  /// Throws NumericalError if the backing returns a non-finite vector.
  Vec operator()(std::span<const double> x) const;

  OracleKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double alpha() const { return alpha_; }

 private:
  OracleKind kind_;
  std::size_t dim_;
  Fn fn_;
  double alpha_;
};

}  // namespace mbias
