#pragma once

// Monte-Carlo estimators over the spherical boundary of a ball: curvature
// (boundary flux of the normalized score), mean gradient magnitude, the
// denoiser bias term and the combined detection criterion.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mbias/linalg.hpp"
#include "mbias/rng.hpp"
#include "mbias/surfaces.hpp"

namespace mbias {

/// Clean-signal predictor x_hat0(x_tilde) of a denoiser at a fixed noise level.
using CleanPredictor = std::function<Vec(std::span<const double>)>;

inline constexpr double kDefaultDelta = 1e-8;

/// Score evaluations at s points of the sphere |x - center| = radius.
/// directions[i] has norm sqrt(d); points[i] = center + radius * directions[i] / sqrt(d).
struct BoundarySamples {
  Vec center;
  double radius = 0.0;
  std::vector<Vec> directions;
  std::vector<Vec> points;
  std::vector<Vec> scores;
};

BoundarySamples sample_boundary(const ScoreOracle& oracle, std::span<const double> center, double radius,
                                int s, RngStream& rng);

/// Curvature from boundary samples. Ball-normalized:
///   -(1/s) sum <v/(|v|+delta), n_out> * d / radius.
/// Unnormalized (d = 2 only): sum <v/(|v|+delta), n_in> * 2 pi R / s.
/// delta = 0 is allowed as long as no sampled score vanishes.
double kappa_from_samples(const BoundarySamples& b, bool normalize_by_ball = true,
                          double delta = kDefaultDelta);

/// Mean score magnitude over the boundary samples.
double gradient_from_samples(const BoundarySamples& b);

double estimate_kappa(const ScoreOracle& oracle, std::span<const double> center, double radius, int s,
                      RngStream& rng, bool normalize_by_ball = true, double delta = kDefaultDelta);

double estimate_D(const ScoreOracle& oracle, std::span<const double> center, double radius, int s,
                  RngStream& rng);

/// Ball average of the grid TV curvature: Riemann sum over nodes strictly
/// inside the disc, divided by pi R^2. The disc plus one cell must fit in the grid.
double true_kappa_volume(const ScalarFieldGrid& field, std::span<const double> center, double radius,
                         double eps = kDefaultDelta);

/// <b0_hat, x0> with b0_hat = mean_i (x0 - x_hat0(x_tilde_i)) over s spherical
/// perturbations of strength alpha.
double estimate_bias_term(const CleanPredictor& denoiser, std::span<const double> x0, double alpha, int s,
                          RngStream& rng);

/// Per-perturbation contributions <x0 - x_hat0(x_tilde_i), x0>; their mean is
/// the bias term. For standard errors.
Vec bias_term_samples(const CleanPredictor& denoiser, std::span<const double> x0, double alpha, int s,
                      RngStream& rng);

struct CriterionConfig {
  int s = 64;
  double alpha = 0.0;
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  double delta = kDefaultDelta;
  std::uint64_t seed = 0;
  bool normalize_by_ball = true;

  /// s = 64, alpha sqrt(d) = 1.28, delta = 1e-8, a = b = c = 1.
  static CriterionConfig defaults(std::size_t d, std::uint64_t seed = 0);
  void validate() const;  ///< throws std::invalid_argument
};

struct CriterionReport {
  double kappa_hat = 0.0;
  double d_hat = 0.0;
  double bias_hat = 0.0;
  double c_raw = 0.0;
  double c_scaled = 0.0;
  int s = 0;
  double radius = 0.0;
  std::uint64_t seed = 0;
};

/// Combined criterion over s perturbations x_tilde_i = sqrt(1-alpha) x0 + sqrt(alpha) u_i:
///   c_raw = (1/s) sum < -h_i/(|h_i|+delta), a u_i - b h_i + c sqrt(d) x0 >,
///   c_scaled = c_raw / ((a+b+c) sqrt(d)) + 1, or 1 when a+b+c = 0.
/// kappa_hat, d_hat and bias_hat are computed from the same perturbations;
/// bias_hat recovers x_hat0 = (x_tilde + alpha h) / sqrt(1-alpha) and is 0 at alpha = 1.
CriterionReport criterion_C(const ScoreOracle& h, std::span<const double> x0, const CriterionConfig& config);

/// Both sides of the curvature-minus-gradient identity on one perturbation set:
///   lhs = (1/s) sum < -v/(|v|+delta), u + v >
///   rhs = kappa_unit - d_hat, kappa_unit = kappa_hat * radius / sqrt(d)
/// where kappa_unit is the flux normalized on the radius-sqrt(d) sphere of u.
/// Equal up to rounding when delta = 0.
struct CurvatureGradientIdentity {
  double lhs = 0.0;
  double kappa_hat = 0.0;
  double kappa_unit = 0.0;
  double d_hat = 0.0;
  double rhs = 0.0;
};
CurvatureGradientIdentity curvature_gradient_identity(const ScoreOracle& oracle, std::span<const double> x0,
                                                      double alpha, int s, RngStream& rng,
                                                      double delta = kDefaultDelta);

struct EstimatorStats {
  std::vector<int> sample_counts;
  Vec means;
  Vec stds;
  double loglog_slope = 0.0;  ///< NaN when fewer than two positive stds
  double loglog_r2 = 0.0;
};

/// Mean and standard deviation of the ball-normalized kappa estimate over
/// `runs` independent runs per count, plus the least-squares slope of
/// log(std) against log(count). Run r at count index k draws from
/// RngStream::substream(seed, k * 2^32 + r).
EstimatorStats error_analysis(const ScoreOracle& oracle, std::span<const double> center, double radius,
                              const std::vector<int>& sample_counts, int runs, std::uint64_t seed,
                              bool normalize_by_ball = true, double delta = kDefaultDelta);

// CSV forms. Reports: id,kappa_hat,d_hat,bias_hat,c_raw,c_scaled,s,radius,seed.
// Stats: count,mean,std.
void write_reports_csv(std::ostream& os, const std::vector<std::string>& ids,
                       const std::vector<CriterionReport>& reports);
std::vector<CriterionReport> read_reports_csv(std::istream& is, std::vector<std::string>* ids = nullptr);
void write_stats_csv(std::ostream& os, const EstimatorStats& stats);
EstimatorStats read_stats_csv(std::istream& is);

}  // namespace mbias
