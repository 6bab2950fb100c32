#pragma once

// Desk-scale experiments behind the CLI subcommands. Each study has a pure
// computational core returning in-memory results and a `run_*` wrapper that
// reads a ParamSet and writes CSV/JSON files into an output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mbias/config.hpp"
#include "mbias/detection.hpp"
#include "mbias/estimators.hpp"
#include "mbias/surfaces.hpp"
#include "mbias/toy_diffusion.hpp"

namespace mbias {

/// Where a run writes and what it seeds from. `log` receives warnings.
struct RunContext {
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::ostream* log = nullptr;

  std::uint64_t require_seed(const char* subcommand) const;  ///< throws ConfigError
};

/// Seed for an independent part of a study, derived from the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag);

// ---------------------------------------------------------------------------
// Curvature estimator study on the peaks surface
// ---------------------------------------------------------------------------

struct InterestPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  PointKind kind = PointKind::kDegenerate;  ///< from the Hessian of the surface
};

/// The two reference circles, (1.2, 0.8) and (-0.475, -0.7), followed (when
/// count = 5) by two further local maxima and one saddle. Kinds are computed.
std::vector<InterestPoint> peaks_interest_points(const PeaksFunction& peaks, int count);

struct KappaPointResult {
  InterestPoint point;
  double truth = 0.0;
  EstimatorStats stats;
};

/// Truth from the grid volume integral on the canonical domain; estimates
/// from the grid-interpolated gradient. Point k uses derive_seed(seed, k).
std::vector<KappaPointResult> kappa_study(const PeaksFunction& peaks, const std::vector<InterestPoint>& points,
                                          double radius, const std::vector<int>& counts, int runs,
                                          std::uint64_t seed, bool normalize_by_ball = true,
                                          double delta = kDefaultDelta);

ParamSet kappa_params();
std::vector<std::filesystem::path> run_kappa_study(const ParamSet& params, const RunContext& ctx);

// ---------------------------------------------------------------------------
// Toy diffusion on the three-mode mixture
// ---------------------------------------------------------------------------

struct GmmStudyConfig {
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  TrainConfig train;
  int points = 1000;
  int samples = 1000;
  int trajectories = 100;
  int n_boot = 1000;
  double threshold = 2.45;
  double bandwidth = 0.3;
  GridSpec kde_grid{{-8.0, -8.0}, {0.05, 0.05}, {221, 221}};
  int score_t = 10;
  GridSpec score_grid{{-8.0, -8.0}, {11.0 / 39.0, 11.0 / 39.0}, {40, 40}};
};

/// Learned versus analytic normalized score directions on a grid.
struct ScoreFieldComparison {
  int t = 0;
  double alpha = 0.0;
  std::vector<Vec> points;
  std::vector<Vec> learned;   ///< unit vectors (zero where the field vanishes)
  std::vector<Vec> analytic;  ///< unit vectors
  Vec cosine;
  double mean_cosine = 0.0;
  double random_mean_cosine = 0.0;  ///< same statistic for uniformly random directions
};

ScoreFieldComparison compare_score_fields(const DiffusionModel& model, const GaussianMixture& gmm, int t,
                                          const GridSpec& grid, RngStream& rng);

struct GmmStudyResult {
  std::vector<Vec> data;
  TrainResult train;
  std::vector<Vec> samples;
  std::vector<std::size_t> sample_component;  ///< nearest mixture component
  Vec mode_shares;
  std::vector<TrajectoryRecord> trajectories;
  TerminationReport termination;
  ScalarFieldGrid kde_grid;
  std::vector<GridPeak> kde_peaks;  ///< strict local maxima, highest first
  ScoreFieldComparison score_field;
};

GmmStudyResult gmm_study(const GaussianMixture& gmm, const GmmStudyConfig& config, std::uint64_t seed);

ParamSet gmm_params();
std::vector<std::filesystem::path> run_gmm_study(const ParamSet& params, const RunContext& ctx);

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

/// Points with labels: id,label,x0,...,x{d-1}.
struct LabeledPoints {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<Vec> points;
};
LabeledPoints read_labeled_points(std::istream& is);
void write_labeled_points(std::ostream& os, const LabeledPoints& pts);

ParamSet detect_params();
std::vector<std::filesystem::path> run_detect(const ParamSet& params, const RunContext& ctx);

ParamSet metrics_params();
std::vector<std::filesystem::path> run_metrics(const ParamSet& params, const RunContext& ctx);

/// Features with labels: id,label,f0,...,f{k-1}.
ParamSet moe_params();
std::vector<std::filesystem::path> run_moe(const ParamSet& params, const RunContext& ctx);

// ---------------------------------------------------------------------------
// Bumpy surface demonstration
// ---------------------------------------------------------------------------

struct SurfaceDemo {
  ScalarFieldGrid base;
  BumpySurface bumpy;
  ScalarFieldGrid base_curvature;
  ScalarFieldGrid gradient_magnitude;
  ScalarFieldGrid curvature;
  ScalarFieldGrid differential;  ///< curvature minus gradient magnitude
  double top_decile_hit_rate = 0.0;  ///< bump-centre cells in the top 10% of `differential`
};

struct SurfaceDemoConfig {
  GridSpec grid{{-4.0, -4.0}, {0.05, 0.05}, {161, 161}};
  double ring_radius = 2.0;
  double noise_std = 0.4;
  int bump_count = 20;
  double bump_scale = 0.5;
  double bump_width = 0.1;
  double eps = 1e-8;
};

SurfaceDemo surface_demo(const SurfaceDemoConfig& config, std::uint64_t seed);

ParamSet surface_params();
std::vector<std::filesystem::path> run_surface_demo(const ParamSet& params, const RunContext& ctx);

// ---------------------------------------------------------------------------
// Thin-shell concentration of Gaussian norms
// ---------------------------------------------------------------------------

/// shell_stats.csv: d,n,mean_norm,var_norm. Dimension d draws from
/// derive_seed(seed, d).
ParamSet shell_params();
std::vector<std::filesystem::path> run_shell_stats(const ParamSet& params, const RunContext& ctx);

}  // namespace mbias
