#pragma once

// A small denoising diffusion model for low-dimensional data: linear noise
// schedule, fully connected epsilon predictor with hand-written backprop and
// Adam, ancestral sampling, KDE of generated samples and the statistics of
// where reverse trajectories end.
//
// Notation: the schedule stores the usual cumulative product alphas_bar; the
// perturbation strength used by the estimators is alpha = 1 - alphas_bar[t],
// so x_t = sqrt(1 - alpha) x0 + sqrt(alpha) eps.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mbias/estimators.hpp"
#include "mbias/linalg.hpp"
#include "mbias/rng.hpp"
#include "mbias/surfaces.hpp"

namespace mbias {

struct NoiseSchedule {
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  Vec betas;
  Vec alphas_bar;

  /// Perturbation strength at step t: 1 - alphas_bar[t].
  double alpha(int t) const { return 1.0 - alphas_bar.at(t); }
};

/// Linearly spaced betas, alphas_bar[t] = prod_{s<=t} (1 - betas[s]).
NoiseSchedule make_schedule(int T = 100, double beta_start = 1e-4, double beta_end = 0.02);

struct ForwardDraw {
  Vec x_t;
  Vec eps;
};

/// x_t = sqrt(alphas_bar[t]) x0 + sqrt(1 - alphas_bar[t]) eps, eps ~ N(0, I).
ForwardDraw forward_sample(std::span<const double> x0, int t, const NoiseSchedule& schedule, RngStream& rng);

/// Per-axis affine standardization z = (x - mean) / std. The network and the
/// sampler work in z; everything exposed to callers is in data coordinates
/// unless stated otherwise.
struct DataScaler {
  Vec mean;
  Vec std;

  static DataScaler identity(std::size_t d);
  static DataScaler fit(const std::vector<Vec>& data);  ///< sample mean, unbiased std
  Vec to_model(std::span<const double> x) const;
  Vec to_data(std::span<const double> z) const;
};

/// Mixture expressed in the standardized frame of `scaler`.
GaussianMixture standardize_mixture(const GaussianMixture& gmm, const DataScaler& scaler);

/// Training batch in the model frame; one column per example.
struct NoiseBatch {
  Eigen::MatrixXd x;       ///< d x n noised inputs
  Eigen::RowVectorXd tf;   ///< time feature t / T per column
  Eigen::MatrixXd eps;     ///< d x n target noise
};

/// Fully connected ReLU network predicting eps from (x_t, t / T). The time
/// feature is appended as one extra input. Parameters are stored per layer as
/// weight (out x in) and bias (out).
class DenoiserNet {
 public:
  DenoiserNet() = default;
  /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  DenoiserNet(std::size_t dim, std::vector<int> hidden, RngStream& rng);

  std::size_t dim() const { return dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  std::size_t layer_count() const { return weights_.size(); }
  std::size_t parameter_count() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& tf) const;
  Vec predict(std::span<const double> x, double tf) const;

  /// Mean squared error over all entries of the batch.
  double loss(const NoiseBatch& batch) const;
  /// Loss and its gradient, flattened in parameter order.
  double loss_and_gradient(const NoiseBatch& batch, Eigen::VectorXd& grad) const;

  /// Flattened parameters: layer by layer, weight row-major then bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);

  nlohmann::json to_json() const;
  static DenoiserNet from_json(const nlohmann::json& doc);

 private:
  std::size_t dim_ = 0;
  std::vector<int> hidden_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// Network, schedule and data standardization: everything needed to sample.
struct DiffusionModel {
  DenoiserNet net;
  NoiseSchedule schedule;
  DataScaler scaler;

  /// Predicted noise for a model-frame point at step t.
  Vec predict_noise(std::span<const double> z, int t) const;

  nlohmann::json to_json() const;
  static DiffusionModel from_json(const nlohmann::json& doc);
};

struct TrainConfig {
  int epochs = 1000;
  double lr = 1e-3;
  int batch_size = 100;
  std::vector<int> hidden = {64, 64};
  bool standardize = true;
};

struct TrainResult {
  DiffusionModel model;
  Vec loss_history;  ///< mean minibatch loss per epoch
};

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the eps-prediction MSE with
/// shuffled minibatches and uniformly drawn steps. Throws NumericalError on a
/// non-finite loss.
TrainResult train_denoiser(const std::vector<Vec>& data, const NoiseSchedule& schedule, const TrainConfig& config,
                           std::uint64_t seed);

/// Score in data coordinates at step t: -eps_hat / sqrt(1 - alphas_bar[t]),
/// mapped back through the standardization.
Vec denoiser_score(const DiffusionModel& model, std::span<const double> x, int t);

/// Denoiser-backed oracle at step t; its alpha is 1 - alphas_bar[t].
ScoreOracle denoiser_oracle(const DiffusionModel& model, int t);

/// Clean-signal prediction in the model frame:
///   x_hat0 = (z - sqrt(1 - alphas_bar[t]) eps_hat) / sqrt(alphas_bar[t]).
CleanPredictor clean_predictor(const DiffusionModel& model, int t);

struct TrajectoryRecord {
  std::vector<Vec> points;  ///< T + 1 states from x_T to x_0, data coordinates
};

struct ReverseResult {
  Vec sample;
  std::optional<TrajectoryRecord> trajectory;
};

/// Ancestral sampling with variance beta_t; no noise is added at the last step.
/// Throws NumericalError if the state becomes non-finite.
ReverseResult reverse_diffuse(const DiffusionModel& model, RngStream& rng, bool record);

/// n independent chains evaluated as one batch; chain j draws from
/// RngStream::substream(seed, j).
std::vector<ReverseResult> reverse_diffuse_many(const DiffusionModel& model, std::size_t n, std::uint64_t seed,
                                                bool record);

/// Gaussian KDE on a 2-D grid, renormalized to unit Riemann mass.
ScalarFieldGrid kde(const std::vector<Vec>& samples, double bandwidth, const GridSpec& spec);

/// Index of the component with the smallest Mahalanobis distance.
std::size_t nearest_component(const GaussianMixture& gmm, std::span<const double> x);

struct TerminationReport {
  double fraction = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  double null_p = 0.0;
  double threshold = 0.0;
  int n_traj = 0;
  int n_boot = 0;
};

/// Volume of the threshold ellipsoids of all components divided by the
/// bounding-box volume of all trajectory points, clipped to [0, 1].
double geometric_null_probability(const GaussianMixture& gmm, double threshold,
                                  const std::vector<TrajectoryRecord>& trajectories);

/// Fraction of trajectory endpoints within `threshold` (Mahalanobis) of some
/// component mean; 95% percentile bootstrap CI (widened to contain the
/// fraction); one-sided binomial P(X >= hits) under success probability null_p.
TerminationReport termination_analysis(const std::vector<TrajectoryRecord>& trajectories,
                                       const GaussianMixture& gmm, double threshold, int n_boot, double null_p,
                                       RngStream& rng);

nlohmann::json to_json(const TerminationReport& r);

}  // namespace mbias
