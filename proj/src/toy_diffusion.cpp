#include "mbias/toy_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/binomial.hpp>

#include "mbias/errors.hpp"

namespace mbias {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("schedule needs T >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("betas must satisfy 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.betas.resize(T);
  s.alphas_bar.resize(T);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(T - 1);
    s.betas[t] = t == T - 1 && T > 1 ? beta_end : beta_start + (beta_end - beta_start) * frac;
    prod *= 1.0 - s.betas[t];
    s.alphas_bar[t] = prod;
  }
  return s;
}

ForwardDraw forward_sample(std::span<const double> x0, int t, const NoiseSchedule& schedule, RngStream& rng) {
  if (t < 0 || t >= schedule.T) throw std::invalid_argument("step out of range");
  const double keep = std::sqrt(schedule.alphas_bar[t]);
  const double noise = std::sqrt(1.0 - schedule.alphas_bar[t]);
  ForwardDraw out;
  out.eps.resize(x0.size());
  out.x_t.resize(x0.size());
  for (std::size_t k = 0; k < x0.size(); ++k) {
    out.eps[k] = rng.normal();
    out.x_t[k] = keep * x0[k] + noise * out.eps[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

DataScaler DataScaler::identity(std::size_t d) { return DataScaler{Vec(d, 0.0), Vec(d, 1.0)}; }

DataScaler DataScaler::fit(const std::vector<Vec>& data) {
  if (data.size() < 2) throw std::invalid_argument("scaler needs at least two points");
  const std::size_t d = data.front().size();
  DataScaler s{Vec(d), Vec(d)};
  Vec col(data.size());
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < data.size(); ++i) col[i] = data[i][k];
    const MeanStd ms = mean_std(col);
    if (!(ms.std > 0.0)) throw std::invalid_argument("data has zero spread along an axis");
    s.mean[k] = ms.mean;
    s.std[k] = ms.std;
  }
  return s;
}

Vec DataScaler::to_model(std::span<const double> x) const {
  Vec z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean[k]) / std[k];
  return z;
}

Vec DataScaler::to_data(std::span<const double> z) const {
  Vec x(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) x[k] = z[k] * std[k] + mean[k];
  return x;
}

GaussianMixture standardize_mixture(const GaussianMixture& gmm, const DataScaler& scaler) {
  std::vector<Vec> means = gmm.means(), vars = gmm.variances();
  for (std::size_t c = 0; c < means.size(); ++c) {
    means[c] = scaler.to_model(means[c]);
    for (std::size_t k = 0; k < vars[c].size(); ++k) vars[c][k] /= scaler.std[k] * scaler.std[k];
  }
  return GaussianMixture(std::move(means), std::move(vars), gmm.weights());
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

DenoiserNet::DenoiserNet(std::size_t dim, std::vector<int> hidden, RngStream& rng)
    : dim_(dim), hidden_(std::move(hidden)) {
  if (dim == 0) throw std::invalid_argument("network dimension must be positive");
  std::vector<int> widths;
  widths.push_back(static_cast<int>(dim) + 1);
  for (int w : hidden_) {
    if (w < 1) throw std::invalid_argument("hidden widths must be positive");
    widths.push_back(w);
  }
  widths.push_back(static_cast<int>(dim));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd W(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) W(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    Eigen::VectorXd b(out);
    for (int r = 0; r < out; ++r) b(r) = bound * (2.0 * rng.uniform() - 1.0);
    weights_.push_back(std::move(W));
    biases_.push_back(std::move(b));
  }
}

std::size_t DenoiserNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

namespace {

Eigen::MatrixXd stack_input(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& tf) {
  Eigen::MatrixXd a(x.rows() + 1, x.cols());
  a.topRows(x.rows()) = x;
  a.row(x.rows()) = tf;
  return a;
}

}  // namespace

Eigen::MatrixXd DenoiserNet::forward(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& tf) const {
  if (weights_.empty()) throw std::logic_error("network has no parameters");
  if (static_cast<std::size_t>(x.rows()) != dim_ || tf.size() != x.cols())
    throw std::invalid_argument("input shape does not match network");
  Eigen::MatrixXd a = stack_input(x, tf);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    a = l + 1 < weights_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Vec DenoiserNet::predict(std::span<const double> x, double tf) const {
  Eigen::MatrixXd in(x.size(), 1);
  for (std::size_t k = 0; k < x.size(); ++k) in(k, 0) = x[k];
  Eigen::RowVectorXd t(1);
  t(0) = tf;
  const Eigen::MatrixXd out = forward(in, t);
  return Vec(out.data(), out.data() + out.size());
}

double DenoiserNet::loss(const NoiseBatch& batch) const {
  const Eigen::MatrixXd r = forward(batch.x, batch.tf) - batch.eps;
  return r.squaredNorm() / static_cast<double>(r.size());
}

double DenoiserNet::loss_and_gradient(const NoiseBatch& batch, Eigen::VectorXd& grad) const {
  const std::size_t L = weights_.size();
  std::vector<Eigen::MatrixXd> acts;  // input of each layer
  std::vector<Eigen::MatrixXd> pre;   // pre-activations of hidden layers
  acts.push_back(stack_input(batch.x, batch.tf));
  Eigen::MatrixXd out;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = weights_[l] * acts.back();
    z.colwise() += biases_[l];
    if (l + 1 < L) {
      acts.push_back(z.cwiseMax(0.0));
      pre.push_back(std::move(z));
    } else {
      out = std::move(z);
    }
  }
  const Eigen::MatrixXd r = out - batch.eps;
  const double n = static_cast<double>(r.size());
  Eigen::MatrixXd g = (2.0 / n) * r;

  grad.resize(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offsets(L);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offsets[l] = off;
    off += weights_[l].size() + biases_[l].size();
  }
  for (std::size_t l = L; l-- > 0;) {
    const Eigen::MatrixXd gW = g * acts[l].transpose();
    const Eigen::VectorXd gb = g.rowwise().sum();
    Eigen::Index p = offsets[l];
    for (Eigen::Index r0 = 0; r0 < gW.rows(); ++r0)
      for (Eigen::Index c = 0; c < gW.cols(); ++c) grad(p++) = gW(r0, c);
    grad.segment(p, gb.size()) = gb;
    if (l > 0) {
      Eigen::MatrixXd back = weights_[l].transpose() * g;
      g = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return r.squaredNorm() / n;
}

Eigen::VectorXd DenoiserNet::parameters() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index i = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) p(i++) = weights_[l](r, c);
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) p(i++) = biases_[l](r);
  }
  return p;
}

void DenoiserNet::set_parameters(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != parameter_count())
    throw std::invalid_argument("parameter vector has the wrong length");
  Eigen::Index i = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = p(i++);
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l](r) = p(i++);
  }
}

nlohmann::json DenoiserNet::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Eigen::MatrixXd& W = weights_[l];
    Vec w;
    w.reserve(W.size());
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) w.push_back(W(r, c));
    layers.push_back({{"rows", W.rows()},
                      {"cols", W.cols()},
                      {"weight", w},
                      {"bias", Vec(biases_[l].data(), biases_[l].data() + biases_[l].size())}});
  }
  return {{"dim", dim_}, {"hidden", hidden_}, {"layers", layers}};
}

DenoiserNet DenoiserNet::from_json(const nlohmann::json& doc) {
  DenoiserNet net;
  net.dim_ = doc.at("dim").get<std::size_t>();
  net.hidden_ = doc.at("hidden").get<std::vector<int>>();
  const auto& layers = doc.at("layers");
  if (layers.size() != net.hidden_.size() + 1) throw std::invalid_argument("layer count does not match widths");
  Eigen::Index expect_in = static_cast<Eigen::Index>(net.dim_) + 1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const auto rows = layer.at("rows").get<Eigen::Index>();
    const auto cols = layer.at("cols").get<Eigen::Index>();
    const Eigen::Index expect_out =
        l < net.hidden_.size() ? net.hidden_[l] : static_cast<Eigen::Index>(net.dim_);
    if (rows != expect_out || cols != expect_in) throw std::invalid_argument("layer shape does not match widths");
    const Vec w = layer.at("weight").get<Vec>();
    const Vec b = layer.at("bias").get<Vec>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
      throw std::invalid_argument("layer parameter count mismatch");
    if (!all_finite(w) || !all_finite(b)) throw std::invalid_argument("non-finite parameters");
    Eigen::MatrixXd W(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) W(r, c) = w[r * cols + c];
    net.weights_.push_back(std::move(W));
    net.biases_.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
    expect_in = rows;
  }
  return net;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

Vec DiffusionModel::predict_noise(std::span<const double> z, int t) const {
  if (t < 0 || t >= schedule.T) throw std::invalid_argument("step out of range");
  return net.predict(z, static_cast<double>(t) / static_cast<double>(schedule.T));
}

nlohmann::json DiffusionModel::to_json() const {
  return {{"net", net.to_json()},
          {"schedule", {{"T", schedule.T}, {"beta_start", schedule.beta_start}, {"beta_end", schedule.beta_end}}},
          {"scaler", {{"mean", scaler.mean}, {"std", scaler.std}}}};
}

DiffusionModel DiffusionModel::from_json(const nlohmann::json& doc) {
  try {
    DiffusionModel m;
    m.net = DenoiserNet::from_json(doc.at("net"));
    const auto& s = doc.at("schedule");
    m.schedule = make_schedule(s.at("T").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>());
    m.scaler.mean = doc.at("scaler").at("mean").get<Vec>();
    m.scaler.std = doc.at("scaler").at("std").get<Vec>();
    if (m.scaler.mean.size() != m.net.dim() || m.scaler.std.size() != m.net.dim())
      throw std::invalid_argument("scaler dimension mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model JSON: ") + e.what());
  }
}

TrainResult train_denoiser(const std::vector<Vec>& data, const NoiseSchedule& schedule, const TrainConfig& config,
                           std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("training data is empty");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.lr > 0.0))
    throw std::invalid_argument("invalid training configuration");
  const std::size_t d = data.front().size();
  for (const Vec& x : data)
    if (x.size() != d) throw std::invalid_argument("training points differ in dimension");

  RngStream rng(seed);
  TrainResult res;
  DiffusionModel& model = res.model;
  model.schedule = schedule;
  model.scaler = config.standardize ? DataScaler::fit(data) : DataScaler::identity(d);
  model.net = DenoiserNet(d, config.hidden, rng);

  const Eigen::Index N = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd z(d, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Vec zi = model.scaler.to_model(data[i]);
    for (std::size_t k = 0; k < d; ++k) z(k, i) = zi[k];
  }

  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  Eigen::VectorXd params = model.net.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  double b1_pow = 1.0, b2_pow = 1.0;
  std::vector<Eigen::Index> perm(N);
  const double Tn = static_cast<double>(schedule.T);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (Eigen::Index i = 0; i < N; ++i) perm[i] = i;
    for (Eigen::Index i = N - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(i) + 1))]);
    Vec batch_losses;
    for (Eigen::Index start = 0; start < N; start += config.batch_size) {
      const Eigen::Index n = std::min<Eigen::Index>(config.batch_size, N - start);
      NoiseBatch batch{Eigen::MatrixXd(d, n), Eigen::RowVectorXd(n), Eigen::MatrixXd(d, n)};
      for (Eigen::Index j = 0; j < n; ++j) {
        const int t = static_cast<int>(rng.below(static_cast<std::size_t>(schedule.T)));
        const double keep = std::sqrt(schedule.alphas_bar[t]);
        const double noise = std::sqrt(1.0 - schedule.alphas_bar[t]);
        batch.tf(j) = static_cast<double>(t) / Tn;
        for (std::size_t k = 0; k < d; ++k) {
          const double e = rng.normal();
          batch.eps(k, j) = e;
          batch.x(k, j) = keep * z(k, perm[start + j]) + noise * e;
        }
      }
      const double loss = model.net.loss_and_gradient(batch, grad);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                             std::to_string(loss) + ")");
      batch_losses.push_back(loss);
      b1_pow *= b1;
      b2_pow *= b2;
      m1 = b1 * m1 + (1.0 - b1) * grad;
      m2 = b2 * m2 + (1.0 - b2) * grad.cwiseAbs2();
      const double step = config.lr / (1.0 - b1_pow);
      const double corr2 = std::sqrt(1.0 - b2_pow);
      params.array() -= step * m1.array() / (m2.array().sqrt() / corr2 + adam_eps);
      model.net.set_parameters(params);
    }
    res.loss_history.push_back(pairwise_mean(batch_losses));
  }
  return res;
}

Vec denoiser_score(const DiffusionModel& model, std::span<const double> x, int t) {
  const Vec z = model.scaler.to_model(x);
  const Vec eh = model.predict_noise(z, t);
  const double sd = std::sqrt(1.0 - model.schedule.alphas_bar.at(t));
  Vec s(eh.size());
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = -eh[k] / sd / model.scaler.std[k];
  return s;
}

ScoreOracle denoiser_oracle(const DiffusionModel& model, int t) {
  if (t < 0 || t >= model.schedule.T) throw std::invalid_argument("step out of range");
  return ScoreOracle(
      OracleKind::kDenoiserBacked, model.net.dim(),
      [model, t](std::span<const double> x) { return denoiser_score(model, x, t); }, model.schedule.alpha(t));
}

CleanPredictor clean_predictor(const DiffusionModel& model, int t) {
  if (t < 0 || t >= model.schedule.T) throw std::invalid_argument("step out of range");
  return [model, t](std::span<const double> z) {
    const Vec eh = model.predict_noise(z, t);
    const double ab = model.schedule.alphas_bar[t];
    const double sd = std::sqrt(1.0 - ab), keep = std::sqrt(ab);
    Vec x0(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) x0[k] = (z[k] - sd * eh[k]) / keep;
    return x0;
  };
}

std::vector<ReverseResult> reverse_diffuse_many(const DiffusionModel& model, std::size_t n, std::uint64_t seed,
                                                bool record) {
  std::vector<RngStream> streams;
  streams.reserve(n);
  for (std::size_t j = 0; j < n; ++j) streams.push_back(RngStream::substream(seed, j));
  const std::size_t d = model.net.dim();
  const NoiseSchedule& sch = model.schedule;
  Eigen::MatrixXd z(d, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < d; ++k) z(k, j) = streams[j].normal();

  std::vector<ReverseResult> out(n);
  auto snapshot = [&]() {
    for (std::size_t j = 0; j < n; ++j) {
      Vec zj(z.col(j).data(), z.col(j).data() + d);
      out[j].trajectory->points.push_back(model.scaler.to_data(zj));
    }
  };
  if (record) {
    for (auto& r : out) {
      r.trajectory.emplace();
      r.trajectory->points.reserve(sch.T + 1);
    }
    snapshot();
  }
  for (int t = sch.T - 1; t >= 0; --t) {
    const Eigen::RowVectorXd tf =
        Eigen::RowVectorXd::Constant(z.cols(), static_cast<double>(t) / static_cast<double>(sch.T));
    const Eigen::MatrixXd eh = model.net.forward(z, tf);
    const double beta = sch.betas[t];
    z = (z - beta / std::sqrt(1.0 - sch.alphas_bar[t]) * eh) / std::sqrt(1.0 - beta);
    if (t > 0) {
      const double sd = std::sqrt(beta);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < d; ++k) z(k, j) += sd * streams[j].normal();
    }
    if (!z.allFinite()) throw NumericalError("reverse diffusion produced a non-finite state at step " + std::to_string(t));
    if (record) snapshot();
  }
  for (std::size_t j = 0; j < n; ++j) {
    Vec zj(z.col(j).data(), z.col(j).data() + d);
    out[j].sample = model.scaler.to_data(zj);
  }
  return out;
}

ReverseResult reverse_diffuse(const DiffusionModel& model, RngStream& rng, bool record) {
  return std::move(reverse_diffuse_many(model, 1, rng.next_u64(), record).front());
}

// ---------------------------------------------------------------------------
// KDE and termination statistics
// ---------------------------------------------------------------------------

ScalarFieldGrid kde(const std::vector<Vec>& samples, double bandwidth, const GridSpec& spec) {
  if (samples.empty()) throw std::invalid_argument("kde needs at least one sample");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (spec.dim() != 2) throw std::invalid_argument("kde grids are 2-D");
  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  ScalarFieldGrid g = ScalarFieldGrid::sample(spec, [&](std::span<const double> x) {
    Vec terms(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double dx = x[0] - samples[i][0], dy = x[1] - samples[i][1];
      terms[i] = std::exp(-(dx * dx + dy * dy) * inv2h2);
    }
    return pairwise_sum(terms);
  });
  const double mass = g.integral();
  if (!(mass > 0.0)) throw NumericalError("kde grid carries no mass; it does not cover the samples");
  for (double& v : g.mutable_values()) v /= mass;
  return g;
}

std::size_t nearest_component(const GaussianMixture& gmm, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = gmm_mahalanobis(gmm, 0, x);
  for (std::size_t k = 1; k < gmm.size(); ++k) {
    const double dk = gmm_mahalanobis(gmm, k, x);
    if (dk < best_d) {
      best_d = dk;
      best = k;
    }
  }
  return best;
}

double geometric_null_probability(const GaussianMixture& gmm, double threshold,
                                  const std::vector<TrajectoryRecord>& trajectories) {
  const std::size_t d = gmm.dim();
  Vec lo(d, HUGE_VAL), hi(d, -HUGE_VAL);
  for (const auto& tr : trajectories)
    for (const Vec& p : tr.points)
      for (std::size_t k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
  double box = 1.0;
  for (std::size_t k = 0; k < d; ++k) box *= hi[k] - lo[k];
  if (!(box > 0.0)) return 1.0;
  // volume of the radius-threshold d-ball
  const double dd = static_cast<double>(d);
  const double unit = std::pow(std::numbers::pi, dd / 2.0) / std::tgamma(dd / 2.0 + 1.0);
  double covered = 0.0;
  for (std::size_t c = 0; c < gmm.size(); ++c) {
    double scale = 1.0;
    for (double v : gmm.variances()[c]) scale *= std::sqrt(v);
    covered += unit * std::pow(threshold, dd) * scale;
  }
  return std::clamp(covered / box, 0.0, 1.0);
}

namespace {

// Linear interpolation between order statistics (the common "type 7" rule).
double quantile_sorted(const Vec& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TerminationReport termination_analysis(const std::vector<TrajectoryRecord>& trajectories,
                                       const GaussianMixture& gmm, double threshold, int n_boot, double null_p,
                                       RngStream& rng) {
  if (trajectories.empty()) throw std::invalid_argument("no trajectories");
  if (threshold < 0.0) throw std::invalid_argument("threshold must be nonnegative");
  if (n_boot < 1) throw std::invalid_argument("n_boot must be positive");
  if (!(null_p >= 0.0 && null_p <= 1.0)) throw std::invalid_argument("null probability must lie in [0, 1]");
  const std::size_t n = trajectories.size();
  Vec hit(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pts = trajectories[i].points;
    if (pts.empty()) throw std::invalid_argument("empty trajectory");
    const Vec& end = pts.back();
    hit[i] = gmm_mahalanobis(gmm, nearest_component(gmm, end), end) <= threshold ? 1.0 : 0.0;
  }
  TerminationReport r;
  r.n_traj = static_cast<int>(n);
  r.n_boot = n_boot;
  r.threshold = threshold;
  r.null_p = null_p;
  r.fraction = pairwise_mean(hit);

  Vec boot(n_boot), resample(n);
  for (int b = 0; b < n_boot; ++b) {
    for (std::size_t i = 0; i < n; ++i) resample[i] = hit[rng.below(n)];
    boot[b] = pairwise_mean(resample);
  }
  std::sort(boot.begin(), boot.end());
  r.ci_low = std::min(quantile_sorted(boot, 0.025), r.fraction);
  r.ci_high = std::max(quantile_sorted(boot, 0.975), r.fraction);

  const auto hits = static_cast<unsigned>(std::lround(pairwise_sum(hit)));
  if (hits == 0 || null_p == 1.0) {
    r.p_value = 1.0;
  } else if (null_p == 0.0) {
    r.p_value = 0.0;
  } else {
    const boost::math::binomial_distribution<double> dist(static_cast<double>(n), null_p);
    r.p_value = boost::math::cdf(boost::math::complement(dist, static_cast<double>(hits - 1)));
  }
  return r;
}

nlohmann::json to_json(const TerminationReport& r) {
  return {{"fraction", r.fraction}, {"ci", {r.ci_low, r.ci_high}}, {"ci_low", r.ci_low},
          {"ci_high", r.ci_high},   {"p_value", r.p_value},       {"null_p", r.null_p},
          {"threshold", r.threshold}, {"n_traj", r.n_traj},      {"n_boot", r.n_boot}};
}

}  // namespace mbias
