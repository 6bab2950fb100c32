#include "mbias/estimators.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "mbias/errors.hpp"
#include "mbias/io.hpp"
#include "mbias/sphere.hpp"

namespace mbias {

namespace {

double regularized_norm(std::span<const double> v, double delta) {
  const double n = norm2(v) + delta;
  if (n == 0.0) throw NumericalError("zero score at a boundary sample with delta = 0");
  return n;
}

void check_center(const ScoreOracle& oracle, std::span<const double> center) {
  if (center.size() != oracle.dim()) throw std::invalid_argument("center dimension does not match oracle");
}

}  // namespace

BoundarySamples sample_boundary(const ScoreOracle& oracle, std::span<const double> center, double radius,
                                int s, RngStream& rng) {
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  if (s < 1) throw std::invalid_argument("sample count must be at least 1");
  check_center(oracle, center);
  const std::size_t d = center.size();
  const double step = radius / std::sqrt(static_cast<double>(d));
  BoundarySamples b;
  b.center.assign(center.begin(), center.end());
  b.radius = radius;
  b.directions.reserve(s);
  b.points.reserve(s);
  b.scores.reserve(s);
  for (int i = 0; i < s; ++i) {
    Vec u = sample_sphere(d, rng);
    Vec x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = center[k] + step * u[k];
    b.scores.push_back(oracle(x));
    b.points.push_back(std::move(x));
    b.directions.push_back(std::move(u));
  }
  return b;
}

double kappa_from_samples(const BoundarySamples& b, bool normalize_by_ball, double delta) {
  if (b.scores.empty()) throw std::invalid_argument("no boundary samples");
  const std::size_t d = b.center.size();
  if (!normalize_by_ball && d != 2) throw std::invalid_argument("unnormalized flux is defined for d = 2 only");
  const double root_d = std::sqrt(static_cast<double>(d));
  Vec terms(b.scores.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Vec& v = b.scores[i];
    // <v/(|v|+delta), n_out> with n_out = u / sqrt(d)
    terms[i] = dot(v, b.directions[i]) / (regularized_norm(v, delta) * root_d);
  }
  if (normalize_by_ball)
    return -pairwise_mean(terms) * static_cast<double>(d) / b.radius;
  const double ds = 2.0 * std::numbers::pi * b.radius / static_cast<double>(terms.size());
  return -pairwise_sum(terms) * ds;
}

double gradient_from_samples(const BoundarySamples& b) {
  if (b.scores.empty()) throw std::invalid_argument("no boundary samples");
  Vec norms(b.scores.size());
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i] = norm2(b.scores[i]);
  return pairwise_mean(norms);
}

double estimate_kappa(const ScoreOracle& oracle, std::span<const double> center, double radius, int s,
                      RngStream& rng, bool normalize_by_ball, double delta) {
  if (!normalize_by_ball && center.size() != 2)
    throw std::invalid_argument("unnormalized flux is defined for d = 2 only");
  return kappa_from_samples(sample_boundary(oracle, center, radius, s, rng), normalize_by_ball, delta);
}

double estimate_D(const ScoreOracle& oracle, std::span<const double> center, double radius, int s,
                  RngStream& rng) {
  return gradient_from_samples(sample_boundary(oracle, center, radius, s, rng));
}

double true_kappa_volume(const ScalarFieldGrid& field, std::span<const double> center, double radius,
                         double eps) {
  if (field.dim() != 2 || center.size() != 2) throw std::invalid_argument("true_kappa_volume needs a 2-D grid");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  const GridSpec& spec = field.spec();
  for (std::size_t a = 0; a < 2; ++a) {
    const double lo = spec.origin[a];
    const double hi = lo + static_cast<double>(spec.shape[a] - 1) * spec.spacing[a];
    if (center[a] - radius - spec.spacing[a] < lo || center[a] + radius + spec.spacing[a] > hi)
      throw std::invalid_argument("ball exits the grid");
  }
  const ScalarFieldGrid curv = grid_tv_curvature(field, eps);
  const double r2 = radius * radius;
  Vec inside;
  for (std::size_t i = 0; i < spec.shape[0]; ++i) {
    const double dx = field.coord(0, i) - center[0];
    if (dx * dx >= r2) continue;
    for (std::size_t j = 0; j < spec.shape[1]; ++j) {
      const double dy = field.coord(1, j) - center[1];
      if (dx * dx + dy * dy < r2) inside.push_back(curv.at(i, j));
    }
  }
  return pairwise_sum(inside) * spec.cell_volume() / (std::numbers::pi * r2);
}

namespace {

// x0 - x_hat0(x_tilde_i) for s fresh perturbations.
std::vector<Vec> bias_differences(const CleanPredictor& denoiser, std::span<const double> x0, double alpha,
                                  int s, RngStream& rng) {
  if (s < 1) throw std::invalid_argument("sample count must be at least 1");
  const std::size_t d = x0.size();
  std::vector<Vec> diffs;
  diffs.reserve(s);
  for (int i = 0; i < s; ++i) {
    const Vec u = sample_sphere(d, rng);
    const SphericalSample p = perturb(x0, alpha, u);
    const Vec xh = denoiser(p.x_tilde);
    if (xh.size() != d) throw std::invalid_argument("denoiser output dimension mismatch");
    Vec diff(d);
    for (std::size_t k = 0; k < d; ++k) diff[k] = x0[k] - xh[k];
    diffs.push_back(std::move(diff));
  }
  return diffs;
}

double mean_bias_dot(const std::vector<Vec>& diffs, std::span<const double> x0) {
  const std::size_t d = x0.size();
  Vec b0(d), column(diffs.size());
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < diffs.size(); ++i) column[i] = diffs[i][k];
    b0[k] = pairwise_mean(column);
  }
  return dot(b0, x0);
}

}  // namespace

double estimate_bias_term(const CleanPredictor& denoiser, std::span<const double> x0, double alpha, int s,
                          RngStream& rng) {
  return mean_bias_dot(bias_differences(denoiser, x0, alpha, s, rng), x0);
}

Vec bias_term_samples(const CleanPredictor& denoiser, std::span<const double> x0, double alpha, int s,
                      RngStream& rng) {
  const auto diffs = bias_differences(denoiser, x0, alpha, s, rng);
  Vec out(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) out[i] = dot(diffs[i], x0);
  return out;
}

CriterionConfig CriterionConfig::defaults(std::size_t d, std::uint64_t seed) {
  CriterionConfig c;
  c.alpha = alpha_from_strength(1.28, d);
  c.seed = seed;
  return c;
}

void CriterionConfig::validate() const {
  if (s < 1) throw std::invalid_argument("s must be at least 1");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
    throw std::invalid_argument("weights must be finite");
}

CriterionReport criterion_C(const ScoreOracle& h, std::span<const double> x0, const CriterionConfig& config) {
  config.validate();
  check_center(h, x0);
  const std::size_t d = x0.size();
  const double root_d = std::sqrt(static_cast<double>(d));
  const double alpha = config.alpha;
  const double radius = std::sqrt(alpha * static_cast<double>(d));
  const double keep = std::sqrt(1.0 - alpha);
  RngStream rng(config.seed);

  const int s = config.s;
  Vec crit(s), flux(s), mags(s);
  std::vector<Vec> recon;  // x0 - x_hat0 per sample
  if (alpha < 1.0) recon.reserve(s);
  for (int i = 0; i < s; ++i) {
    const Vec u = sample_sphere(d, rng);
    const SphericalSample p = perturb(x0, alpha, u);
    const Vec v = h(p.x_tilde);
    const double nv = norm2(v);
    const double denom = nv + config.delta;
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      acc += -v[k] / denom * (config.a * u[k] - config.b * v[k] + config.c * root_d * x0[k]);
    crit[i] = acc;
    flux[i] = dot(v, u) / (denom * root_d);
    mags[i] = nv;
    if (alpha < 1.0) {
      Vec diff(d);
      for (std::size_t k = 0; k < d; ++k) diff[k] = x0[k] - (p.x_tilde[k] + alpha * v[k]) / keep;
      recon.push_back(std::move(diff));
    }
  }

  CriterionReport r;
  r.s = s;
  r.radius = radius;
  r.seed = config.seed;
  r.c_raw = pairwise_mean(crit);
  const double wsum = config.a + config.b + config.c;
  r.c_scaled = wsum == 0.0 ? 1.0 : r.c_raw / (wsum * root_d) + 1.0;
  if (config.normalize_by_ball || d != 2) {
    r.kappa_hat = -pairwise_mean(flux) * static_cast<double>(d) / radius;
  } else {
    r.kappa_hat = -pairwise_sum(flux) * 2.0 * std::numbers::pi * radius / static_cast<double>(s);
  }
  r.d_hat = pairwise_mean(mags);
  r.bias_hat = alpha < 1.0 ? mean_bias_dot(recon, x0) : 0.0;
  if (!std::isfinite(r.c_raw) || !std::isfinite(r.kappa_hat) || !std::isfinite(r.d_hat) ||
      !std::isfinite(r.bias_hat))
    throw NumericalError("criterion produced a non-finite value");
  return r;
}

CurvatureGradientIdentity curvature_gradient_identity(const ScoreOracle& oracle, std::span<const double> x0,
                                                      double alpha, int s, RngStream& rng, double delta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  check_center(oracle, x0);
  const std::size_t d = x0.size();
  const double radius = std::sqrt(alpha * static_cast<double>(d));
  Vec center(d);
  for (std::size_t k = 0; k < d; ++k) center[k] = std::sqrt(1.0 - alpha) * x0[k];
  const BoundarySamples b = sample_boundary(oracle, center, radius, s, rng);

  Vec direct(b.scores.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    const Vec& v = b.scores[i];
    const Vec& u = b.directions[i];
    const double denom = regularized_norm(v, delta);
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += -v[k] / denom * (u[k] + v[k]);
    direct[i] = acc;
  }
  CurvatureGradientIdentity out;
  out.lhs = pairwise_mean(direct);
  out.kappa_hat = kappa_from_samples(b, true, delta);
  out.kappa_unit = out.kappa_hat * radius / std::sqrt(static_cast<double>(d));
  out.d_hat = gradient_from_samples(b);
  out.rhs = out.kappa_unit - out.d_hat;
  return out;
}

EstimatorStats error_analysis(const ScoreOracle& oracle, std::span<const double> center, double radius,
                              const std::vector<int>& sample_counts, int runs, std::uint64_t seed,
                              bool normalize_by_ball, double delta) {
  if (runs < 2) throw std::invalid_argument("error analysis needs at least 2 runs");
  if (sample_counts.empty()) throw std::invalid_argument("no sample counts");
  for (std::size_t k = 0; k < sample_counts.size(); ++k) {
    if (sample_counts[k] < 1) throw std::invalid_argument("sample counts must be positive");
    if (k && sample_counts[k] <= sample_counts[k - 1])
      throw std::invalid_argument("sample counts must be strictly ascending");
  }
  EstimatorStats st;
  st.sample_counts = sample_counts;
  Vec logc, logs;
  for (std::size_t k = 0; k < sample_counts.size(); ++k) {
    Vec est(runs);
    for (int r = 0; r < runs; ++r) {
      RngStream rng = RngStream::substream(seed, (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint64_t>(r));
      est[r] = estimate_kappa(oracle, center, radius, sample_counts[k], rng, normalize_by_ball, delta);
    }
    const MeanStd ms = mean_std(est);
    st.means.push_back(ms.mean);
    st.stds.push_back(ms.std);
    if (ms.std > 0.0) {
      logc.push_back(std::log(static_cast<double>(sample_counts[k])));
      logs.push_back(std::log(ms.std));
    }
  }
  if (logc.size() >= 2) {
    const LineFit fit = fit_line(logc, logs);
    st.loglog_slope = fit.slope;
    st.loglog_r2 = fit.r2;
  } else {
    st.loglog_slope = std::numeric_limits<double>::quiet_NaN();
    st.loglog_r2 = 0.0;
  }
  return st;
}

void write_reports_csv(std::ostream& os, const std::vector<std::string>& ids,
                       const std::vector<CriterionReport>& reports) {
  if (ids.size() != reports.size()) throw std::invalid_argument("ids and reports differ in length");
  os << "id,kappa_hat,d_hat,bias_hat,c_raw,c_scaled,s,radius,seed\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const CriterionReport& r = reports[i];
    os << ids[i] << ',' << format_double(r.kappa_hat) << ',' << format_double(r.d_hat) << ','
       << format_double(r.bias_hat) << ',' << format_double(r.c_raw) << ',' << format_double(r.c_scaled) << ','
       << r.s << ',' << format_double(r.radius) << ',' << r.seed << '\n';
  }
}

std::vector<CriterionReport> read_reports_csv(std::istream& is, std::vector<std::string>* ids) {
  const CsvTable t = read_csv(is);
  const std::size_t ci = t.column("id"), ck = t.column("kappa_hat"), cd = t.column("d_hat"),
                    cb = t.column("bias_hat"), cr = t.column("c_raw"), cs = t.column("c_scaled"),
                    cn = t.column("s"), crad = t.column("radius"), cseed = t.column("seed");
  std::vector<CriterionReport> out;
  for (const auto& row : t.rows) {
    CriterionReport r;
    r.kappa_hat = parse_double(row[ck]);
    r.d_hat = parse_double(row[cd]);
    r.bias_hat = parse_double(row[cb]);
    r.c_raw = parse_double(row[cr]);
    r.c_scaled = parse_double(row[cs]);
    r.s = static_cast<int>(parse_int(row[cn]));
    r.radius = parse_double(row[crad]);
    r.seed = std::stoull(row[cseed]);
    out.push_back(r);
    if (ids) ids->push_back(row[ci]);
  }
  return out;
}

void write_stats_csv(std::ostream& os, const EstimatorStats& st) {
  os << "count,mean,std\n";
  for (std::size_t k = 0; k < st.sample_counts.size(); ++k)
    os << st.sample_counts[k] << ',' << format_double(st.means[k]) << ',' << format_double(st.stds[k]) << '\n';
}

EstimatorStats read_stats_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  const std::size_t cc = t.column("count"), cm = t.column("mean"), cs = t.column("std");
  EstimatorStats st;
  for (const auto& row : t.rows) {
    st.sample_counts.push_back(static_cast<int>(parse_int(row[cc])));
    st.means.push_back(parse_double(row[cm]));
    st.stds.push_back(parse_double(row[cs]));
  }
  Vec logc, logs;
  for (std::size_t k = 0; k < st.stds.size(); ++k) {
    if (st.stds[k] > 0.0) {
      logc.push_back(std::log(static_cast<double>(st.sample_counts[k])));
      logs.push_back(std::log(st.stds[k]));
    }
  }
  if (logc.size() >= 2) {
    const LineFit fit = fit_line(logc, logs);
    st.loglog_slope = fit.slope;
    st.loglog_r2 = fit.r2;
  } else {
    st.loglog_slope = std::numeric_limits<double>::quiet_NaN();
  }
  return st;
}

}  // namespace mbias
