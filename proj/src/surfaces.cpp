#include "mbias/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mbias/errors.hpp"

namespace mbias {
namespace {

void require_dim(std::size_t expected, std::size_t got) {
  if (expected != got)
    throw std::invalid_argument("dimension mismatch: expected " + std::to_string(expected) +
                                ", got " + std::to_string(got));
}

// log(w_k N(x; mu_k, diag(var_k))) for every component.
Vec component_log_terms(const GaussianMixture& gmm, std::span<const double> x) {
  const std::size_t d = gmm.dim();
  Vec terms(gmm.size());
  for (std::size_t k = 0; k < gmm.size(); ++k) {
    const Vec& mu = gmm.means()[k];
    const Vec& var = gmm.variances()[k];
    double quad = 0.0, logdet = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = x[i] - mu[i];
      quad += diff * diff / var[i];
      logdet += std::log(2.0 * std::numbers::pi * var[i]);
    }
    terms[k] = std::log(gmm.weights()[k]) - 0.5 * (logdet + quad);
  }
  return terms;
}

double log_sum_exp(std::span<const double> terms) {
  const double peak = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

}  // namespace

// ---------------------------------------------------------------------------

GaussianMixture::GaussianMixture(std::vector<Vec> means, std::vector<Vec> variances, Vec weights)
    : means_(std::move(means)), variances_(std::move(variances)), weights_(std::move(weights)) {
  if (means_.empty()) throw std::invalid_argument("mixture needs at least one component");
  if (variances_.size() != means_.size() || weights_.size() != means_.size())
    throw std::invalid_argument("means, variances and weights must have equal length");
  const std::size_t d = means_.front().size();
  if (d == 0) throw std::invalid_argument("mixture dimension must be positive");
  double total = 0.0;
  for (std::size_t k = 0; k < means_.size(); ++k) {
    require_dim(d, means_[k].size());
    require_dim(d, variances_[k].size());
    for (double v : variances_[k])
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("variances must be positive");
    if (!all_finite(means_[k])) throw std::invalid_argument("means must be finite");
    if (!(weights_[k] > 0.0)) throw std::invalid_argument("weights must be positive");
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to 1");
}

GaussianMixture three_mode_mixture() {
  return GaussianMixture({{-5.0, -5.0}, {0.0, -5.0}, {-5.0, 0.0}},
                         {{0.1, 0.1}, {0.1, 0.1}, {0.1, 0.1}},
                         {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
}

double gmm_logpdf(const GaussianMixture& gmm, std::span<const double> x) {
  require_dim(gmm.dim(), x.size());
  const Vec terms = component_log_terms(gmm, x);
  return log_sum_exp(terms);
}

Vec gmm_score(const GaussianMixture& gmm, std::span<const double> x) {
  require_dim(gmm.dim(), x.size());
  const Vec terms = component_log_terms(gmm, x);
  const double norm = log_sum_exp(terms);
  Vec score(gmm.dim(), 0.0);
  for (std::size_t k = 0; k < gmm.size(); ++k) {
    const double resp = std::exp(terms[k] - norm);
    if (resp == 0.0) continue;
    for (std::size_t i = 0; i < score.size(); ++i)
      score[i] += resp * (gmm.means()[k][i] - x[i]) / gmm.variances()[k][i];
  }
  return score;
}

GaussianMixture gmm_perturbed(const GaussianMixture& gmm, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const double keep = std::sqrt(1.0 - alpha);
  std::vector<Vec> means = gmm.means();
  std::vector<Vec> vars = gmm.variances();
  for (std::size_t k = 0; k < gmm.size(); ++k) {
    for (std::size_t i = 0; i < gmm.dim(); ++i) {
      means[k][i] *= keep;
      vars[k][i] = (1.0 - alpha) * vars[k][i] + alpha;
    }
  }
  return GaussianMixture(std::move(means), std::move(vars), gmm.weights());
}

double gmm_mahalanobis(const GaussianMixture& gmm, std::size_t k, std::span<const double> x) {
  require_dim(gmm.dim(), x.size());
  double quad = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - gmm.means()[k][i];
    quad += diff * diff / gmm.variances()[k][i];
  }
  return std::sqrt(quad);
}

Vec gmm_sample(const GaussianMixture& gmm, RngStream& rng, std::size_t* component) {
  const double u = rng.uniform();
  std::size_t k = 0;
  double cum = gmm.weights()[0];
  while (u >= cum && k + 1 < gmm.size()) cum += gmm.weights()[++k];
  Vec x(gmm.dim());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = gmm.means()[k][i] + std::sqrt(gmm.variances()[k][i]) * rng.normal();
  if (component != nullptr) *component = k;
  return x;
}

// ---------------------------------------------------------------------------

std::size_t GridSpec::count() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (double h : spacing) v *= h;
  return v;
}

ScalarFieldGrid::ScalarFieldGrid(GridSpec spec, Vec values)
    : spec_(std::move(spec)), values_(std::move(values)) {
  if (spec_.shape.empty()) throw std::invalid_argument("grid needs at least one axis");
  if (spec_.origin.size() != spec_.dim() || spec_.spacing.size() != spec_.dim())
    throw std::invalid_argument("grid origin/spacing/shape disagree in dimension");
  for (std::size_t a = 0; a < spec_.dim(); ++a) {
    if (!(spec_.spacing[a] > 0.0)) throw std::invalid_argument("grid spacing must be positive");
    if (spec_.shape[a] == 0) throw std::invalid_argument("grid extents must be positive");
  }
  if (values_.size() != spec_.count())
    throw std::invalid_argument("grid value count does not match its shape");
  if (!all_finite(values_)) throw std::invalid_argument("grid values must be finite");
}

ScalarFieldGrid ScalarFieldGrid::sample(const GridSpec& spec,
                                        const std::function<double(std::span<const double>)>& f) {
  Vec values(spec.count());
  Vec x(spec.dim());
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t a = spec.dim(); a-- > 0;) {
      const std::size_t idx = rem % spec.shape[a];
      rem /= spec.shape[a];
      x[a] = spec.origin[a] + static_cast<double>(idx) * spec.spacing[a];
    }
    values[flat] = f(x);
  }
  return ScalarFieldGrid(spec, std::move(values));
}

namespace {

// Lower node index and fractional offset along one axis, clamped to the grid.
std::pair<std::size_t, double> locate(const GridSpec& spec, std::size_t axis, double x) {
  const std::size_t n = spec.shape[axis];
  if (n == 1) return {0, 0.0};
  double t = (x - spec.origin[axis]) / spec.spacing[axis];
  t = std::clamp(t, 0.0, static_cast<double>(n - 1));
  std::size_t i0 = static_cast<std::size_t>(std::floor(t));
  if (i0 >= n - 1) i0 = n - 2;
  return {i0, t - static_cast<double>(i0)};
}

}  // namespace

double ScalarFieldGrid::interpolate(std::span<const double> x) const {
  require_dim(dim(), x.size());
  if (dim() == 1) {
    const auto [i, f] = locate(spec_, 0, x[0]);
    const std::size_t i1 = spec_.shape[0] > 1 ? i + 1 : i;
    return (1.0 - f) * values_[i] + f * values_[i1];
  }
  if (dim() == 2) {
    const auto [i, fx] = locate(spec_, 0, x[0]);
    const auto [j, fy] = locate(spec_, 1, x[1]);
    const std::size_t i1 = spec_.shape[0] > 1 ? i + 1 : i;
    const std::size_t j1 = spec_.shape[1] > 1 ? j + 1 : j;
    return (1.0 - fx) * ((1.0 - fy) * at(i, j) + fy * at(i, j1)) +
           fx * ((1.0 - fy) * at(i1, j) + fy * at(i1, j1));
  }
  throw std::invalid_argument("interpolation supports 1-D and 2-D grids only");
}

double ScalarFieldGrid::integral() const { return pairwise_sum(values_) * spec_.cell_volume(); }

ScalarFieldGrid VectorFieldGrid::magnitude() const {
  Vec mag(components.front().values().size(), 0.0);
  for (const auto& c : components)
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] += c.values()[i] * c.values()[i];
  for (double& m : mag) m = std::sqrt(m);
  return ScalarFieldGrid(components.front().spec(), std::move(mag));
}

Vec VectorFieldGrid::interpolate(std::span<const double> x) const {
  Vec out(components.size());
  for (std::size_t a = 0; a < components.size(); ++a) out[a] = components[a].interpolate(x);
  return out;
}

namespace {

// Derivative along `axis` of a row-major grid with unit stride `stride`.
void differentiate(const Vec& in, Vec& out, std::size_t n, std::size_t stride, std::size_t lines,
                   std::size_t line_stride, std::size_t inner, double h) {
  for (std::size_t l = 0; l < lines; ++l) {
    for (std::size_t k = 0; k < inner; ++k) {
      const std::size_t base = l * line_stride + k;
      auto v = [&](std::size_t i) { return in[base + i * stride]; };
      out[base] = (v(1) - v(0)) / h;
      for (std::size_t i = 1; i + 1 < n; ++i)
        out[base + i * stride] = (v(i + 1) - v(i - 1)) / (2.0 * h);
      out[base + (n - 1) * stride] = (v(n - 1) - v(n - 2)) / h;
    }
  }
}

}  // namespace

VectorFieldGrid grid_gradient(const ScalarFieldGrid& grid) {
  const GridSpec& spec = grid.spec();
  if (spec.dim() > 2) throw std::invalid_argument("grid operators support d <= 2");
  for (std::size_t n : spec.shape)
    if (n < 3) throw std::invalid_argument("grid too small: need at least 3 nodes per axis");
  VectorFieldGrid out;
  if (spec.dim() == 1) {
    Vec d(grid.values().size());
    differentiate(grid.values(), d, spec.shape[0], 1, 1, 0, 1, spec.spacing[0]);
    out.components.emplace_back(spec, std::move(d));
    return out;
  }
  const std::size_t nx = spec.shape[0], ny = spec.shape[1];
  Vec dx(grid.values().size()), dy(grid.values().size());
  differentiate(grid.values(), dx, nx, ny, 1, 0, ny, spec.spacing[0]);
  differentiate(grid.values(), dy, ny, 1, nx, ny, 1, spec.spacing[1]);
  out.components.emplace_back(spec, std::move(dx));
  out.components.emplace_back(spec, std::move(dy));
  return out;
}

ScalarFieldGrid grid_tv_curvature(const ScalarFieldGrid& grid, double eps) {
  if (grid.dim() != 2) throw std::invalid_argument("TV curvature requires a 2-D grid");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const VectorFieldGrid g = grid_gradient(grid);
  const std::size_t n = grid.values().size();
  Vec nx(n), ny(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double gx = g.components[0].values()[i];
    const double gy = g.components[1].values()[i];
    const double denom = std::sqrt(gx * gx + gy * gy) + eps;
    nx[i] = gx / denom;
    ny[i] = gy / denom;
  }
  const VectorFieldGrid dnx = grid_gradient(ScalarFieldGrid(grid.spec(), std::move(nx)));
  const VectorFieldGrid dny = grid_gradient(ScalarFieldGrid(grid.spec(), std::move(ny)));
  Vec curv(n);
  for (std::size_t i = 0; i < n; ++i)
    curv[i] = -(dnx.components[0].values()[i] + dny.components[1].values()[i]);
  return ScalarFieldGrid(grid.spec(), std::move(curv));
}

std::vector<GridPeak> grid_local_maxima(const ScalarFieldGrid& grid) {
  if (grid.dim() != 2) throw std::invalid_argument("local maxima scan requires a 2-D grid");
  const std::size_t nx = grid.spec().shape[0], ny = grid.spec().shape[1];
  std::vector<GridPeak> peaks;
  for (std::size_t i = 1; i + 1 < nx; ++i) {
    for (std::size_t j = 1; j + 1 < ny; ++j) {
      const double v = grid.at(i, j);
      bool strict = true;
      for (int di = -1; di <= 1 && strict; ++di)
        for (int dj = -1; dj <= 1 && strict; ++dj)
          if ((di != 0 || dj != 0) && !(v > grid.at(i + di, j + dj))) strict = false;
      if (strict) peaks.push_back({i, j, v});
    }
  }
  return peaks;
}

// ---------------------------------------------------------------------------

PeaksFunction::PeaksFunction(double floor_threshold) : floor_(floor_threshold) {
  if (!(floor_threshold > 0.0)) throw std::invalid_argument("floor threshold must be positive");
  const GridSpec dom = canonical_domain();
  Vec raw_values(dom.count());
  for (std::size_t i = 0; i < dom.shape[0]; ++i)
    for (std::size_t j = 0; j < dom.shape[1]; ++j)
      raw_values[i * dom.shape[1] + j] =
          raw(dom.origin[0] + static_cast<double>(i) * dom.spacing[0],
              dom.origin[1] + static_cast<double>(j) * dom.spacing[1]);

  // The floored set depends on C, so iterate to the fixed point.
  Vec kept(raw_values.size());
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = std::max(raw_values[i], 0.0);
  double c = pairwise_sum(kept) * dom.cell_volume();
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < kept.size(); ++i)
      kept[i] = raw_values[i] / c >= floor_ ? raw_values[i] : 0.0;
    const double next = pairwise_sum(kept) * dom.cell_volume();
    const bool done = next == c;
    c = next;
    if (done) break;
  }
  normalization_ = c;
}

double PeaksFunction::raw(double x, double y) {
  return 3.0 * (1.0 - x) * (1.0 - x) * std::exp(-x * x - (y + 1.0) * (y + 1.0)) -
         10.0 * (x / 5.0 - x * x * x - std::pow(y, 5)) * std::exp(-x * x - y * y) -
         std::exp(-(x + 1.0) * (x + 1.0) - y * y) / 3.0;
}

GridSpec PeaksFunction::canonical_domain() { return GridSpec{{-3.0, -3.0}, {0.01, 0.01}, {601, 601}}; }

double PeaksFunction::operator()(double x, double y) const {
  const double v = raw(x, y) / normalization_;
  return v < floor_ ? 0.0 : v;
}

ScalarFieldGrid PeaksFunction::sample(const GridSpec& spec) const {
  if (spec.dim() != 2) throw std::invalid_argument("peaks function is 2-D");
  return ScalarFieldGrid::sample(spec, [this](std::span<const double> p) { return (*this)(p[0], p[1]); });
}

PointKind classify_by_hessian(const std::function<double(double, double)>& f, double x, double y,
                              double step) {
  const double h = step;
  const double f0 = f(x, y);
  const double fxx = (f(x + h, y) - 2.0 * f0 + f(x - h, y)) / (h * h);
  const double fyy = (f(x, y + h) - 2.0 * f0 + f(x, y - h)) / (h * h);
  const double fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
  const double det = fxx * fyy - fxy * fxy;
  if (det < 0.0) return PointKind::kSaddle;
  if (det > 0.0) return fxx < 0.0 ? PointKind::kLocalMax : PointKind::kLocalMin;
  return PointKind::kDegenerate;
}

// ---------------------------------------------------------------------------

ScalarFieldGrid ring_log_density(const GridSpec& spec, double ring_radius, double noise_std,
                                 std::size_t curve_points) {
  if (spec.dim() != 2) throw std::invalid_argument("ring density is 2-D");
  if (!(noise_std > 0.0) || curve_points == 0) throw std::invalid_argument("invalid ring parameters");
  std::vector<std::pair<double, double>> curve(curve_points);
  for (std::size_t k = 0; k < curve_points; ++k) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(curve_points);
    curve[k] = {ring_radius * std::cos(t), ring_radius * std::sin(t)};
  }
  const double var = noise_std * noise_std;
  const double log_norm = -std::log(2.0 * std::numbers::pi * var) - std::log(static_cast<double>(curve_points));
  Vec terms(curve_points);
  return ScalarFieldGrid::sample(spec, [&](std::span<const double> p) {
    for (std::size_t k = 0; k < curve_points; ++k) {
      const double dx = p[0] - curve[k].first, dy = p[1] - curve[k].second;
      terms[k] = -(dx * dx + dy * dy) / (2.0 * var);
    }
    return log_norm + log_sum_exp(terms);
  });
}

BumpySurface plant_bumps(const ScalarFieldGrid& base_log_density, int bump_count, double bump_scale,
                         double bump_width, std::uint64_t seed) {
  if (bump_count < 0) throw std::invalid_argument("bump_count must be non-negative");
  if (!(bump_scale > 0.0) || !(bump_width > 0.0))
    throw std::invalid_argument("bump_scale and bump_width must be positive");
  const GridSpec& spec = base_log_density.spec();
  if (spec.dim() != 2) throw std::invalid_argument("bumps are planted on 2-D grids");

  if (bump_count == 0) {
    return {base_log_density, ScalarFieldGrid(spec, Vec(spec.count(), 0.0)), {}};
  }

  const Vec& logp = base_log_density.values();
  const double peak_log = *std::max_element(logp.begin(), logp.end());
  Vec density(logp.size());
  for (std::size_t i = 0; i < logp.size(); ++i) density[i] = std::exp(logp[i] - peak_log);
  const double mass = pairwise_sum(density) * spec.cell_volume();
  for (double& p : density) p /= mass;
  const double peak = *std::max_element(density.begin(), density.end());

  std::vector<std::size_t> cells;
  Vec cumulative;
  double total = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (density[i] >= 0.5 * peak && density[i] > 0.0) {
      total += density[i];
      cells.push_back(i);
      cumulative.push_back(total);
    }
  }
  if (cells.empty()) throw std::invalid_argument("empty high-density region");

  RngStream rng(seed);
  const std::size_t ny = spec.shape[1];
  std::vector<Vec> centers;
  for (int b = 0; b < bump_count; ++b) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t pick = cells[std::min<std::size_t>(it - cumulative.begin(), cells.size() - 1)];
    centers.push_back({base_log_density.coord(0, pick / ny), base_log_density.coord(1, pick % ny)});
  }

  const double height = bump_scale * peak;
  const double inv2w2 = 1.0 / (2.0 * bump_width * bump_width);
  ScalarFieldGrid bumps = ScalarFieldGrid::sample(spec, [&](std::span<const double> p) {
    double acc = 0.0;
    for (const Vec& c : centers) {
      const double dx = p[0] - c[0], dy = p[1] - c[1];
      acc += height * std::exp(-(dx * dx + dy * dy) * inv2w2);
    }
    return acc;
  });

  Vec combined(density.size());
  for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = density[i] + bumps.values()[i];
  const double new_mass = pairwise_sum(combined) * spec.cell_volume();
  for (double& v : combined) v = std::log(v / new_mass);
  if (!all_finite(combined)) throw NumericalError("bumpy surface underflowed to zero density");
  return {ScalarFieldGrid(spec, std::move(combined)), std::move(bumps), std::move(centers)};
}

ScalarFieldGrid bumpy_surface(const ScalarFieldGrid& base_log_density, int bump_count,
                              double bump_scale, double bump_width, std::uint64_t seed) {
  return plant_bumps(base_log_density, bump_count, bump_scale, bump_width, seed).log_density;
}

// ---------------------------------------------------------------------------

ScoreOracle::ScoreOracle(OracleKind kind, std::size_t dim, Fn fn, double alpha)
    : kind_(kind), dim_(dim), fn_(std::move(fn)), alpha_(alpha) {
  if (dim_ == 0 || !fn_) throw std::invalid_argument("score oracle needs a dimension and a backing");
}

ScoreOracle ScoreOracle::analytic(const GaussianMixture& gmm, double alpha) {
  auto mixture = std::make_shared<const GaussianMixture>(alpha == 0.0 ? gmm : gmm_perturbed(gmm, alpha));
  return ScoreOracle(OracleKind::kAnalyticGmm, gmm.dim(),
                     [mixture](std::span<const double> x) { return gmm_score(*mixture, x); }, alpha);
}

ScoreOracle ScoreOracle::from_grid(const ScalarFieldGrid& field) {
  auto gradient = std::make_shared<const VectorFieldGrid>(grid_gradient(field));
  return ScoreOracle(OracleKind::kGridInterpolated, field.dim(),
                     [gradient](std::span<const double> x) { return gradient->interpolate(x); });
}

Vec ScoreOracle::operator()(std::span<const double> x) const {
  require_dim(dim_, x.size());
  Vec s = fn_(x);
  if (s.size() != dim_ || !all_finite(s)) throw NumericalError("score oracle returned a non-finite vector");
  return s;
}

}  // namespace mbias
