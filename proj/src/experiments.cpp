#include "mbias/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mbias/errors.hpp"
#include "mbias/io.hpp"
#include "mbias/sphere.hpp"

namespace mbias {

namespace fs = std::filesystem;

std::uint64_t RunContext::require_seed(const char* subcommand) const {
  if (!seed) throw ConfigError(std::string(subcommand) + " is stochastic and needs --seed");
  return *seed;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  return RngStream::substream(master, tag).next_u64();
}

namespace {

const char* kind_name(PointKind k) {
  switch (k) {
    case PointKind::kLocalMax: return "local_max";
    case PointKind::kLocalMin: return "local_min";
    case PointKind::kSaddle: return "saddle";
    case PointKind::kDegenerate: return "degenerate";
  }
  return "degenerate";
}

fs::path emit(const RunContext& ctx, const std::string& name, const std::string& contents,
              std::vector<fs::path>& written) {
  const fs::path p = ctx.out / name;
  write_text_file(p, contents);
  written.push_back(p);
  return p;
}

fs::path emit_json(const RunContext& ctx, const std::string& name, const nlohmann::json& doc,
                   std::vector<fs::path>& written) {
  return emit(ctx, name, doc.dump(2) + "\n", written);
}

std::string grid_text(const ScalarFieldGrid& g) {
  std::ostringstream os;
  write_grid_csv(os, g);
  return os.str();
}

void warn(const RunContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << "warning: " << msg << '\n';
}

void note(const RunContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << msg << '\n';
}

int positive_int(const ParamSet& p, const char* key) {
  const long long v = p.integer(key);
  if (v < 1 || v > std::numeric_limits<int>::max()) throw ConfigError(std::string(key) + " must be a positive integer");
  return static_cast<int>(v);
}

double positive_real(const ParamSet& p, const char* key) {
  const double v = p.real(key);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be positive");
  return v;
}

GridSpec square_grid(double lo, double hi, double spacing) {
  if (!(hi > lo) || !(spacing > 0.0)) throw ConfigError("grid bounds must satisfy min < max and spacing > 0");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / spacing)) + 1;
  if (n < 3) throw ConfigError("grid needs at least 3 nodes per axis");
  return GridSpec{{lo, lo}, {spacing, spacing}, {n, n}};
}

Direction parse_direction(const std::string& s) {
  if (s == "greater") return Direction::kGreaterIsGenerated;
  if (s == "less") return Direction::kLessIsGenerated;
  throw ConfigError("direction must be 'greater' or 'less', got '" + s + "'");
}

GaussianMixture load_mixture(const ParamSet& p) {
  const std::string& path = p.str("mixture");
  if (path.empty()) return three_mode_mixture();
  try {
    return gmm_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("mixture JSON: " + std::string(e.what()));
  }
}

// type-7 quantile of unsorted values
double quantile(Vec v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Curvature study
// ---------------------------------------------------------------------------

std::vector<InterestPoint> peaks_interest_points(const PeaksFunction& peaks, int count) {
  if (count != 2 && count != 5) throw std::invalid_argument("interest point sets have 2 or 5 points");
  static const double coords[5][2] = {{1.2, 0.8}, {-0.475, -0.7}, {-0.009, 1.581}, {1.286, -0.005}, {-0.266, 0.467}};
  const auto f = [&peaks](double x, double y) { return peaks(x, y); };
  std::vector<InterestPoint> out;
  for (int k = 0; k < count; ++k)
    out.push_back(InterestPoint{"p" + std::to_string(k + 1), coords[k][0], coords[k][1],
                                classify_by_hessian(f, coords[k][0], coords[k][1])});
  return out;
}

std::vector<KappaPointResult> kappa_study(const PeaksFunction& peaks, const std::vector<InterestPoint>& points,
                                          double radius, const std::vector<int>& counts, int runs,
                                          std::uint64_t seed, bool normalize_by_ball, double delta) {
  if (runs < 1) throw std::invalid_argument("runs must be positive");
  const ScalarFieldGrid grid = peaks.sample(PeaksFunction::canonical_domain());
  const ScoreOracle oracle = ScoreOracle::from_grid(grid);
  std::vector<KappaPointResult> out;
  for (std::size_t k = 0; k < points.size(); ++k) {
    KappaPointResult r;
    r.point = points[k];
    const Vec c{points[k].x, points[k].y};
    r.truth = true_kappa_volume(grid, c, radius);
    if (!normalize_by_ball) r.truth *= std::numbers::pi * radius * radius;
    const std::uint64_t point_seed = derive_seed(seed, k);
    if (runs >= 2) {
      r.stats = error_analysis(oracle, c, radius, counts, runs, point_seed, normalize_by_ball, delta);
    } else {
      // a single run has no spread: means only, stds and slope undefined
      r.stats.sample_counts = counts;
      for (std::size_t j = 0; j < counts.size(); ++j) {
        RngStream rng = RngStream::substream(point_seed, static_cast<std::uint64_t>(j) << 32);
        r.stats.means.push_back(estimate_kappa(oracle, c, radius, counts[j], rng, normalize_by_ball, delta));
        r.stats.stds.push_back(std::numeric_limits<double>::quiet_NaN());
      }
      r.stats.loglog_slope = std::numeric_limits<double>::quiet_NaN();
      r.stats.loglog_r2 = 0.0;
    }
    out.push_back(std::move(r));
  }
  return out;
}

ParamSet kappa_params() {
  ParamSet p;
  p.declare("radius", "0.5", "radius of each circle")
      .declare("counts", "2,4,8,16,32,64,128,256", "boundary sample counts, ascending")
      .declare("runs", "100", "independent runs per count")
      .declare("points", "5", "interest points: 2 (reference pair) or 5 (extended set)")
      .declare("delta", "1e-8", "regularizer in |v| + delta")
      .declare("normalize", "true", "divide the flux by the ball volume");
  return p;
}

std::vector<fs::path> run_kappa_study(const ParamSet& params, const RunContext& ctx) {
  const std::uint64_t seed = ctx.require_seed("kappa");
  const double radius = positive_real(params, "radius");
  const std::vector<int> counts = params.int_list("counts");
  if (counts.empty()) throw ConfigError("counts must not be empty");
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] < 1 || (k && counts[k] <= counts[k - 1]))
      throw ConfigError("counts must be positive and strictly ascending");
  const int runs = positive_int(params, "runs");
  const long long npts = params.integer("points");
  if (npts != 2 && npts != 5) throw ConfigError("points must be 2 or 5");
  const double delta = params.real("delta");
  if (!(delta >= 0.0)) throw ConfigError("delta must be nonnegative");

  const PeaksFunction peaks;
  const auto points = peaks_interest_points(peaks, static_cast<int>(npts));
  std::vector<KappaPointResult> res;
  try {
    res = kappa_study(peaks, points, radius, counts, runs, seed, params.flag("normalize"), delta);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (runs == 1) warn(ctx, "runs = 1: std column left empty and regression omitted");

  std::vector<fs::path> written;
  std::ostringstream truth, stats, reg;
  truth << "point_id,x,y,kind,radius,truth\n";
  stats << "point_id,count,mean,std\n";
  reg << "point_id,slope,r2\n";
  for (const auto& r : res) {
    truth << r.point.id << ',' << format_double(r.point.x) << ',' << format_double(r.point.y) << ','
          << kind_name(r.point.kind) << ',' << format_double(radius) << ',' << format_double(r.truth) << '\n';
    for (std::size_t j = 0; j < r.stats.sample_counts.size(); ++j) {
      stats << r.point.id << ',' << r.stats.sample_counts[j] << ',' << format_double(r.stats.means[j]) << ',';
      if (runs >= 2) stats << format_double(r.stats.stds[j]);
      stats << '\n';
    }
    if (runs >= 2) {
      reg << r.point.id << ',';
      if (std::isfinite(r.stats.loglog_slope)) reg << format_double(r.stats.loglog_slope);
      reg << ',' << format_double(r.stats.loglog_r2) << '\n';
    }
  }
  emit(ctx, "kappa_truth.csv", truth.str(), written);
  emit(ctx, "kappa_stats.csv", stats.str(), written);
  if (runs >= 2) emit(ctx, "kappa_regression.csv", reg.str(), written);
  return written;
}

// ---------------------------------------------------------------------------
// Toy diffusion study
// ---------------------------------------------------------------------------

ScoreFieldComparison compare_score_fields(const DiffusionModel& model, const GaussianMixture& gmm, int t,
                                          const GridSpec& grid, RngStream& rng) {
  if (grid.dim() != 2 || gmm.dim() != 2) throw std::invalid_argument("score fields are compared in 2-D");
  ScoreFieldComparison out;
  out.t = t;
  out.alpha = model.schedule.alpha(t);
  const GaussianMixture truth = gmm_perturbed(standardize_mixture(gmm, model.scaler), out.alpha);
  auto unit = [](Vec v) {
    const double n = norm2(v);
    if (n > 0.0)
      for (double& x : v) x /= n;
    return v;
  };
  Vec random_cos;
  for (std::size_t i = 0; i < grid.shape[0]; ++i) {
    for (std::size_t j = 0; j < grid.shape[1]; ++j) {
      const Vec p{grid.origin[0] + static_cast<double>(i) * grid.spacing[0],
                  grid.origin[1] + static_cast<double>(j) * grid.spacing[1]};
      const Vec learned = unit(denoiser_score(model, p, t));
      Vec analytic = gmm_score(truth, model.scaler.to_model(p));
      for (std::size_t k = 0; k < 2; ++k) analytic[k] /= model.scaler.std[k];
      analytic = unit(analytic);
      const Vec random = unit(sample_sphere(2, rng));
      out.cosine.push_back(dot(learned, analytic));
      random_cos.push_back(dot(random, analytic));
      out.points.push_back(p);
      out.learned.push_back(learned);
      out.analytic.push_back(analytic);
    }
  }
  out.mean_cosine = pairwise_mean(out.cosine);
  out.random_mean_cosine = pairwise_mean(random_cos);
  return out;
}

GmmStudyResult gmm_study(const GaussianMixture& gmm, const GmmStudyConfig& config, std::uint64_t seed) {
  if (config.points < 2 || config.samples < 1 || config.trajectories < 1)
    throw std::invalid_argument("points, samples and trajectories must be positive");
  GmmStudyResult r{.data = {},
                   .train = {},
                   .samples = {},
                   .sample_component = {},
                   .mode_shares = {},
                   .trajectories = {},
                   .termination = {},
                   .kde_grid = ScalarFieldGrid(GridSpec{{0.0}, {1.0}, {1}}, Vec{0.0}),
                   .kde_peaks = {},
                   .score_field = {}};
  RngStream data_rng(derive_seed(seed, 1));
  for (int i = 0; i < config.points; ++i) r.data.push_back(gmm_sample(gmm, data_rng));

  const NoiseSchedule schedule = make_schedule(config.T, config.beta_start, config.beta_end);
  r.train = train_denoiser(r.data, schedule, config.train, derive_seed(seed, 2));
  const DiffusionModel& model = r.train.model;

  r.mode_shares.assign(gmm.size(), 0.0);
  for (auto& s : reverse_diffuse_many(model, config.samples, derive_seed(seed, 3), false)) {
    const std::size_t k = nearest_component(gmm, s.sample);
    r.sample_component.push_back(k);
    r.mode_shares[k] += 1.0;
    r.samples.push_back(std::move(s.sample));
  }
  for (double& s : r.mode_shares) s /= static_cast<double>(config.samples);

  for (auto& tr : reverse_diffuse_many(model, config.trajectories, derive_seed(seed, 4), true))
    r.trajectories.push_back(std::move(*tr.trajectory));
  const double null_p = geometric_null_probability(gmm, config.threshold, r.trajectories);
  RngStream boot_rng(derive_seed(seed, 5));
  r.termination = termination_analysis(r.trajectories, gmm, config.threshold, config.n_boot, null_p, boot_rng);

  r.kde_grid = kde(r.samples, config.bandwidth, config.kde_grid);
  r.kde_peaks = grid_local_maxima(r.kde_grid);
  std::stable_sort(r.kde_peaks.begin(), r.kde_peaks.end(),
                   [](const GridPeak& a, const GridPeak& b) { return a.value > b.value; });

  RngStream field_rng(derive_seed(seed, 6));
  r.score_field = compare_score_fields(model, gmm, config.score_t, config.score_grid, field_rng);
  return r;
}

ParamSet gmm_params() {
  ParamSet p;
  p.declare("epochs", "1000", "training epochs")
      .declare("points", "1000", "training points drawn from the mixture")
      .declare("T", "100", "diffusion steps")
      .declare("beta_start", "1e-4", "first beta")
      .declare("beta_end", "0.02", "last beta")
      .declare("lr", "1e-3", "Adam learning rate")
      .declare("batch", "100", "minibatch size")
      .declare("hidden", "64,64", "hidden layer widths")
      .declare("samples", "1000", "generated samples")
      .declare("trajectories", "100", "reverse trajectories for the termination test")
      .declare("record", "5", "trajectories written to trajectories.csv")
      .declare("threshold", "2.45", "Mahalanobis termination threshold")
      .declare("n_boot", "1000", "bootstrap resamples")
      .declare("bandwidth", "0.3", "KDE bandwidth")
      .declare("kde_min", "-8", "KDE grid lower bound (both axes)")
      .declare("kde_max", "3", "KDE grid upper bound (both axes)")
      .declare("kde_spacing", "0.05", "KDE grid spacing")
      .declare("score_t", "10", "diffusion step of the score-field comparison")
      .declare("mixture", "", "mixture JSON; empty means the built-in three-mode mixture");
  return p;
}

std::vector<fs::path> run_gmm_study(const ParamSet& params, const RunContext& ctx) {
  const std::uint64_t seed = ctx.require_seed("gmm");
  const GaussianMixture gmm = load_mixture(params);
  if (gmm.dim() != 2) throw ConfigError("the gmm study runs on 2-D mixtures");
  GmmStudyConfig cfg;
  cfg.T = positive_int(params, "T");
  cfg.beta_start = positive_real(params, "beta_start");
  cfg.beta_end = positive_real(params, "beta_end");
  cfg.train.epochs = positive_int(params, "epochs");
  cfg.train.lr = positive_real(params, "lr");
  cfg.train.batch_size = positive_int(params, "batch");
  cfg.train.hidden = params.int_list("hidden");
  cfg.points = positive_int(params, "points");
  cfg.samples = positive_int(params, "samples");
  cfg.trajectories = positive_int(params, "trajectories");
  const long long record = params.integer("record");
  if (record < 0) throw ConfigError("record must be nonnegative");
  cfg.threshold = params.real("threshold");
  if (!(cfg.threshold >= 0.0)) throw ConfigError("threshold must be nonnegative");
  cfg.n_boot = positive_int(params, "n_boot");
  cfg.bandwidth = positive_real(params, "bandwidth");
  cfg.kde_grid = square_grid(params.real("kde_min"), params.real("kde_max"), params.real("kde_spacing"));
  cfg.score_t = static_cast<int>(params.integer("score_t"));
  if (cfg.score_t < 0 || cfg.score_t >= cfg.T) throw ConfigError("score_t must lie in [0, T)");

  const GmmStudyResult r = [&] {
    try {
      return gmm_study(gmm, cfg, seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();

  std::vector<fs::path> written;
  std::ostringstream loss, samples, traj, peaks, field;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < r.train.loss_history.size(); ++e)
    loss << e << ',' << format_double(r.train.loss_history[e]) << '\n';
  samples << "id,x0,x1,component\n";
  for (std::size_t i = 0; i < r.samples.size(); ++i)
    samples << i << ',' << format_double(r.samples[i][0]) << ',' << format_double(r.samples[i][1]) << ','
            << r.sample_component[i] << '\n';
  traj << "traj_id,step,x0,x1\n";
  const std::size_t nrec = std::min<std::size_t>(static_cast<std::size_t>(record), r.trajectories.size());
  for (std::size_t i = 0; i < nrec; ++i)
    for (std::size_t s = 0; s < r.trajectories[i].points.size(); ++s)
      traj << i << ',' << s << ',' << format_double(r.trajectories[i].points[s][0]) << ','
           << format_double(r.trajectories[i].points[s][1]) << '\n';
  peaks << "rank,x0,x1,density\n";
  for (std::size_t k = 0; k < r.kde_peaks.size(); ++k)
    peaks << k << ',' << format_double(r.kde_grid.coord(0, r.kde_peaks[k].i)) << ','
          << format_double(r.kde_grid.coord(1, r.kde_peaks[k].j)) << ',' << format_double(r.kde_peaks[k].value)
          << '\n';
  field << "x0,x1,learned0,learned1,true0,true1,cosine\n";
  const ScoreFieldComparison& sf = r.score_field;
  for (std::size_t i = 0; i < sf.points.size(); ++i)
    field << format_double(sf.points[i][0]) << ',' << format_double(sf.points[i][1]) << ','
          << format_double(sf.learned[i][0]) << ',' << format_double(sf.learned[i][1]) << ','
          << format_double(sf.analytic[i][0]) << ',' << format_double(sf.analytic[i][1]) << ','
          << format_double(sf.cosine[i]) << '\n';

  emit(ctx, "loss.csv", loss.str(), written);
  emit_json(ctx, "model.json", r.train.model.to_json(), written);
  emit(ctx, "samples.csv", samples.str(), written);
  emit(ctx, "trajectories.csv", traj.str(), written);
  emit(ctx, "kde.csv", grid_text(r.kde_grid), written);
  emit(ctx, "kde_peaks.csv", peaks.str(), written);
  emit_json(ctx, "termination.json", to_json(r.termination), written);
  emit(ctx, "score_field.csv", field.str(), written);
  emit_json(ctx, "summary.json",
            {{"final_loss", r.train.loss_history.back()},
             {"mode_shares", r.mode_shares},
             {"score_t", sf.t},
             {"score_alpha", sf.alpha},
             {"mean_cosine", sf.mean_cosine},
             {"random_mean_cosine", sf.random_mean_cosine}},
            written);
  note(ctx, "termination fraction " + format_double(r.termination.fraction));
  return written;
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

LabeledPoints read_labeled_points(std::istream& is) {
  const CsvTable t = read_csv(is);
  const std::size_t ci = t.column("id"), cl = t.column("label");
  std::vector<std::size_t> coords;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != ci && c != cl) coords.push_back(c);
  if (coords.empty()) throw ConfigError("CSV: no coordinate columns");
  LabeledPoints out;
  for (const auto& row : t.rows) {
    const long long label = parse_int(row[cl]);
    if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1, got '" + row[cl] + "'");
    Vec p;
    for (std::size_t c : coords) p.push_back(parse_double(row[c]));
    if (!all_finite(p)) throw ConfigError("CSV: non-finite coordinate in row '" + row[ci] + "'");
    out.ids.push_back(row[ci]);
    out.labels.push_back(static_cast<int>(label));
    out.points.push_back(std::move(p));
  }
  if (out.points.empty()) throw ConfigError("CSV: no rows");
  return out;
}

void write_labeled_points(std::ostream& os, const LabeledPoints& pts) {
  const std::size_t d = pts.points.empty() ? 0 : pts.points.front().size();
  os << "id,label";
  for (std::size_t k = 0; k < d; ++k) os << ",x" << k;
  os << '\n';
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    os << pts.ids[i] << ',' << pts.labels[i];
    for (double v : pts.points[i]) os << ',' << format_double(v);
    os << '\n';
  }
}

namespace {

LabeledPoints load_points(const std::string& path) {
  if (path.empty()) throw ConfigError("input is required");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_labeled_points(in);
}

nlohmann::json metrics_document(std::span<const double> scores, std::span<const int> labels, double k,
                                Direction dir) {
  Vec reals;
  int pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) reals.push_back(scores[i]);
    pos += labels[i];
  }
  if (reals.size() < 2) throw ConfigError("calibration needs at least two real (label 0) rows");
  if (pos == 0) throw ConfigError("metrics need at least one generated (label 1) row");
  const CalibrationThreshold thr = calibrate_threshold(reals, k, dir);
  nlohmann::json doc = to_json(evaluate_detection(scores, labels, thr));
  doc["calibration"] = to_json(thr);
  nlohmann::json sens = nlohmann::json::array();
  for (double kk : {1.0, 2.0, 3.0}) {
    const CalibrationThreshold t = calibrate_threshold(reals, kk, dir);
    sens.push_back({{"k", kk}, {"threshold", t.threshold}, {"accuracy", accuracy(scores, labels, t)}});
  }
  doc["k_sensitivity"] = std::move(sens);
  return doc;
}

}  // namespace

ParamSet detect_params() {
  ParamSet p;
  p.declare("input", "", "CSV of points: id,label,x0,...")
      .declare("oracle", "analytic", "score source: analytic (mixture) or model (trained denoiser)")
      .declare("mixture", "", "mixture JSON for the analytic oracle; empty means the three-mode mixture")
      .declare("model", "", "model JSON for the model oracle")
      .declare("s", "64", "perturbations per point")
      .declare("strength", "1.28", "perturbation strength alpha * sqrt(d)")
      .declare("alpha", "0", "explicit alpha in (0, 1]; 0 derives it from strength")
      .declare("a", "1", "weight of the curvature term")
      .declare("b", "1", "weight of the gradient term")
      .declare("c", "1", "weight of the bias term")
      .declare("delta", "1e-8", "regularizer in |h| + delta")
      .declare("k", "2", "calibration multiplier")
      .declare("direction", "greater", "greater or less: which side of the threshold is generated");
  return p;
}

std::vector<fs::path> run_detect(const ParamSet& params, const RunContext& ctx) {
  const std::uint64_t seed = ctx.require_seed("detect");
  const LabeledPoints pts = load_points(params.str("input"));
  const std::size_t d = pts.points.front().size();
  for (const Vec& p : pts.points)
    if (p.size() != d) throw ConfigError("points differ in dimension");

  CriterionConfig base = CriterionConfig::defaults(d);
  base.s = positive_int(params, "s");
  const double alpha = params.real("alpha");
  base.alpha = alpha > 0.0 ? alpha : alpha_from_strength(positive_real(params, "strength"), d);
  if (!(base.alpha > 0.0 && base.alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  base.a = params.real("a");
  base.b = params.real("b");
  base.c = params.real("c");
  base.delta = positive_real(params, "delta");
  const double k = params.real("k");
  const Direction dir = parse_direction(params.str("direction"));

  std::optional<ScoreOracle> oracle;
  const std::string& kind = params.str("oracle");
  if (kind == "analytic") {
    const GaussianMixture gmm = load_mixture(params);
    if (gmm.dim() != d) throw ConfigError("mixture dimension does not match the points");
    oracle.emplace(ScoreOracle::analytic(gmm, base.alpha));
  } else if (kind == "model") {
    if (params.str("model").empty()) throw ConfigError("oracle=model needs model=<path>");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(params.str("model")));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("model JSON: " + std::string(e.what()));
    }
    const DiffusionModel model = DiffusionModel::from_json(doc);
    if (model.net.dim() != d) throw ConfigError("model dimension does not match the points");
    int best = 0;
    for (int t = 1; t < model.schedule.T; ++t)
      if (std::abs(model.schedule.alpha(t) - base.alpha) < std::abs(model.schedule.alpha(best) - base.alpha)) best = t;
    note(ctx, "model oracle at step " + std::to_string(best) + " (alpha " + format_double(model.schedule.alpha(best)) + ")");
    oracle.emplace(denoiser_oracle(model, best));
  } else {
    throw ConfigError("oracle must be 'analytic' or 'model', got '" + kind + "'");
  }

  std::vector<CriterionReport> reports;
  Vec scores;
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    CriterionConfig cfg = base;
    cfg.seed = derive_seed(seed, i);
    reports.push_back(criterion_C(*oracle, pts.points[i], cfg));
    scores.push_back(reports.back().c_scaled);
  }

  std::vector<fs::path> written;
  std::ostringstream crit, sc;
  write_reports_csv(crit, pts.ids, reports);
  write_score_table(sc, ScoreTable{pts.ids, scores, pts.labels});
  emit(ctx, "criteria.csv", crit.str(), written);
  emit(ctx, "scores.csv", sc.str(), written);
  nlohmann::json metrics = metrics_document(scores, pts.labels, k, dir);
  emit_json(ctx, "calibration.json", metrics["calibration"], written);
  metrics["score"] = "c_scaled";
  metrics["s"] = base.s;
  metrics["alpha"] = base.alpha;
  emit_json(ctx, "metrics.json", metrics, written);
  return written;
}

ParamSet metrics_params() {
  ParamSet p;
  p.declare("input", "", "CSV of scores: id,score,label")
      .declare("k", "2", "calibration multiplier")
      .declare("direction", "greater", "greater or less: which side of the threshold is generated");
  return p;
}

std::vector<fs::path> run_metrics(const ParamSet& params, const RunContext& ctx) {
  const std::string& path = params.str("input");
  if (path.empty()) throw ConfigError("input is required");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  const ScoreTable table = read_score_table(in);
  std::vector<fs::path> written;
  emit_json(ctx, "metrics.json",
            metrics_document(table.scores, table.labels, params.real("k"), parse_direction(params.str("direction"))),
            written);
  return written;
}

ParamSet moe_params() {
  ParamSet p;
  p.declare("train", "", "CSV of training features: id,label,f0,...")
      .declare("test", "", "CSV of held-out features; empty scores the training set")
      .declare("kind", "forest", "logistic, tree or forest")
      .declare("max_depth", "3", "tree depth limit")
      .declare("min_leaf", "1", "minimum samples per leaf")
      .declare("n_trees", "50", "forest size")
      .declare("iterations", "200", "logistic gradient steps")
      .declare("lr", "0.5", "logistic step size")
      .declare("l2", "0", "logistic ridge penalty");
  return p;
}

std::vector<fs::path> run_moe(const ParamSet& params, const RunContext& ctx) {
  const CombinerKind kind = parse_combiner(params.str("kind"));
  const std::uint64_t seed = kind == CombinerKind::kForest ? ctx.require_seed("moe (forest)") : ctx.seed.value_or(0);
  const LabeledPoints train = load_points(params.str("train"));
  const LabeledPoints test = params.str("test").empty() ? train : load_points(params.str("test"));
  CombinerHyper hyper;
  hyper.max_depth = static_cast<int>(params.integer("max_depth"));
  hyper.min_leaf = positive_int(params, "min_leaf");
  hyper.n_trees = positive_int(params, "n_trees");
  hyper.iterations = static_cast<int>(params.integer("iterations"));
  hyper.lr = positive_real(params, "lr");
  hyper.l2 = params.real("l2");

  FeatureCombiner comb;
  try {
    comb = moe_fit(train.points, train.labels, kind, hyper, seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const Vec& p : test.points)
    if (p.size() != comb.dim()) throw ConfigError("test features differ in dimension from training features");
  const Vec scores = moe_score(comb, test.points);

  nlohmann::json metrics;
  int pos = 0;
  for (int l : test.labels) pos += l;
  if (pos > 0 && pos < static_cast<int>(test.labels.size())) {
    metrics["combined_auc"] = auc(scores, test.labels);
    metrics["combined_ap"] = ap(scores, test.labels);
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t f = 0; f < comb.dim(); ++f) {
      Vec col;
      for (const Vec& p : test.points) col.push_back(p[f]);
      per.push_back(auc(col, test.labels));
    }
    metrics["feature_auc"] = std::move(per);
  } else {
    warn(ctx, "held-out set has a single class; AUC not reported");
  }
  metrics["kind"] = combiner_name(kind);
  metrics["n_test"] = test.labels.size();

  std::vector<fs::path> written;
  std::ostringstream sc;
  write_score_table(sc, ScoreTable{test.ids, scores, test.labels});
  emit_json(ctx, "combiner.json", comb.to_json(), written);
  emit(ctx, "moe_scores.csv", sc.str(), written);
  emit_json(ctx, "moe_metrics.json", metrics, written);
  return written;
}

// ---------------------------------------------------------------------------
// Bumpy surface
// ---------------------------------------------------------------------------

SurfaceDemo surface_demo(const SurfaceDemoConfig& config, std::uint64_t seed) {
  ScalarFieldGrid base = ring_log_density(config.grid, config.ring_radius, config.noise_std);
  BumpySurface bumpy = plant_bumps(base, config.bump_count, config.bump_scale, config.bump_width, seed);
  ScalarFieldGrid base_curv = grid_tv_curvature(base, config.eps);
  ScalarFieldGrid grad = grid_gradient(bumpy.log_density).magnitude();
  ScalarFieldGrid curv = grid_tv_curvature(bumpy.log_density, config.eps);
  Vec diff(curv.values().size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = curv.values()[i] - grad.values()[i];
  ScalarFieldGrid differential(config.grid, diff);

  double rate = 0.0;
  if (!bumpy.centers.empty()) {
    const double thr = quantile(diff, 0.9);
    const GridSpec& g = config.grid;
    int hits = 0;
    for (const Vec& c : bumpy.centers) {
      const auto i = static_cast<std::size_t>(std::llround((c[0] - g.origin[0]) / g.spacing[0]));
      const auto j = static_cast<std::size_t>(std::llround((c[1] - g.origin[1]) / g.spacing[1]));
      if (differential.at(i, j) >= thr) ++hits;
    }
    rate = static_cast<double>(hits) / static_cast<double>(bumpy.centers.size());
  }
  return SurfaceDemo{std::move(base), std::move(bumpy), std::move(base_curv), std::move(grad),
                     std::move(curv), std::move(differential), rate};
}

ParamSet surface_params() {
  ParamSet p;
  p.declare("grid_min", "-4", "grid lower bound (both axes)")
      .declare("grid_max", "4", "grid upper bound (both axes)")
      .declare("spacing", "0.05", "grid spacing")
      .declare("ring_radius", "2", "radius of the ring the base density concentrates on")
      .declare("noise_std", "0.4", "blur of the ring")
      .declare("bump_count", "20", "number of planted bumps")
      .declare("bump_scale", "0.5", "bump height relative to the base peak density")
      .declare("bump_width", "0.1", "bump standard deviation")
      .declare("eps", "1e-8", "curvature regularizer");
  return p;
}

std::vector<fs::path> run_surface_demo(const ParamSet& params, const RunContext& ctx) {
  const std::uint64_t seed = ctx.require_seed("surface");
  SurfaceDemoConfig cfg;
  cfg.grid = square_grid(params.real("grid_min"), params.real("grid_max"), params.real("spacing"));
  cfg.ring_radius = params.real("ring_radius");
  cfg.noise_std = positive_real(params, "noise_std");
  const long long bumps = params.integer("bump_count");
  if (bumps < 0) throw ConfigError("bump_count must be nonnegative");
  cfg.bump_count = static_cast<int>(bumps);
  cfg.bump_scale = positive_real(params, "bump_scale");
  cfg.bump_width = positive_real(params, "bump_width");
  cfg.eps = positive_real(params, "eps");

  SurfaceDemo demo = [&] {
    try {
      return surface_demo(cfg, seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();

  std::vector<fs::path> written;
  emit(ctx, "base_log_density.csv", grid_text(demo.base), written);
  emit(ctx, "bumpy_log_density.csv", grid_text(demo.bumpy.log_density), written);
  emit(ctx, "base_curvature.csv", grid_text(demo.base_curvature), written);
  emit(ctx, "gradient_magnitude.csv", grid_text(demo.gradient_magnitude), written);
  emit(ctx, "curvature.csv", grid_text(demo.curvature), written);
  emit(ctx, "differential.csv", grid_text(demo.differential), written);
  std::ostringstream centers;
  centers << "id,x0,x1\n";
  for (std::size_t i = 0; i < demo.bumpy.centers.size(); ++i)
    centers << i << ',' << format_double(demo.bumpy.centers[i][0]) << ','
            << format_double(demo.bumpy.centers[i][1]) << '\n';
  emit(ctx, "bump_centers.csv", centers.str(), written);
  nlohmann::json summary{{"bump_count", cfg.bump_count}, {"uniform_baseline", 0.1}};
  summary["top_decile_hit_rate"] = demo.bumpy.centers.empty() ? nlohmann::json(nullptr) : nlohmann::json(demo.top_decile_hit_rate);
  emit_json(ctx, "surface_summary.json", summary, written);
  return written;
}

}  // namespace mbias

namespace mbias {

// ---------------------------------------------------------------------------
// Thin-shell concentration
// ---------------------------------------------------------------------------

ParamSet shell_params() {
  ParamSet p;
  p.declare("dims", "4,16,64,256,1024", "dimensions to sample")
      .declare("n", "100000", "normal vectors per dimension");
  return p;
}

std::vector<fs::path> run_shell_stats(const ParamSet& params, const RunContext& ctx) {
  const std::uint64_t seed = ctx.require_seed("shell");
  const int n = positive_int(params, "n");
  if (n < 2) throw ConfigError("n must be at least 2");
  const std::vector<int> dims = params.int_list("dims");
  if (dims.empty()) throw ConfigError("dims must not be empty");
  std::ostringstream os;
  os << "d,n,mean_norm,var_norm\n";
  for (int d : dims) {
    if (d < 1) throw ConfigError("dims must be positive");
    RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    const ShellStats st = shell_stats(static_cast<std::size_t>(d), static_cast<std::size_t>(n), rng);
    os << st.d << ',' << st.n << ',' << format_double(st.mean_norm) << ',' << format_double(st.var_norm) << '\n';
  }
  std::vector<fs::path> written;
  emit(ctx, "shell_stats.csv", os.str(), written);
  return written;
}

}  // namespace mbias
