#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mbias/errors.hpp"
#include "mbias/estimators.hpp"
#include "mbias/experiments.hpp"
#include "mbias/sphere.hpp"

using namespace mbias;

namespace {

GaussianMixture isotropic(std::size_t d, double mean, double var) {
  return GaussianMixture({Vec(d, mean)}, {Vec(d, var)}, {1.0});
}

ScoreOracle constant_field(Vec g) {
  const std::size_t d = g.size();
  return ScoreOracle(OracleKind::kCustom, d, [g](std::span<const double>) { return g; });
}

double sample_mean(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const Vec& v) {
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Interest points with their Hessian-classified roles.
struct PeaksRoles {
  InterestPoint max;
  InterestPoint saddle;
};

PeaksRoles reference_roles(const PeaksFunction& peaks) {
  const auto pts = peaks_interest_points(peaks, 2);
  PeaksRoles r;
  for (const auto& p : pts) (p.kind == PointKind::kLocalMax ? r.max : r.saddle) = p;
  return r;
}

}  // namespace

TEST(EstimateKappa, GaussianModeIsExact) {
  for (std::size_t d : {2u, 8u, 64u}) {
    const ScoreOracle oracle = ScoreOracle::analytic(isotropic(d, 0.7, 0.4));
    const Vec center(d, 0.7);
    for (double R : {0.5, 1.0}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(seed);
        for (int s : {1, 4, 64}) {
          EXPECT_NEAR(estimate_kappa(oracle, center, R, s, rng, true, 0.0), d / R, 1e-9);
          // with the regularizer every flux term is |v| / (|v| + delta), |v| = R / sigma^2
          const double v = R / 0.4;
          EXPECT_NEAR(estimate_kappa(oracle, center, R, s, rng), d / R * v / (v + kDefaultDelta), 1e-9);
        }
      }
    }
  }
}

TEST(EstimateKappa, RawFormIsBallAreaTimesNormalized) {
  const ScoreOracle oracle = ScoreOracle::analytic(three_mode_mixture(), 0.2);
  const Vec c{-4.0, -3.5};
  for (double R : {0.3, 0.8}) {
    RngStream r1(3), r2(3);
    const double norm = estimate_kappa(oracle, c, R, 32, r1, true);
    const double raw = estimate_kappa(oracle, c, R, 32, r2, false);
    EXPECT_NEAR(raw, norm * std::numbers::pi * R * R, 1e-12 * std::abs(raw) + 1e-14);
  }
  // at radius sqrt(d) the boundary-to-volume ratio d/R equals sqrt(d)
  const std::size_t d = 9;
  const ScoreOracle g = ScoreOracle::analytic(isotropic(d, 0.0, 1.0));
  RngStream rng(1);
  EXPECT_NEAR(estimate_kappa(g, Vec(d, 0.0), 3.0, 16, rng, true, 0.0), 3.0, 1e-12);
}

TEST(EstimateKappa, PreconditionsAndZeroScore) {
  const ScoreOracle oracle = constant_field({0.0, 0.0});
  const Vec c{0.0, 0.0};
  RngStream rng(1);
  EXPECT_THROW(estimate_kappa(oracle, c, 0.0, 4, rng), std::invalid_argument);
  EXPECT_THROW(estimate_kappa(oracle, c, 1.0, 0, rng), std::invalid_argument);
  EXPECT_THROW(estimate_kappa(oracle, c, 1.0, 4, rng, true, 0.0), NumericalError);
  EXPECT_EQ(estimate_kappa(oracle, c, 1.0, 4, rng), 0.0);
  const ScoreOracle d3 = constant_field({1.0, 0.0, 0.0});
  const Vec c3{0.0, 0.0, 0.0};
  EXPECT_THROW(estimate_kappa(d3, c3, 1.0, 4, rng, false), std::invalid_argument);
}

TEST(EstimateKappa, ScaleInvariance) {
  const GaussianMixture g = three_mode_mixture();
  const ScoreOracle base = ScoreOracle::analytic(g, 0.3);
  const Vec c{-3.0, -4.0};
  for (double k : {0.01, 3.0, 250.0}) {
    const ScoreOracle scaled(OracleKind::kCustom, 2, [&](std::span<const double> x) {
      Vec v = base(x);
      for (double& e : v) e *= k;
      return v;
    });
    RngStream r1(8), r2(8), r3(8), r4(8);
    EXPECT_NEAR(estimate_kappa(scaled, c, 0.5, 64, r1, true, 0.0), estimate_kappa(base, c, 0.5, 64, r2, true, 0.0),
                1e-12);
    EXPECT_NEAR(estimate_D(scaled, c, 0.5, 64, r3), k * estimate_D(base, c, 0.5, 64, r4), 1e-12 * k);
  }
}

TEST(EstimateD, ClosedForms) {
  RngStream rng(2);
  const Vec c{1.0, 2.0, 3.0};
  EXPECT_NEAR(estimate_D(constant_field({3.0, 4.0, 0.0}), c, 0.7, 5, rng), 5.0, 1e-15);
  EXPECT_EQ(estimate_D(constant_field({0.0, 0.0, 0.0}), c, 0.7, 5, rng), 0.0);
  for (std::size_t d : {2u, 10u}) {
    const double var = 0.25, R = 0.6;
    const ScoreOracle oracle = ScoreOracle::analytic(isotropic(d, -1.0, var));
    for (int s : {1, 7, 100}) EXPECT_NEAR(estimate_D(oracle, Vec(d, -1.0), R, s, rng), R / var, 1e-12);
  }
}

TEST(TrueKappaVolume, AffineAndRadialHill) {
  const GridSpec spec{{-2.0, -2.0}, {0.01, 0.01}, {401, 401}};
  const auto affine = ScalarFieldGrid::sample(spec, [](std::span<const double> x) { return 0.3 * x[0] + 2.0 * x[1]; });
  const Vec c{0.1, -0.2};
  EXPECT_NEAR(true_kappa_volume(affine, c, 0.8), 0.0, 1e-8);
  const auto hill = ScalarFieldGrid::sample(spec, [&](std::span<const double> x) {
    const double a = x[0] - c[0], b = x[1] - c[1];
    return -(a * a + b * b);
  });
  for (double R : {0.5, 1.0}) EXPECT_NEAR(true_kappa_volume(hill, c, R), 2.0 / R, 0.05 * 2.0 / R);
  const Vec edge{1.5, 0.0};
  EXPECT_THROW(true_kappa_volume(hill, edge, 0.5), std::invalid_argument);
}

TEST(TrueKappaVolume, PeaksMaximumAboveSaddle) {
  const PeaksFunction peaks;
  const PeaksRoles roles = reference_roles(peaks);
  ASSERT_EQ(roles.max.kind, PointKind::kLocalMax);
  ASSERT_EQ(roles.saddle.kind, PointKind::kSaddle);
  const auto grid = peaks.sample(PeaksFunction::canonical_domain());
  const Vec cm{roles.max.x, roles.max.y}, cs{roles.saddle.x, roles.saddle.y};
  EXPECT_GT(true_kappa_volume(grid, cm, 0.5), true_kappa_volume(grid, cs, 0.5));
}

TEST(TrueKappaVolume, AgreesWithBoundaryFluxByDivergenceTheorem) {
  // Smooth log-density of a perturbed mixture on a fine grid.
  const GaussianMixture g = gmm_perturbed(three_mode_mixture(), 0.5);
  const GridSpec fine{{-6.0, -6.0}, {0.01, 0.01}, {601, 601}};
  const GridSpec coarse{{-6.0, -6.0}, {0.02, 0.02}, {301, 301}};
  const auto f = [&](std::span<const double> x) { return gmm_logpdf(g, x); };
  const auto grid = ScalarFieldGrid::sample(fine, f);
  const auto grid2 = ScalarFieldGrid::sample(coarse, f);
  const ScoreOracle oracle = ScoreOracle::analytic(g);
  for (const Vec& c : {Vec{-3.2, -3.0}, Vec{-1.5, -3.2}, Vec{-2.0, -2.0}}) {
    const double R = 0.6;
    const double truth = true_kappa_volume(grid, c, R);
    const double quad_tol = std::abs(truth - true_kappa_volume(grid2, c, R)) + 1e-3;
    Vec est(20);
    for (std::size_t r = 0; r < est.size(); ++r) {
      RngStream rng = RngStream::substream(77, r);
      est[r] = estimate_kappa(oracle, c, R, 1024, rng);
    }
    const double mc_tol = sample_std(est) / std::sqrt(static_cast<double>(est.size()));
    EXPECT_NEAR(sample_mean(est), truth, 3.0 * (quad_tol + mc_tol)) << "center " << c[0] << "," << c[1];
  }
}

TEST(KappaStudy, PeaksMaximumSeparatesFromSaddleAtFourSamples) {
  const PeaksFunction peaks;
  const PeaksRoles roles = reference_roles(peaks);
  const auto res = kappa_study(peaks, {roles.max, roles.saddle}, 0.5, {4, 256}, 100, 2024);
  const auto& mx = res[0].stats;
  const auto& sd = res[1].stats;
  const double pooled4 = std::sqrt(0.5 * (mx.stds[0] * mx.stds[0] + sd.stds[0] * sd.stds[0]));
  EXPECT_GT(mx.means[0] - sd.means[0], pooled4);
  // at 256 samples the run mean sits within two standard deviations of the truth
  for (const auto& r : res) EXPECT_LE(std::abs(r.stats.means[1] - r.truth), 2.0 * r.stats.stds[1]) << r.point.id;
}

TEST(ErrorAnalysis, GaussianModeHasZeroVarianceAndNanSlope) {
  const ScoreOracle oracle = ScoreOracle::analytic(isotropic(2, 0.0, 1.0));
  const Vec c{0.0, 0.0};
  const EstimatorStats st = error_analysis(oracle, c, 0.5, {2, 4, 8}, 10, 1, true, 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(st.means[k], 4.0, 1e-12);
    EXPECT_LT(st.stds[k], 1e-12);
  }
  // exact zeros give the sentinel; rounding-level noise must not fit a line
  if (std::all_of(st.stds.begin(), st.stds.end(), [](double s) { return s == 0.0; })) {
    EXPECT_TRUE(std::isnan(st.loglog_slope));
    EXPECT_EQ(st.loglog_r2, 0.0);
  }
  const ScoreOracle flat = constant_field({1.0, 0.0});
  const EstimatorStats st2 = error_analysis(flat, c, 0.5, {2, 4}, 5, 1);
  EXPECT_EQ(st2.stds.size(), 2u);
  EXPECT_THROW(error_analysis(oracle, c, 0.5, {2, 4}, 1, 1), std::invalid_argument);
  EXPECT_THROW(error_analysis(oracle, c, 0.5, {4, 2}, 5, 1), std::invalid_argument);
  EXPECT_THROW(error_analysis(oracle, c, 0.5, {4, 4}, 5, 1), std::invalid_argument);
}

TEST(ErrorAnalysis, RadialFieldIsExactAndConstantFieldIsNot) {
  // A field with constant normalized flux through every boundary point.
  const ScoreOracle radial(OracleKind::kCustom, 2, [](std::span<const double> x) {
    const double n = std::hypot(x[0], x[1]);
    return Vec{-x[0] / n, -x[1] / n};
  });
  const ScoreOracle constant_dot(OracleKind::kCustom, 2, [](std::span<const double>) { return Vec{0.0, 1.0}; });
  const Vec c{0.0, 0.0};
  // constant field: flux varies with direction, so std > 0
  const EstimatorStats varying = error_analysis(constant_dot, c, 1.0, {2, 4, 8, 16}, 50, 3);
  EXPECT_TRUE(std::isfinite(varying.loglog_slope));
  EXPECT_LT(varying.loglog_slope, 0.0);
  const EstimatorStats st = error_analysis(radial, c, 1.0, {2, 4, 8}, 20, 3, true, 0.0);
  for (double s : st.stds) EXPECT_LT(s, 1e-12);
}

TEST(ErrorAnalysis, PeaksMaximumConvergesWithoutBias) {
  const PeaksFunction peaks;
  const PeaksRoles roles = reference_roles(peaks);
  const ScoreOracle oracle = ScoreOracle::from_grid(peaks.sample(PeaksFunction::canonical_domain()));
  const Vec c{roles.max.x, roles.max.y};
  const std::vector<int> counts{2, 4, 8, 16, 32, 64, 128, 256};
  const EstimatorStats st = error_analysis(oracle, c, 0.5, counts, 100, 99);
  ASSERT_EQ(st.means.size(), counts.size());
  EXPECT_LT(st.loglog_slope, 0.0);
  EXPECT_LT(std::abs(st.means[1] - st.means[7]), 2.0 * st.stds[1]);
  for (double s : st.stds) EXPECT_GE(s, 0.0);
}

TEST(BiasTerm, PerfectAndOffsetDenoisers) {
  RngStream rng(4);
  const Vec w{0.3, -1.2, 2.0};
  for (int k = 0; k < 20; ++k) {
    const Vec x0{rng.normal(), rng.normal(), rng.normal()};
    const CleanPredictor perfect = [x0](std::span<const double>) { return x0; };
    const CleanPredictor offset = [x0, w](std::span<const double>) {
      Vec v = x0;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += w[i];
      return v;
    };
    EXPECT_EQ(estimate_bias_term(perfect, x0, 0.3, 16, rng), 0.0);
    const double expected = -(w[0] * x0[0] + w[1] * x0[1] + w[2] * x0[2]);
    EXPECT_NEAR(estimate_bias_term(offset, x0, 0.3, 16, rng), expected, 1e-12);
    const Vec per = bias_term_samples(offset, x0, 0.3, 5, rng);
    ASSERT_EQ(per.size(), 5u);
    for (double v : per) EXPECT_NEAR(v, expected, 1e-12);
  }
}

TEST(Criterion, CancellingOracle) {
  for (std::size_t d : {2u, 5u}) {
    for (const Vec& x0 : {Vec(d, 0.0), Vec(d, 0.4)}) {
      CriterionConfig cfg = CriterionConfig::defaults(d, 17);
      cfg.a = 0.7;
      cfg.b = 1.3;
      cfg.c = 0.5;
      cfg.s = 32;
      const double alpha = cfg.alpha;
      // h(x_tilde) = -u: undo the perturbation to recover u
      const ScoreOracle h(OracleKind::kCustom, d, [&](std::span<const double> xt) {
        Vec v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = -(xt[i] - std::sqrt(1.0 - alpha) * x0[i]) / std::sqrt(alpha);
        return v;
      });
      const CriterionReport r = criterion_C(h, x0, cfg);
      // replay the same directions to evaluate (1/s) sum <u, x0>
      RngStream rng(cfg.seed);
      double ux0 = 0.0;
      for (int i = 0; i < cfg.s; ++i) {
        const Vec u = sample_sphere(d, rng);
        for (std::size_t j = 0; j < d; ++j) ux0 += u[j] * x0[j];
      }
      ux0 /= cfg.s;
      const double expected = (cfg.a + cfg.b) * std::sqrt(static_cast<double>(d)) + cfg.c * ux0;
      EXPECT_NEAR(r.c_raw, expected, 1e-6);
      EXPECT_NEAR(r.c_scaled, r.c_raw / ((cfg.a + cfg.b + cfg.c) * std::sqrt(static_cast<double>(d))) + 1.0, 1e-14);
      EXPECT_EQ(r.s, cfg.s);
      EXPECT_EQ(r.seed, 17u);
      EXPECT_NEAR(r.radius, std::sqrt(alpha * static_cast<double>(d)), 1e-15);
    }
  }
}

TEST(Criterion, DegenerateWeights) {
  CriterionConfig cfg = CriterionConfig::defaults(2, 1);
  cfg.a = cfg.b = cfg.c = 0.0;
  const Vec x0{-5.0, -5.0};
  const CriterionReport r = criterion_C(ScoreOracle::analytic(three_mode_mixture(), cfg.alpha), x0, cfg);
  EXPECT_EQ(r.c_raw, 0.0);
  EXPECT_EQ(r.c_scaled, 1.0);
}

TEST(Criterion, DefaultsAndValidation) {
  const CriterionConfig cfg = CriterionConfig::defaults(64, 5);
  EXPECT_EQ(cfg.s, 64);
  EXPECT_NEAR(cfg.alpha * 8.0, 1.28, 1e-15);
  EXPECT_EQ(cfg.delta, 1e-8);
  EXPECT_EQ(cfg.a, 1.0);
  EXPECT_EQ(cfg.b, 1.0);
  EXPECT_EQ(cfg.c, 1.0);
  EXPECT_TRUE(cfg.normalize_by_ball);
  CriterionConfig bad = cfg;
  bad.s = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.delta = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.alpha = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  const ScoreOracle nan_oracle(OracleKind::kCustom, 2, [](std::span<const double>) { return Vec{NAN, 0.0}; });
  const Vec x0{0.0, 0.0};
  EXPECT_THROW(criterion_C(nan_oracle, x0, CriterionConfig::defaults(2, 1)), NumericalError);
}

TEST(Criterion, DecompositionSharesPerturbations) {
  const GaussianMixture g = three_mode_mixture();
  CriterionConfig cfg = CriterionConfig::defaults(2, 9);
  const ScoreOracle h = ScoreOracle::analytic(g, cfg.alpha);
  const Vec x0{-4.6, -5.3};
  const CriterionReport r = criterion_C(h, x0, cfg);
  RngStream rng(cfg.seed);
  const Vec center{std::sqrt(1.0 - cfg.alpha) * x0[0], std::sqrt(1.0 - cfg.alpha) * x0[1]};
  const BoundarySamples b = sample_boundary(h, center, r.radius, cfg.s, rng);
  EXPECT_NEAR(r.kappa_hat, kappa_from_samples(b, true, cfg.delta), 1e-12);
  EXPECT_NEAR(r.d_hat, gradient_from_samples(b), 1e-12);
  // each weight alone recovers one decomposed term
  CriterionConfig only_a = cfg;
  only_a.b = only_a.c = 0.0;
  const CriterionReport ra = criterion_C(h, x0, only_a);
  EXPECT_NEAR(ra.c_raw, r.kappa_hat * r.radius / std::sqrt(2.0), 1e-12);
  CriterionConfig only_b = cfg;
  only_b.a = only_b.c = 0.0;
  EXPECT_NEAR(criterion_C(h, x0, only_b).c_raw, r.d_hat, 1e-6);
}

TEST(Criterion, ModesScoreAboveMidpoints) {
  const GaussianMixture g = three_mode_mixture();
  const double alpha = alpha_from_radius(0.8, 2);
  const ScoreOracle h = ScoreOracle::analytic(g, alpha);
  const std::vector<Vec> modes = g.means();
  std::vector<Vec> mids;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      mids.push_back({0.5 * (modes[i][0] + modes[j][0]), 0.5 * (modes[i][1] + modes[j][1])});
  auto criterion = [&](const Vec& x, int s, std::uint64_t seed) {
    CriterionConfig cfg = CriterionConfig::defaults(2, seed);
    cfg.alpha = alpha;
    cfg.s = s;
    return criterion_C(h, x, cfg).c_raw;
  };
  // 20 runs of s = 64 per point; their average should agree with the s = 4096 value
  auto group = [&](const std::vector<Vec>& pts, double& small, double& dense) {
    small = dense = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      Vec runs(20);
      for (std::size_t r = 0; r < runs.size(); ++r) runs[r] = criterion(pts[k], 64, 1000 * k + r);
      const double ref = criterion(pts[k], 4096, 999999);
      const double se = std::sqrt(sample_std(runs) * sample_std(runs) / 20.0 * (1.0 + 20.0 * 64.0 / 4096.0));
      EXPECT_NEAR(sample_mean(runs), ref, 3.0 * se) << pts[k][0] << "," << pts[k][1];
      small += sample_mean(runs) / static_cast<double>(pts.size());
      dense += ref / static_cast<double>(pts.size());
    }
  };
  double modes_small, modes_dense, mids_small, mids_dense;
  group(modes, modes_small, modes_dense);
  group(mids, mids_small, mids_dense);
  EXPECT_GT(modes_small, mids_small);
  EXPECT_GT(modes_dense, mids_dense);
}

TEST(ClaimOneIdentity, HoldsToRounding) {
  RngStream pick(31);
  for (int k = 0; k < 50; ++k) {
    const std::size_t d = 2 + pick.below(6);
    std::vector<Vec> means(2, Vec(d)), vars(2, Vec(d));
    for (auto& m : means)
      for (double& v : m) v = 3.0 * pick.normal();
    for (auto& m : vars)
      for (double& v : m) v = 0.05 + pick.uniform();
    const GaussianMixture g(means, vars, {0.4, 0.6});
    const double alpha = 0.05 + 0.9 * pick.uniform();
    Vec x0(d);
    for (double& v : x0) v = 3.0 * pick.normal();
    RngStream rng(k);
    const auto id = curvature_gradient_identity(ScoreOracle::analytic(g, alpha), x0, alpha, 64, rng, 0.0);
    EXPECT_NEAR(id.lhs, id.rhs, 1e-10 * std::max(1.0, std::abs(id.lhs)));
    EXPECT_NEAR(id.rhs, id.kappa_unit - id.d_hat, 1e-15 * std::max(1.0, std::abs(id.rhs)));
    EXPECT_NEAR(id.kappa_unit, id.kappa_hat * std::sqrt(alpha * d) / std::sqrt(static_cast<double>(d)),
                1e-12 * std::max(1.0, std::abs(id.kappa_unit)));
  }
}

TEST(SphericalNormals, CancelOverTheSphere) {
  int within = 0;
  const int trials = 400, s = 64;
  for (int seed = 0; seed < trials; ++seed) {
    RngStream rng(seed);
    Vec acc(6, 0.0);
    for (int i = 0; i < s; ++i) {
      const Vec u = sample_sphere(6, rng);
      for (std::size_t j = 0; j < 6; ++j) acc[j] += u[j] / std::sqrt(6.0);
    }
    double n2 = 0.0;
    for (double a : acc) n2 += (a / s) * (a / s);
    within += std::sqrt(n2) <= 4.0 / std::sqrt(static_cast<double>(s));
  }
  EXPECT_GE(within, static_cast<int>(0.99 * trials));
}

TEST(EstimatorCsv, ReportsAndStatsRoundTrip) {
  std::vector<CriterionReport> reports(2);
  reports[0] = {1.0 / 3.0, 2.5e-17, -0.1, 4.0, 1.0 + 1e-15, 64, std::sqrt(2.0), 18446744073709551615ULL};
  reports[1] = {-7.0, 0.0, 3e300, -1e-300, 0.5, 4, 0.25, 0};
  std::ostringstream os;
  write_reports_csv(os, {"a", "b"}, reports);
  std::istringstream is(os.str());
  std::vector<std::string> ids;
  const auto back = read_reports_csv(is, &ids);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "b"}));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].kappa_hat, reports[i].kappa_hat);
    EXPECT_EQ(back[i].d_hat, reports[i].d_hat);
    EXPECT_EQ(back[i].bias_hat, reports[i].bias_hat);
    EXPECT_EQ(back[i].c_raw, reports[i].c_raw);
    EXPECT_EQ(back[i].c_scaled, reports[i].c_scaled);
    EXPECT_EQ(back[i].s, reports[i].s);
    EXPECT_EQ(back[i].radius, reports[i].radius);
    EXPECT_EQ(back[i].seed, reports[i].seed);
  }
  EstimatorStats st;
  st.sample_counts = {2, 4};
  st.means = {0.1, 1.0 / 7.0};
  st.stds = {0.0, 2.0 / 3.0};
  std::ostringstream os2;
  write_stats_csv(os2, st);
  std::istringstream is2(os2.str());
  const EstimatorStats b2 = read_stats_csv(is2);
  EXPECT_EQ(b2.sample_counts, st.sample_counts);
  EXPECT_EQ(b2.means, st.means);
  EXPECT_EQ(b2.stds, st.stds);
}
