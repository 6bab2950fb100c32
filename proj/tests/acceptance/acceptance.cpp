// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//
// A criterion whose literal statement is known to be false for reasons
// outside the implementation carries a `known` note. It is still evaluated
// as written and reported as XFAIL when it fails; a substantive companion
// check is printed next to it. The exit status is nonzero only for failures
// without such a note.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mbias/detection.hpp"
#include "mbias/estimators.hpp"
#include "mbias/experiments.hpp"
#include "mbias/io.hpp"
#include "mbias/sphere.hpp"
#include "mbias/surfaces.hpp"
#include "mbias/toy_diffusion.hpp"

using namespace mbias;

namespace {

constexpr std::uint64_t kMasterSeed = 20240607;

// Pinned tolerances.
constexpr double kKappaExactTol = 1e-9;        // 1
constexpr double kUnbiasedStds = 2.0;          // 3
constexpr double kSlopeR2Min = 0.8;            // 4
constexpr double kTerminationMin = 0.89;       // 5
constexpr int kTerminationSeedsNeeded = 4;     // 5
constexpr double kShareTol = 0.08;             // 6
constexpr double kIdentityTol = 1e-10;         // 7
constexpr double kBiasTol = 1e-12;             // 8
constexpr double kShellMeanLo = 0.98;          // 9
constexpr double kShellMeanHi = 1.02;          // 9
constexpr double kGradCheckTol = 1e-5;         // 10
constexpr double kDetectAucMin = 0.9;          // 11
constexpr double kMoeSlack = 0.02;             // 11

struct Check {
  std::string id;
  std::string title;
  bool pass = false;
  std::string detail;
  std::string known;  // nonempty: literal statement known to be unattainable
};

// Numbers folded into the determinism comparison.
struct Digest {
  std::ostringstream os;
  void add(double v) { os << format_double(v) << ';'; }
  void add(const Vec& v) {
    for (double x : v) add(x);
  }
};

struct Outcome {
  std::vector<Check> checks;
  std::string digest;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double mean_of(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double var_of(const Vec& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// ---------------------------------------------------------------------------

void kappa_at_gaussian_mode(Outcome& out, Digest& dg) {
  double worst = 0.0, worst_var = 0.0;
  for (std::size_t d : {2u, 8u, 64u}) {
    RngStream pick(derive_seed(kMasterSeed, 100 + d));
    Vec mu(d);
    for (double& m : mu) m = pick.normal();
    const double var = 0.2 + pick.uniform();
    const ScoreOracle oracle = ScoreOracle::analytic(GaussianMixture({mu}, {Vec(d, var)}, {1.0}));
    for (double R : {0.5, 1.0}) {
      Vec est;
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RngStream rng(derive_seed(kMasterSeed, 1000 * d + seed));
        est.push_back(estimate_kappa(oracle, mu, R, 64, rng, true, 0.0));
      }
      for (double e : est) worst = std::max(worst, std::abs(e - static_cast<double>(d) / R));
      worst_var = std::max(worst_var, var_of(est));
      dg.add(est);
    }
  }
  out.checks.push_back({"1", "kappa exact at a Gaussian mode (d in {2,8,64}, R in {0.5,1}, 100 seeds)",
                        worst <= kKappaExactTol && worst_var <= kKappaExactTol,
                        "max |kappa - d/R| = " + fmt(worst) + ", max variance = " + fmt(worst_var) +
                            " (tol " + fmt(kKappaExactTol) + ")"});
}

void peaks_curvature(Outcome& out, Digest& dg) {
  const PeaksFunction peaks;
  const auto points = peaks_interest_points(peaks, 2);
  const std::vector<int> counts{2, 4, 8, 16, 32, 64, 128, 256};
  const auto res = kappa_study(peaks, points, 0.5, counts, 100, derive_seed(kMasterSeed, 2));
  for (const auto& r : res) {
    dg.add(r.truth);
    dg.add(r.stats.means);
    dg.add(r.stats.stds);
    dg.add(r.stats.loglog_slope);
  }

  // literal: (1.2, 0.8) is called the maximum and (-0.475, -0.7) the saddle
  const KappaPointResult& lit_max = res[0];
  const KappaPointResult& lit_saddle = res[1];
  auto ordered = [&](const KappaPointResult& hi, const KappaPointResult& lo, std::string& why) {
    bool ok = hi.truth > lo.truth;
    why = "truth " + fmt(hi.truth) + " vs " + fmt(lo.truth);
    for (std::size_t j = 0; j < counts.size(); ++j) {
      if (counts[j] < 4) continue;
      if (!(hi.stats.means[j] > lo.stats.means[j])) {
        ok = false;
        why += ", reversed at count " + std::to_string(counts[j]);
      }
    }
    return ok;
  };
  std::string why;
  const bool literal = ordered(lit_max, lit_saddle, why);
  out.checks.push_back({"2", "peaks R=0.5: kappa(1.2,0.8) > kappa(-0.475,-0.7), truth and run means at counts 4..256",
                        literal, why,
                        "the Hessian of the peaks surface makes (-0.475,-0.7) the local maximum and (1.2,0.8) "
                        "a saddle, so the labelled ordering is reversed"});

  const KappaPointResult* mx = nullptr;
  const KappaPointResult* sd = nullptr;
  for (const auto& r : res) (r.point.kind == PointKind::kLocalMax ? mx : sd) = &r;
  bool roles = mx && sd && mx != sd && sd->point.kind == PointKind::kSaddle;
  std::string why_roles = "Hessian roles missing";
  if (roles) roles = ordered(*mx, *sd, why_roles);
  out.checks.push_back({"2b", "same ordering with roles classified from the Hessian (local max above saddle)", roles,
                        why_roles});

  bool unbiased = true;
  double worst_ratio = 0.0;
  bool converge = true;
  std::string slopes;
  for (const auto& r : res) {
    for (std::size_t j = 0; j < counts.size(); ++j) {
      if (counts[j] < 4) continue;
      const double gap = std::abs(r.stats.means[j] - r.truth);
      worst_ratio = std::max(worst_ratio, gap / r.stats.stds[j]);
      if (gap > kUnbiasedStds * r.stats.stds[j]) unbiased = false;
    }
    const bool ok = r.stats.loglog_slope < 0.0 && r.stats.loglog_r2 >= kSlopeR2Min;
    converge = converge && ok;
    slopes += r.point.id + ": slope " + fmt(r.stats.loglog_slope) + " r2 " + fmt(r.stats.loglog_r2) + "  ";
  }
  out.checks.push_back({"3", "boundary estimate unbiased: |mean - truth| <= 2 std for counts >= 4, both points",
                        unbiased, "max |mean - truth| / std = " + fmt(worst_ratio)});
  out.checks.push_back({"4", "log std vs log count: slope < 0 and r2 >= 0.8 at both points", converge, slopes});
}

void toy_pipeline(Outcome& out, Digest& dg) {
  const GaussianMixture gmm = three_mode_mixture();
  int good = 0;
  bool shares_ok = true;
  std::string fr;
  double worst_share = 0.0;
  for (int k = 0; k < 5; ++k) {
    const GmmStudyResult r = gmm_study(gmm, GmmStudyConfig{}, derive_seed(kMasterSeed, 500 + k));
    dg.add(r.train.loss_history);
    for (const Vec& s : r.samples) dg.add(s);
    dg.add(r.termination.fraction);
    dg.add(r.termination.ci_low);
    dg.add(r.termination.ci_high);
    dg.add(r.mode_shares);
    if (r.termination.fraction >= kTerminationMin) ++good;
    fr += fmt(r.termination.fraction) + " [" + fmt(r.termination.ci_low) + ", " + fmt(r.termination.ci_high) + "] ";
    for (double s : r.mode_shares) {
      worst_share = std::max(worst_share, std::abs(s - 1.0 / 3.0));
      if (std::abs(s - 1.0 / 3.0) > kShareTol) shares_ok = false;
    }
  }
  out.checks.push_back({"5", "termination fraction >= 0.89 on >= 4 of 5 seeds (full toy pipeline)",
                        good >= kTerminationSeedsNeeded, std::to_string(good) + "/5: " + fr});
  out.checks.push_back({"6", "mode shares of 1000 samples within 1/3 +- 0.08 (every seed)", shares_ok,
                        "max |share - 1/3| = " + fmt(worst_share)});
}

void identity_and_bias(Outcome& out, Digest& dg) {
  RngStream pick(derive_seed(kMasterSeed, 7));
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t d = 2 + pick.below(7);
    const std::size_t m = 1 + pick.below(3);
    std::vector<Vec> means(m, Vec(d)), vars(m, Vec(d));
    Vec w(m);
    for (auto& v : means)
      for (double& x : v) x = 3.0 * pick.normal();
    for (auto& v : vars)
      for (double& x : v) x = 0.05 + pick.uniform();
    double total = 0.0;
    for (double& x : w) total += (x = 0.1 + pick.uniform());
    for (double& x : w) x /= total;
    const GaussianMixture g(means, vars, w);
    const double alpha = 0.05 + 0.9 * pick.uniform();
    Vec x0(d);
    for (double& x : x0) x = 3.0 * pick.normal();
    RngStream rng(derive_seed(kMasterSeed, 7000 + k));
    const auto id = curvature_gradient_identity(ScoreOracle::analytic(g, alpha), x0, alpha, 64, rng, 0.0);
    worst = std::max(worst, std::abs(id.lhs - id.rhs) / std::max(1.0, std::abs(id.lhs)));
    dg.add(id.lhs);
    dg.add(id.rhs);
  }
  out.checks.push_back({"7", "curvature minus gradient from one perturbation set equals the direct Monte Carlo (50 pairs)",
                        worst <= kIdentityTol, "max relative gap = " + fmt(worst) + " (tol " + fmt(kIdentityTol) + ")"});

  RngStream rng(derive_seed(kMasterSeed, 8));
  double worst_zero = 0.0, worst_offset = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t d = 1 + rng.below(8);
    Vec x0(d), w(d);
    for (double& x : x0) x = rng.normal();
    for (double& x : w) x = rng.normal();
    const CleanPredictor identity = [x0](std::span<const double>) { return x0; };
    const CleanPredictor offset = [x0, w](std::span<const double>) {
      Vec v = x0;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += w[i];
      return v;
    };
    const double alpha = 0.01 + 0.98 * rng.uniform();
    const double z = estimate_bias_term(identity, x0, alpha, 16, rng);
    double expected = 0.0;
    for (std::size_t i = 0; i < d; ++i) expected -= w[i] * x0[i];
    const double o = estimate_bias_term(offset, x0, alpha, 16, rng);
    worst_zero = std::max(worst_zero, std::abs(z));
    worst_offset = std::max(worst_offset, std::abs(o - expected));
    dg.add(z);
    dg.add(o);
  }
  out.checks.push_back({"8", "bias term: exactly 0 for the identity denoiser, -<w,x0> for a constant offset (100 x0)",
                        worst_zero == 0.0 && worst_offset <= kBiasTol,
                        "max |identity| = " + fmt(worst_zero) + ", max offset error = " + fmt(worst_offset)});
}

void thin_shell(Outcome& out, Digest& dg) {
  std::vector<ShellStats> st;
  std::string table;
  for (std::size_t d : {4u, 16u, 64u, 256u, 1024u}) {
    RngStream rng(derive_seed(kMasterSeed, 900 + d));
    st.push_back(shell_stats(d, 100000, rng));
    dg.add(st.back().mean_norm);
    dg.add(st.back().var_norm);
    table += "d=" + std::to_string(d) + " var " + fmt(st.back().var_norm) + " var/d " +
             fmt(st.back().var_norm / static_cast<double>(d)) + "  ";
  }
  const double m = st.back().mean_norm / 32.0;
  out.checks.push_back({"9a", "mean |eps|/sqrt(d) at d=1024 within [0.98, 1.02] (n=1e5)",
                        m >= kShellMeanLo && m <= kShellMeanHi, "mean = " + fmt(m)});
  out.checks.push_back({"9b", "var(|eps|) at d=1024 smaller than at d=4", st.back().var_norm < st.front().var_norm,
                        "var(4) = " + fmt(st.front().var_norm) + ", var(1024) = " + fmt(st.back().var_norm),
                        "var of a chi variable rises monotonically toward 1/2 with d; the shrinking quantity is "
                        "var(|eps|/sqrt(d)) = var/d"});
  bool falls = true;
  for (std::size_t k = 1; k < st.size(); ++k)
    falls = falls && st[k].var_norm / static_cast<double>(st[k].d) < st[k - 1].var_norm / static_cast<double>(st[k - 1].d);
  out.checks.push_back({"9c", "var(|eps|/sqrt(d)) decreases from d=4 to d=1024", falls, table});
}

void gradient_check(Outcome& out, Digest& dg) {
  RngStream rng(derive_seed(kMasterSeed, 10));
  DenoiserNet net(2, {64, 64}, rng);
  const Eigen::VectorXd p0 = net.parameters();
  double worst = 0.0;
  for (int b = 0; b < 5; ++b) {
    NoiseBatch batch{Eigen::MatrixXd(2, 32), Eigen::RowVectorXd(32), Eigen::MatrixXd(2, 32)};
    for (int j = 0; j < 32; ++j) {
      batch.tf(j) = rng.uniform();
      for (int k = 0; k < 2; ++k) {
        batch.x(k, j) = 2.0 * rng.normal();
        batch.eps(k, j) = rng.normal();
      }
    }
    Eigen::VectorXd grad;
    net.set_parameters(p0);
    net.loss_and_gradient(batch, grad);
    Eigen::VectorXd fd(p0.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
      Eigen::VectorXd p = p0;
      p(i) += h;
      net.set_parameters(p);
      const double up = net.loss(batch);
      p(i) -= 2.0 * h;
      net.set_parameters(p);
      fd(i) = (up - net.loss(batch)) / (2.0 * h);
    }
    worst = std::max(worst, (grad - fd).cwiseAbs().maxCoeff() / grad.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < grad.size(); ++i) dg.add(grad(i));
  }
  net.set_parameters(p0);
  out.checks.push_back({"10", "backprop vs central differences, 5 random batches, width 64x64",
                        worst <= kGradCheckTol, "max relative deviation = " + fmt(worst) + " (tol " + fmt(kGradCheckTol) + ")"});
}

// Generated points sit at the mixture modes (tiny jitter); real points are
// uniform over the box around the modes, at least 1.5 away from each mode.
void planted_points(std::uint64_t seed, int n_per_class, std::vector<Vec>& x, std::vector<int>& y) {
  const GaussianMixture g = three_mode_mixture();
  RngStream rng(seed);
  for (int i = 0; i < n_per_class; ++i) {
    Vec p = g.means()[rng.below(3)];
    for (double& v : p) v += 0.05 * rng.normal();
    x.push_back(p);
    y.push_back(1);
  }
  for (int i = 0; i < n_per_class;) {
    const Vec p{-7.5 + 10.0 * rng.uniform(), -7.5 + 10.0 * rng.uniform()};
    bool far = true;
    for (const Vec& m : g.means()) far = far && std::hypot(p[0] - m[0], p[1] - m[1]) >= 1.5;
    if (!far) continue;
    x.push_back(p);
    y.push_back(0);
    ++i;
  }
}

void detection(Outcome& out, Digest& dg) {
  const double alpha = alpha_from_radius(0.8, 2);
  const ScoreOracle oracle = ScoreOracle::analytic(three_mode_mixture(), alpha);
  auto criteria = [&](const std::vector<Vec>& x, std::uint64_t seed, double a, double b, double c) {
    Vec s;
    for (std::size_t i = 0; i < x.size(); ++i) {
      CriterionConfig cfg = CriterionConfig::defaults(2, derive_seed(seed, i));
      cfg.alpha = alpha;
      cfg.a = a;
      cfg.b = b;
      cfg.c = c;
      s.push_back(criterion_C(oracle, x[i], cfg).c_scaled);
    }
    return s;
  };

  double worst_auc = 1.0, worst_default = 1.0, worst_margin = 1.0;
  for (int k = 0; k < 5; ++k) {
    const std::uint64_t seed = derive_seed(kMasterSeed, 1100 + k);
    std::vector<Vec> xtr, xte;
    std::vector<int> ytr, yte;
    planted_points(derive_seed(seed, 1), 100, xtr, ytr);
    planted_points(derive_seed(seed, 2), 100, xte, yte);
    const Vec ctr = criteria(xtr, derive_seed(seed, 3), 1.0, 0.0, 0.0);
    const Vec cte = criteria(xte, derive_seed(seed, 4), 1.0, 0.0, 0.0);
    worst_auc = std::min(worst_auc, auc(cte, yte));
    worst_default = std::min(worst_default, auc(criteria(xte, derive_seed(seed, 4), 1.0, 1.0, 1.0), yte));

    // auxiliary synthetic feature: a weak noisy copy of the label
    RngStream aux(derive_seed(seed, 5));
    std::vector<Vec> ftr, fte;
    Vec aux_te;
    for (std::size_t i = 0; i < xtr.size(); ++i) ftr.push_back({ctr[i], ytr[i] + aux.normal()});
    for (std::size_t i = 0; i < xte.size(); ++i) {
      fte.push_back({cte[i], yte[i] + aux.normal()});
      aux_te.push_back(fte.back()[1]);
    }
    const double best = std::max(auc(cte, yte), auc(aux_te, yte));
    for (CombinerKind kind : {CombinerKind::kLogistic, CombinerKind::kTree, CombinerKind::kForest}) {
      const FeatureCombiner comb = moe_fit(ftr, ytr, kind, CombinerHyper{}, derive_seed(seed, 6));
      const double combined = auc(moe_score(comb, fte), yte);
      worst_margin = std::min(worst_margin, combined - best);
      dg.add(combined);
    }
    dg.add(cte);
  }
  out.checks.push_back({"11a", "criterion AUC >= 0.9, modes vs off-mode points, analytic oracle (5 seeds)",
                        worst_auc >= kDetectAucMin,
                        "min AUC = " + fmt(worst_auc) + " with weights a=1 b=0 c=0; default weights a=b=c=1 give " +
                            fmt(worst_default)});
  out.checks.push_back({"11b", "combiner never loses more than 0.02 AUC to the best single feature (5 seeds, 3 kinds)",
                        worst_margin >= -kMoeSlack, "min (combined - best single) = " + fmt(worst_margin)});
}

Outcome run_all() {
  Outcome out;
  Digest dg;
  const std::vector<std::function<void(Outcome&, Digest&)>> steps{
      kappa_at_gaussian_mode, peaks_curvature, toy_pipeline, identity_and_bias, thin_shell, gradient_check, detection};
  for (const auto& step : steps) step(out, dg);
  out.digest = dg.os.str();
  return out;
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome first = run_all();
  const Outcome second = run_all();
  bool same = first.digest == second.digest && first.checks.size() == second.checks.size();
  for (std::size_t i = 0; same && i < first.checks.size(); ++i)
    same = first.checks[i].pass == second.checks[i].pass && first.checks[i].detail == second.checks[i].detail;
  first.checks.push_back({"12", "every run above repeats bit-identically with the same master seed", same,
                          std::to_string(first.digest.size()) + " bytes of outputs compared"});

  int unexpected = 0, xfail = 0;
  for (const Check& c : first.checks) {
    std::string tag = c.pass ? "PASS " : "FAIL ";
    if (!c.pass && !c.known.empty()) {
      tag = "XFAIL";
      ++xfail;
    } else if (!c.pass) {
      ++unexpected;
    }
    std::cout << tag << "  " << c.id << "  " << c.title << "  |  " << c.detail << '\n';
    if (!c.known.empty()) std::cout << "        known: " << c.known << '\n';
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "summary: " << first.checks.size() - static_cast<std::size_t>(unexpected + xfail) << " pass, " << xfail
            << " expected failures, " << unexpected << " unexpected failures (" << fmt(secs) << " s)\n";
  return unexpected == 0 ? 0 : 1;
}
