#include <doctest.h>

#include <cmath>
#include <vector>

#include "debiasreg/debias.hpp"
#include "debiasreg/inference.hpp"
#include "debiasreg/parallel.hpp"
#include "debiasreg/sim.hpp"
#include "debiasreg/stein.hpp"
#include "helpers.hpp"

using namespace debiasreg;

// Statistical Monte Carlo checks at moderate sizes. These are seeded and
// deterministic; tolerances leave several standard errors of headroom.

TEST_CASE("z0 is uncorrelated with the X Q0 columns across resamples") {
  const Eigen::Index n = 4;
  const Eigen::Index p = 3;
  Eigen::MatrixXd sigma(p, p);
  sigma << 1.0, 0.4, 0.1, 0.4, 1.0, 0.2, 0.1, 0.2, 1.0;
  CovarianceSpec cov{Eigen::MatrixXd(sigma)};
  Eigen::VectorXd a(p);
  a << 1.0, -0.5, 0.25;

  const int reps = 20000;
  double cross = 0.0;
  double z_sq = 0.0, q_sq = 0.0;
  Rng rng(511);
  for (int rep = 0; rep < reps; ++rep) {
    Eigen::MatrixXd x = sample_design(cov, n, rng);
    Direction dir = normalize_direction(a, cov, x);
    auto [z0, xq0] = decompose_design(x, dir);
    cross += z0(0) * xq0(0, 1);
    z_sq += z0(0) * z0(0);
    q_sq += xq0(0, 1) * xq0(0, 1);
  }
  const double corr = cross / std::sqrt(z_sq * q_sq);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("figure2 wishart covariance at the paper scale") {
  CovarianceSpec cov = figure2_wishart_covariance(900, 4500, 4500.0, 12345);
  CHECK(std::abs(cov.matrix().diagonal().mean() - 1.0) < 0.1);
}

TEST_CASE("approximation report Hutchinson fallback above n = 500") {
  const Eigen::Index n = 520;
  Rng rng(733);
  Eigen::MatrixXd b = testutil::gaussian_matrix(n, n, rng);
  Eigen::MatrixXd a = (b + b.transpose()) / (2.0 * std::sqrt(2.0 * n));
  SteinFunction sf = make_linear_function(a);
  SteinReport report = approximation_report(sf, 1000, 739);
  CHECK_FALSE(report.a_bar.has_value());
  // 64 Rademacher probes estimate ||A^s||_F^2 within a modest factor
  const double truth = a.squaredNorm();
  CHECK(report.a_bar_sym_frob_sq == doctest::Approx(truth).epsilon(0.35));
  // Rayleigh-Ritz probe estimate cannot exceed the true operator norm by much
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double op = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(report.a_bar_sym_op <= op * 1.05);
  CHECK(report.a_bar_sym_op >= 0.2 * op);
}

TEST_CASE("least-squares pivot variance matches 1/(1-gamma)") {
  // n = 750, p = 375: empirical variance of the residual-studentized pivot
  // sqrt(n)(theta-hat - theta)/... approaches 1/(1 - 0.5) = 2.
  const Eigen::Index n = 750;
  const Eigen::Index p = 375;
  const int reps = 2000;
  CovarianceSpec cov = CovarianceSpec::identity(p);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta.head(5).setOnes();
  const double theta = beta(0);

  std::vector<double> pivots(reps);
  parallel_for(reps, [&](long rep) {
    Rng rng = Rng::child(601, static_cast<std::uint64_t>(rep));
    RegressionInstance inst;
    inst.x = sample_design(cov, n, rng);
    Eigen::VectorXd eps = testutil::gaussian_vector(n, rng);
    inst.y = inst.x * beta + eps;
    inst.truth = Truth{beta, 1.0, cov};
    FitResult fr = fit(inst, LassoPenalty{0.0}, {});
    Direction dir = normalize_direction(Eigen::VectorXd::Unit(p, 0), cov, inst.x);
    // sqrt(n) (theta-hat - theta) scaled through the pivot with V0 = ||r||^2:
    // pivot = (n - df)(theta-hat - theta)/||r||, and for OLS theta-hat - theta
    // has conditional variance ||r||^2/((n-p)...) times the design factor.
    pivots[static_cast<std::size_t>(rep)] =
        std::sqrt(static_cast<double>(n)) *
        pivot(fr, dir, LassoPenalty{0.0}, inst, theta, V0Choice::resid) /
        std::sqrt(static_cast<double>(n) - static_cast<double>(p));
  });
  double mean = 0.0;
  for (double v : pivots) mean += v;
  mean /= reps;
  double var = 0.0;
  for (double v : pivots) var += (v - mean) * (v - mean);
  var /= reps - 1;
  CHECK(var == doctest::Approx(2.0).epsilon(0.10));
}

TEST_CASE("theta-hat estimating equation is unbiased at small size") {
  // quick version of the acceptance-run check, 400 reps at n=60, p=30
  const Eigen::Index n = 60;
  const Eigen::Index p = 30;
  const int reps = 400;
  CovarianceSpec cov = CovarianceSpec::identity(p);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta.head(6).setOnes();
  Penalty pen = LassoPenalty{0.2};
  const double theta = beta(0);

  std::vector<double> values(reps);
  parallel_for(reps, [&](long rep) {
    Rng rng = Rng::child(607, static_cast<std::uint64_t>(rep));
    RegressionInstance inst;
    inst.x = sample_design(cov, n, rng);
    inst.y = inst.x * beta + testutil::gaussian_vector(n, rng);
    inst.truth = Truth{beta, 1.0, cov};
    FitResult fr = fit(inst, pen, {});
    Direction dir = normalize_direction(Eigen::VectorXd::Unit(p, 0), cov, inst.x);
    const double df = effective_df(fr, pen, inst);
    values[static_cast<std::size_t>(rep)] =
        (static_cast<double>(n) - df) * (theta_hat(fr, dir, pen, inst) - theta);
  });
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= reps;
  double sd = 0.0;
  for (double v : values) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / (reps - 1));
  CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("v-check concentrates near V-hat(theta) in a clean regime") {
  const Eigen::Index n = 120;
  const Eigen::Index p = 60;
  const int reps = 200;
  CovarianceSpec cov = CovarianceSpec::identity(p);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta.head(8).setOnes();
  Penalty pen = LassoPenalty{0.25};
  std::vector<double> gaps(reps);
  parallel_for(reps, [&](long rep) {
    Rng rng = Rng::child(613, static_cast<std::uint64_t>(rep));
    RegressionInstance inst;
    inst.x = sample_design(cov, n, rng);
    inst.y = inst.x * beta + testutil::gaussian_vector(n, rng);
    inst.truth = Truth{beta, 1.0, cov};
    FitResult fr = fit(inst, pen, {});
    Direction dir = normalize_direction(Eigen::VectorXd::Unit(p, 0), cov, inst.x);
    VarianceEstimates ve = variance_estimates(fr, dir, pen, inst);
    const double truth_value = ve.v_hat(beta(0));
    gaps[static_cast<std::size_t>(rep)] =
        std::abs(ve.v_check - truth_value) / truth_value;
  });
  std::sort(gaps.begin(), gaps.end());
  CHECK(gaps[reps / 2] < 0.05);  // median relative gap
}

TEST_CASE("random directions: pivot normality whenever item (iv) is small") {
  // Directions drawn as unit vectors mapped through Sigma^{1/2}: whenever
  // the median directional share <a0,h>^2 n / ||r||^2 is below 0.05, the
  // residual-studentized pivot passes a KS < 0.1 normality check.
  ExperimentConfig config;
  config.n = 150;
  config.p = 75;
  config.sigma = 1.0;
  config.beta_spec = BetaSparse{8, 1.0};
  config.cov_spec = CovIdentity{};
  config.penalty_grid = {LassoPenalty{0.2}};
  config.direction_spec = DirectionRandomSphere{2, 929};
  config.reps = 256;
  config.master_seed = 929;
  config.tol = 1e-9;

  ExperimentResult result = run_experiment(config);
  REQUIRE(result.failed_reps == 0);
  const double n = static_cast<double>(config.n);
  for (int dir_id = 0; dir_id < 2; ++dir_id) {
    std::vector<double> item_iv, pivots;
    for (const RepRecord& rec : result.records) {
      if (rec.direction_id != dir_id) continue;
      const double n_minus_df = n - rec.df;
      const double resid_sq = rec.tau_hat_sq * n_minus_df * n_minus_df / n;
      item_iv.push_back(rec.dir_err_sq * n / resid_sq);
      pivots.push_back(rec.pivot_resid);
    }
    std::sort(item_iv.begin(), item_iv.end());
    const double median_iv = item_iv[item_iv.size() / 2];
    INFO("direction ", dir_id, " median item(iv) ", median_iv);
    if (median_iv < 0.05) {
      CHECK(ks_normal(pivots) < 0.1);
    }
    CHECK(median_iv < 0.05);  // this clean sparse design has no spike
  }
}

TEST_CASE("spike diagnostics stay near their no-spike limits when sparse") {
  const Eigen::Index n = 300;
  const Eigen::Index p = 60;
  const int reps = 60;
  CovarianceSpec cov = CovarianceSpec::identity(p);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta.head(5).setConstant(1.0);
  Penalty pen = LassoPenalty{0.15};
  Rng dir_rng(617);
  Eigen::VectorXd generic = testutil::gaussian_vector(p, dir_rng);

  std::vector<double> item_iv(reps), ratio_vhat(reps), ratio_vcheck(reps);
  parallel_for(reps, [&](long rep) {
    Rng rng = Rng::child(619, static_cast<std::uint64_t>(rep));
    RegressionInstance inst;
    inst.x = sample_design(cov, n, rng);
    inst.y = inst.x * beta + testutil::gaussian_vector(n, rng);
    inst.truth = Truth{beta, 1.0, cov};
    FitResult fr = fit(inst, pen, {});
    Direction dir = normalize_direction(generic, cov, inst.x);
    SpikeDiagnostics diag = spike_diagnostics(fr, dir, pen, inst);
    item_iv[static_cast<std::size_t>(rep)] = *diag.item_iv;
    ratio_vhat[static_cast<std::size_t>(rep)] = *diag.ratio_vhat;
    ratio_vcheck[static_cast<std::size_t>(rep)] = diag.ratio_vcheck;
  });
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(item_iv) < 0.1);            // item (iv) -> 0
  CHECK(std::abs(median(ratio_vhat) - 1.0) < 0.1);    // item (vi) -> 1
  CHECK(std::abs(median(ratio_vcheck) - 1.0) < 0.1);  // item (vii) -> 1
}
