#include <doctest.h>

#include <cmath>

#include "debiasreg/inference.hpp"
#include "debiasreg/normal.hpp"
#include "helpers.hpp"

using namespace debiasreg;

namespace {

Direction canonical_direction(const RegressionInstance& inst, Eigen::Index j) {
  return normalize_direction(Eigen::VectorXd::Unit(inst.p(), j),
                             inst.truth->cov, inst.x);
}

}  // namespace

TEST_CASE("normal quantile accuracy") {
  CHECK(normal_two_sided_quantile(0.05) ==
        doctest::Approx(1.959964).epsilon(1e-5));
  // round trip against the erfc-based cdf on a grid
  for (double p = 0.0005; p < 1.0; p += 0.0101) {
    const double x = normal_quantile(p);
    CHECK(std::abs(normal_cdf(x) - p) < 1e-12);
  }
  // bisection oracle on a handful of points
  for (double p : {0.001, 0.025, 0.4, 0.75, 0.995}) {
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    CHECK(std::abs(normal_quantile(p) - 0.5 * (lo + hi)) < 1e-10);
  }
}

TEST_CASE("variance estimates quadratic structure") {
  RegressionInstance inst = testutil::random_instance(25, 8, 3, 0.8, 201);
  Penalty pen = LassoPenalty{0.1};
  FitResult fr = fit(inst, pen, {});
  Direction dir = canonical_direction(inst, 0);
  VarianceEstimates ve = variance_estimates(fr, dir, pen, inst);

  // V-hat(<a0,beta-hat>) = ||r||^2, and V-hat >= ||r||^2 everywhere.
  CHECK(ve.v_hat(ve.a0_dot_beta) == doctest::Approx(ve.v_resid).epsilon(1e-12));
  Rng rng(202);
  for (int trial = 0; trial < 50; ++trial) {
    const double theta = 10.0 * rng.gaussian();
    CHECK(ve.v_hat(theta) >= ve.v_resid - 1e-10);
    if (std::abs(theta - ve.a0_dot_beta) > 1e-6) {
      CHECK(ve.v_hat(theta) > ve.v_resid);
    }
  }
  CHECK(ve.v_hat.c2 == doctest::Approx(ve.frob_i_minus_h_sq));
  // v_check is V-hat at the de-biased plug-in
  const double center = ve.a0_dot_beta + ve.z0_dot_residual / ve.n_minus_df;
  CHECK(ve.v_check == doctest::Approx(ve.v_hat(center)).epsilon(1e-12));
}

TEST_CASE("zero estimator variance display") {
  RegressionInstance inst = testutil::random_instance(30, 6, 3, 0.9, 203);
  const double lambda_max =
      (inst.x.transpose() * inst.y).cwiseAbs().maxCoeff() / inst.n();
  Penalty pen = LassoPenalty{1.2 * lambda_max};
  FitResult fr = fit(inst, pen, {});
  REQUIRE(fr.active.empty());
  Direction dir = canonical_direction(inst, 0);
  VarianceEstimates ve = variance_estimates(fr, dir, pen, inst);
  const double theta = dir.a0.dot(inst.truth->beta);
  const double expected =
      inst.y.squaredNorm() + 30.0 * theta * theta;
  CHECK(ve.v_hat(theta) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("pivot rejects a vanishing variance") {
  VarianceEstimates ve;
  ve.n_minus_df = 3.0;  // df < n but an exactly-zero residual norm
  ve.v_resid = 0.0;
  ve.a0_dot_beta = 0.5;
  CHECK_THROWS_WITH_AS(pivot_from(ve, 0.5, 0.5, V0Choice::resid),
                       "invalid variance", std::runtime_error);
}

TEST_CASE("narrow interval width and degenerate case") {
  RegressionInstance inst = testutil::random_instance(25, 6, 2, 0.7, 207);
  Penalty pen = LassoPenalty{0.1};
  FitResult fr = fit(inst, pen, {});
  Direction dir = canonical_direction(inst, 1);
  VarianceEstimates ve = variance_estimates(fr, dir, pen, inst);

  ConfidenceInterval ci = ci_narrow(fr, dir, pen, inst, 0.05);
  const double half =
      normal_two_sided_quantile(0.05) * std::sqrt(ve.v_resid) / ve.n_minus_df;
  CHECK(ci.width() == doctest::Approx(2.0 * half).epsilon(1e-12));

  // width scales as 1/(n - df) when the residual is held fixed
  VarianceEstimates scaled = ve;
  scaled.n_minus_df *= 2.0;
  ConfidenceInterval ci2 = ci_narrow_from(scaled, 0.0, 0.05);
  CHECK(ci2.width() == doctest::Approx(0.5 * ci.width()).epsilon(1e-12));

  VarianceEstimates point = ve;
  point.v_resid = 0.0;
  ConfidenceInterval degenerate = ci_narrow_from(point, 1.5, 0.05);
  CHECK(degenerate.lo == 1.5);
  CHECK(degenerate.hi == 1.5);
}

TEST_CASE("spike interval contains the narrow interval") {
  RegressionInstance inst = testutil::random_instance(25, 10, 4, 0.7, 209);
  Penalty pen = LassoPenalty{0.08};
  FitResult fr = fit(inst, pen, {});
  Direction dir = canonical_direction(inst, 0);
  ConfidenceInterval narrow = ci_narrow(fr, dir, pen, inst, 0.05);
  ConfidenceInterval spike = ci_spike(fr, dir, pen, inst, 0.05);
  CHECK(spike.lo <= narrow.lo + 1e-12);
  CHECK(spike.hi >= narrow.hi - 1e-12);

  // at an OLS fit z0'r = 0 and the two intervals coincide
  RegressionInstance tall = testutil::random_instance(30, 5, 2, 0.7, 210);
  FitResult ols = fit(tall, LassoPenalty{0.0}, {});
  Direction d2 = canonical_direction(tall, 0);
  ConfidenceInterval n2 = ci_narrow(ols, d2, LassoPenalty{0.0}, tall, 0.05);
  ConfidenceInterval s2 = ci_spike(ols, d2, LassoPenalty{0.0}, tall, 0.05);
  CHECK(s2.lo == doctest::Approx(n2.lo).epsilon(1e-10));
  CHECK(s2.hi == doctest::Approx(n2.hi).epsilon(1e-10));
}

TEST_CASE("quadratic interval - frozen root example") {
  // (10(1-theta)+2)^2 - (4 + 9(1-theta)^2) = 91 theta^2 - 222 theta + 131,
  // roots 1 and 131/91 (symbolic factorization oracle).
  VarianceEstimates ve;
  ve.n_minus_df = 10.0;
  ve.a0_dot_beta = 1.0;
  ve.z0_dot_residual = 2.0;
  ve.v_resid = 4.0;
  ve.frob_i_minus_h_sq = 9.0;
  ve.v_hat.c2 = 9.0;
  ve.v_hat.c1 = -18.0;
  ve.v_hat.c0 = 4.0 + 9.0;

  const double alpha_for_z1 = 2.0 * (1.0 - normal_cdf(1.0));
  ConfidenceInterval ci = ci_quadratic_from(ve, alpha_for_z1);
  REQUIRE(ci.valid);
  CHECK(ci.lo == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ci.hi == doctest::Approx(131.0 / 91.0).epsilon(1e-9));

  // endpoints are exact roots of the event polynomial
  auto poly = [&](double theta) {
    const double u = ve.a0_dot_beta - theta;
    const double lhs = ve.n_minus_df * u + ve.z0_dot_residual;
    return lhs * lhs - ve.v_hat(theta);
  };
  CHECK(std::abs(poly(ci.lo)) < 1e-8 * 131.0);
  CHECK(std::abs(poly(ci.hi)) < 1e-8 * 131.0);
}

TEST_CASE("quadratic interval reduces to the narrow one without curvature") {
  RegressionInstance inst = testutil::random_instance(25, 6, 2, 0.7, 211);
  Penalty pen = LassoPenalty{0.1};
  FitResult fr = fit(inst, pen, {});
  Direction dir = canonical_direction(inst, 2);
  VarianceEstimates ve = variance_estimates(fr, dir, pen, inst);
  VarianceEstimates flat = ve;
  flat.frob_i_minus_h_sq = 0.0;
  flat.v_hat.c2 = 0.0;
  flat.v_hat.c1 = 0.0;
  flat.v_hat.c0 = ve.v_resid;
  const double center = ve.a0_dot_beta + ve.z0_dot_residual / ve.n_minus_df;
  ConfidenceInterval quad = ci_quadratic_from(flat, 0.05);
  ConfidenceInterval narrow = ci_narrow_from(flat, center, 0.05);
  REQUIRE(quad.valid);
  CHECK(quad.lo == doctest::Approx(narrow.lo).epsilon(1e-10));
  CHECK(quad.hi == doctest::Approx(narrow.hi).epsilon(1e-10));
}

TEST_CASE("quadratic interval properties on fitted instances") {
  for (std::uint64_t seed : {213u, 214u, 215u}) {
    RegressionInstance inst = testutil::random_instance(30, 12, 4, 0.8, seed);
    Penalty pen = LassoPenalty{0.09};
    FitResult fr = fit(inst, pen, {});
    Direction dir = canonical_direction(inst, 0);
    VarianceEstimates ve = variance_estimates(fr, dir, pen, inst);
    ConfidenceInterval ci = ci_quadratic(fr, dir, pen, inst, 0.05);
    REQUIRE(ci.valid);
    CHECK(ci.lo <= ci.hi);

    // contains the simple de-biased point whenever valid
    const double center = ve.a0_dot_beta + ve.z0_dot_residual / ve.n_minus_df;
    CHECK(ci.contains(center));

    // endpoints solve the event equation
    auto poly = [&](double theta) {
      const double lhs =
          ve.n_minus_df * (ve.a0_dot_beta - theta) + ve.z0_dot_residual;
      return lhs * lhs -
             ve.v_hat(theta) * std::pow(normal_two_sided_quantile(0.05), 2);
    };
    const double scale = std::abs(ve.v_hat(ci.lo)) + ve.n_minus_df * ve.n_minus_df;
    CHECK(std::abs(poly(ci.lo)) < 1e-8 * scale);
    CHECK(std::abs(poly(ci.hi)) < 1e-8 * scale);
  }
}

TEST_CASE("quadratic interval goes invalid instead of clipping") {
  VarianceEstimates ve;
  ve.n_minus_df = 1.0;
  ve.a0_dot_beta = 0.0;
  ve.z0_dot_residual = 1.0;
  ve.v_resid = 1.0;
  ve.frob_i_minus_h_sq = 100.0;
  ve.v_hat.c2 = 100.0;
  ve.v_hat.c1 = 0.0;
  ve.v_hat.c0 = 1.0;
  ConfidenceInterval ci = ci_quadratic_from(ve, 0.05);
  CHECK_FALSE(ci.valid);
  CHECK(ci.reason == "unbounded CI");

  ConfidenceInterval fallback = ci_spike_from(ve, 0.0, 0.05);
  CHECK(fallback.valid);
}

TEST_CASE("spike diagnostics at the least-squares fit") {
  RegressionInstance inst = testutil::random_instance(30, 6, 3, 0.7, 217);
  FitResult fr = fit(inst, LassoPenalty{0.0}, {});
  Direction dir = canonical_direction(inst, 0);
  SpikeDiagnostics diag = spike_diagnostics(fr, dir, LassoPenalty{0.0}, inst);
  CHECK(std::abs(diag.item_v) < 1e-18);  // r is orthogonal to z0 in col(X)
  REQUIRE(diag.item_iv.has_value());
  REQUIRE(diag.ratio_vhat.has_value());
}
