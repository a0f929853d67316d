#include "debiasreg/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "debiasreg/normal.hpp"

namespace debiasreg {

VarianceEstimates variance_estimates(const FitResult& fit_result,
                                     const Direction& dir, const Penalty& pen,
                                     const RegressionInstance& instance) {
  const double n = static_cast<double>(instance.n());
  DebiasPieces pieces = debias_pieces(fit_result, pen, dir, instance);
  if (pieces.df >= n - 1e-8) throw std::runtime_error("degenerate correction");

  VarianceEstimates ve;
  ve.n_minus_df = n - pieces.df;
  ve.frob_i_minus_h_sq = pieces.frob_i_minus_h_sq;
  ve.v_resid = fit_result.residual.squaredNorm();
  ve.a0_dot_beta = dir.a0.dot(fit_result.beta);
  ve.z0_dot_residual = pieces.z0_dot_residual;
  ve.w0_dot_residual = pieces.w0_dot_residual;

  // V-hat(theta) = ||r||^2 + ||I-H||_F^2 (<a0,beta-hat> - theta)^2.
  const double f = pieces.frob_i_minus_h_sq;
  ve.v_hat.c2 = f;
  ve.v_hat.c1 = -2.0 * f * ve.a0_dot_beta;
  ve.v_hat.c0 = ve.v_resid + f * ve.a0_dot_beta * ve.a0_dot_beta;

  const double center = ve.a0_dot_beta + ve.z0_dot_residual / ve.n_minus_df;
  ve.v_check = ve.v_hat(center);

  // V*(theta) = ||r||^2 + tr[(grad f)^2] where, with c = <a0,beta-hat> - theta,
  // tr[(grad f)^2] = c^2 ||I-H||_F^2 + 2 c r'(I-H)w0 + (w0'r)^2.
  const double cross = pieces.residual_i_minus_h_w0;
  ve.v_star.c2 = f;
  ve.v_star.c1 = -2.0 * f * ve.a0_dot_beta - 2.0 * cross;
  ve.v_star.c0 = ve.v_resid + f * ve.a0_dot_beta * ve.a0_dot_beta +
                 2.0 * cross * ve.a0_dot_beta +
                 ve.w0_dot_residual * ve.w0_dot_residual;
  return ve;
}

double pivot_from(const VarianceEstimates& ve, double theta_hat_value,
                  double theta_true, V0Choice v0) {
  double variance = 0.0;
  switch (v0) {
    case V0Choice::resid: variance = ve.v_resid; break;
    case V0Choice::vhat: variance = ve.v_hat(theta_true); break;
    case V0Choice::vcheck: variance = ve.v_check; break;
    case V0Choice::vstar: variance = ve.v_star(theta_true); break;
  }
  if (!(variance > 0.0)) throw std::runtime_error("invalid variance");
  return ve.n_minus_df * (theta_hat_value - theta_true) / std::sqrt(variance);
}

double pivot(const FitResult& fit_result, const Direction& dir,
             const Penalty& pen, const RegressionInstance& instance,
             double theta_true, V0Choice v0) {
  VarianceEstimates ve = variance_estimates(fit_result, dir, pen, instance);
  const double th =
      ve.a0_dot_beta +
      (ve.z0_dot_residual + ve.w0_dot_residual) / ve.n_minus_df;
  return pivot_from(ve, th, theta_true, v0);
}

namespace {

double debias_center(const VarianceEstimates& ve) {
  return ve.a0_dot_beta + ve.z0_dot_residual / ve.n_minus_df;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1)");
  }
}

}  // namespace

ConfidenceInterval ci_narrow_from(const VarianceEstimates& ve, double center,
                                  double alpha) {
  check_alpha(alpha);
  const double z = normal_two_sided_quantile(alpha);
  const double half = z * std::sqrt(ve.v_resid) / ve.n_minus_df;
  ConfidenceInterval ci;
  ci.kind = CiKind::narrow;
  ci.alpha = alpha;
  ci.lo = center - half;
  ci.hi = center + half;
  return ci;
}

ConfidenceInterval ci_spike_from(const VarianceEstimates& ve, double center,
                                 double alpha) {
  check_alpha(alpha);
  const double z = normal_two_sided_quantile(alpha);
  const double d = ve.n_minus_df;
  const double half =
      z * std::sqrt(ve.v_resid / (d * d) + ve.frob_i_minus_h_sq *
                                               ve.z0_dot_residual *
                                               ve.z0_dot_residual /
                                               (d * d * d * d));
  ConfidenceInterval ci;
  ci.kind = CiKind::spike;
  ci.alpha = alpha;
  ci.lo = center - half;
  ci.hi = center + half;
  return ci;
}

ConfidenceInterval ci_quadratic_from(const VarianceEstimates& ve,
                                     double alpha) {
  check_alpha(alpha);
  const double z = normal_two_sided_quantile(alpha);
  const double d = ve.n_minus_df;
  const double t = ve.z0_dot_residual;
  const double f = ve.frob_i_minus_h_sq;
  const double rsq = ve.v_resid;

  ConfidenceInterval ci;
  ci.kind = CiKind::quadratic;
  ci.alpha = alpha;

  // In u = <a0,beta-hat> - theta the event boundary is
  // (d^2 - z^2 f) u^2 + 2 d t u + (t^2 - z^2 ||r||^2) = 0.
  const double a = d * d - z * z * f;
  const double b = 2.0 * d * t;
  const double c = t * t - z * z * rsq;
  if (!(a > 0.0)) {
    ci.valid = false;
    ci.reason = "unbounded CI";
    return ci;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    // Impossible for a > 0 and positive V-hat; flags a numerical breakdown.
    throw std::logic_error("quadratic CI discriminant negative");
  }
  double u1, u2;
  if (b == 0.0) {
    const double root = std::sqrt(disc) / (2.0 * a);
    u1 = -root;
    u2 = root;
  } else {
    const double q = -0.5 * (b + (b > 0 ? 1.0 : -1.0) * std::sqrt(disc));
    u1 = q / a;
    u2 = c / q;
    if (u1 > u2) std::swap(u1, u2);
  }
  // theta = <a0,beta-hat> - u.
  ci.lo = ve.a0_dot_beta - u2;
  ci.hi = ve.a0_dot_beta - u1;
  return ci;
}

ConfidenceInterval ci_narrow(const FitResult& fit_result, const Direction& dir,
                             const Penalty& pen,
                             const RegressionInstance& instance, double alpha) {
  VarianceEstimates ve = variance_estimates(fit_result, dir, pen, instance);
  return ci_narrow_from(ve, debias_center(ve), alpha);
}

ConfidenceInterval ci_spike(const FitResult& fit_result, const Direction& dir,
                            const Penalty& pen,
                            const RegressionInstance& instance, double alpha) {
  VarianceEstimates ve = variance_estimates(fit_result, dir, pen, instance);
  return ci_spike_from(ve, debias_center(ve), alpha);
}

ConfidenceInterval ci_quadratic(const FitResult& fit_result,
                                const Direction& dir, const Penalty& pen,
                                const RegressionInstance& instance,
                                double alpha) {
  VarianceEstimates ve = variance_estimates(fit_result, dir, pen, instance);
  return ci_quadratic_from(ve, alpha);
}

ConfidenceInterval ci_default(const FitResult& fit_result, const Direction& dir,
                              const Penalty& pen,
                              const RegressionInstance& instance, double alpha) {
  VarianceEstimates ve = variance_estimates(fit_result, dir, pen, instance);
  ConfidenceInterval quad = ci_quadratic_from(ve, alpha);
  if (quad.valid) return quad;
  return ci_spike_from(ve, debias_center(ve), alpha);
}

SpikeDiagnostics spike_diagnostics(const FitResult& fit_result,
                                   const Direction& dir, const Penalty& pen,
                                   const RegressionInstance& instance) {
  const double n = static_cast<double>(instance.n());
  VarianceEstimates ve = variance_estimates(fit_result, dir, pen, instance);
  SpikeDiagnostics diag;
  diag.item_v =
      ve.z0_dot_residual * ve.z0_dot_residual / (n * ve.v_resid);
  diag.ratio_vcheck = ve.v_check / ve.v_resid;
  if (instance.truth) {
    const double theta = dir.a0.dot(instance.truth->beta);
    const double a0_h = ve.a0_dot_beta - theta;
    diag.item_iv = a0_h * a0_h * n / ve.v_resid;
    diag.ratio_vhat = ve.v_hat(theta) / ve.v_resid;
    diag.w0_term_share =
        ve.w0_dot_residual * ve.w0_dot_residual / ve.v_hat(theta);
  } else {
    diag.w0_term_share =
        ve.w0_dot_residual * ve.w0_dot_residual / ve.v_check;
  }
  return diag;
}

}  // namespace debiasreg
