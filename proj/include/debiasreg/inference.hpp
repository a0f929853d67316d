#pragma once

#include <optional>
#include <string>

#include "debiasreg/debias.hpp"
#include "debiasreg/model.hpp"
#include "debiasreg/penalty.hpp"

namespace debiasreg {

struct QuadraticInTheta {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double operator()(double theta) const {
    return (c2 * theta + c1) * theta + c0;
  }
};

struct VarianceEstimates {
  double v_resid = 0.0;        // ||y - X beta-hat||^2
  QuadraticInTheta v_hat;      // V-hat(theta)
  double v_check = 0.0;        // V-hat at <a0, beta-debias>
  QuadraticInTheta v_star;     // V*(theta) = ||r||^2 + tr[grad f(z0)^2]
  double n_minus_df = 0.0;
  double frob_i_minus_h_sq = 0.0;
  double a0_dot_beta = 0.0;
  double z0_dot_residual = 0.0;
  double w0_dot_residual = 0.0;
};

VarianceEstimates variance_estimates(const FitResult& fit_result,
                                     const Direction& dir, const Penalty& pen,
                                     const RegressionInstance& instance);

enum class V0Choice { resid, vhat, vcheck, vstar };

// Studentized pivot (n - df)(theta-hat - theta) / V0^{1/2}; vhat and vstar
// are evaluated at theta_true. Simulation use only (requires the truth).
double pivot(const FitResult& fit_result, const Direction& dir,
             const Penalty& pen, const RegressionInstance& instance,
             double theta_true, V0Choice v0);
double pivot_from(const VarianceEstimates& ve, double theta_hat_value,
                  double theta_true, V0Choice v0);

enum class CiKind { narrow, spike, quadratic };

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  CiKind kind = CiKind::narrow;
  double alpha = 0.0;
  bool valid = true;
  std::string reason;  // set when valid == false

  double width() const { return hi - lo; }
  bool contains(double theta) const { return valid && lo <= theta && theta <= hi; }
};

ConfidenceInterval ci_narrow(const FitResult& fit_result, const Direction& dir,
                             const Penalty& pen,
                             const RegressionInstance& instance, double alpha);
ConfidenceInterval ci_spike(const FitResult& fit_result, const Direction& dir,
                            const Penalty& pen,
                            const RegressionInstance& instance, double alpha);
ConfidenceInterval ci_quadratic(const FitResult& fit_result,
                                const Direction& dir, const Penalty& pen,
                                const RegressionInstance& instance,
                                double alpha);

// Cheaper entry points for the simulation loop (quantities already in hand).
ConfidenceInterval ci_narrow_from(const VarianceEstimates& ve, double center,
                                  double alpha);
ConfidenceInterval ci_spike_from(const VarianceEstimates& ve, double center,
                                 double alpha);
ConfidenceInterval ci_quadratic_from(const VarianceEstimates& ve,
                                     double alpha);

// Default interval per the reporting policy: quadratic when its dominant
// coefficient is positive, else the spike interval.
ConfidenceInterval ci_default(const FitResult& fit_result, const Direction& dir,
                              const Penalty& pen,
                              const RegressionInstance& instance, double alpha);

struct SpikeDiagnostics {
  double item_v = 0.0;        // <z0,r>^2 / (n ||r||^2), observable
  double ratio_vcheck = 0.0;  // V-check / ||r||^2
  double w0_term_share = 0.0; // <w0,r>^2 / V-hat(theta or center)
  std::optional<double> item_iv;     // <a0,h>^2 n / ||r||^2 (needs truth)
  std::optional<double> ratio_vhat;  // V-hat(theta_true) / ||r||^2
};

SpikeDiagnostics spike_diagnostics(const FitResult& fit_result,
                                   const Direction& dir, const Penalty& pen,
                                   const RegressionInstance& instance);

}  // namespace debiasreg
