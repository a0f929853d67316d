#pragma once

#include <Eigen/Dense>
#include <optional>

#include "debiasreg/model.hpp"
#include "debiasreg/penalty.hpp"

namespace debiasreg {

struct HatSummary {
  double df = 0.0;                 // tr H-hat
  double frob_i_minus_h_sq = 0.0;  // ||I - H-hat||_F^2
};

// Effective degrees of freedom and ||I - H||_F^2 from factorized traces;
// never materializes the n x n matrix.
HatSummary hat_summary(const FitResult& fit_result, const Penalty& pen,
                       const RegressionInstance& instance);

double effective_df(const FitResult& fit_result, const Penalty& pen,
                    const RegressionInstance& instance);

// Dense H-hat. Refused for n > 2000; inference only ever needs the two
// scalars from hat_summary.
Eigen::MatrixXd hat_matrix(const FitResult& fit_result, const Penalty& pen,
                           const RegressionInstance& instance);

struct GroupShrinkageMatrix {
  Eigen::MatrixXd m;  // |S-hat| x |S-hat|, block diagonal over active groups
  bool ill_conditioned = false;  // some active group norm < 10 * zero_threshold
};

GroupShrinkageMatrix group_shrinkage_matrix(const FitResult& fit_result,
                                            const GroupLassoPenalty& pen,
                                            Eigen::Index n);

Eigen::VectorXd w0_vector(const FitResult& fit_result, const Penalty& pen,
                          const Direction& dir,
                          const RegressionInstance& instance);

// Gradient of z0 -> X beta-hat - y holding (X Q0, eps) fixed:
//   grad' = <a0,h> (I - H) + w0 (y - X beta-hat)'.
struct ResidualMapGradient {
  double a0_dot_h = 0.0;
  double frob_sq = 0.0;   // ||grad||_F^2
  double trace_sq = 0.0;  // tr[grad^2]
  std::optional<Eigen::MatrixXd> matrix;  // grad', filled when n <= 2000
};

// theta supplies <a0,h> = <a0,beta-hat> - theta; when absent it is taken
// from the instance truth. Errors with "theta required" if neither exists.
ResidualMapGradient residual_map_gradient(const FitResult& fit_result,
                                          const Penalty& pen,
                                          const Direction& dir,
                                          const RegressionInstance& instance,
                                          std::optional<double> theta = {},
                                          bool materialize = true);

// beta-hat + (n - df)^{-1} Sigma^{-1} X' (y - X beta-hat).
Eigen::VectorXd debiased_vector(const FitResult& fit_result,
                                const RegressionInstance& instance,
                                const CovarianceSpec& cov, double df);
Eigen::VectorXd debiased_vector(const FitResult& fit_result,
                                const Penalty& pen,
                                const RegressionInstance& instance,
                                const CovarianceSpec& cov);

// theta-hat = <a0, beta-hat> + (n - df)^{-1} <z0 + w0, y - X beta-hat>.
double theta_hat(const FitResult& fit_result, const Direction& dir,
                 const Penalty& pen, const RegressionInstance& instance);

// Central-difference derivative of y -> X beta-hat, one column per
// coordinate of y. Steps that cross a support change are retried with
// step/10 up to 3 times before failing with "nonsmooth point". step <= 0
// selects the default 1e-6 * (1 + ||y||_inf).
Eigen::MatrixXd finite_diff_hat_matrix(const RegressionInstance& instance,
                                       const Penalty& pen, double step = 0.0,
                                       double fit_tol = 1e-11);

struct DebiasReport {
  double df = 0.0;
  double frob_i_minus_h_sq = 0.0;
  Eigen::VectorXd w0;
  Eigen::VectorXd beta_debias;
  double theta_hat = 0.0;
  double w0_dot_residual = 0.0;
  bool interpolating = false;  // residual ~ 0; w0 set to zero by convention
};

DebiasReport debias_report(const FitResult& fit_result, const Penalty& pen,
                           const Direction& dir,
                           const RegressionInstance& instance,
                           const CovarianceSpec& cov);

// Scalars shared by the variance estimators, computed from one
// factorization of the active-set system.
struct DebiasPieces {
  double df = 0.0;
  double frob_i_minus_h_sq = 0.0;
  Eigen::VectorXd w0;
  double w0_dot_residual = 0.0;
  double z0_dot_residual = 0.0;
  double residual_i_minus_h_w0 = 0.0;  // r'(I - H) w0
  double w0_sq_norm = 0.0;
};

DebiasPieces debias_pieces(const FitResult& fit_result, const Penalty& pen,
                           const Direction& dir,
                           const RegressionInstance& instance);

}  // namespace debiasreg
