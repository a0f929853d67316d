#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "debiasreg/model.hpp"
#include "debiasreg/penalty.hpp"

namespace debiasreg {

// A test function f: R^n -> R^n for xi = z'f(z) - div f(z), z ~ N(0, I_n).
struct SteinFunction {
  enum class DivergenceMode { analytic, finite_difference };

  Eigen::Index dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  // Gradient convention: grad f = (Jacobian)', so div f = tr grad f.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> gradient;  // optional
  DivergenceMode mode = DivergenceMode::analytic;
  double fd_step_scale = 1e-5;  // per-coordinate step fd_step_scale*(1+|z_i|)
};

// Central-difference Jacobian transpose (= gradient) of f at z.
Eigen::MatrixXd finite_diff_gradient(const SteinFunction& sf,
                                     const Eigen::VectorXd& z);

double xi(const SteinFunction& sf, const Eigen::VectorXd& z);

// Single-sample unbiased estimate of Var[xi]: ||f(z)||^2 + tr[(grad f(z))^2].
double variance_estimator(const SteinFunction& sf, const Eigen::VectorXd& z);

struct SecondOrderCheck {
  double lhs = 0.0;  // MC E[xi^2]
  double rhs = 0.0;  // MC E[||f||^2 + tr(grad f)^2]
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  double z_score = 0.0;   // paired z-score of lhs - rhs
  double mean_xi = 0.0;
  double mean_xi_se = 0.0;
  long reps = 0;
};

SecondOrderCheck second_order_stein_check(const SteinFunction& sf, long reps,
                                          std::uint64_t seed);

struct SteinReport {
  double mc_mean_xi = 0.0;
  double mc_var_xi = 0.0;
  double mean_fsq = 0.0;           // E ||f||^2
  double mean_tr_grad_sq = 0.0;    // E tr[(grad f)^2]
  double mean_frob_grad_sq = 0.0;  // E ||grad f||_F^2
  Eigen::VectorXd mu_bar;          // E f(z)
  std::optional<Eigen::MatrixXd> a_bar;  // E grad f(z), stored for n <= 500
  double a_bar_sym_frob_sq = 0.0;  // ||A-bar^s||_F^2
  double a_bar_sym_op = 0.0;       // ||A-bar^s||_op
  double eps1_sq = 0.0;
  double eps1_bar_sq = 0.0;
  double eps12_sq = 0.0;
  double quadratic_clt_discriminant = 0.0;  // ||A^s||_op^2/(||mu||^2+||A^s||_F^2)
  long reps = 0;
};

SteinReport approximation_report(const SteinFunction& sf, long reps,
                                 std::uint64_t seed);

// --- test-function registry ---------------------------------------------

SteinFunction make_constant_function(Eigen::VectorXd mu);
SteinFunction make_linear_function(Eigen::MatrixXd a);
SteinFunction make_soft_threshold_function(Eigen::Index dim, double level);

// f(z) = X beta-hat - y for the penalized regression along the z0 fiber:
// X = XQ0 + z a0' and y = XQ0 beta + z <a0,beta> + eps are reassembled for
// each z, the model is refit and the closed-form gradient is used.
SteinFunction make_regression_function(Eigen::MatrixXd xq0,
                                       Eigen::VectorXd eps,
                                       Eigen::VectorXd beta,
                                       Eigen::VectorXd a0, Penalty pen,
                                       double tol = 1e-9);

struct RegistryEntry {
  std::string name;
  std::function<SteinFunction(Eigen::Index dim, std::uint64_t seed)> make;
};

const std::vector<RegistryEntry>& stein_registry();
SteinFunction make_registry_function(const std::string& name, Eigen::Index dim,
                                     std::uint64_t seed);

}  // namespace debiasreg
