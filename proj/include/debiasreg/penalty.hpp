#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "debiasreg/model.hpp"

namespace debiasreg {

struct LassoPenalty {
  double lambda = 0.0;  // lambda = 0 degenerates to least squares
};

struct RidgePenalty {
  double mu = 0.0;
};

struct ElasticNetPenalty {
  double lambda = 0.0;
  double mu = 0.0;
};

struct GroupLassoPenalty {
  std::vector<std::vector<int>> groups;  // partition of {0..p-1}
  Eigen::VectorXd lambdas;               // one positive weight per group

  // lambda_k = lambda for every group.
  static GroupLassoPenalty equal_blocks(Eigen::Index p, Eigen::Index n_groups,
                                        double lambda);
};

struct SmoothPenalty {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
  double strong_convexity_mu = 0.0;
};

using Penalty = std::variant<LassoPenalty, RidgePenalty, ElasticNetPenalty,
                             GroupLassoPenalty, SmoothPenalty>;

// Checks variant invariants (positive tuning parameters, group partition)
// against the problem dimension.
void validate_penalty(const Penalty& pen, Eigen::Index p);

double penalty_value(const Penalty& pen, const Eigen::VectorXd& b);

struct FitOptions {
  double tol = 1e-10;
  long max_iter = 200000;
  const Eigen::VectorXd* warm_start = nullptr;
};

struct FitResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd residual;  // y - X beta
  double objective = 0.0;
  long iterations = 0;
  double kkt_max_violation = 0.0;
  double zero_threshold = 0.0;

  std::vector<int> active;         // S-hat, coordinate indices
  std::vector<int> active_groups;  // B-hat (group lasso only)

  // Slack of the inactive subgradient bound, per inactive coordinate
  // (lasso / elastic net / least squares limit) or inactive group.
  std::vector<int> inactive;
  Eigen::VectorXd strict_slacks;
};

struct NotConvergedError : std::runtime_error {
  NotConvergedError(std::string what, FitResult best_iterate)
      : std::runtime_error(std::move(what)), best(std::move(best_iterate)) {}
  FitResult best;
};

FitResult fit(const RegressionInstance& instance, const Penalty& pen,
              const FitOptions& opts = {});

struct KktReport {
  double max_violation = 0.0;
  std::vector<int> inactive;
  Eigen::VectorXd strict_slacks;
};

KktReport kkt_report(const FitResult& fit_result,
                     const RegressionInstance& instance, const Penalty& pen);

// Active-set threshold used everywhere: 1e-8 * max(1, ||beta||_inf).
double zero_threshold(const Eigen::VectorXd& beta);

}  // namespace debiasreg
