#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "debiasreg/inference.hpp"
#include "debiasreg/model.hpp"
#include "debiasreg/penalty.hpp"

namespace debiasreg {

// --- experiment configuration ---------------------------------------------

struct BetaExplicit { Eigen::VectorXd beta; };
struct BetaSparse { Eigen::Index s = 0; double value = 1.0; };
// First coordinate beta_first, random +-value signs on coordinates 2..s.
struct BetaFigure1 { Eigen::Index s = 0; double first = 20.0; double value = 1.0; };
struct BetaGrouped { Eigen::Index active_groups = 0; double value = 1.0; };
using BetaSpec = std::variant<BetaExplicit, BetaSparse, BetaFigure1, BetaGrouped>;

struct CovIdentity {};
struct CovFigure1 {};  // couples e1 with the sign pattern of beta
struct CovFigure2Wishart { Eigen::Index dof = 0; double scale = 0.0; };
struct CovExplicit { Eigen::MatrixXd sigma; };
using CovSpec = std::variant<CovIdentity, CovFigure1, CovFigure2Wishart, CovExplicit>;

struct DirectionCanonical { Eigen::Index index = 0; };  // zero-based
struct DirectionExplicit { Eigen::VectorXd a; };
// Random unit vectors mapped through the Cholesky factor of Sigma.
struct DirectionRandomSphere { Eigen::Index count = 1; std::uint64_t seed = 0; };
using DirectionSpec =
    std::variant<DirectionCanonical, DirectionExplicit, DirectionRandomSphere>;

struct ExperimentConfig {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  double sigma = 1.0;  // noise standard deviation
  BetaSpec beta_spec = BetaSparse{};
  CovSpec cov_spec = CovIdentity{};
  std::vector<Penalty> penalty_grid;
  DirectionSpec direction_spec = DirectionCanonical{};
  long reps = 1;
  std::uint64_t master_seed = 0;
  V0Choice v0_choice = V0Choice::vcheck;
  double alpha = 0.05;
  double tol = 1e-9;
  long max_iter = 200000;
};

// --- results ----------------------------------------------------------------

struct RepRecord {
  long rep = 0;
  int penalty_id = 0;
  double lambda = 0.0;  // scalar tuning value of the grid entry
  int direction_id = 0;
  double df = 0.0;
  long active_size = 0;
  double theta_hat = 0.0;
  double pivot_resid = 0.0;
  double pivot_vhat = 0.0;
  double pivot_vcheck = 0.0;
  ConfidenceInterval ci_narrow;
  ConfidenceInterval ci_spike;
  ConfidenceInterval ci_quad;
  double pred_err = 0.0;    // h' Sigma h
  double dir_err_sq = 0.0;  // <a0,h>^2
  double diag_item_v = 0.0;
  double w0_dot_r = 0.0;
  double theta_true = 0.0;
  double tau_hat_sq = 0.0;
};

struct Aggregate {
  int penalty_id = 0;
  int direction_id = 0;
  double pivot_sd_resid = 0.0, pivot_sd_vhat = 0.0, pivot_sd_vcheck = 0.0;
  double ks_resid = 0.0, ks_vhat = 0.0, ks_vcheck = 0.0;
  double coverage_narrow = 0.0, coverage_spike = 0.0, coverage_quad = 0.0;
  double mean_width_narrow = 0.0, mean_width_spike = 0.0, mean_width_quad = 0.0;
  double tau_hat_sq_mean = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  Eigen::VectorXd beta_true;
  std::vector<Direction> directions;  // built against a reference design
  std::vector<RepRecord> records;     // ordered by (rep, penalty, direction)
  std::vector<Aggregate> aggregates;  // ordered by (penalty, direction)
  long failed_reps = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// --- oracle and summary helpers ---------------------------------------------

struct OracleResult {
  Eigen::VectorXd beta_star;
  double excess_risk = 0.0;  // ||Sigma^{1/2}(beta* - beta)||^2
  double r_star = 0.0;       // sigma^2 + excess_risk
};

// argmin_b ||Sigma^{1/2}(beta - b)||^2/2 + g(b), by proximal gradient with
// step 1/||Sigma||_op (full gradient steps for smooth penalties).
OracleResult oracle_beta_star(const Eigen::VectorXd& beta,
                              const CovarianceSpec& cov, const Penalty& pen,
                              double tol, double sigma);

// Kolmogorov-Smirnov distance of the sample to N(0,1). At least 20 samples.
double ks_normal(const std::vector<double>& samples);

// Fraction of usable reps with |S-hat| <= kappa * n / 2 (per penalty id,
// or across all penalties when penalty_id < 0).
double sparsity_condition_rate(const ExperimentResult& result, double kappa,
                               int penalty_id = -1);

// Writes <prefix>_reps.csv, <prefix>_aggregate.csv and <prefix>_qq.csv with
// shortest-round-trip float formatting; byte-deterministic given the result.
void write_results(const ExperimentResult& result, const std::string& prefix);

}  // namespace debiasreg
