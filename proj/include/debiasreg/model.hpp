#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>

#include "debiasreg/rng.hpp"

namespace debiasreg {

// Known design covariance. Validated symmetric and strictly positive
// definite at construction; the Cholesky factor is kept for solves.
// No jitter is applied on failure: a covariance that does not factor is
// rejected outright.
class CovarianceSpec {
 public:
  explicit CovarianceSpec(Eigen::MatrixXd sigma);

  static CovarianceSpec identity(Eigen::Index p);

  Eigen::Index dim() const { return sigma_.rows(); }
  const Eigen::MatrixXd& matrix() const { return sigma_; }
  const Eigen::MatrixXd& cholesky_lower() const { return chol_lower_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;  // Sigma^{-1} v
  Eigen::MatrixXd solve(const Eigen::MatrixXd& m) const;

  // a' Sigma^{-1} a
  double inverse_quadratic(const Eigen::VectorXd& a) const;
  // h' Sigma h
  double quadratic(const Eigen::VectorXd& h) const;

 private:
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd chol_lower_;
};

struct Truth {
  Eigen::VectorXd beta;
  double sigma = 1.0;  // noise standard deviation
  CovarianceSpec cov;
};

struct RegressionInstance {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::optional<Truth> truth;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }

  void validate() const;
};

// Direction of interest after normalization: ||Sigma^{-1/2} a0|| = 1,
// <a0, u0> = 1 and z0 = X u0.
struct Direction {
  Eigen::VectorXd a0;
  Eigen::VectorXd u0;
  Eigen::VectorXd z0;
};

// Draws n iid N(0, Sigma) rows as G L' with L the Cholesky factor of Sigma
// and G filled row by row with standard normals. Deterministic given seed.
Eigen::MatrixXd sample_design(const CovarianceSpec& cov, Eigen::Index n,
                              std::uint64_t seed);
Eigen::MatrixXd sample_design(const CovarianceSpec& cov, Eigen::Index n,
                              Rng& rng);

Direction normalize_direction(const Eigen::VectorXd& a,
                              const CovarianceSpec& cov,
                              const Eigen::MatrixXd& x);

// X = XQ0 + z0 a0'; returns (z0, XQ0) with XQ0 = X (I - u0 a0').
std::pair<Eigen::VectorXd, Eigen::MatrixXd> decompose_design(
    const Eigen::MatrixXd& x, const Direction& dir);

// Sigma with Sigma^{-1} = I + 0.9 s^{-1/2} (e1 v' + v e1') for a sign
// vector v with entries in {-1, 0, +1}.
CovarianceSpec figure1_covariance(Eigen::Index s,
                                  const Eigen::VectorXd& sign_vector);

// Sigma = W / scale where W = G'G for a dof x p standard normal G.
CovarianceSpec figure2_wishart_covariance(Eigen::Index p, Eigen::Index dof,
                                          double scale, std::uint64_t seed);

}  // namespace debiasreg
