#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "debiasreg/model.hpp"
#include "debiasreg/penalty.hpp"
#include "debiasreg/rng.hpp"

namespace testutil {

using namespace debiasreg;

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.gaussian();
  return v;
}

// Generic instance with known truth: identity covariance, sparse beta.
inline RegressionInstance random_instance(Eigen::Index n, Eigen::Index p,
                                          Eigen::Index s, double sigma,
                                          std::uint64_t seed) {
  Rng rng(seed);
  RegressionInstance inst;
  CovarianceSpec cov = CovarianceSpec::identity(p);
  inst.x = gaussian_matrix(n, p, rng);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < s && j < p; ++j) {
    beta(j) = 1.0 + 0.25 * static_cast<double>(j % 3);
  }
  inst.y = inst.x * beta + sigma * gaussian_vector(n, rng);
  inst.truth = Truth{beta, sigma, cov};
  return inst;
}

// A strictly convex, twice continuously differentiable custom penalty:
// pseudo-Huber tau^2 (sqrt(1 + (b/tau)^2) - 1) plus a small quadratic term.
inline SmoothPenalty pseudo_huber_penalty(double weight, double tau,
                                          double quad = 0.05) {
  SmoothPenalty pen;
  pen.value = [weight, tau, quad](const Eigen::VectorXd& b) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const double u = b(j) / tau;
      total += weight * tau * tau * (std::sqrt(1.0 + u * u) - 1.0);
      total += 0.5 * quad * b(j) * b(j);
    }
    return total;
  };
  pen.gradient = [weight, tau, quad](const Eigen::VectorXd& b) {
    Eigen::VectorXd g(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const double u = b(j) / tau;
      g(j) = weight * b(j) / std::sqrt(1.0 + u * u) + quad * b(j);
    }
    return g;
  };
  pen.hessian = [weight, tau, quad](const Eigen::VectorXd& b) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(b.size(), b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const double u = b(j) / tau;
      h(j, j) = weight * std::pow(1.0 + u * u, -1.5) + quad;
    }
    return h;
  };
  pen.strong_convexity_mu = 0.0;
  return pen;
}

// Finite-difference gradient of z -> X(z) beta-hat - y(z) along the z0
// fiber, holding (X Q0, eps) fixed; independent of the closed forms.
inline Eigen::MatrixXd finite_diff_grad_f(const RegressionInstance& inst,
                                          const Penalty& pen,
                                          const Direction& dir, double step,
                                          double tol = 1e-11) {
  if (!inst.truth) throw std::invalid_argument("needs truth");
  const Eigen::Index n = inst.n();
  const Eigen::VectorXd& beta = inst.truth->beta;
  const double a0_beta = dir.a0.dot(beta);
  // Recover the fixed fiber data from the observed instance.
  Eigen::MatrixXd xq0 = inst.x - dir.z0 * dir.a0.transpose();
  Eigen::VectorXd eps = inst.y - inst.x * beta;

  FitOptions opts;
  opts.tol = tol;

  auto f_at = [&](const Eigen::VectorXd& z) {
    RegressionInstance shifted;
    shifted.x = xq0 + z * dir.a0.transpose();
    shifted.y = xq0 * beta + z * a0_beta + eps;
    FitResult fr = fit(shifted, pen, opts);
    return (-fr.residual).eval();
  };

  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd zp = dir.z0, zm = dir.z0;
  for (Eigen::Index i = 0; i < n; ++i) {
    zp(i) += step;
    zm(i) -= step;
    jac.col(i) = (f_at(zp) - f_at(zm)) / (2.0 * step);
    zp(i) = dir.z0(i);
    zm(i) = dir.z0(i);
  }
  return jac;  // = grad f(z0)' as an operator on perturbations
}

}  // namespace testutil
