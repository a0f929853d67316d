#include "debiasreg/model.hpp"

#include <cmath>
#include <stdexcept>

namespace debiasreg {

namespace {

void check_symmetric(const Eigen::MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double gap = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (gap > 1e-12 * scale) {
    throw std::invalid_argument("covariance is not symmetric");
  }
}

}  // namespace

CovarianceSpec::CovarianceSpec(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {
  if (sigma_.rows() != sigma_.cols() || sigma_.rows() < 1) {
    throw std::invalid_argument("covariance must be square and non-empty");
  }
  check_symmetric(sigma_);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("not positive definite");
  }
  chol_lower_ = llt.matrixL();
}

CovarianceSpec CovarianceSpec::identity(Eigen::Index p) {
  return CovarianceSpec(Eigen::MatrixXd::Identity(p, p));
}

Eigen::VectorXd CovarianceSpec::solve(const Eigen::VectorXd& v) const {
  Eigen::VectorXd w = chol_lower_.triangularView<Eigen::Lower>().solve(v);
  return chol_lower_.transpose().triangularView<Eigen::Upper>().solve(w);
}

Eigen::MatrixXd CovarianceSpec::solve(const Eigen::MatrixXd& m) const {
  Eigen::MatrixXd w = chol_lower_.triangularView<Eigen::Lower>().solve(m);
  return chol_lower_.transpose().triangularView<Eigen::Upper>().solve(w);
}

double CovarianceSpec::inverse_quadratic(const Eigen::VectorXd& a) const {
  Eigen::VectorXd w = chol_lower_.triangularView<Eigen::Lower>().solve(a);
  return w.squaredNorm();
}

double CovarianceSpec::quadratic(const Eigen::VectorXd& h) const {
  return h.dot(sigma_ * h);
}

void RegressionInstance::validate() const {
  if (n() < 1 || p() < 1) {
    throw std::invalid_argument("instance needs n >= 1 and p >= 1");
  }
  if (y.size() != n()) {
    throw std::invalid_argument("y and X have inconsistent dimensions");
  }
  if (!y.allFinite() || !x.allFinite()) {
    throw std::invalid_argument("invalid input: non-finite data");
  }
  if (truth) {
    if (truth->beta.size() != p() || truth->cov.dim() != p()) {
      throw std::invalid_argument("truth dimensions inconsistent with X");
    }
    if (!(truth->sigma > 0.0)) {
      throw std::invalid_argument("truth noise sd must be positive");
    }
  }
}

Eigen::MatrixXd sample_design(const CovarianceSpec& cov, Eigen::Index n,
                              Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_design: n >= 1 required");
  const Eigen::Index p = cov.dim();
  Eigen::MatrixXd g(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) g(i, j) = rng.gaussian();
  }
  return g * cov.cholesky_lower().transpose();
}

Eigen::MatrixXd sample_design(const CovarianceSpec& cov, Eigen::Index n,
                              std::uint64_t seed) {
  Rng rng(seed);
  return sample_design(cov, n, rng);
}

Direction normalize_direction(const Eigen::VectorXd& a,
                              const CovarianceSpec& cov,
                              const Eigen::MatrixXd& x) {
  if (a.size() != cov.dim() || a.size() != x.cols()) {
    throw std::invalid_argument("direction dimension mismatch");
  }
  const double norm_sq = cov.inverse_quadratic(a);
  if (!(norm_sq > 0.0) || a.isZero(0.0)) {
    throw std::invalid_argument("zero direction");
  }
  Direction dir;
  dir.a0 = a / std::sqrt(norm_sq);
  // After normalization <a0, Sigma^{-1} a0> = 1, so u0 = Sigma^{-1} a0.
  dir.u0 = cov.solve(dir.a0);
  const double inner = dir.a0.dot(dir.u0);
  dir.u0 /= inner;
  dir.z0 = x * dir.u0;
  return dir;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> decompose_design(
    const Eigen::MatrixXd& x, const Direction& dir) {
  Eigen::VectorXd z0 = x * dir.u0;
  Eigen::MatrixXd xq0 = x - z0 * dir.a0.transpose();
  return {std::move(z0), std::move(xq0)};
}

CovarianceSpec figure1_covariance(Eigen::Index s,
                                  const Eigen::VectorXd& sign_vector) {
  if (s < 1) throw std::invalid_argument("figure1_covariance: s >= 1");
  const Eigen::Index p = sign_vector.size();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double v = sign_vector(j);
    if (v != -1.0 && v != 0.0 && v != 1.0) {
      throw std::invalid_argument("sign vector entries must be -1, 0 or +1");
    }
  }
  const double c = 0.9 / std::sqrt(static_cast<double>(s));
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(p, p);
  precision.row(0) += c * sign_vector.transpose();
  precision.col(0) += c * sign_vector;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("not positive definite");
  }
  Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(p, p));
  // Symmetrize away the solve round-off before validation.
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return CovarianceSpec(std::move(sigma));
}

CovarianceSpec figure2_wishart_covariance(Eigen::Index p, Eigen::Index dof,
                                          double scale, std::uint64_t seed) {
  if (dof < p) throw std::invalid_argument("wishart covariance needs dof >= p");
  if (!(scale > 0.0)) throw std::invalid_argument("wishart scale must be > 0");
  Rng rng(seed);
  Eigen::MatrixXd g(dof, p);
  for (Eigen::Index i = 0; i < dof; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) g(i, j) = rng.gaussian();
  }
  Eigen::MatrixXd sigma = (g.transpose() * g) / scale;
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return CovarianceSpec(std::move(sigma));
}

}  // namespace debiasreg
