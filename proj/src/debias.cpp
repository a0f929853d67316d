#include "debiasreg/debias.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace debiasreg {

namespace {

Eigen::VectorXi active_indices(const FitResult& fit_result) {
  Eigen::VectorXi idx(static_cast<Eigen::Index>(fit_result.active.size()));
  for (std::size_t t = 0; t < fit_result.active.size(); ++t) {
    idx(static_cast<Eigen::Index>(t)) = fit_result.active[t];
  }
  return idx;
}

// Shared engine behind hat_summary / hat_matrix / w0_vector: the hat matrix
// of every supported penalty is X_A (X_A' X_A + R)^{-1} X_A' for an active
// column set A and a PSD regularizer R (possibly zero / full-column).
class HatSolver {
 public:
  HatSolver(const FitResult& fit_result, const Penalty& pen,
            const RegressionInstance& instance)
      : instance_(instance) {
    const double n = static_cast<double>(instance.n());
    if (const auto* lasso = std::get_if<LassoPenalty>(&pen)) {
      (void)lasso;
      init_active(fit_result, Eigen::MatrixXd());
      projector_ = true;
    } else if (const auto* en = std::get_if<ElasticNetPenalty>(&pen)) {
      init_active(fit_result,
                  regularizer_identity(fit_result, n * en->mu));
    } else if (const auto* gl = std::get_if<GroupLassoPenalty>(&pen)) {
      GroupShrinkageMatrix m = group_shrinkage_matrix(fit_result, *gl,
                                                      instance.n());
      init_active(fit_result, std::move(m.m));
    } else if (const auto* ridge = std::get_if<RidgePenalty>(&pen)) {
      init_full(Eigen::MatrixXd::Identity(instance.p(), instance.p()) *
                (n * ridge->mu));
      ridge_mu_ = ridge->mu;
    } else {
      const auto& smooth = std::get<SmoothPenalty>(pen);
      init_full(n * smooth.hessian(fit_result.beta));
    }
  }

  HatSummary summary() const {
    const double n = static_cast<double>(instance_.n());
    HatSummary s;
    if (projector_ || x_active_.cols() == 0) {
      s.df = static_cast<double>(x_active_.cols());
      s.frob_i_minus_h_sq = n - s.df;
      return s;
    }
    if (ridge_mu_ > 0.0) {
      // Via the squared singular values of X, as eigenvalues of the
      // smaller Gram matrix.
      const Eigen::Index m = std::min(instance_.n(), instance_.p());
      Eigen::MatrixXd gram =
          instance_.n() <= instance_.p()
              ? (instance_.x * instance_.x.transpose()).eval()
              : (instance_.x.transpose() * instance_.x).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
      const double shift = n * ridge_mu_;
      double df = 0.0;
      double frob = n - static_cast<double>(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double e = std::max(0.0, es.eigenvalues()(i));
        df += e / (e + shift);
        const double gap = shift / (e + shift);
        frob += gap * gap;
      }
      s.df = df;
      s.frob_i_minus_h_sq = frob;
      return s;
    }
    // tr H = tr B and tr H^2 = tr B^2 for B = (G + R)^{-1} G.
    Eigen::MatrixXd b = solver_.solve(gram_);
    s.df = b.trace();
    const double tr_b2 = (b.array() * b.transpose().array()).sum();
    s.frob_i_minus_h_sq = n - 2.0 * s.df + tr_b2;
    return s;
  }

  // H v for any n-vector.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    if (x_active_.cols() == 0) return Eigen::VectorXd::Zero(instance_.n());
    return x_active_ * solver_.solve(x_active_.transpose() * v);
  }

  Eigen::VectorXd w0(const Eigen::VectorXd& a0) const {
    if (full_columns_) {
      return x_active_ * solver_.solve(a0);
    }
    if (x_active_.cols() == 0) return Eigen::VectorXd::Zero(instance_.n());
    return x_active_ * solver_.solve(a0(active_));
  }

  Eigen::MatrixXd materialize() const {
    if (instance_.n() > 2000) {
      throw std::logic_error("hat matrix materialization limited to n <= 2000");
    }
    if (x_active_.cols() == 0) {
      return Eigen::MatrixXd::Zero(instance_.n(), instance_.n());
    }
    Eigen::MatrixXd solved = solver_.solve(x_active_.transpose());
    return x_active_ * solved;
  }

 private:
  Eigen::MatrixXd regularizer_identity(const FitResult& fit_result,
                                       double scale) const {
    const Eigen::Index k = static_cast<Eigen::Index>(fit_result.active.size());
    return Eigen::MatrixXd::Identity(k, k) * scale;
  }

  void init_active(const FitResult& fit_result, Eigen::MatrixXd reg) {
    active_ = active_indices(fit_result);
    x_active_ = instance_.x(Eigen::all, active_);
    gram_ = x_active_.transpose() * x_active_;
    Eigen::MatrixXd sys = gram_;
    if (reg.size()) sys += reg;
    factor(sys);
  }

  void init_full(Eigen::MatrixXd reg) {
    full_columns_ = true;
    active_.resize(instance_.p());
    for (Eigen::Index j = 0; j < instance_.p(); ++j) active_(j) = static_cast<int>(j);
    x_active_ = instance_.x;
    gram_ = x_active_.transpose() * x_active_;
    factor(gram_ + reg);
  }

  void factor(const Eigen::MatrixXd& sys) {
    if (sys.size() == 0) return;
    solver_.compute(sys);
    if (solver_.info() != Eigen::Success ||
        (solver_.vectorD().array() <= 0.0).any()) {
      throw std::runtime_error("degenerate active set");
    }
  }

  const RegressionInstance& instance_;
  Eigen::VectorXi active_;
  Eigen::MatrixXd x_active_;
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> solver_;
  bool projector_ = false;     // lasso / least squares: H is a projector
  bool full_columns_ = false;  // ridge / smooth: regularizer on all columns
  double ridge_mu_ = 0.0;
};

double theta_from(const std::optional<double>& theta, const Direction& dir,
                  const RegressionInstance& instance) {
  if (theta) return *theta;
  if (instance.truth) return dir.a0.dot(instance.truth->beta);
  throw std::runtime_error("theta required");
}

// Verifies ||w0||^2 <= min{(4 mu)^{-1}, phimin(Sigma^{-1/2}X'X Sigma^{-1/2}/n)^{-1}}/n.
// The bound assumes the normalization ||Sigma^{-1/2} a0|| = 1. The strong
// convexity arm is always cheap; the eigenvalue arm needs the truth
// covariance and is skipped for large p.
void check_w0_norm_bound(const Eigen::VectorXd& w0, const Penalty& pen,
                         const Direction& dir,
                         const RegressionInstance& instance) {
  if (!instance.truth || instance.p() > 600) return;
  const double a0_norm_sq = instance.truth->cov.inverse_quadratic(dir.a0);
  if (std::abs(a0_norm_sq - 1.0) > 1e-6) return;  // direction not normalized
  const double n = static_cast<double>(instance.n());

  double bound = std::numeric_limits<double>::infinity();
  // Strong convexity with respect to the Sigma norm: the quadratic terms of
  // ridge / elastic net give mu / ||Sigma||_op; a smooth penalty declares it.
  double mu = 0.0;
  bool rescale_by_sigma = false;
  if (const auto* ridge = std::get_if<RidgePenalty>(&pen)) {
    mu = ridge->mu;
    rescale_by_sigma = true;
  } else if (const auto* en = std::get_if<ElasticNetPenalty>(&pen)) {
    mu = en->mu;
    rescale_by_sigma = true;
  } else if (const auto* smooth = std::get_if<SmoothPenalty>(&pen)) {
    mu = smooth->strong_convexity_mu;
  }
  if (mu > 0.0) {
    if (rescale_by_sigma) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          instance.truth->cov.matrix());
      mu /= es.eigenvalues().maxCoeff();
    }
    bound = std::min(bound, 1.0 / (4.0 * mu * n));
  }

  if (instance.n() > instance.p()) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
        instance.x.transpose() * instance.x / n, instance.truth->cov.matrix());
    const double phi_min = ges.eigenvalues().minCoeff();
    if (phi_min > 0.0) bound = std::min(bound, 1.0 / (n * phi_min));
  }
  if (std::isfinite(bound) &&
      w0.squaredNorm() > bound * (1.0 + 1e-6) + 1e-12) {
    throw std::logic_error("w0 norm bound violated");
  }
}

}  // namespace

HatSummary hat_summary(const FitResult& fit_result, const Penalty& pen,
                       const RegressionInstance& instance) {
  return HatSolver(fit_result, pen, instance).summary();
}

double effective_df(const FitResult& fit_result, const Penalty& pen,
                    const RegressionInstance& instance) {
  return hat_summary(fit_result, pen, instance).df;
}

Eigen::MatrixXd hat_matrix(const FitResult& fit_result, const Penalty& pen,
                           const RegressionInstance& instance) {
  return HatSolver(fit_result, pen, instance).materialize();
}

GroupShrinkageMatrix group_shrinkage_matrix(const FitResult& fit_result,
                                            const GroupLassoPenalty& pen,
                                            Eigen::Index n) {
  GroupShrinkageMatrix out;
  const Eigen::Index k = static_cast<Eigen::Index>(fit_result.active.size());
  out.m = Eigen::MatrixXd::Zero(k, k);

  std::vector<Eigen::Index> position(
      static_cast<std::size_t>(fit_result.beta.size()),
      static_cast<Eigen::Index>(-1));
  for (Eigen::Index t = 0; t < k; ++t) {
    position[static_cast<std::size_t>(fit_result.active[static_cast<std::size_t>(t)])] = t;
  }

  for (int g : fit_result.active_groups) {
    const auto& coords = pen.groups[static_cast<std::size_t>(g)];
    Eigen::VectorXd bk(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t t = 0; t < coords.size(); ++t) {
      bk(static_cast<Eigen::Index>(t)) = fit_result.beta(coords[t]);
    }
    const double norm = bk.norm();
    if (norm < 10.0 * fit_result.zero_threshold) out.ill_conditioned = true;
    const double scale =
        static_cast<double>(n) * pen.lambdas(g) / norm;
    for (std::size_t a = 0; a < coords.size(); ++a) {
      const Eigen::Index pa = position[static_cast<std::size_t>(coords[a])];
      for (std::size_t b = 0; b < coords.size(); ++b) {
        const Eigen::Index pb = position[static_cast<std::size_t>(coords[b])];
        const double eye = a == b ? 1.0 : 0.0;
        out.m(pa, pb) =
            scale * (eye - bk(static_cast<Eigen::Index>(a)) *
                               bk(static_cast<Eigen::Index>(b)) / (norm * norm));
      }
    }
  }
  return out;
}

Eigen::VectorXd w0_vector(const FitResult& fit_result, const Penalty& pen,
                          const Direction& dir,
                          const RegressionInstance& instance) {
  HatSolver solver(fit_result, pen, instance);
  Eigen::VectorXd w0 = solver.w0(dir.a0);
  check_w0_norm_bound(w0, pen, dir, instance);
  return w0;
}

ResidualMapGradient residual_map_gradient(const FitResult& fit_result,
                                          const Penalty& pen,
                                          const Direction& dir,
                                          const RegressionInstance& instance,
                                          std::optional<double> theta,
                                          bool materialize) {
  HatSolver solver(fit_result, pen, instance);
  const HatSummary s = solver.summary();
  const Eigen::VectorXd w0 = solver.w0(dir.a0);
  const Eigen::VectorXd& r = fit_result.residual;
  const double c = dir.a0.dot(fit_result.beta) -
                   theta_from(theta, dir, instance);

  ResidualMapGradient out;
  out.a0_dot_h = c;
  // P = I - H;  grad' = c P + w0 r'.
  const Eigen::VectorXd p_w0 = w0 - solver.apply(w0);
  const double r_p_w0 = r.dot(p_w0);
  const double w0_r = w0.dot(r);
  out.frob_sq = c * c * s.frob_i_minus_h_sq + 2.0 * c * r_p_w0 +
                w0.squaredNorm() * r.squaredNorm();
  out.trace_sq = c * c * s.frob_i_minus_h_sq + 2.0 * c * r_p_w0 + w0_r * w0_r;
  if (materialize && instance.n() <= 2000) {
    Eigen::MatrixXd grad_t =
        c * (Eigen::MatrixXd::Identity(instance.n(), instance.n()) -
             solver.materialize()) +
        w0 * r.transpose();
    out.matrix = std::move(grad_t);
  }
  return out;
}

Eigen::VectorXd debiased_vector(const FitResult& fit_result,
                                const RegressionInstance& instance,
                                const CovarianceSpec& cov, double df) {
  const double n = static_cast<double>(instance.n());
  if (df >= n - 1e-8) throw std::runtime_error("degenerate correction");
  Eigen::VectorXd xtr = instance.x.transpose() * fit_result.residual;
  return fit_result.beta + cov.solve(xtr) / (n - df);
}

Eigen::VectorXd debiased_vector(const FitResult& fit_result,
                                const Penalty& pen,
                                const RegressionInstance& instance,
                                const CovarianceSpec& cov) {
  return debiased_vector(fit_result, instance, cov,
                         effective_df(fit_result, pen, instance));
}

double theta_hat(const FitResult& fit_result, const Direction& dir,
                 const Penalty& pen, const RegressionInstance& instance) {
  const double n = static_cast<double>(instance.n());
  const double df = effective_df(fit_result, pen, instance);
  if (df >= n - 1e-8) throw std::runtime_error("degenerate correction");
  const Eigen::VectorXd w0 = w0_vector(fit_result, pen, dir, instance);
  return dir.a0.dot(fit_result.beta) +
         (dir.z0 + w0).dot(fit_result.residual) / (n - df);
}

namespace {

bool same_support(const FitResult& a, const FitResult& b) {
  return a.active == b.active && a.active_groups == b.active_groups;
}

}  // namespace

Eigen::MatrixXd finite_diff_hat_matrix(const RegressionInstance& instance,
                                       const Penalty& pen, double step,
                                       double fit_tol) {
  const Eigen::Index n = instance.n();
  if (step <= 0.0) {
    step = 1e-6 * (1.0 + instance.y.cwiseAbs().maxCoeff());
  }
  FitOptions opts;
  opts.tol = fit_tol;
  opts.max_iter = 2000000;
  FitResult base = fit(instance, pen, opts);
  FitOptions warm = opts;
  warm.warm_start = &base.beta;

  Eigen::MatrixXd h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double local_step = step;
    bool done = false;
    for (int attempt = 0; attempt < 4 && !done; ++attempt) {
      RegressionInstance plus = instance;
      RegressionInstance minus = instance;
      plus.y(i) += local_step;
      minus.y(i) -= local_step;
      FitResult fp = fit(plus, pen, warm);
      FitResult fm = fit(minus, pen, warm);
      if (!same_support(fp, fm)) {
        local_step /= 10.0;
        continue;
      }
      h.col(i) = (instance.x * (fp.beta - fm.beta)) / (2.0 * local_step);
      done = true;
    }
    if (!done) throw std::runtime_error("nonsmooth point");
  }
  return h;
}

DebiasPieces debias_pieces(const FitResult& fit_result, const Penalty& pen,
                           const Direction& dir,
                           const RegressionInstance& instance) {
  HatSolver solver(fit_result, pen, instance);
  const HatSummary s = solver.summary();
  DebiasPieces out;
  out.df = s.df;
  out.frob_i_minus_h_sq = s.frob_i_minus_h_sq;
  out.w0 = solver.w0(dir.a0);
  out.w0_sq_norm = out.w0.squaredNorm();
  out.w0_dot_residual = out.w0.dot(fit_result.residual);
  out.z0_dot_residual = dir.z0.dot(fit_result.residual);
  out.residual_i_minus_h_w0 =
      out.w0_dot_residual - fit_result.residual.dot(solver.apply(out.w0));
  return out;
}

DebiasReport debias_report(const FitResult& fit_result, const Penalty& pen,
                           const Direction& dir,
                           const RegressionInstance& instance,
                           const CovarianceSpec& cov) {
  DebiasReport report;
  const HatSummary s = hat_summary(fit_result, pen, instance);
  report.df = s.df;
  report.frob_i_minus_h_sq = s.frob_i_minus_h_sq;

  const double resid_scale = 1.0 + instance.y.cwiseAbs().maxCoeff();
  report.interpolating =
      fit_result.residual.cwiseAbs().maxCoeff() <= 1e-12 * resid_scale;
  report.w0 = report.interpolating
                  ? Eigen::VectorXd::Zero(instance.n()).eval()
                  : w0_vector(fit_result, pen, dir, instance);
  report.w0_dot_residual = report.w0.dot(fit_result.residual);

  report.beta_debias = debiased_vector(fit_result, instance, cov, s.df);
  const double n = static_cast<double>(instance.n());
  report.theta_hat = dir.a0.dot(fit_result.beta) +
                     (dir.z0 + report.w0).dot(fit_result.residual) / (n - s.df);
  return report;
}

}  // namespace debiasreg
