#include "debiasreg/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "debiasreg/rng.hpp"

namespace debiasreg {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

Eigen::VectorXd start_point(const RegressionInstance& inst,
                            const FitOptions& opts) {
  if (opts.warm_start) {
    if (opts.warm_start->size() != inst.p()) {
      throw std::invalid_argument("warm start has wrong dimension");
    }
    return *opts.warm_start;
  }
  return Eigen::VectorXd::Zero(inst.p());
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) {
    throw std::invalid_argument(std::string(name) + " must be positive");
  }
}

}  // namespace

double zero_threshold(const Eigen::VectorXd& beta) {
  const double inf_norm = beta.size() ? beta.cwiseAbs().maxCoeff() : 0.0;
  return 1e-8 * std::max(1.0, inf_norm);
}

GroupLassoPenalty GroupLassoPenalty::equal_blocks(Eigen::Index p,
                                                  Eigen::Index n_groups,
                                                  double lambda) {
  if (n_groups < 1 || p % n_groups != 0) {
    throw std::invalid_argument("equal_blocks: n_groups must divide p");
  }
  GroupLassoPenalty pen;
  const Eigen::Index size = p / n_groups;
  pen.groups.resize(static_cast<std::size_t>(n_groups));
  for (Eigen::Index k = 0; k < n_groups; ++k) {
    for (Eigen::Index j = 0; j < size; ++j) {
      pen.groups[static_cast<std::size_t>(k)].push_back(
          static_cast<int>(k * size + j));
    }
  }
  pen.lambdas = Eigen::VectorXd::Constant(n_groups, lambda);
  return pen;
}


void validate_penalty(const Penalty& pen, Eigen::Index p) {
  std::visit(
      [p](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LassoPenalty>) {
          // lambda = 0 is accepted as the least-squares limit.
          if (!(v.lambda >= 0.0)) {
            throw std::invalid_argument("lasso lambda must be >= 0");
          }
        } else if constexpr (std::is_same_v<T, RidgePenalty>) {
          require_positive(v.mu, "ridge mu");
        } else if constexpr (std::is_same_v<T, ElasticNetPenalty>) {
          require_positive(v.lambda, "elastic net lambda");
          require_positive(v.mu, "elastic net mu");
        } else if constexpr (std::is_same_v<T, GroupLassoPenalty>) {
          if (v.groups.empty() ||
              v.lambdas.size() != static_cast<Eigen::Index>(v.groups.size())) {
            throw std::invalid_argument("group lasso needs one lambda per group");
          }
          for (Eigen::Index k = 0; k < v.lambdas.size(); ++k) {
            require_positive(v.lambdas(k), "group lasso lambda");
          }
          std::vector<int> seen(static_cast<std::size_t>(p), 0);
          for (const auto& g : v.groups) {
            if (g.empty()) throw std::invalid_argument("empty group");
            for (int j : g) {
              if (j < 0 || j >= p) {
                throw std::invalid_argument("group index out of range");
              }
              if (seen[static_cast<std::size_t>(j)]++) {
                throw std::invalid_argument("groups overlap");
              }
            }
          }
          for (int c : seen) {
            if (!c) throw std::invalid_argument("groups do not cover 1..p");
          }
        } else if constexpr (std::is_same_v<T, SmoothPenalty>) {
          if (!v.value || !v.gradient || !v.hessian) {
            throw std::invalid_argument("smooth penalty needs value/gradient/hessian");
          }
          if (!(v.strong_convexity_mu >= 0.0)) {
            throw std::invalid_argument("smooth strong convexity mu must be >= 0");
          }
        }
      },
      pen);
}

double penalty_value(const Penalty& pen, const Eigen::VectorXd& b) {
  return std::visit(
      [&b](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LassoPenalty>) {
          return v.lambda * b.lpNorm<1>();
        } else if constexpr (std::is_same_v<T, RidgePenalty>) {
          return v.mu * b.squaredNorm();
        } else if constexpr (std::is_same_v<T, ElasticNetPenalty>) {
          return v.lambda * b.lpNorm<1>() + v.mu * b.squaredNorm();
        } else if constexpr (std::is_same_v<T, GroupLassoPenalty>) {
          double total = 0.0;
          for (std::size_t k = 0; k < v.groups.size(); ++k) {
            double norm_sq = 0.0;
            for (int j : v.groups[k]) norm_sq += b(j) * b(j);
            total += v.lambdas(static_cast<Eigen::Index>(k)) * std::sqrt(norm_sq);
          }
          return total;
        } else {
          return v.value(b);
        }
      },
      pen);
}

namespace {

// ---------------------------------------------------------------------------
// Coordinate descent for lasso / elastic net.
//
// Stationarity convention matches the closed-form derivative tables:
// active coordinates satisfy x_j'(y - X b)/n = lambda sgn(b_j) + mu b_j.
// ---------------------------------------------------------------------------

struct CdState {
  Eigen::VectorXd beta;
  Eigen::VectorXd residual;
  long sweeps = 0;
};

double cd_kkt_violation(const RegressionInstance& inst, const CdState& s,
                        double lambda, double mu) {
  const Eigen::Index p = inst.p();
  const double inv_n = 1.0 / static_cast<double>(inst.n());
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double grad = inst.x.col(j).dot(s.residual) * inv_n;
    const double bj = s.beta(j);
    double viol;
    if (bj != 0.0) {
      viol = std::abs(grad - lambda * (bj > 0 ? 1.0 : -1.0) - mu * bj);
    } else {
      viol = std::max(0.0, std::abs(grad) - lambda);
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

// One pass over the given coordinates; returns the largest coefficient move.
double cd_sweep(const RegressionInstance& inst, CdState& s,
                const Eigen::VectorXd& col_sq_over_n, double lambda, double mu,
                const std::vector<Eigen::Index>& coords) {
  const double inv_n = 1.0 / static_cast<double>(inst.n());
  double max_move = 0.0;
  for (Eigen::Index j : coords) {
    const double denom = col_sq_over_n(j) + mu;
    if (denom <= 0.0) continue;  // zero column: coefficient stays put
    const double old = s.beta(j);
    const double z = inst.x.col(j).dot(s.residual) * inv_n + col_sq_over_n(j) * old;
    const double updated = soft_threshold(z, lambda) / denom;
    if (updated != old) {
      s.residual.noalias() -= inst.x.col(j) * (updated - old);
      s.beta(j) = updated;
      max_move = std::max(max_move, std::abs(updated - old));
    }
  }
  ++s.sweeps;
  return max_move;
}

FitResult make_result(const RegressionInstance& inst, Eigen::VectorXd beta,
                      long iterations, double kkt_violation) {
  FitResult out;
  out.beta = std::move(beta);
  out.residual = inst.y - inst.x * out.beta;
  out.iterations = iterations;
  out.kkt_max_violation = kkt_violation;
  out.zero_threshold = zero_threshold(out.beta);
  return out;
}

void fill_coordinate_active_set(FitResult& r) {
  r.active.clear();
  for (Eigen::Index j = 0; j < r.beta.size(); ++j) {
    if (std::abs(r.beta(j)) > r.zero_threshold) r.active.push_back(static_cast<int>(j));
  }
}

FitResult fit_coordinate_descent(const RegressionInstance& inst, double lambda,
                                 double mu, const FitOptions& opts) {
  const Eigen::Index p = inst.p();
  CdState s;
  s.beta = start_point(inst, opts);
  s.residual = inst.y - inst.x * s.beta;

  Eigen::VectorXd col_sq_over_n(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    col_sq_over_n(j) = inst.x.col(j).squaredNorm() / static_cast<double>(inst.n());
  }
  std::vector<Eigen::Index> all_coords(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) all_coords[static_cast<std::size_t>(j)] = j;

  double viol = std::numeric_limits<double>::infinity();
  long refresh_countdown = 50;
  while (s.sweeps < opts.max_iter) {
    cd_sweep(inst, s, col_sq_over_n, lambda, mu, all_coords);

    // Iterate the current support until it is internally converged; the
    // full-pass above re-admits coordinates whose KKT bound is violated.
    std::vector<Eigen::Index> working;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.beta(j) != 0.0) working.push_back(j);
    }
    while (s.sweeps < opts.max_iter) {
      const double move = cd_sweep(inst, s, col_sq_over_n, lambda, mu, working);
      if (move <= 0.05 * opts.tol) break;
    }

    if (--refresh_countdown == 0) {
      s.residual = inst.y - inst.x * s.beta;  // shed accumulated drift
      refresh_countdown = 50;
    }
    viol = cd_kkt_violation(inst, s, lambda, mu);
    if (viol <= opts.tol) break;
  }

  s.residual = inst.y - inst.x * s.beta;
  viol = cd_kkt_violation(inst, s, lambda, mu);
  FitResult out = make_result(inst, s.beta, s.sweeps, viol);
  fill_coordinate_active_set(out);
  if (viol > opts.tol) {
    throw NotConvergedError("not converged", std::move(out));
  }
  return out;
}

FitResult fit_least_squares(const RegressionInstance& inst,
                            const FitOptions& opts) {
  Eigen::MatrixXd gram = inst.x.transpose() * inst.x;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "lasso with lambda = 0 requires full-rank X'X (least-squares limit)");
  }
  Eigen::VectorXd beta = llt.solve(inst.x.transpose() * inst.y);
  const double viol =
      (inst.x.transpose() * (inst.y - inst.x * beta)).cwiseAbs().maxCoeff() /
      static_cast<double>(inst.n());
  FitResult out = make_result(inst, std::move(beta), 1, viol);
  fill_coordinate_active_set(out);
  (void)opts;
  return out;
}

FitResult fit_ridge(const RegressionInstance& inst, double mu,
                    const FitOptions& opts) {
  const Eigen::Index p = inst.p();
  Eigen::MatrixXd reg = inst.x.transpose() * inst.x;
  reg.diagonal().array() += static_cast<double>(inst.n()) * mu;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("ridge system is not positive definite");
  }
  Eigen::VectorXd beta = llt.solve(inst.x.transpose() * inst.y);
  Eigen::VectorXd residual = inst.y - inst.x * beta;
  const double viol = (inst.x.transpose() * residual / static_cast<double>(inst.n()) -
                       mu * beta)
                          .cwiseAbs()
                          .maxCoeff();
  FitResult out = make_result(inst, std::move(beta), 1, viol);
  fill_coordinate_active_set(out);
  (void)opts;
  (void)p;
  return out;
}

// ---------------------------------------------------------------------------
// Block coordinate descent for the group lasso. Each block step is the
// closed-form group shrinkage of the Lipschitz majorization; repeating it on
// a fixed block converges to the exact block minimizer.
// ---------------------------------------------------------------------------

struct GroupWork {
  std::vector<Eigen::VectorXi> index;   // coordinates per group
  Eigen::VectorXd lipschitz;            // ||X_k' X_k||_op / n
};

GroupWork make_group_work(const RegressionInstance& inst,
                          const GroupLassoPenalty& pen) {
  GroupWork w;
  const std::size_t n_groups = pen.groups.size();
  w.index.resize(n_groups);
  w.lipschitz.resize(static_cast<Eigen::Index>(n_groups));
  for (std::size_t k = 0; k < n_groups; ++k) {
    const auto& g = pen.groups[k];
    Eigen::VectorXi idx(static_cast<Eigen::Index>(g.size()));
    for (std::size_t t = 0; t < g.size(); ++t) idx(static_cast<Eigen::Index>(t)) = g[t];
    Eigen::MatrixXd xk = inst.x(Eigen::all, idx);
    if (g.size() == 1) {
      w.lipschitz(static_cast<Eigen::Index>(k)) =
          xk.squaredNorm() / static_cast<double>(inst.n());
    } else {
      Eigen::MatrixXd gram = xk.transpose() * xk / static_cast<double>(inst.n());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
      w.lipschitz(static_cast<Eigen::Index>(k)) = es.eigenvalues().maxCoeff();
    }
    w.index[k] = std::move(idx);
  }
  return w;
}

double group_kkt_violation(const RegressionInstance& inst,
                           const GroupLassoPenalty& pen, const GroupWork& w,
                           const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& residual) {
  const double inv_n = 1.0 / static_cast<double>(inst.n());
  double worst = 0.0;
  for (std::size_t k = 0; k < pen.groups.size(); ++k) {
    const auto& idx = w.index[k];
    const double lambda_k = pen.lambdas(static_cast<Eigen::Index>(k));
    Eigen::VectorXd grad = inst.x(Eigen::all, idx).transpose() * residual * inv_n;
    Eigen::VectorXd bk = beta(idx);
    const double bk_norm = bk.norm();
    double viol;
    if (bk_norm > 0.0) {
      viol = (grad - lambda_k / bk_norm * bk).cwiseAbs().maxCoeff();
    } else {
      viol = std::max(0.0, grad.norm() - lambda_k);
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

FitResult fit_group_lasso(const RegressionInstance& inst,
                          const GroupLassoPenalty& pen,
                          const FitOptions& opts) {
  GroupWork w = make_group_work(inst, pen);
  const std::size_t n_groups = pen.groups.size();
  const double inv_n = 1.0 / static_cast<double>(inst.n());

  Eigen::VectorXd beta = start_point(inst, opts);
  Eigen::VectorXd residual = inst.y - inst.x * beta;
  long sweeps = 0;

  auto block_step = [&](std::size_t k) -> double {
    const auto& idx = w.index[k];
    const double lk = w.lipschitz(static_cast<Eigen::Index>(k));
    if (lk <= 0.0) return 0.0;
    const double lambda_k = pen.lambdas(static_cast<Eigen::Index>(k));
    Eigen::VectorXd bk = beta(idx);
    Eigen::VectorXd v =
        bk + inst.x(Eigen::all, idx).transpose() * residual * (inv_n / lk);
    const double v_norm = v.norm();
    const double shrink = lambda_k / lk;
    Eigen::VectorXd updated;
    if (v_norm <= shrink) {
      updated = Eigen::VectorXd::Zero(idx.size());
    } else {
      updated = (1.0 - shrink / v_norm) * v;
    }
    Eigen::VectorXd delta = updated - bk;
    const double move = delta.cwiseAbs().maxCoeff();
    if (move > 0.0) {
      residual.noalias() -= inst.x(Eigen::all, idx) * delta;
      beta(idx) = updated;
    }
    return move;
  };

  auto pass_over = [&](const std::vector<std::size_t>& blocks) -> double {
    double max_move = 0.0;
    for (std::size_t k : blocks) {
      // Inner majorization iterations toward the exact block minimizer.
      for (int inner = 0; inner < 64; ++inner) {
        const double move = block_step(k);
        max_move = std::max(max_move, move);
        if (move <= 0.05 * opts.tol) break;
      }
    }
    ++sweeps;
    return max_move;
  };

  std::vector<std::size_t> all_blocks(n_groups);
  for (std::size_t k = 0; k < n_groups; ++k) all_blocks[k] = k;

  double viol = std::numeric_limits<double>::infinity();
  long refresh_countdown = 50;
  while (sweeps < opts.max_iter) {
    pass_over(all_blocks);
    std::vector<std::size_t> working;
    for (std::size_t k = 0; k < n_groups; ++k) {
      if (beta(w.index[k]).norm() > 0.0) working.push_back(k);
    }
    while (sweeps < opts.max_iter) {
      if (pass_over(working) <= 0.05 * opts.tol) break;
    }
    if (--refresh_countdown == 0) {
      residual = inst.y - inst.x * beta;
      refresh_countdown = 50;
    }
    viol = group_kkt_violation(inst, pen, w, beta, residual);
    if (viol <= opts.tol) break;
  }

  residual = inst.y - inst.x * beta;
  viol = group_kkt_violation(inst, pen, w, beta, residual);
  FitResult out = make_result(inst, beta, sweeps, viol);

  out.active_groups.clear();
  out.active.clear();
  for (std::size_t k = 0; k < n_groups; ++k) {
    if (out.beta(w.index[k]).norm() > out.zero_threshold) {
      out.active_groups.push_back(static_cast<int>(k));
      for (int j : pen.groups[k]) out.active.push_back(j);
    }
  }
  std::sort(out.active.begin(), out.active.end());

  if (viol > opts.tol) {
    throw NotConvergedError("not converged", std::move(out));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Damped Newton for twice-differentiable penalties.
// ---------------------------------------------------------------------------

void check_smooth_consistency(const SmoothPenalty& pen, Eigen::Index p) {
  Rng rng(0x5300d5u);
  Eigen::VectorXd b(p);
  for (Eigen::Index j = 0; j < p; ++j) b(j) = 0.5 * rng.gaussian();
  const double step = 1e-5;
  Eigen::VectorXd grad = pen.gradient(b);
  Eigen::MatrixXd hess = pen.hessian(b);
  if (grad.size() != p || hess.rows() != p || hess.cols() != p) {
    throw std::invalid_argument("smooth penalty callable dimensions mismatch");
  }
  const Eigen::Index checks = std::min<Eigen::Index>(p, 8);
  for (Eigen::Index t = 0; t < checks; ++t) {
    const Eigen::Index j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p)));
    Eigen::VectorXd bp = b, bm = b;
    bp(j) += step;
    bm(j) -= step;
    const double fd_grad = (pen.value(bp) - pen.value(bm)) / (2 * step);
    const double scale = std::max({1.0, std::abs(grad(j)), std::abs(fd_grad)});
    if (std::abs(fd_grad - grad(j)) > 1e-4 * scale) {
      throw std::invalid_argument("smooth penalty gradient inconsistent with value");
    }
    Eigen::VectorXd fd_hess_col = (pen.gradient(bp) - pen.gradient(bm)) / (2 * step);
    const double col_scale = std::max(1.0, fd_hess_col.cwiseAbs().maxCoeff());
    if ((fd_hess_col - hess.col(j)).cwiseAbs().maxCoeff() > 1e-4 * col_scale) {
      throw std::invalid_argument("smooth penalty hessian inconsistent with gradient");
    }
  }
}

FitResult fit_smooth(const RegressionInstance& inst, const SmoothPenalty& pen,
                     const FitOptions& opts) {
  check_smooth_consistency(pen, inst.p());
  const double n = static_cast<double>(inst.n());

  Eigen::VectorXd beta = start_point(inst, opts);
  Eigen::VectorXd residual = inst.y - inst.x * beta;
  auto objective = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& r) {
    return r.squaredNorm() / (2 * n) + pen.value(b);
  };
  double obj = objective(beta, residual);

  Eigen::MatrixXd gram = inst.x.transpose() * inst.x / n;
  long iter = 0;
  double viol = std::numeric_limits<double>::infinity();
  for (; iter < opts.max_iter; ++iter) {
    Eigen::VectorXd grad = -inst.x.transpose() * residual / n + pen.gradient(beta);
    viol = grad.cwiseAbs().maxCoeff();
    if (viol <= opts.tol) break;

    Eigen::MatrixXd hess = gram + pen.hessian(beta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) {
      throw std::runtime_error("smooth penalty Newton system is singular");
    }
    Eigen::VectorXd direction = ldlt.solve(-grad);

    double t = 1.0;
    Eigen::VectorXd cand;
    Eigen::VectorXd cand_res;
    double cand_obj = std::numeric_limits<double>::infinity();
    while (t > 1e-14) {
      cand = beta + t * direction;
      cand_res = inst.y - inst.x * cand;
      cand_obj = objective(cand, cand_res);
      if (cand_obj < obj) break;
      t *= 0.5;
    }
    if (!(cand_obj < obj)) {
      // Objective differences are below rounding; take the full Newton step
      // if it still shrinks the stationarity residual, else stop.
      cand = beta + direction;
      cand_res = inst.y - inst.x * cand;
      const double cand_viol =
          (-inst.x.transpose() * cand_res / n + pen.gradient(cand))
              .cwiseAbs()
              .maxCoeff();
      if (cand_viol >= viol) break;
      cand_obj = objective(cand, cand_res);
    }
    beta.swap(cand);
    residual.swap(cand_res);
    obj = cand_obj;
  }

  FitResult out = make_result(inst, beta, iter, viol);
  fill_coordinate_active_set(out);
  if (viol > opts.tol) {
    throw NotConvergedError("not converged", std::move(out));
  }
  return out;
}

void attach_strict_slacks(FitResult& fit_result, const RegressionInstance& inst,
                          const Penalty& pen) {
  KktReport report = kkt_report(fit_result, inst, pen);
  fit_result.inactive = std::move(report.inactive);
  fit_result.strict_slacks = std::move(report.strict_slacks);
}

}  // namespace

FitResult fit(const RegressionInstance& instance, const Penalty& pen,
              const FitOptions& opts) {
  instance.validate();
  validate_penalty(pen, instance.p());
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be positive");

  FitResult result = std::visit(
      [&](const auto& v) -> FitResult {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LassoPenalty>) {
          if (v.lambda == 0.0) return fit_least_squares(instance, opts);
          return fit_coordinate_descent(instance, v.lambda, 0.0, opts);
        } else if constexpr (std::is_same_v<T, RidgePenalty>) {
          return fit_ridge(instance, v.mu, opts);
        } else if constexpr (std::is_same_v<T, ElasticNetPenalty>) {
          return fit_coordinate_descent(instance, v.lambda, v.mu, opts);
        } else if constexpr (std::is_same_v<T, GroupLassoPenalty>) {
          return fit_group_lasso(instance, v, opts);
        } else {
          return fit_smooth(instance, v, opts);
        }
      },
      pen);

  result.objective = result.residual.squaredNorm() /
                         (2.0 * static_cast<double>(instance.n())) +
                     penalty_value(pen, result.beta);
  attach_strict_slacks(result, instance, pen);
  return result;
}

KktReport kkt_report(const FitResult& fit_result,
                     const RegressionInstance& instance, const Penalty& pen) {
  const double n = static_cast<double>(instance.n());
  const Eigen::VectorXd& r = fit_result.residual;
  KktReport report;

  if (const auto* gl = std::get_if<GroupLassoPenalty>(&pen)) {
    std::vector<char> is_active_group(gl->groups.size(), 0);
    for (int k : fit_result.active_groups) is_active_group[static_cast<std::size_t>(k)] = 1;
    std::vector<double> slacks;
    for (std::size_t k = 0; k < gl->groups.size(); ++k) {
      Eigen::VectorXi idx(static_cast<Eigen::Index>(gl->groups[k].size()));
      for (std::size_t t = 0; t < gl->groups[k].size(); ++t) {
        idx(static_cast<Eigen::Index>(t)) = gl->groups[k][t];
      }
      Eigen::VectorXd grad_block = instance.x(Eigen::all, idx).transpose() * r;
      const double lambda_k = gl->lambdas(static_cast<Eigen::Index>(k));
      if (is_active_group[k]) {
        Eigen::VectorXd bk = fit_result.beta(idx);
        const double viol =
            (grad_block / n - lambda_k / bk.norm() * bk).cwiseAbs().maxCoeff();
        report.max_violation = std::max(report.max_violation, viol);
      } else {
        report.inactive.push_back(static_cast<int>(k));
        slacks.push_back(n * lambda_k - grad_block.norm());
      }
    }
    report.strict_slacks =
        Eigen::Map<Eigen::VectorXd>(slacks.data(), static_cast<Eigen::Index>(slacks.size()));
    return report;
  }

  double lambda = 0.0;
  double mu_l2 = 0.0;  // coefficient of b_j in the stationarity equation
  bool has_l1 = false;
  if (const auto* lasso = std::get_if<LassoPenalty>(&pen)) {
    lambda = lasso->lambda;
    has_l1 = lambda > 0.0;  // lambda = 0 is the pure least-squares limit
  } else if (const auto* en = std::get_if<ElasticNetPenalty>(&pen)) {
    lambda = en->lambda;
    mu_l2 = en->mu;
    has_l1 = true;
  } else if (const auto* ridge = std::get_if<RidgePenalty>(&pen)) {
    mu_l2 = ridge->mu;
  }

  if (has_l1 || mu_l2 > 0.0) {
    std::vector<char> is_active(static_cast<std::size_t>(instance.p()), 0);
    for (int j : fit_result.active) is_active[static_cast<std::size_t>(j)] = 1;
    std::vector<double> slacks;
    for (Eigen::Index j = 0; j < instance.p(); ++j) {
      const double grad = instance.x.col(j).dot(r) / n;
      const double bj = fit_result.beta(j);
      if (is_active[static_cast<std::size_t>(j)] || !has_l1) {
        const double sign_term =
            (has_l1 && bj != 0.0) ? lambda * (bj > 0 ? 1.0 : -1.0) : 0.0;
        const double viol = std::abs(grad - sign_term - mu_l2 * bj);
        report.max_violation = std::max(report.max_violation, viol);
      } else {
        report.inactive.push_back(static_cast<int>(j));
        slacks.push_back(lambda - std::abs(grad));
      }
    }
    report.strict_slacks =
        Eigen::Map<Eigen::VectorXd>(slacks.data(), static_cast<Eigen::Index>(slacks.size()));
    return report;
  }

  // Smooth penalty (and the lambda = 0 least-squares limit): stationarity only.
  Eigen::VectorXd grad = -instance.x.transpose() * r / n;
  if (const auto* smooth = std::get_if<SmoothPenalty>(&pen)) {
    grad += smooth->gradient(fit_result.beta);
  }
  report.max_violation = grad.cwiseAbs().maxCoeff();
  return report;
}

}  // namespace debiasreg
