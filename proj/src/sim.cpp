#include "debiasreg/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "debiasreg/csv.hpp"
#include "debiasreg/debias.hpp"
#include "debiasreg/normal.hpp"
#include "debiasreg/parallel.hpp"

namespace debiasreg {

namespace {

// Stream layout: replication streams are rep*4 + purpose; global draws
// (beta signs, covariance, directions) live in a disjoint high range.
constexpr std::uint64_t kStreamX = 0;
constexpr std::uint64_t kStreamEps = 1;
constexpr std::uint64_t kGlobalBase = std::uint64_t{1} << 62;
constexpr std::uint64_t kStreamBeta = kGlobalBase + 0;
constexpr std::uint64_t kStreamCov = kGlobalBase + 1;
constexpr std::uint64_t kStreamDir = kGlobalBase + 2;

const GroupLassoPenalty* first_group_penalty(const ExperimentConfig& config) {
  for (const Penalty& pen : config.penalty_grid) {
    if (const auto* gl = std::get_if<GroupLassoPenalty>(&pen)) return gl;
  }
  return nullptr;
}

Eigen::VectorXd build_beta(const ExperimentConfig& config) {
  return std::visit(
      [&](const auto& spec) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BetaExplicit>) {
          if (spec.beta.size() != config.p) {
            throw std::invalid_argument("explicit beta has wrong dimension");
          }
          return spec.beta;
        } else if constexpr (std::is_same_v<T, BetaSparse>) {
          if (spec.s < 0 || spec.s > config.p) {
            throw std::invalid_argument("beta sparsity out of range");
          }
          Eigen::VectorXd beta = Eigen::VectorXd::Zero(config.p);
          beta.head(spec.s).setConstant(spec.value);
          return beta;
        } else if constexpr (std::is_same_v<T, BetaFigure1>) {
          if (spec.s < 1 || spec.s > config.p) {
            throw std::invalid_argument("beta sparsity out of range");
          }
          Eigen::VectorXd beta = Eigen::VectorXd::Zero(config.p);
          beta(0) = spec.first;
          Rng rng(config.master_seed, kStreamBeta);
          for (Eigen::Index j = 1; j < spec.s; ++j) {
            beta(j) = (rng.next_u32() & 1u) ? spec.value : -spec.value;
          }
          return beta;
        } else {
          const GroupLassoPenalty* gl = first_group_penalty(config);
          if (!gl) {
            throw std::invalid_argument(
                "grouped beta requires a group lasso penalty in the grid");
          }
          if (spec.active_groups < 0 ||
              spec.active_groups > static_cast<Eigen::Index>(gl->groups.size())) {
            throw std::invalid_argument("active group count out of range");
          }
          Eigen::VectorXd beta = Eigen::VectorXd::Zero(config.p);
          for (Eigen::Index k = 0; k < spec.active_groups; ++k) {
            for (int j : gl->groups[static_cast<std::size_t>(k)]) {
              beta(j) = spec.value;
            }
          }
          return beta;
        }
      },
      config.beta_spec);
}

CovarianceSpec build_cov(const ExperimentConfig& config,
                         const Eigen::VectorXd& beta) {
  return std::visit(
      [&](const auto& spec) -> CovarianceSpec {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, CovIdentity>) {
          return CovarianceSpec::identity(config.p);
        } else if constexpr (std::is_same_v<T, CovFigure1>) {
          Eigen::VectorXd sign(config.p);
          Eigen::Index s = 0;
          for (Eigen::Index j = 0; j < config.p; ++j) {
            sign(j) = beta(j) > 0 ? 1.0 : (beta(j) < 0 ? -1.0 : 0.0);
            if (sign(j) != 0.0) ++s;
          }
          return figure1_covariance(std::max<Eigen::Index>(s, 1), sign);
        } else if constexpr (std::is_same_v<T, CovFigure2Wishart>) {
          const Eigen::Index dof = spec.dof > 0 ? spec.dof : 5 * config.p;
          const double scale =
              spec.scale > 0.0 ? spec.scale : 5.0 * static_cast<double>(config.p);
          Rng rng(config.master_seed, kStreamCov);
          return figure2_wishart_covariance(config.p, dof, scale,
                                            rng.next_u64());
        } else {
          return CovarianceSpec(spec.sigma);
        }
      },
      config.cov_spec);
}

std::vector<Eigen::VectorXd> build_direction_vectors(
    const ExperimentConfig& config, const CovarianceSpec& cov) {
  return std::visit(
      [&](const auto& spec) -> std::vector<Eigen::VectorXd> {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, DirectionCanonical>) {
          if (spec.index < 0 || spec.index >= config.p) {
            throw std::invalid_argument("canonical direction index out of range");
          }
          return {Eigen::VectorXd::Unit(config.p, spec.index)};
        } else if constexpr (std::is_same_v<T, DirectionExplicit>) {
          if (spec.a.size() != config.p) {
            throw std::invalid_argument("explicit direction has wrong dimension");
          }
          return {spec.a};
        } else {
          // Unit sphere vectors pushed through the Cholesky factor of Sigma.
          Rng rng(spec.seed ? spec.seed : config.master_seed, kStreamDir);
          std::vector<Eigen::VectorXd> out;
          for (Eigen::Index k = 0; k < spec.count; ++k) {
            Eigen::VectorXd v(config.p);
            for (Eigen::Index j = 0; j < config.p; ++j) v(j) = rng.gaussian();
            v /= v.norm();
            out.push_back(cov.cholesky_lower() * v);
          }
          return out;
        }
      },
      config.direction_spec);
}

double scalar_tuning(const Penalty& pen) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LassoPenalty>) return v.lambda;
        else if constexpr (std::is_same_v<T, RidgePenalty>) return v.mu;
        else if constexpr (std::is_same_v<T, ElasticNetPenalty>) return v.lambda;
        else if constexpr (std::is_same_v<T, GroupLassoPenalty>) return v.lambdas.mean();
        else return 0.0;
      },
      pen);
}

double sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (v.size() - 1));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.reps < 1) throw std::invalid_argument("reps >= 1 required");
  if (config.n < 1 || config.p < 1) throw std::invalid_argument("n, p >= 1");
  if (config.penalty_grid.empty()) {
    throw std::invalid_argument("penalty grid is empty");
  }
  for (const Penalty& pen : config.penalty_grid) {
    validate_penalty(pen, config.p);
  }

  ExperimentResult result;
  result.config = config;
  result.beta_true = build_beta(config);
  CovarianceSpec cov = build_cov(config, result.beta_true);
  std::vector<Eigen::VectorXd> raw_dirs = build_direction_vectors(config, cov);

  // a0 / u0 depend only on Sigma; z0 is rebuilt against each rep's design.
  std::vector<Direction> dirs;
  for (const auto& a : raw_dirs) {
    Eigen::MatrixXd empty(config.n, config.p);
    empty.setZero();
    dirs.push_back(normalize_direction(a, cov, empty));
  }
  result.directions = dirs;

  const int n_pen = static_cast<int>(config.penalty_grid.size());
  const int n_dir = static_cast<int>(dirs.size());
  const long cells = static_cast<long>(n_pen) * n_dir;
  result.records.assign(static_cast<std::size_t>(config.reps * cells), RepRecord{});
  std::vector<char> rep_failed(static_cast<std::size_t>(config.reps), 0);

  // Warm-start order: largest tuning value first.
  std::vector<int> fit_order(static_cast<std::size_t>(n_pen));
  std::iota(fit_order.begin(), fit_order.end(), 0);
  std::stable_sort(fit_order.begin(), fit_order.end(), [&](int a, int b) {
    return scalar_tuning(config.penalty_grid[static_cast<std::size_t>(a)]) >
           scalar_tuning(config.penalty_grid[static_cast<std::size_t>(b)]);
  });

  const double n = static_cast<double>(config.n);

  parallel_for(config.reps, [&](long rep) {
    try {
      Rng rng_x(config.master_seed,
                static_cast<std::uint64_t>(rep) * 4 + kStreamX);
      Rng rng_eps(config.master_seed,
                  static_cast<std::uint64_t>(rep) * 4 + kStreamEps);
      RegressionInstance inst;
      inst.x = sample_design(cov, config.n, rng_x);
      Eigen::VectorXd eps(config.n);
      for (Eigen::Index i = 0; i < config.n; ++i) {
        eps(i) = config.sigma * rng_eps.gaussian();
      }
      inst.y = inst.x * result.beta_true + eps;
      inst.truth = Truth{result.beta_true, config.sigma, cov};

      std::vector<Direction> rep_dirs = dirs;
      for (auto& d : rep_dirs) d.z0 = inst.x * d.u0;

      FitOptions opts;
      opts.tol = config.tol;
      opts.max_iter = config.max_iter;
      Eigen::VectorXd warm;
      bool have_warm = false;

      for (int order_pos = 0; order_pos < n_pen; ++order_pos) {
        const int pen_id = fit_order[static_cast<std::size_t>(order_pos)];
        const Penalty& pen = config.penalty_grid[static_cast<std::size_t>(pen_id)];
        FitOptions local = opts;
        if (have_warm) local.warm_start = &warm;
        FitResult fr = fit(inst, pen, local);
        warm = fr.beta;
        have_warm = true;

        const Eigen::VectorXd h = fr.beta - result.beta_true;
        const double pred_err = cov.quadratic(h);

        for (int dir_id = 0; dir_id < n_dir; ++dir_id) {
          const Direction& dir = rep_dirs[static_cast<std::size_t>(dir_id)];
          const double theta_true = dir.a0.dot(result.beta_true);
          VarianceEstimates ve = variance_estimates(fr, dir, pen, inst);
          const double theta_hat_v =
              ve.a0_dot_beta +
              (ve.z0_dot_residual + ve.w0_dot_residual) / ve.n_minus_df;
          const double center = ve.a0_dot_beta + ve.z0_dot_residual / ve.n_minus_df;

          RepRecord rec;
          rec.rep = rep;
          rec.penalty_id = pen_id;
          rec.lambda = scalar_tuning(pen);
          rec.direction_id = dir_id;
          rec.df = n - ve.n_minus_df;
          rec.active_size = static_cast<long>(fr.active.size());
          rec.theta_hat = theta_hat_v;
          rec.theta_true = theta_true;
          rec.pivot_resid = pivot_from(ve, theta_hat_v, theta_true, V0Choice::resid);
          rec.pivot_vhat = pivot_from(ve, theta_hat_v, theta_true, V0Choice::vhat);
          rec.pivot_vcheck = pivot_from(ve, theta_hat_v, theta_true, V0Choice::vcheck);
          rec.ci_narrow = ci_narrow_from(ve, center, config.alpha);
          rec.ci_spike = ci_spike_from(ve, center, config.alpha);
          rec.ci_quad = ci_quadratic_from(ve, config.alpha);
          rec.pred_err = pred_err;
          const double dir_err = ve.a0_dot_beta - theta_true;
          rec.dir_err_sq = dir_err * dir_err;
          rec.diag_item_v = ve.z0_dot_residual * ve.z0_dot_residual /
                            (n * ve.v_resid);
          rec.w0_dot_r = ve.w0_dot_residual;
          rec.tau_hat_sq =
              ve.v_resid / (ve.n_minus_df * ve.n_minus_df) * n;

          const std::size_t slot = static_cast<std::size_t>(
              rep * cells + static_cast<long>(pen_id) * n_dir + dir_id);
          result.records[slot] = rec;
        }
      }
    } catch (const std::exception&) {
      rep_failed[static_cast<std::size_t>(rep)] = 1;
    }
  });

  result.failed_reps =
      std::count(rep_failed.begin(), rep_failed.end(), char{1});
  if (result.failed_reps * 20 > config.reps) {
    throw std::runtime_error("more than 5% of replications failed");
  }
  if (result.failed_reps > 0) {
    // Drop placeholder rows of failed reps (they were never filled).
    std::vector<RepRecord> usable;
    usable.reserve(result.records.size());
    for (long rep = 0; rep < config.reps; ++rep) {
      if (rep_failed[static_cast<std::size_t>(rep)]) continue;
      for (long c = 0; c < cells; ++c) {
        usable.push_back(result.records[static_cast<std::size_t>(rep * cells + c)]);
      }
    }
    result.records = std::move(usable);
  }

  // Aggregates per (penalty, direction) in id order.
  for (int pen_id = 0; pen_id < n_pen; ++pen_id) {
    for (int dir_id = 0; dir_id < n_dir; ++dir_id) {
      Aggregate agg;
      agg.penalty_id = pen_id;
      agg.direction_id = dir_id;
      std::vector<double> piv_resid, piv_vhat, piv_vcheck;
      double cov_n = 0, cov_s = 0, cov_q = 0;
      double w_n = 0, w_s = 0, w_q = 0;
      long count = 0, quad_valid = 0;
      double tau_sum = 0;
      for (const RepRecord& rec : result.records) {
        if (rec.penalty_id != pen_id || rec.direction_id != dir_id) continue;
        ++count;
        piv_resid.push_back(rec.pivot_resid);
        piv_vhat.push_back(rec.pivot_vhat);
        piv_vcheck.push_back(rec.pivot_vcheck);
        cov_n += rec.ci_narrow.contains(rec.theta_true);
        cov_s += rec.ci_spike.contains(rec.theta_true);
        cov_q += rec.ci_quad.contains(rec.theta_true);
        w_n += rec.ci_narrow.width();
        w_s += rec.ci_spike.width();
        if (rec.ci_quad.valid) {
          w_q += rec.ci_quad.width();
          ++quad_valid;
        }
        tau_sum += rec.tau_hat_sq;
      }
      if (count == 0) continue;
      agg.pivot_sd_resid = sd(piv_resid);
      agg.pivot_sd_vhat = sd(piv_vhat);
      agg.pivot_sd_vcheck = sd(piv_vcheck);
      if (count >= 20) {
        agg.ks_resid = ks_normal(piv_resid);
        agg.ks_vhat = ks_normal(piv_vhat);
        agg.ks_vcheck = ks_normal(piv_vcheck);
      }
      agg.coverage_narrow = cov_n / count;
      agg.coverage_spike = cov_s / count;
      agg.coverage_quad = cov_q / count;
      agg.mean_width_narrow = w_n / count;
      agg.mean_width_spike = w_s / count;
      agg.mean_width_quad = quad_valid ? w_q / quad_valid : 0.0;
      agg.tau_hat_sq_mean = tau_sum / count;
      result.aggregates.push_back(agg);
    }
  }
  return result;
}

OracleResult oracle_beta_star(const Eigen::VectorXd& beta,
                              const CovarianceSpec& cov, const Penalty& pen,
                              double tol, double sigma) {
  validate_penalty(pen, beta.size());

  if (const auto* smooth = std::get_if<SmoothPenalty>(&pen)) {
    // No closed-form prox: damped Newton on the full objective.
    Eigen::VectorXd b = Eigen::VectorXd::Zero(beta.size());
    auto objective = [&](const Eigen::VectorXd& v) {
      return 0.5 * cov.quadratic(v - beta) + smooth->value(v);
    };
    double obj = objective(b);
    bool converged = false;
    for (long it = 0; it < 100000; ++it) {
      Eigen::VectorXd grad = cov.matrix() * (b - beta) + smooth->gradient(b);
      if (grad.cwiseAbs().maxCoeff() <= tol) {
        converged = true;
        break;
      }
      Eigen::MatrixXd hess = cov.matrix() + smooth->hessian(b);
      Eigen::VectorXd direction = hess.ldlt().solve(-grad);
      double t = 1.0;
      while (t > 1e-14 && objective(b + t * direction) >= obj) t *= 0.5;
      b += t * direction;
      obj = objective(b);
    }
    if (!converged) {
      throw std::runtime_error("oracle_beta_star did not converge");
    }
    OracleResult out;
    out.beta_star = b;
    out.excess_risk = cov.quadratic(b - beta);
    out.r_star = sigma * sigma + out.excess_risk;
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.matrix());
  const double step = 1.0 / es.eigenvalues().maxCoeff();

  auto prox = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return std::visit(
        [&](const auto& g) -> Eigen::VectorXd {
          using T = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<T, LassoPenalty>) {
            Eigen::VectorXd out(v.size());
            for (Eigen::Index j = 0; j < v.size(); ++j) {
              const double t = step * g.lambda;
              out(j) = v(j) > t ? v(j) - t : (v(j) < -t ? v(j) + t : 0.0);
            }
            return out;
          } else if constexpr (std::is_same_v<T, RidgePenalty>) {
            return v / (1.0 + 2.0 * step * g.mu);
          } else if constexpr (std::is_same_v<T, ElasticNetPenalty>) {
            Eigen::VectorXd out(v.size());
            for (Eigen::Index j = 0; j < v.size(); ++j) {
              const double t = step * g.lambda;
              const double soft = v(j) > t ? v(j) - t : (v(j) < -t ? v(j) + t : 0.0);
              out(j) = soft / (1.0 + 2.0 * step * g.mu);
            }
            return out;
          } else if constexpr (std::is_same_v<T, GroupLassoPenalty>) {
            Eigen::VectorXd out = v;
            for (std::size_t k = 0; k < g.groups.size(); ++k) {
              double norm_sq = 0.0;
              for (int j : g.groups[k]) norm_sq += v(j) * v(j);
              const double norm = std::sqrt(norm_sq);
              const double t = step * g.lambdas(static_cast<Eigen::Index>(k));
              const double scale = norm > t ? 1.0 - t / norm : 0.0;
              for (int j : g.groups[k]) out(j) = scale * v(j);
            }
            return out;
          } else {
            throw std::logic_error("smooth penalties are handled above");
          }
        },
        pen);
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(beta.size());
  const long max_iter = 100000;
  bool converged = false;
  for (long it = 0; it < max_iter; ++it) {
    Eigen::VectorXd grad = cov.matrix() * (b - beta);
    Eigen::VectorXd next = prox(b - step * grad);
    const double move = (next - b).cwiseAbs().maxCoeff() / step;
    b = std::move(next);
    if (move <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw std::runtime_error("oracle_beta_star did not converge");
  }
  OracleResult out;
  out.beta_star = b;
  out.excess_risk = cov.quadratic(b - beta);
  out.r_star = sigma * sigma + out.excess_risk;
  return out;
}

double ks_normal(const std::vector<double>& samples) {
  if (samples.size() < 20) {
    throw std::invalid_argument("ks_normal: need at least 20 samples");
  }
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double phi = normal_cdf(sorted[i]);
    const double hi = (static_cast<double>(i) + 1.0) / m - phi;
    const double lo = phi - static_cast<double>(i) / m;
    ks = std::max({ks, hi, lo});
  }
  return ks;
}

double sparsity_condition_rate(const ExperimentResult& result, double kappa,
                               int penalty_id) {
  const double bound = kappa * static_cast<double>(result.config.n) / 2.0;
  long total = 0, ok = 0;
  for (const RepRecord& rec : result.records) {
    if (penalty_id >= 0 && rec.penalty_id != penalty_id) continue;
    if (rec.direction_id != 0) continue;  // support does not depend on a0
    ++total;
    if (static_cast<double>(rec.active_size) <= bound) ++ok;
  }
  if (total == 0) throw std::invalid_argument("no matching records");
  return static_cast<double>(ok) / static_cast<double>(total);
}

void write_results(const ExperimentResult& result, const std::string& prefix) {
  const std::vector<std::string> rep_header = {
      "rep",          "penalty_id",   "lambda",        "direction_id",
      "df",           "active_size",  "theta_hat",     "pivot_resid",
      "pivot_vhat",   "pivot_vcheck", "ci_narrow_lo",  "ci_narrow_hi",
      "ci_spike_lo",  "ci_spike_hi",  "ci_quad_lo",    "ci_quad_hi",
      "ci_quad_valid", "pred_err",    "dir_err_sq",    "diag_item_v",
      "w0_dot_r"};
  Eigen::MatrixXd rep_values(static_cast<Eigen::Index>(result.records.size()),
                             static_cast<Eigen::Index>(rep_header.size()));
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const RepRecord& r = result.records[i];
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    Eigen::Index c = 0;
    rep_values(row, c++) = static_cast<double>(r.rep);
    rep_values(row, c++) = r.penalty_id;
    rep_values(row, c++) = r.lambda;
    rep_values(row, c++) = r.direction_id;
    rep_values(row, c++) = r.df;
    rep_values(row, c++) = static_cast<double>(r.active_size);
    rep_values(row, c++) = r.theta_hat;
    rep_values(row, c++) = r.pivot_resid;
    rep_values(row, c++) = r.pivot_vhat;
    rep_values(row, c++) = r.pivot_vcheck;
    rep_values(row, c++) = r.ci_narrow.lo;
    rep_values(row, c++) = r.ci_narrow.hi;
    rep_values(row, c++) = r.ci_spike.lo;
    rep_values(row, c++) = r.ci_spike.hi;
    rep_values(row, c++) = r.ci_quad.lo;
    rep_values(row, c++) = r.ci_quad.hi;
    rep_values(row, c++) = r.ci_quad.valid ? 1.0 : 0.0;
    rep_values(row, c++) = r.pred_err;
    rep_values(row, c++) = r.dir_err_sq;
    rep_values(row, c++) = r.diag_item_v;
    rep_values(row, c++) = r.w0_dot_r;
  }
  write_csv(prefix + "_reps.csv", rep_header, rep_values);

  const std::vector<std::string> agg_header = {
      "penalty_id",       "direction_id",     "pivot_sd_resid",
      "pivot_sd_vhat",    "pivot_sd_vcheck",  "ks_resid",
      "ks_vhat",          "ks_vcheck",        "coverage_narrow",
      "coverage_spike",   "coverage_quad",    "mean_width_narrow",
      "mean_width_spike", "mean_width_quad",  "tau_hat_sq_mean"};
  Eigen::MatrixXd agg_values(static_cast<Eigen::Index>(result.aggregates.size()),
                             static_cast<Eigen::Index>(agg_header.size()));
  for (std::size_t i = 0; i < result.aggregates.size(); ++i) {
    const Aggregate& a = result.aggregates[i];
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    Eigen::Index c = 0;
    agg_values(row, c++) = a.penalty_id;
    agg_values(row, c++) = a.direction_id;
    agg_values(row, c++) = a.pivot_sd_resid;
    agg_values(row, c++) = a.pivot_sd_vhat;
    agg_values(row, c++) = a.pivot_sd_vcheck;
    agg_values(row, c++) = a.ks_resid;
    agg_values(row, c++) = a.ks_vhat;
    agg_values(row, c++) = a.ks_vcheck;
    agg_values(row, c++) = a.coverage_narrow;
    agg_values(row, c++) = a.coverage_spike;
    agg_values(row, c++) = a.coverage_quad;
    agg_values(row, c++) = a.mean_width_narrow;
    agg_values(row, c++) = a.mean_width_spike;
    agg_values(row, c++) = a.mean_width_quad;
    agg_values(row, c++) = a.tau_hat_sq_mean;
  }
  write_csv(prefix + "_aggregate.csv", agg_header, agg_values);

  // QQ pairs for external plotting: v0 coded 0 = resid, 1 = vhat, 2 = vcheck.
  std::vector<std::array<double, 5>> qq_rows;
  for (const Aggregate& agg : result.aggregates) {
    for (int v0 = 0; v0 < 3; ++v0) {
      std::vector<double> pivots;
      for (const RepRecord& rec : result.records) {
        if (rec.penalty_id != agg.penalty_id ||
            rec.direction_id != agg.direction_id) {
          continue;
        }
        pivots.push_back(v0 == 0 ? rec.pivot_resid
                                 : (v0 == 1 ? rec.pivot_vhat : rec.pivot_vcheck));
      }
      std::sort(pivots.begin(), pivots.end());
      const double m = static_cast<double>(pivots.size());
      for (std::size_t i = 0; i < pivots.size(); ++i) {
        const double q =
            normal_quantile((static_cast<double>(i) + 0.5) / m);
        qq_rows.push_back({static_cast<double>(agg.penalty_id),
                           static_cast<double>(agg.direction_id),
                           static_cast<double>(v0), q, pivots[i]});
      }
    }
  }
  const std::vector<std::string> qq_header = {
      "penalty_id", "direction_id", "v0", "theoretical_quantile",
      "order_statistic"};
  Eigen::MatrixXd qq_values(static_cast<Eigen::Index>(qq_rows.size()), 5);
  for (std::size_t i = 0; i < qq_rows.size(); ++i) {
    for (Eigen::Index c = 0; c < 5; ++c) {
      qq_values(static_cast<Eigen::Index>(i), c) = qq_rows[i][static_cast<std::size_t>(c)];
    }
  }
  write_csv(prefix + "_qq.csv", qq_header, qq_values);
}

}  // namespace debiasreg
