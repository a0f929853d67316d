#include "debiasreg/stein.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "debiasreg/debias.hpp"
#include "debiasreg/parallel.hpp"

namespace debiasreg {

namespace {

double fd_step(const SteinFunction& sf, double zi) {
  return sf.fd_step_scale * (1.0 + std::abs(zi));
}

double finite_diff_divergence(const SteinFunction& sf,
                              const Eigen::VectorXd& z) {
  double div = 0.0;
  Eigen::VectorXd zp = z, zm = z;
  for (Eigen::Index i = 0; i < sf.dim; ++i) {
    const double step = fd_step(sf, z(i));
    zp(i) = z(i) + step;
    zm(i) = z(i) - step;
    div += (sf.f(zp)(i) - sf.f(zm)(i)) / (2.0 * step);
    zp(i) = z(i);
    zm(i) = z(i);
  }
  return div;
}

Eigen::MatrixXd gradient_at(const SteinFunction& sf, const Eigen::VectorXd& z) {
  if (sf.mode == SteinFunction::DivergenceMode::analytic && sf.gradient) {
    return sf.gradient(z);
  }
  return finite_diff_gradient(sf, z);
}

struct RepStats {
  double xi_value = 0.0;
  double f_sq = 0.0;
  double trace_sq = 0.0;
  double frob_sq = 0.0;
};

RepStats evaluate_rep(const SteinFunction& sf, const Eigen::VectorXd& z,
                      Eigen::VectorXd* f_out, Eigen::MatrixXd* grad_out) {
  Eigen::VectorXd fz = sf.f(z);
  Eigen::MatrixXd g = gradient_at(sf, z);
  RepStats s;
  s.xi_value = z.dot(fz) - g.trace();
  s.f_sq = fz.squaredNorm();
  s.trace_sq = (g.array() * g.transpose().array()).sum();
  s.frob_sq = g.squaredNorm();
  if (!std::isfinite(s.xi_value)) {
    throw std::runtime_error("nonsmooth evaluation");
  }
  if (f_out) *f_out = std::move(fz);
  if (grad_out) *grad_out = std::move(g);
  return s;
}

Eigen::VectorXd draw_z(Eigen::Index dim, Rng& rng) {
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.gaussian();
  return z;
}

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

Eigen::MatrixXd finite_diff_gradient(const SteinFunction& sf,
                                     const Eigen::VectorXd& z) {
  Eigen::MatrixXd jac(sf.dim, sf.dim);
  Eigen::VectorXd zp = z, zm = z;
  for (Eigen::Index i = 0; i < sf.dim; ++i) {
    const double step = fd_step(sf, z(i));
    zp(i) = z(i) + step;
    zm(i) = z(i) - step;
    jac.col(i) = (sf.f(zp) - sf.f(zm)) / (2.0 * step);
    zp(i) = z(i);
    zm(i) = z(i);
  }
  return jac.transpose();  // gradient = Jacobian'
}

double xi(const SteinFunction& sf, const Eigen::VectorXd& z) {
  if (!z.allFinite()) throw std::invalid_argument("xi: z must be finite");
  double div;
  if (sf.mode == SteinFunction::DivergenceMode::analytic && sf.gradient) {
    div = sf.gradient(z).trace();
  } else {
    div = finite_diff_divergence(sf, z);
  }
  if (!std::isfinite(div)) throw std::runtime_error("nonsmooth evaluation");
  return z.dot(sf.f(z)) - div;
}

double variance_estimator(const SteinFunction& sf, const Eigen::VectorXd& z) {
  Eigen::VectorXd fz = sf.f(z);
  Eigen::MatrixXd g = gradient_at(sf, z);
  return fz.squaredNorm() + (g.array() * g.transpose().array()).sum();
}

SecondOrderCheck second_order_stein_check(const SteinFunction& sf, long reps,
                                          std::uint64_t seed) {
  if (reps < 100) throw std::invalid_argument("second_order_stein_check: reps >= 100");
  std::vector<double> xis(static_cast<std::size_t>(reps));
  std::vector<double> rhs(static_cast<std::size_t>(reps));
  parallel_for(reps, [&](long rep) {
    Rng rng = Rng::child(seed, static_cast<std::uint64_t>(rep));
    Eigen::VectorXd z = draw_z(sf.dim, rng);
    RepStats s = evaluate_rep(sf, z, nullptr, nullptr);
    xis[static_cast<std::size_t>(rep)] = s.xi_value;
    rhs[static_cast<std::size_t>(rep)] = s.f_sq + s.trace_sq;
  });

  SecondOrderCheck out;
  out.reps = reps;
  std::vector<double> lhs(static_cast<std::size_t>(reps));
  std::vector<double> diff(static_cast<std::size_t>(reps));
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    lhs[i] = xis[i] * xis[i];
    diff[i] = lhs[i] - rhs[i];
  }
  const double sqrt_reps = std::sqrt(static_cast<double>(reps));
  out.lhs = sample_mean(lhs);
  out.rhs = sample_mean(rhs);
  out.lhs_se = sample_sd(lhs, out.lhs) / sqrt_reps;
  out.rhs_se = sample_sd(rhs, out.rhs) / sqrt_reps;
  out.mean_xi = sample_mean(xis);
  out.mean_xi_se = sample_sd(xis, out.mean_xi) / sqrt_reps;
  const double diff_mean = sample_mean(diff);
  const double diff_se = sample_sd(diff, diff_mean) / sqrt_reps;
  out.z_score = diff_se > 0.0 ? diff_mean / diff_se : 0.0;
  return out;
}

SteinReport approximation_report(const SteinFunction& sf, long reps,
                                 std::uint64_t seed) {
  if (reps < 1000) throw std::invalid_argument("approximation_report: reps >= 1000");
  const Eigen::Index n = sf.dim;
  const bool store_a_bar = n <= 500;
  constexpr int kProbes = 64;

  // Fixed probe vectors for the Hutchinson fallback (n > 500).
  Eigen::MatrixXd probes;
  if (!store_a_bar) {
    Rng prng(seed ^ 0x9e3779b97f4a7c15ull);
    probes.resize(n, kProbes);
    for (int j = 0; j < kProbes; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        probes(i, j) = prng.next_u32() & 1u ? 1.0 : -1.0;
      }
    }
  }

  // Deterministic reduction: fixed-size rep blocks, combined in block order.
  constexpr long kBlock = 128;
  const long n_blocks = (reps + kBlock - 1) / kBlock;
  std::vector<double> xis(static_cast<std::size_t>(reps));
  std::vector<RepStats> stats(static_cast<std::size_t>(reps));
  std::vector<Eigen::VectorXd> mu_blocks(static_cast<std::size_t>(n_blocks));
  std::vector<Eigen::MatrixXd> a_blocks(static_cast<std::size_t>(n_blocks));

  parallel_for(n_blocks, [&](long block) {
    Eigen::VectorXd mu_acc = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd a_acc = store_a_bar ? Eigen::MatrixXd::Zero(n, n)
                                        : Eigen::MatrixXd::Zero(n, kProbes);
    const long lo = block * kBlock;
    const long hi = std::min(reps, lo + kBlock);
    for (long rep = lo; rep < hi; ++rep) {
      Rng rng = Rng::child(seed, static_cast<std::uint64_t>(rep));
      Eigen::VectorXd z = draw_z(n, rng);
      Eigen::VectorXd fz;
      Eigen::MatrixXd g;
      RepStats s = evaluate_rep(sf, z, &fz, &g);
      xis[static_cast<std::size_t>(rep)] = s.xi_value;
      stats[static_cast<std::size_t>(rep)] = s;
      mu_acc += fz;
      if (store_a_bar) {
        a_acc += g;
      } else {
        a_acc += 0.5 * (g * probes + g.transpose() * probes);
      }
    }
    mu_blocks[static_cast<std::size_t>(block)] = std::move(mu_acc);
    a_blocks[static_cast<std::size_t>(block)] = std::move(a_acc);
  });

  SteinReport report;
  report.reps = reps;
  Eigen::VectorXd mu_sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd a_sum = store_a_bar ? Eigen::MatrixXd::Zero(n, n)
                                      : Eigen::MatrixXd::Zero(n, kProbes);
  for (long b = 0; b < n_blocks; ++b) {
    mu_sum += mu_blocks[static_cast<std::size_t>(b)];
    a_sum += a_blocks[static_cast<std::size_t>(b)];
  }
  const double inv_reps = 1.0 / static_cast<double>(reps);
  report.mu_bar = mu_sum * inv_reps;

  report.mc_mean_xi = sample_mean(xis);
  double var = 0.0;
  for (double x : xis) var += (x - report.mc_mean_xi) * (x - report.mc_mean_xi);
  var /= static_cast<double>(reps - 1);
  report.mc_var_xi = var;
  if (!(var > 0.0)) throw std::runtime_error("degenerate");

  for (const RepStats& s : stats) {
    report.mean_fsq += s.f_sq * inv_reps;
    report.mean_tr_grad_sq += s.trace_sq * inv_reps;
    report.mean_frob_grad_sq += s.frob_sq * inv_reps;
  }

  if (store_a_bar) {
    Eigen::MatrixXd a_bar = a_sum * inv_reps;
    Eigen::MatrixXd a_sym = 0.5 * (a_bar + a_bar.transpose());
    report.a_bar_sym_frob_sq = a_sym.squaredNorm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_sym);
    report.a_bar_sym_op = es.eigenvalues().cwiseAbs().maxCoeff();
    report.a_bar = std::move(a_bar);
  } else {
    // a_sum holds A^s V summed over reps; Hutchinson: E||A^s v||^2 = ||A^s||_F^2.
    Eigen::MatrixXd asv = a_sum * inv_reps;
    report.a_bar_sym_frob_sq = asv.squaredNorm() / kProbes;
    // Rayleigh-Ritz estimate of the operator norm on the probe span.
    Eigen::MatrixXd small = (probes.transpose() * probes)
                                .ldlt()
                                .solve(probes.transpose() * asv);
    report.a_bar_sym_op =
        small.eigenvalues().cwiseAbs().maxCoeff();
  }

  // E ||{grad}^s||_F^2 from the per-rep identity 2||M^s||_F^2 = ||M||_F^2 + tr(M^2).
  const double mean_sym_frob =
      0.5 * (report.mean_frob_grad_sq + report.mean_tr_grad_sq);

  const double mu_sq = report.mu_bar.squaredNorm();
  auto clamp01 = [](double x) { return std::min(1.0, std::max(0.0, x)); };
  report.eps1_sq = clamp01(1.0 - mu_sq / report.mc_var_xi);
  report.eps1_bar_sq =
      clamp01(2.0 * mean_sym_frob / (mu_sq + 2.0 * mean_sym_frob));
  report.eps12_sq =
      clamp01(1.0 - (mu_sq + 2.0 * report.a_bar_sym_frob_sq) / report.mc_var_xi);
  report.quadratic_clt_discriminant =
      report.a_bar_sym_op * report.a_bar_sym_op /
      (mu_sq + report.a_bar_sym_frob_sq);
  return report;
}

SteinFunction make_constant_function(Eigen::VectorXd mu) {
  SteinFunction sf;
  sf.dim = mu.size();
  const Eigen::Index n = sf.dim;
  sf.f = [mu = std::move(mu)](const Eigen::VectorXd&) { return mu; };
  sf.gradient = [n](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(n, n);
  };
  return sf;
}

SteinFunction make_linear_function(Eigen::MatrixXd a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("linear function needs square A");
  SteinFunction sf;
  sf.dim = a.rows();
  Eigen::MatrixXd grad = a.transpose();
  sf.f = [a = std::move(a)](const Eigen::VectorXd& z) { return (a * z).eval(); };
  sf.gradient = [grad = std::move(grad)](const Eigen::VectorXd&) { return grad; };
  return sf;
}

SteinFunction make_soft_threshold_function(Eigen::Index dim, double level) {
  SteinFunction sf;
  sf.dim = dim;
  sf.f = [level](const Eigen::VectorXd& z) {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (z(i) > level) out(i) = z(i) - level;
      else if (z(i) < -level) out(i) = z(i) + level;
      else out(i) = 0.0;
    }
    return out;
  };
  // a.e. gradient: active-coordinate indicator.
  sf.gradient = [level](const Eigen::VectorXd& z) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(z.size(), z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (std::abs(z(i)) > level) g(i, i) = 1.0;
    }
    return g;
  };
  return sf;
}

SteinFunction make_regression_function(Eigen::MatrixXd xq0,
                                       Eigen::VectorXd eps,
                                       Eigen::VectorXd beta,
                                       Eigen::VectorXd a0, Penalty pen,
                                       double tol) {
  const Eigen::Index n = xq0.rows();
  struct Fiber {
    Eigen::MatrixXd xq0;
    Eigen::VectorXd eps;
    Eigen::VectorXd beta;
    Eigen::VectorXd a0;
    Penalty pen;
    double tol;
    double a0_beta;

    RegressionInstance instance(const Eigen::VectorXd& z) const {
      RegressionInstance inst;
      inst.x = xq0 + z * a0.transpose();
      inst.y = xq0 * beta + z * a0_beta + eps;
      return inst;
    }
    FitResult refit(const RegressionInstance& inst) const {
      FitOptions opts;
      opts.tol = tol;
      return fit(inst, pen, opts);
    }
  };
  auto fiber = std::make_shared<Fiber>(Fiber{std::move(xq0), std::move(eps),
                                             std::move(beta), std::move(a0),
                                             std::move(pen), tol, 0.0});
  fiber->a0_beta = fiber->a0.dot(fiber->beta);

  SteinFunction sf;
  sf.dim = n;
  sf.f = [fiber](const Eigen::VectorXd& z) {
    RegressionInstance inst = fiber->instance(z);
    FitResult fr = fiber->refit(inst);
    return (-fr.residual).eval();
  };
  sf.gradient = [fiber](const Eigen::VectorXd& z) {
    RegressionInstance inst = fiber->instance(z);
    FitResult fr = fiber->refit(inst);
    Direction dir;
    dir.a0 = fiber->a0;
    dir.u0 = fiber->a0;  // identity covariance fiber
    dir.z0 = z;
    ResidualMapGradient g = residual_map_gradient(
        fr, fiber->pen, dir, inst, std::optional<double>(fiber->a0_beta),
        /*materialize=*/true);
    if (!g.matrix) throw std::runtime_error("gradient materialization failed");
    return g.matrix->transpose().eval();  // grad f = (grad f(z0)')'
  };
  return sf;
}

const std::vector<RegistryEntry>& stein_registry() {
  static const std::vector<RegistryEntry> registry = [] {
    std::vector<RegistryEntry> entries;
    entries.push_back({"constant", [](Eigen::Index dim, std::uint64_t) {
                         return make_constant_function(
                             Eigen::VectorXd::Ones(dim));
                       }});
    entries.push_back({"linear-identity", [](Eigen::Index dim, std::uint64_t) {
                         return make_linear_function(
                             Eigen::MatrixXd::Identity(dim, dim));
                       }});
    entries.push_back({"linear-symmetric", [](Eigen::Index dim, std::uint64_t seed) {
                         Rng rng(seed, 0xA1);
                         Eigen::MatrixXd b(dim, dim);
                         for (Eigen::Index i = 0; i < dim; ++i)
                           for (Eigen::Index j = 0; j < dim; ++j)
                             b(i, j) = rng.gaussian();
                         Eigen::MatrixXd a =
                             (b + b.transpose()) /
                             (2.0 * std::sqrt(static_cast<double>(dim)));
                         return make_linear_function(std::move(a));
                       }});
    entries.push_back({"linear-asymmetric", [](Eigen::Index dim, std::uint64_t seed) {
                         Rng rng(seed, 0xA2);
                         Eigen::MatrixXd a(dim, dim);
                         for (Eigen::Index i = 0; i < dim; ++i)
                           for (Eigen::Index j = 0; j < dim; ++j)
                             a(i, j) = rng.gaussian();
                         a /= std::sqrt(static_cast<double>(dim));
                         return make_linear_function(std::move(a));
                       }});
    entries.push_back({"soft-threshold", [](Eigen::Index dim, std::uint64_t) {
                         return make_soft_threshold_function(dim, 1.0);
                       }});
    entries.push_back({"regression-lasso", [](Eigen::Index dim, std::uint64_t seed) {
                         const Eigen::Index n = dim;
                         const Eigen::Index p = std::max<Eigen::Index>(1, n / 2);
                         const Eigen::Index s = std::max<Eigen::Index>(1, p / 5);
                         Rng rng(seed, 0xA3);
                         Eigen::MatrixXd x0(n, p);
                         for (Eigen::Index i = 0; i < n; ++i)
                           for (Eigen::Index j = 0; j < p; ++j)
                             x0(i, j) = rng.gaussian();
                         Eigen::VectorXd eps(n);
                         for (Eigen::Index i = 0; i < n; ++i) eps(i) = rng.gaussian();
                         Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
                         beta.head(s).setOnes();
                         Eigen::VectorXd a0 = Eigen::VectorXd::Unit(p, 0);
                         // the z0 fiber through a0 = e1: XQ0 zeroes column 1
                         Eigen::MatrixXd xq0 = x0;
                         xq0.col(0).setZero();
                         const double lambda = std::sqrt(
                             2.0 * std::log(static_cast<double>(p) /
                                            static_cast<double>(s)) /
                             static_cast<double>(n));
                         return make_regression_function(
                             std::move(xq0), std::move(eps), std::move(beta),
                             std::move(a0), LassoPenalty{lambda});
                       }});
    return entries;
  }();
  return registry;
}

SteinFunction make_registry_function(const std::string& name, Eigen::Index dim,
                                     std::uint64_t seed) {
  for (const auto& entry : stein_registry()) {
    if (entry.name == name) return entry.make(dim, seed);
  }
  throw std::invalid_argument("unknown stein registry function '" + name + "'");
}

}  // namespace debiasreg
