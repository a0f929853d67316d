#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "debiasreg/config.hpp"
#include "debiasreg/csv.hpp"
#include "debiasreg/debias.hpp"
#include "debiasreg/inference.hpp"
#include "debiasreg/model.hpp"
#include "debiasreg/penalty.hpp"
#include "debiasreg/sim.hpp"
#include "debiasreg/stein.hpp"

namespace {

using namespace debiasreg;

struct CommonOpts {
  std::string x_path;
  std::string y_path;
  std::string penalty = "lasso";
  double lambda = 0.0;
  double mu = 0.0;
  long groups = 0;
  double tol = 1e-10;
  long max_iter = 200000;
  std::string cov_path;
  long direction = 1;  // 1-based canonical index
  std::string out;
};

void add_fit_options(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--x", o.x_path, "design matrix CSV (header x1..xp)")->required();
  cmd->add_option("--y", o.y_path, "response CSV (single column)")->required();
  cmd->add_option("--penalty", o.penalty,
                  "lasso | ridge | elastic_net | group_lasso");
  cmd->add_option("--lambda", o.lambda, "l1 / group penalty level");
  cmd->add_option("--mu", o.mu, "ridge / elastic net l2 level");
  cmd->add_option("--groups", o.groups, "number of equal-size groups");
  cmd->add_option("--tol", o.tol, "KKT convergence tolerance");
  cmd->add_option("--max-iter", o.max_iter, "iteration cap");
  cmd->add_option("--out", o.out, "output CSV path");
}

void add_direction_options(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--cov", o.cov_path,
                  "known design covariance CSV (default: identity)");
  cmd->add_option("--direction", o.direction,
                  "canonical direction index (1-based)");
}

Penalty make_penalty(const CommonOpts& o, Eigen::Index p) {
  if (o.penalty == "lasso") return LassoPenalty{o.lambda};
  if (o.penalty == "ridge") return RidgePenalty{o.mu};
  if (o.penalty == "elastic_net") return ElasticNetPenalty{o.lambda, o.mu};
  if (o.penalty == "group_lasso") {
    if (o.groups < 1) {
      throw std::invalid_argument("group_lasso requires --groups");
    }
    return GroupLassoPenalty::equal_blocks(p, o.groups, o.lambda);
  }
  throw std::invalid_argument("unknown penalty '" + o.penalty + "'");
}

RegressionInstance load_instance(const CommonOpts& o) {
  RegressionInstance inst;
  inst.x = read_design_csv(o.x_path);
  inst.y = read_vector_csv(o.y_path);
  inst.validate();
  return inst;
}

CovarianceSpec load_cov(const CommonOpts& o, Eigen::Index p) {
  if (o.cov_path.empty()) return CovarianceSpec::identity(p);
  return CovarianceSpec(read_square_csv(o.cov_path));
}

FitResult run_fit(const RegressionInstance& inst, const Penalty& pen,
                  const CommonOpts& o) {
  FitOptions opts;
  opts.tol = o.tol;
  opts.max_iter = o.max_iter;
  return fit(inst, pen, opts);
}

int cmd_fit(const CommonOpts& o) {
  RegressionInstance inst = load_instance(o);
  Penalty pen = make_penalty(o, inst.p());
  FitResult fr = run_fit(inst, pen, o);
  std::cout << "objective " << format_double(fr.objective) << "\n";
  std::cout << "active_size " << fr.active.size() << "\n";
  std::cout << "kkt_max_violation " << format_double(fr.kkt_max_violation) << "\n";
  std::cout << "iterations " << fr.iterations << "\n";
  if (!o.out.empty()) {
    write_vector_csv(o.out, "beta", fr.beta);
    std::cout << "wrote " << o.out << "\n";
  }
  return 0;
}

int cmd_debias(const CommonOpts& o) {
  RegressionInstance inst = load_instance(o);
  Penalty pen = make_penalty(o, inst.p());
  CovarianceSpec cov = load_cov(o, inst.p());
  if (o.direction < 1 || o.direction > inst.p()) {
    throw std::invalid_argument("--direction out of range");
  }
  Direction dir = normalize_direction(
      Eigen::VectorXd::Unit(inst.p(), o.direction - 1), cov, inst.x);
  FitResult fr = run_fit(inst, pen, o);
  DebiasReport report = debias_report(fr, pen, dir, inst, cov);
  std::cout << "df " << format_double(report.df) << "\n";
  std::cout << "frob_i_minus_h_sq " << format_double(report.frob_i_minus_h_sq)
            << "\n";
  std::cout << "theta_hat " << format_double(report.theta_hat) << "\n";
  std::cout << "w0_dot_residual " << format_double(report.w0_dot_residual) << "\n";
  std::cout << "interpolating " << (report.interpolating ? 1 : 0) << "\n";
  if (!o.out.empty()) {
    write_vector_csv(o.out, "beta_debias", report.beta_debias);
    std::cout << "wrote " << o.out << "\n";
  }
  return 0;
}

int cmd_ci(const CommonOpts& o, double alpha) {
  RegressionInstance inst = load_instance(o);
  Penalty pen = make_penalty(o, inst.p());
  CovarianceSpec cov = load_cov(o, inst.p());
  if (o.direction < 1 || o.direction > inst.p()) {
    throw std::invalid_argument("--direction out of range");
  }
  Direction dir = normalize_direction(
      Eigen::VectorXd::Unit(inst.p(), o.direction - 1), cov, inst.x);
  FitResult fr = run_fit(inst, pen, o);

  auto print_ci = [](const char* name, const ConfidenceInterval& ci) {
    if (ci.valid) {
      std::cout << name << " [" << format_double(ci.lo) << ", "
                << format_double(ci.hi) << "]\n";
    } else {
      std::cout << name << " invalid (" << ci.reason << ")\n";
    }
  };
  print_ci("ci_narrow", ci_narrow(fr, dir, pen, inst, alpha));
  print_ci("ci_spike", ci_spike(fr, dir, pen, inst, alpha));
  print_ci("ci_quadratic", ci_quadratic(fr, dir, pen, inst, alpha));
  print_ci("ci_default", ci_default(fr, dir, pen, inst, alpha));
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 std::optional<long> seed_override) {
  ExperimentConfig config = parse_config(config_path);
  if (seed_override) config.master_seed = static_cast<std::uint64_t>(*seed_override);
  ExperimentResult result = run_experiment(config);
  const std::string prefix = out.empty() ? "experiment" : out;
  write_results(result, prefix);
  std::cout << "reps " << config.reps << " failed " << result.failed_reps << "\n";
  for (const Aggregate& agg : result.aggregates) {
    std::cout << "penalty " << agg.penalty_id << " direction "
              << agg.direction_id << " pivot_sd_resid "
              << format_double(agg.pivot_sd_resid) << " pivot_sd_vhat "
              << format_double(agg.pivot_sd_vhat) << " coverage_quad "
              << format_double(agg.coverage_quad) << "\n";
  }
  std::cout << "wrote " << prefix << "_reps.csv " << prefix
            << "_aggregate.csv " << prefix << "_qq.csv\n";
  return 0;
}

int cmd_stein_check(const std::string& fn, long n, long reps, long seed) {
  SteinFunction sf = make_registry_function(fn, n, static_cast<std::uint64_t>(seed));
  SecondOrderCheck check =
      second_order_stein_check(sf, reps, static_cast<std::uint64_t>(seed));
  std::cout << "fn " << fn << " n " << n << " reps " << reps << "\n";
  std::cout << "mean_xi " << format_double(check.mean_xi) << " se "
            << format_double(check.mean_xi_se) << "\n";
  std::cout << "lhs_E_xi_sq " << format_double(check.lhs) << " se "
            << format_double(check.lhs_se) << "\n";
  std::cout << "rhs_E_fsq_plus_tr " << format_double(check.rhs) << " se "
            << format_double(check.rhs_se) << "\n";
  std::cout << "z_score " << format_double(check.z_score) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"de-biased convex-regularized estimation and inference"};
  app.require_subcommand(1);

  CommonOpts fit_opts;
  CLI::App* fit_cmd = app.add_subcommand("fit", "solve the penalized regression");
  add_fit_options(fit_cmd, fit_opts);

  CommonOpts debias_opts;
  CLI::App* debias_cmd =
      app.add_subcommand("debias", "de-biasing report for one direction");
  add_fit_options(debias_cmd, debias_opts);
  add_direction_options(debias_cmd, debias_opts);

  CommonOpts ci_opts;
  double alpha = 0.05;
  CLI::App* ci_cmd =
      app.add_subcommand("ci", "confidence intervals for one direction");
  add_fit_options(ci_cmd, ci_opts);
  add_direction_options(ci_cmd, ci_opts);
  ci_cmd->add_option("--alpha", alpha, "two-sided level (default 0.05)");

  std::string config_path, sim_out;
  long sim_seed = -1;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a config-driven experiment");
  sim_cmd->add_option("--config", config_path, "experiment config file")->required();
  sim_cmd->add_option("--out", sim_out, "output CSV prefix");
  sim_cmd->add_option("--seed", sim_seed, "override the config master seed");

  std::string fn = "linear-identity";
  long stein_n = 50, stein_reps = 100000, stein_seed = 1;
  CLI::App* stein_cmd =
      app.add_subcommand("stein-check", "second-order Stein identity check");
  stein_cmd->add_option("--fn", fn, "registry function name");
  stein_cmd->add_option("--n", stein_n, "dimension");
  stein_cmd->add_option("--reps", stein_reps, "Monte Carlo replications");
  stein_cmd->add_option("--seed", stein_seed, "master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_opts);
    if (debias_cmd->parsed()) return cmd_debias(debias_opts);
    if (ci_cmd->parsed()) return cmd_ci(ci_opts, alpha);
    if (sim_cmd->parsed()) {
      return cmd_simulate(config_path, sim_out,
                          sim_seed >= 0 ? std::optional<long>(sim_seed)
                                        : std::nullopt);
    }
    if (stein_cmd->parsed()) {
      return cmd_stein_check(fn, stein_n, stein_reps, stein_seed);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
