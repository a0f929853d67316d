#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "debiasreg/config.hpp"
#include "debiasreg/debias.hpp"
#include "debiasreg/normal.hpp"
#include "debiasreg/inference.hpp"
#include "debiasreg/model.hpp"
#include "debiasreg/penalty.hpp"
#include "debiasreg/sim.hpp"
#include "debiasreg/stein.hpp"

namespace py = pybind11;
using namespace debiasreg;

namespace {

Penalty penalty_from_args(const std::string& kind, double lambda, double mu,
                          long groups, Eigen::Index p) {
  if (kind == "lasso") return LassoPenalty{lambda};
  if (kind == "ridge") return RidgePenalty{mu};
  if (kind == "elastic_net") return ElasticNetPenalty{lambda, mu};
  if (kind == "group_lasso") {
    return GroupLassoPenalty::equal_blocks(p, groups, lambda);
  }
  throw std::invalid_argument("unknown penalty '" + kind + "'");
}

RegressionInstance instance_from(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y) {
  RegressionInstance inst;
  inst.x = x;
  inst.y = y;
  inst.validate();
  return inst;
}

py::dict fit_py(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const std::string& penalty, double lambda, double mu,
                long groups, double tol, long max_iter) {
  RegressionInstance inst = instance_from(x, y);
  Penalty pen = penalty_from_args(penalty, lambda, mu, groups, inst.p());
  FitOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  FitResult fr = fit(inst, pen, opts);
  py::dict out;
  out["beta"] = fr.beta;
  out["residual"] = fr.residual;
  out["objective"] = fr.objective;
  out["iterations"] = fr.iterations;
  out["kkt_max_violation"] = fr.kkt_max_violation;
  out["active"] = fr.active;
  out["active_groups"] = fr.active_groups;
  return out;
}

py::dict debias_py(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const std::string& penalty, double lambda, double mu,
                   long groups, const Eigen::VectorXd& a,
                   py::object sigma_obj, double tol) {
  RegressionInstance inst = instance_from(x, y);
  Penalty pen = penalty_from_args(penalty, lambda, mu, groups, inst.p());
  CovarianceSpec cov =
      sigma_obj.is_none()
          ? CovarianceSpec::identity(inst.p())
          : CovarianceSpec(sigma_obj.cast<Eigen::MatrixXd>());
  Direction dir = normalize_direction(a, cov, inst.x);
  FitOptions opts;
  opts.tol = tol;
  FitResult fr = fit(inst, pen, opts);
  DebiasReport report = debias_report(fr, pen, dir, inst, cov);
  py::dict out;
  out["df"] = report.df;
  out["frob_i_minus_h_sq"] = report.frob_i_minus_h_sq;
  out["theta_hat"] = report.theta_hat;
  out["beta_debias"] = report.beta_debias;
  out["w0"] = report.w0;
  out["w0_dot_residual"] = report.w0_dot_residual;
  out["interpolating"] = report.interpolating;
  return out;
}

py::dict ci_py(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const std::string& penalty, double lambda, double mu,
               long groups, const Eigen::VectorXd& a, py::object sigma_obj,
               double alpha, double tol) {
  RegressionInstance inst = instance_from(x, y);
  Penalty pen = penalty_from_args(penalty, lambda, mu, groups, inst.p());
  CovarianceSpec cov =
      sigma_obj.is_none()
          ? CovarianceSpec::identity(inst.p())
          : CovarianceSpec(sigma_obj.cast<Eigen::MatrixXd>());
  Direction dir = normalize_direction(a, cov, inst.x);
  FitOptions opts;
  opts.tol = tol;
  FitResult fr = fit(inst, pen, opts);
  auto pack = [](const ConfidenceInterval& ci) {
    py::dict d;
    d["lo"] = ci.lo;
    d["hi"] = ci.hi;
    d["valid"] = ci.valid;
    d["reason"] = ci.reason;
    return d;
  };
  py::dict out;
  out["narrow"] = pack(ci_narrow(fr, dir, pen, inst, alpha));
  out["spike"] = pack(ci_spike(fr, dir, pen, inst, alpha));
  out["quadratic"] = pack(ci_quadratic(fr, dir, pen, inst, alpha));
  out["default"] = pack(ci_default(fr, dir, pen, inst, alpha));
  return out;
}

py::dict stein_check_py(const std::string& fn, long n, long reps, long seed) {
  SteinFunction sf =
      make_registry_function(fn, n, static_cast<std::uint64_t>(seed));
  SecondOrderCheck check =
      second_order_stein_check(sf, reps, static_cast<std::uint64_t>(seed));
  py::dict out;
  out["lhs"] = check.lhs;
  out["rhs"] = check.rhs;
  out["lhs_se"] = check.lhs_se;
  out["rhs_se"] = check.rhs_se;
  out["z_score"] = check.z_score;
  out["mean_xi"] = check.mean_xi;
  out["mean_xi_se"] = check.mean_xi_se;
  return out;
}

py::dict simulate_py(const std::string& config_path,
                     const std::string& out_prefix) {
  ExperimentConfig config = parse_config(config_path);
  ExperimentResult result = run_experiment(config);
  if (!out_prefix.empty()) write_results(result, out_prefix);
  py::dict out;
  out["reps"] = config.reps;
  out["failed_reps"] = result.failed_reps;
  py::list aggregates;
  for (const Aggregate& agg : result.aggregates) {
    py::dict a;
    a["penalty_id"] = agg.penalty_id;
    a["direction_id"] = agg.direction_id;
    a["pivot_sd_resid"] = agg.pivot_sd_resid;
    a["pivot_sd_vhat"] = agg.pivot_sd_vhat;
    a["pivot_sd_vcheck"] = agg.pivot_sd_vcheck;
    a["coverage_narrow"] = agg.coverage_narrow;
    a["coverage_spike"] = agg.coverage_spike;
    a["coverage_quad"] = agg.coverage_quad;
    a["tau_hat_sq_mean"] = agg.tau_hat_sq_mean;
    aggregates.append(a);
  }
  out["aggregates"] = aggregates;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "de-biased convex-regularized estimators and interval estimation";

  m.def("sample_design",
        [](const Eigen::MatrixXd& sigma, long n, std::uint64_t seed) {
          return sample_design(CovarianceSpec(sigma), n, seed);
        },
        py::arg("sigma"), py::arg("n"), py::arg("seed"));

  m.def("fit", &fit_py, py::arg("x"), py::arg("y"), py::arg("penalty") = "lasso",
        py::arg("lambda_") = 0.0, py::arg("mu") = 0.0, py::arg("groups") = 0,
        py::arg("tol") = 1e-10, py::arg("max_iter") = 200000);

  m.def("debias", &debias_py, py::arg("x"), py::arg("y"),
        py::arg("penalty") = "lasso", py::arg("lambda_") = 0.0,
        py::arg("mu") = 0.0, py::arg("groups") = 0, py::arg("a"),
        py::arg("sigma") = py::none(), py::arg("tol") = 1e-10);

  m.def("confidence_intervals", &ci_py, py::arg("x"), py::arg("y"),
        py::arg("penalty") = "lasso", py::arg("lambda_") = 0.0,
        py::arg("mu") = 0.0, py::arg("groups") = 0, py::arg("a"),
        py::arg("sigma") = py::none(), py::arg("alpha") = 0.05,
        py::arg("tol") = 1e-10);

  m.def("stein_check", &stein_check_py, py::arg("fn"), py::arg("n"),
        py::arg("reps"), py::arg("seed") = 1);

  m.def("simulate", &simulate_py, py::arg("config_path"),
        py::arg("out_prefix") = "");

  m.def("normal_quantile", &normal_quantile, py::arg("p"));
}
