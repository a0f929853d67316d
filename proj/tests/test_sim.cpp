#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "debiasreg/config.hpp"
#include "debiasreg/csv.hpp"
#include "debiasreg/normal.hpp"
#include "debiasreg/sim.hpp"
#include "helpers.hpp"

using namespace debiasreg;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig config;
  config.n = 25;
  config.p = 8;
  config.sigma = 0.7;
  config.beta_spec = BetaSparse{3, 1.0};
  config.cov_spec = CovIdentity{};
  config.penalty_grid = {LassoPenalty{0.3}, LassoPenalty{0.1}};
  config.direction_spec = DirectionCanonical{0};
  config.reps = 6;
  config.master_seed = 91;
  config.tol = 1e-9;
  return config;
}

}  // namespace

TEST_CASE("format_double round trips shortest representations") {
  Rng rng(401);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = std::ldexp(rng.gaussian(), static_cast<int>(rng.below(60)) - 30);
    const std::string s = format_double(x);
    CHECK(std::stod(s) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-3.0) == "-3");
}

TEST_CASE("csv write/read round trip") {
  Rng rng(403);
  Eigen::MatrixXd m = testutil::gaussian_matrix(7, 3, rng);
  const std::string path = "test_roundtrip.csv";
  write_csv(path, {"x1", "x2", "x3"}, m);
  Eigen::MatrixXd back = read_design_csv(path);
  CHECK((back.array() == m.array()).all());
  std::remove(path.c_str());
}

TEST_CASE("csv rejects malformed input") {
  const std::string path = "test_bad.csv";
  {
    std::ofstream out(path);
    out << "x1,x2\n1.0\n";
  }
  CHECK_THROWS(read_csv(path));
  std::remove(path.c_str());
}

TEST_CASE("ks_normal reference values") {
  SUBCASE("quantile construction achieves the floor") {
    std::vector<double> samples;
    const int m = 1000;
    for (int i = 1; i <= m; ++i) {
      samples.push_back(normal_quantile((i - 0.5) / m));
    }
    CHECK(ks_normal(samples) <= 0.5 / m + 1e-6);
  }
  SUBCASE("all zeros give one half") {
    std::vector<double> zeros(50, 0.0);
    CHECK(ks_normal(zeros) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("iid draws stay under the kolmogorov band") {
    Rng rng(405);
    std::vector<double> draws(10000);
    for (double& d : draws) d = rng.gaussian();
    CHECK(ks_normal(draws) < 0.02);
  }
  SUBCASE("needs at least 20 samples") {
    std::vector<double> few(10, 0.0);
    CHECK_THROWS_AS(ks_normal(few), std::invalid_argument);
  }
}

TEST_CASE("oracle beta star closed forms") {
  const Eigen::Index p = 6;
  CovarianceSpec cov = CovarianceSpec::identity(p);
  Eigen::VectorXd beta(p);
  beta << 2.0, -1.5, 0.4, 0.0, 0.05, -3.0;

  SUBCASE("lasso is the coordinatewise soft threshold") {
    const double lambda = 0.5;
    OracleResult res = oracle_beta_star(beta, cov, LassoPenalty{lambda}, 1e-10, 1.0);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double expected =
          beta(j) > lambda ? beta(j) - lambda
                           : (beta(j) < -lambda ? beta(j) + lambda : 0.0);
      CHECK(res.beta_star(j) == doctest::Approx(expected).epsilon(1e-8));
    }
  }

  SUBCASE("vanishing penalty recovers beta and sigma^2") {
    OracleResult res = oracle_beta_star(beta, cov, LassoPenalty{1e-9}, 1e-12, 1.3);
    CHECK((res.beta_star - beta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(res.r_star == doctest::Approx(1.69).epsilon(1e-4));
  }

  SUBCASE("ridge matches the linear-system oracle") {
    const double mu = 0.35;
    OracleResult res = oracle_beta_star(beta, cov, RidgePenalty{mu}, 1e-11, 1.0);
    // (I + 2 mu I) beta* = beta for the quadratic penalty mu ||b||^2
    Eigen::VectorXd expected = beta / (1.0 + 2.0 * mu);
    CHECK((res.beta_star - expected).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("group lasso applies the block shrinkage") {
    GroupLassoPenalty gl;
    gl.groups = {{0, 1}, {2, 3}, {4, 5}};
    gl.lambdas = Eigen::Vector3d(1.0, 0.2, 10.0);
    OracleResult res = oracle_beta_star(beta, cov, Penalty{gl}, 1e-10, 1.0);
    for (std::size_t k = 0; k < gl.groups.size(); ++k) {
      Eigen::Vector2d block(beta(gl.groups[k][0]), beta(gl.groups[k][1]));
      const double shrink =
          std::max(0.0, 1.0 - gl.lambdas(static_cast<Eigen::Index>(k)) /
                                  block.norm());
      CHECK(std::abs(res.beta_star(gl.groups[k][0]) - shrink * block(0)) < 1e-8);
      CHECK(std::abs(res.beta_star(gl.groups[k][1]) - shrink * block(1)) < 1e-8);
    }
  }

  SUBCASE("smooth penalties satisfy the stationarity fixpoint") {
    SmoothPenalty pen = testutil::pseudo_huber_penalty(0.4, 1.0);
    OracleResult res = oracle_beta_star(beta, cov, Penalty{pen}, 1e-10, 1.0);
    Eigen::VectorXd grad = (res.beta_star - beta) + pen.gradient(res.beta_star);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("run_experiment determinism and schema") {
  ExperimentConfig config = tiny_config();
  ExperimentResult a = run_experiment(config);
  ExperimentResult b = run_experiment(config);
  REQUIRE(a.records.size() == b.records.size());
  REQUIRE(a.records.size() == 12);  // 6 reps x 2 penalties x 1 direction
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].theta_hat == b.records[i].theta_hat);
    CHECK(a.records[i].pivot_vcheck == b.records[i].pivot_vcheck);
    CHECK(a.records[i].ci_quad.lo == b.records[i].ci_quad.lo);
  }

  write_results(a, "test_expA");
  write_results(b, "test_expB");
  CHECK(slurp("test_expA_reps.csv") == slurp("test_expB_reps.csv"));
  CHECK(slurp("test_expA_aggregate.csv") == slurp("test_expB_aggregate.csv"));
  CHECK(slurp("test_expA_qq.csv") == slurp("test_expB_qq.csv"));

  CsvTable reps = read_csv("test_expA_reps.csv");
  const std::vector<std::string> expected_header = {
      "rep",          "penalty_id",   "lambda",        "direction_id",
      "df",           "active_size",  "theta_hat",     "pivot_resid",
      "pivot_vhat",   "pivot_vcheck", "ci_narrow_lo",  "ci_narrow_hi",
      "ci_spike_lo",  "ci_spike_hi",  "ci_quad_lo",    "ci_quad_hi",
      "ci_quad_valid", "pred_err",    "dir_err_sq",    "diag_item_v",
      "w0_dot_r"};
  CHECK(reps.header == expected_header);
  CHECK(reps.values.rows() == 12);

  for (const char* suffix : {"_reps.csv", "_aggregate.csv", "_qq.csv"}) {
    std::remove((std::string("test_expA") + suffix).c_str());
    std::remove((std::string("test_expB") + suffix).c_str());
  }
}

TEST_CASE("degenerate all-zero experiment still aggregates") {
  ExperimentConfig config = tiny_config();
  config.penalty_grid = {LassoPenalty{50.0}};  // far above lambda_max
  config.reps = 1;
  ExperimentResult result = run_experiment(config);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].active_size == 0);
  CHECK(result.records[0].df == 0.0);
  REQUIRE(result.aggregates.size() == 1);
  CHECK(sparsity_condition_rate(result, 1.0) == 1.0);
}

TEST_CASE("experiment with sampled directions satisfies the normalization") {
  ExperimentConfig config = tiny_config();
  config.direction_spec = DirectionRandomSphere{3, 17};
  ExperimentResult result = run_experiment(config);
  CHECK(result.directions.size() == 3);
  CovarianceSpec cov = CovarianceSpec::identity(config.p);
  for (const Direction& d : result.directions) {
    CHECK(std::abs(cov.inverse_quadratic(d.a0) - 1.0) < 1e-10);
  }
  CHECK(result.records.size() == 6 * 2 * 3);
}

TEST_CASE("config parsing - shipped files") {
  SUBCASE("figure1") {
    ExperimentConfig config = parse_config(std::string(CONFIG_DIR) + "/figure1.cfg");
    CHECK(config.n == 750);
    CHECK(config.p == 1000);
    CHECK(config.sigma == doctest::Approx(1.0));
    const auto& beta = std::get<BetaFigure1>(config.beta_spec);
    CHECK(beta.s == 200);
    CHECK(beta.first == 20.0);
    CHECK(std::holds_alternative<CovFigure1>(config.cov_spec));
    REQUIRE(config.penalty_grid.size() == 4);
    CHECK(std::get<LassoPenalty>(config.penalty_grid[0]).lambda == 0.1);
    CHECK(std::get<LassoPenalty>(config.penalty_grid[3]).lambda == 0.005);
  }

  SUBCASE("shipped configs re-serialize to equal configs") {
    for (const char* name : {"/figure1.cfg", "/figure2.cfg"}) {
      ExperimentConfig config = parse_config(std::string(CONFIG_DIR) + name);
      ExperimentConfig back =
          parse_config_text(serialize_config(config), "reserialized");
      CHECK(config_equal(config, back));
    }
  }

  SUBCASE("figure2") {
    ExperimentConfig config = parse_config(std::string(CONFIG_DIR) + "/figure2.cfg");
    CHECK(config.n == 600);
    CHECK(config.p == 900);
    CHECK(config.sigma == doctest::Approx(std::sqrt(2.0)));
    const auto& beta = std::get<BetaGrouped>(config.beta_spec);
    CHECK(beta.active_groups == 8);
    CHECK(beta.value == 1.0);
    bool has_138 = false;
    for (const Penalty& pen : config.penalty_grid) {
      const auto& gl = std::get<GroupLassoPenalty>(pen);
      CHECK(gl.groups.size() == 30);
      CHECK(gl.groups[0].size() == 30);
      if (gl.lambdas(0) == 0.138) has_138 = true;
    }
    CHECK(has_138);
    CHECK(config.reps == 256);
  }
}

TEST_CASE("config errors carry context") {
  SUBCASE("missing required key") {
    const std::string text = "[model]\nn = 10\n";
    try {
      parse_config_text(text, "inline");
      FAIL("expected error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("'p'") != std::string::npos);
    }
  }

  SUBCASE("unknown key reports its line") {
    const std::string text =
        "[model]\nn = 10\np = 4\nsigma = 1\nbeta = sparse\nbeta_s = 2\n"
        "cov = identity\nbogus = 3\n"
        "[penalty]\ntype = lasso\nlambda = 0.1\n"
        "[directions]\ntype = canonical\nindex = 1\n"
        "[mc]\nreps = 2\nseed = 5\n";
    try {
      parse_config_text(text, "inline");
      FAIL("expected error");
    } catch (const std::runtime_error& e) {
      const std::string what = e.what();
      CHECK(what.find("inline:8") != std::string::npos);
      CHECK(what.find("bogus") != std::string::npos);
    }
  }

  SUBCASE("unknown section is rejected") {
    CHECK_THROWS(parse_config_text("[nope]\nx = 1\n", "inline"));
  }
}

TEST_CASE("config round trip through serialization") {
  std::vector<ExperimentConfig> battery;
  battery.push_back(tiny_config());
  {
    ExperimentConfig c = tiny_config();
    c.beta_spec = BetaFigure1{50, 20.0, 1.0};
    c.cov_spec = CovFigure1{};
    c.v0_choice = V0Choice::vhat;
    battery.push_back(c);
  }
  {
    ExperimentConfig c = tiny_config();
    c.p = 9;
    c.beta_spec = BetaGrouped{2, 1.0};
    c.cov_spec = CovFigure2Wishart{45, 45.0};
    c.penalty_grid = {GroupLassoPenalty::equal_blocks(9, 3, 0.2),
                      GroupLassoPenalty::equal_blocks(9, 3, 0.1)};
    c.direction_spec = DirectionRandomSphere{2, 7};
    battery.push_back(c);
  }
  {
    ExperimentConfig c = tiny_config();
    Eigen::VectorXd beta(8);
    beta << 1, 0, -1, 0.5, 0, 0, 2, 0;
    c.beta_spec = BetaExplicit{beta};
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(8, 8);
    sigma(0, 1) = sigma(1, 0) = 0.25;
    c.cov_spec = CovExplicit{sigma};
    c.penalty_grid = {ElasticNetPenalty{0.2, 0.1}, ElasticNetPenalty{0.1, 0.1}};
    Eigen::VectorXd a(8);
    a << 1, 2, 0, 0, -1, 0, 0, 0;
    c.direction_spec = DirectionExplicit{a};
    battery.push_back(c);
  }
  {
    ExperimentConfig c = tiny_config();
    c.penalty_grid = {RidgePenalty{0.5}, RidgePenalty{0.25}};
    battery.push_back(c);
  }

  for (const ExperimentConfig& config : battery) {
    const std::string text = serialize_config(config);
    ExperimentConfig back = parse_config_text(text, "serialized");
    CHECK(config_equal(config, back));
  }
}

TEST_CASE("experiment from a parsed config is reproducible") {
  const std::string text = serialize_config(tiny_config());
  ExperimentConfig a = parse_config_text(text);
  ExperimentConfig b = parse_config_text(text);
  ExperimentResult ra = run_experiment(a);
  ExperimentResult rb = run_experiment(b);
  REQUIRE(ra.records.size() == rb.records.size());
  for (std::size_t i = 0; i < ra.records.size(); ++i) {
    CHECK(ra.records[i].pivot_resid == rb.records[i].pivot_resid);
  }
}
