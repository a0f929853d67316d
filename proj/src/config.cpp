#include "debiasreg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "debiasreg/csv.hpp"

namespace debiasreg {

namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

using Section = std::map<std::string, Entry>;

struct ParsedFile {
  std::string origin;
  std::map<std::string, Section> sections;
};

[[noreturn]] void fail(const ParsedFile& file, std::size_t line,
                       const std::string& message) {
  throw std::runtime_error(file.origin + ":" + std::to_string(line) + ": " +
                           message);
}

[[noreturn]] void fail_key(const ParsedFile& file, const std::string& section,
                           const std::string& key) {
  throw std::runtime_error(file.origin + ": missing required key '" + key +
                           "' in section [" + section + "]");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

ParsedFile tokenize(const std::string& text, const std::string& origin) {
  static const std::vector<std::string> known_sections = {"model", "penalty",
                                                          "directions", "mc"};
  ParsedFile file;
  file.origin = origin;
  std::istringstream in(text);
  std::string line;
  std::string current;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(file, line_no, "malformed section header");
      current = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& s : known_sections) known = known || s == current;
      if (!known) fail(file, line_no, "unknown section [" + current + "]");
      file.sections[current];
      continue;
    }
    if (current.empty()) fail(file, line_no, "entry outside of any section");
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) fail(file, line_no, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(file, line_no, "empty key");
    auto [it, inserted] = file.sections[current].emplace(key, Entry{value, line_no, false});
    if (!inserted) fail(file, line_no, "duplicate key '" + key + "'");
  }
  return file;
}

class SectionReader {
 public:
  SectionReader(ParsedFile& file, std::string name)
      : file_(file), name_(std::move(name)) {
    auto it = file_.sections.find(name_);
    section_ = it == file_.sections.end() ? nullptr : &it->second;
  }

  bool has(const std::string& key) const {
    return section_ && section_->count(key);
  }

  const Entry& require(const std::string& key) {
    if (!section_ || !section_->count(key)) fail_key(file_, name_, key);
    Entry& e = (*section_)[key];
    e.used = true;
    return e;
  }

  const Entry* optional(const std::string& key) {
    if (!section_ || !section_->count(key)) return nullptr;
    Entry& e = (*section_)[key];
    e.used = true;
    return &e;
  }

  long require_long(const std::string& key) { return to_long(require(key)); }
  double require_double(const std::string& key) { return to_double(require(key)); }

  long optional_long(const std::string& key, long fallback) {
    const Entry* e = optional(key);
    return e ? to_long(*e) : fallback;
  }
  double optional_double(const std::string& key, double fallback) {
    const Entry* e = optional(key);
    return e ? to_double(*e) : fallback;
  }
  std::string optional_string(const std::string& key, std::string fallback) {
    const Entry* e = optional(key);
    return e ? e->value : fallback;
  }

  long to_long(const Entry& e) const {
    long v = 0;
    auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size()) {
      fail(file_, e.line, "expected an integer, got '" + e.value + "'");
    }
    return v;
  }

  double to_double(const Entry& e) const {
    double v = 0.0;
    auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size()) {
      fail(file_, e.line, "expected a number, got '" + e.value + "'");
    }
    return v;
  }

  std::vector<double> to_list(const Entry& e) const {
    std::vector<double> out;
    std::istringstream ss(e.value);
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        fail(file_, e.line, "expected a numeric list, got '" + tok + "'");
      }
      out.push_back(v);
    }
    if (out.empty()) fail(file_, e.line, "empty list");
    return out;
  }

  const ParsedFile& file() const { return file_; }

 private:
  ParsedFile& file_;
  std::string name_;
  Section* section_;
};

Eigen::VectorXd vector_from_list(const std::vector<double>& values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = values[i];
  }
  return v;
}

void check_all_used(const ParsedFile& file) {
  for (const auto& [section, entries] : file.sections) {
    for (const auto& [key, entry] : entries) {
      if (!entry.used) {
        throw std::runtime_error(file.origin + ":" + std::to_string(entry.line) +
                                 ": unknown key '" + key + "' in section [" +
                                 section + "]");
      }
    }
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
  ParsedFile file = tokenize(text, origin);
  ExperimentConfig config;

  SectionReader model(file, "model");
  config.n = model.require_long("n");
  config.p = model.require_long("p");
  if (config.n < 1 || config.p < 1) {
    throw std::runtime_error(origin + ": n and p must be >= 1");
  }
  const bool has_sigma = model.has("sigma");
  const bool has_sigma_sq = model.has("sigma_sq");
  if (has_sigma == has_sigma_sq) {
    throw std::runtime_error(origin +
                             ": exactly one of sigma / sigma_sq is required");
  }
  config.sigma = has_sigma ? model.require_double("sigma")
                           : std::sqrt(model.require_double("sigma_sq"));
  if (!(config.sigma > 0.0)) {
    throw std::runtime_error(origin + ": noise sd must be positive");
  }

  const std::string beta_kind = model.require("beta").value;
  if (beta_kind == "explicit") {
    Eigen::VectorXd beta;
    if (model.has("beta_values")) {
      beta = vector_from_list(model.to_list(model.require("beta_values")));
    } else {
      beta = read_vector_csv(model.require("beta_file").value);
    }
    config.beta_spec = BetaExplicit{std::move(beta)};
  } else if (beta_kind == "sparse") {
    BetaSparse spec;
    spec.s = model.require_long("beta_s");
    spec.value = model.optional_double("beta_value", 1.0);
    config.beta_spec = spec;
  } else if (beta_kind == "figure1") {
    BetaFigure1 spec;
    spec.s = model.require_long("beta_s");
    spec.first = model.optional_double("beta_first", 20.0);
    spec.value = model.optional_double("beta_value", 1.0);
    config.beta_spec = spec;
  } else if (beta_kind == "grouped") {
    BetaGrouped spec;
    spec.active_groups = model.require_long("active_groups");
    spec.value = model.optional_double("beta_value", 1.0);
    config.beta_spec = spec;
  } else {
    throw std::runtime_error(origin + ": unknown beta kind '" + beta_kind + "'");
  }

  const std::string cov_kind = model.require("cov").value;
  if (cov_kind == "identity") {
    config.cov_spec = CovIdentity{};
  } else if (cov_kind == "figure1") {
    config.cov_spec = CovFigure1{};
  } else if (cov_kind == "figure2_wishart") {
    CovFigure2Wishart spec;
    spec.dof = model.optional_long("wishart_dof", 0);
    spec.scale = model.optional_double("wishart_scale", 0.0);
    config.cov_spec = spec;
  } else if (cov_kind == "explicit") {
    Eigen::MatrixXd sigma;
    if (model.has("cov_values")) {
      const std::vector<double> flat = model.to_list(model.require("cov_values"));
      const Eigen::Index p = config.p;
      if (static_cast<Eigen::Index>(flat.size()) != p * p) {
        throw std::runtime_error(origin + ": cov_values must hold p*p entries");
      }
      sigma.resize(p, p);
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
          sigma(i, j) = flat[static_cast<std::size_t>(i * p + j)];
        }
      }
    } else {
      sigma = read_square_csv(model.require("cov_file").value);
    }
    config.cov_spec = CovExplicit{std::move(sigma)};
  } else {
    throw std::runtime_error(origin + ": unknown cov kind '" + cov_kind + "'");
  }

  SectionReader penalty(file, "penalty");
  const std::string pen_type = penalty.require("type").value;
  if (pen_type == "lasso") {
    for (double lambda : penalty.to_list(penalty.require("lambda"))) {
      config.penalty_grid.push_back(LassoPenalty{lambda});
    }
  } else if (pen_type == "ridge") {
    for (double mu : penalty.to_list(penalty.require("mu"))) {
      config.penalty_grid.push_back(RidgePenalty{mu});
    }
  } else if (pen_type == "elastic_net") {
    const double mu = penalty.require_double("mu");
    for (double lambda : penalty.to_list(penalty.require("lambda"))) {
      config.penalty_grid.push_back(ElasticNetPenalty{lambda, mu});
    }
  } else if (pen_type == "group_lasso") {
    const long n_groups = penalty.require_long("groups");
    // per-group levels, applied verbatim (all groups share each grid value)
    for (double lambda : penalty.to_list(penalty.require("lambda"))) {
      config.penalty_grid.push_back(
          GroupLassoPenalty::equal_blocks(config.p, n_groups, lambda));
    }
  } else {
    throw std::runtime_error(origin + ": unknown penalty type '" + pen_type + "'");
  }

  SectionReader directions(file, "directions");
  const std::string dir_type = directions.require("type").value;
  if (dir_type == "canonical") {
    DirectionCanonical spec;
    spec.index = directions.require_long("index") - 1;  // config is 1-based
    config.direction_spec = spec;
  } else if (dir_type == "explicit") {
    Eigen::VectorXd a;
    if (directions.has("values")) {
      a = vector_from_list(directions.to_list(directions.require("values")));
    } else {
      a = read_vector_csv(directions.require("file").value);
    }
    config.direction_spec = DirectionExplicit{std::move(a)};
  } else if (dir_type == "random_sphere") {
    DirectionRandomSphere spec;
    spec.count = directions.require_long("count");
    spec.seed = static_cast<std::uint64_t>(directions.optional_long("seed", 0));
    config.direction_spec = spec;
  } else {
    throw std::runtime_error(origin + ": unknown direction type '" + dir_type + "'");
  }

  SectionReader mc(file, "mc");
  config.reps = mc.require_long("reps");
  config.master_seed = static_cast<std::uint64_t>(mc.require_long("seed"));
  config.alpha = mc.optional_double("alpha", 0.05);
  config.tol = mc.optional_double("tol", 1e-9);
  config.max_iter = mc.optional_long("max_iter", 200000);
  const std::string v0 = mc.optional_string("v0", "vcheck");
  if (v0 == "resid") config.v0_choice = V0Choice::resid;
  else if (v0 == "vhat") config.v0_choice = V0Choice::vhat;
  else if (v0 == "vcheck") config.v0_choice = V0Choice::vcheck;
  else if (v0 == "vstar") config.v0_choice = V0Choice::vstar;
  else throw std::runtime_error(origin + ": unknown v0 choice '" + v0 + "'");

  check_all_used(file);
  return config;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

namespace {

std::string format_list(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v(i));
  }
  return out;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "[model]\n";
  out << "n = " << config.n << "\n";
  out << "p = " << config.p << "\n";
  out << "sigma = " << format_double(config.sigma) << "\n";
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BetaExplicit>) {
          out << "beta = explicit\n";
          out << "beta_values = " << format_list(spec.beta) << "\n";
        } else if constexpr (std::is_same_v<T, BetaSparse>) {
          out << "beta = sparse\n";
          out << "beta_s = " << spec.s << "\n";
          out << "beta_value = " << format_double(spec.value) << "\n";
        } else if constexpr (std::is_same_v<T, BetaFigure1>) {
          out << "beta = figure1\n";
          out << "beta_s = " << spec.s << "\n";
          out << "beta_first = " << format_double(spec.first) << "\n";
          out << "beta_value = " << format_double(spec.value) << "\n";
        } else {
          out << "beta = grouped\n";
          out << "active_groups = " << spec.active_groups << "\n";
          out << "beta_value = " << format_double(spec.value) << "\n";
        }
      },
      config.beta_spec);
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, CovIdentity>) {
          out << "cov = identity\n";
        } else if constexpr (std::is_same_v<T, CovFigure1>) {
          out << "cov = figure1\n";
        } else if constexpr (std::is_same_v<T, CovFigure2Wishart>) {
          out << "cov = figure2_wishart\n";
          out << "wishart_dof = " << spec.dof << "\n";
          out << "wishart_scale = " << format_double(spec.scale) << "\n";
        } else {
          out << "cov = explicit\n";
          out << "cov_values =";
          for (Eigen::Index i = 0; i < spec.sigma.rows(); ++i) {
            for (Eigen::Index j = 0; j < spec.sigma.cols(); ++j) {
              out << ' ' << format_double(spec.sigma(i, j));
            }
          }
          out << "\n";
        }
      },
      config.cov_spec);

  out << "\n[penalty]\n";
  if (config.penalty_grid.empty()) {
    throw std::invalid_argument("cannot serialize an empty penalty grid");
  }
  const Penalty& head = config.penalty_grid.front();
  if (std::holds_alternative<LassoPenalty>(head)) {
    out << "type = lasso\nlambda =";
    for (const Penalty& p : config.penalty_grid) {
      out << ' ' << format_double(std::get<LassoPenalty>(p).lambda);
    }
    out << "\n";
  } else if (std::holds_alternative<RidgePenalty>(head)) {
    out << "type = ridge\nmu =";
    for (const Penalty& p : config.penalty_grid) {
      out << ' ' << format_double(std::get<RidgePenalty>(p).mu);
    }
    out << "\n";
  } else if (std::holds_alternative<ElasticNetPenalty>(head)) {
    out << "type = elastic_net\n";
    out << "mu = " << format_double(std::get<ElasticNetPenalty>(head).mu) << "\n";
    out << "lambda =";
    for (const Penalty& p : config.penalty_grid) {
      out << ' ' << format_double(std::get<ElasticNetPenalty>(p).lambda);
    }
    out << "\n";
  } else if (std::holds_alternative<GroupLassoPenalty>(head)) {
    const auto& gl = std::get<GroupLassoPenalty>(head);
    out << "type = group_lasso\n";
    out << "groups = " << gl.groups.size() << "\n";
    out << "lambda =";
    for (const Penalty& p : config.penalty_grid) {
      out << ' ' << format_double(std::get<GroupLassoPenalty>(p).lambdas(0));
    }
    out << "\n";
  } else {
    throw std::invalid_argument("smooth penalties are not serializable");
  }

  out << "\n[directions]\n";
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, DirectionCanonical>) {
          out << "type = canonical\n";
          out << "index = " << (spec.index + 1) << "\n";
        } else if constexpr (std::is_same_v<T, DirectionExplicit>) {
          out << "type = explicit\n";
          out << "values = " << format_list(spec.a) << "\n";
        } else {
          out << "type = random_sphere\n";
          out << "count = " << spec.count << "\n";
          out << "seed = " << spec.seed << "\n";
        }
      },
      config.direction_spec);

  out << "\n[mc]\n";
  out << "reps = " << config.reps << "\n";
  out << "seed = " << config.master_seed << "\n";
  out << "alpha = " << format_double(config.alpha) << "\n";
  switch (config.v0_choice) {
    case V0Choice::resid: out << "v0 = resid\n"; break;
    case V0Choice::vhat: out << "v0 = vhat\n"; break;
    case V0Choice::vcheck: out << "v0 = vcheck\n"; break;
    case V0Choice::vstar: out << "v0 = vstar\n"; break;
  }
  out << "tol = " << format_double(config.tol) << "\n";
  out << "max_iter = " << config.max_iter << "\n";
  return out.str();
}

namespace {

bool dense_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

bool dense_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool penalty_equal(const Penalty& a, const Penalty& b) {
  if (a.index() != b.index()) return false;
  if (const auto* la = std::get_if<LassoPenalty>(&a)) {
    return la->lambda == std::get<LassoPenalty>(b).lambda;
  }
  if (const auto* ra = std::get_if<RidgePenalty>(&a)) {
    return ra->mu == std::get<RidgePenalty>(b).mu;
  }
  if (const auto* ea = std::get_if<ElasticNetPenalty>(&a)) {
    const auto& eb = std::get<ElasticNetPenalty>(b);
    return ea->lambda == eb.lambda && ea->mu == eb.mu;
  }
  if (const auto* ga = std::get_if<GroupLassoPenalty>(&a)) {
    const auto& gb = std::get<GroupLassoPenalty>(b);
    return ga->groups == gb.groups && dense_equal(ga->lambdas, gb.lambdas);
  }
  return false;  // smooth penalties compare unequal by convention
}

}  // namespace

bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b) {
  if (a.n != b.n || a.p != b.p || a.sigma != b.sigma || a.reps != b.reps ||
      a.master_seed != b.master_seed || a.alpha != b.alpha || a.tol != b.tol ||
      a.max_iter != b.max_iter || a.v0_choice != b.v0_choice) {
    return false;
  }
  if (a.beta_spec.index() != b.beta_spec.index()) return false;
  if (const auto* ba = std::get_if<BetaExplicit>(&a.beta_spec)) {
    if (!dense_equal(ba->beta, std::get<BetaExplicit>(b.beta_spec).beta)) return false;
  } else if (const auto* sa = std::get_if<BetaSparse>(&a.beta_spec)) {
    const auto& sb = std::get<BetaSparse>(b.beta_spec);
    if (sa->s != sb.s || sa->value != sb.value) return false;
  } else if (const auto* fa = std::get_if<BetaFigure1>(&a.beta_spec)) {
    const auto& fb = std::get<BetaFigure1>(b.beta_spec);
    if (fa->s != fb.s || fa->first != fb.first || fa->value != fb.value) return false;
  } else if (const auto* ga = std::get_if<BetaGrouped>(&a.beta_spec)) {
    const auto& gb = std::get<BetaGrouped>(b.beta_spec);
    if (ga->active_groups != gb.active_groups || ga->value != gb.value) return false;
  }
  if (a.cov_spec.index() != b.cov_spec.index()) return false;
  if (const auto* wa = std::get_if<CovFigure2Wishart>(&a.cov_spec)) {
    const auto& wb = std::get<CovFigure2Wishart>(b.cov_spec);
    if (wa->dof != wb.dof || wa->scale != wb.scale) return false;
  } else if (const auto* ea = std::get_if<CovExplicit>(&a.cov_spec)) {
    if (!dense_equal(ea->sigma, std::get<CovExplicit>(b.cov_spec).sigma)) return false;
  }
  if (a.penalty_grid.size() != b.penalty_grid.size()) return false;
  for (std::size_t i = 0; i < a.penalty_grid.size(); ++i) {
    if (!penalty_equal(a.penalty_grid[i], b.penalty_grid[i])) return false;
  }
  if (a.direction_spec.index() != b.direction_spec.index()) return false;
  if (const auto* ca = std::get_if<DirectionCanonical>(&a.direction_spec)) {
    if (ca->index != std::get<DirectionCanonical>(b.direction_spec).index) return false;
  } else if (const auto* ea = std::get_if<DirectionExplicit>(&a.direction_spec)) {
    if (!dense_equal(ea->a, std::get<DirectionExplicit>(b.direction_spec).a)) return false;
  } else if (const auto* ra = std::get_if<DirectionRandomSphere>(&a.direction_spec)) {
    const auto& rb = std::get<DirectionRandomSphere>(b.direction_spec);
    if (ra->count != rb.count || ra->seed != rb.seed) return false;
  }
  return true;
}

}  // namespace debiasreg
