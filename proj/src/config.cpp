#include "hkc/config.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hkc/errors.hpp"
#include "json.hpp"

namespace hkc {

using Json = nlohmann::ordered_json;

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

double round4(double p) { return std::isfinite(p) ? std::round(p * 1e4) / 1e4 : p; }

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Parsing state for the declarative node list.
class ConfigParser {
 public:
  ConfigParser(const Json& root, const std::vector<std::string>& columns, std::string source)
      : src_(std::move(source)) {
    if (!root.is_object()) fail("top level must be an object");
    if (root.contains("format") && root["format"] != kModelFormat)
      fail("unsupported format '" + root["format"].dump() + "', expected " + kModelFormat);
    if (root.contains("variables")) {
      for (const auto& v : root["variables"]) {
        if (!v.is_string()) fail("'variables' must be a list of names");
        variables_.push_back(v.get<std::string>());
      }
    }
    names_ = columns.empty() ? variables_ : columns;
    if (!root.contains("nodes") || !root["nodes"].is_array() || root["nodes"].empty())
      fail("'nodes' must be a non-empty list");
    for (const auto& n : root["nodes"]) {
      if (!n.is_object() || !n.contains("name") || !n["name"].is_string()) fail("every node needs a string 'name'");
      const auto name = n["name"].get<std::string>();
      if (!nodes_.emplace(name, &n).second) fail("duplicate node name '" + name + "'");
      order_.push_back(name);
    }
    if (root.contains("root")) {
      if (!root["root"].is_string()) fail("'root' must be a node name");
      root_ = root["root"].get<std::string>();
    } else if (order_.size() == 1) {
      root_ = order_.front();
    } else {
      fail("'root' is required when there is more than one node");
    }
    if (!nodes_.count(root_)) fail("root node '" + root_ + "' is not defined");
  }

  HierarchicalModel build(bool& parameterized) {
    HierarchicalModel m;
    std::set<std::string> stack;
    m.root = build_node(root_, stack, parameterized);
    for (const auto& name : order_)
      if (!used_.count(name)) fail("node '" + name + "' is not reachable from the root '" + root_ + "'");
    if (!names_.empty()) {
      m.n_vars = names_.size();
      m.variables = names_;
    } else {
      m.n_vars = max_index_;
    }
    return m;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw InputError(src_ + ": " + msg); }

 private:
  std::size_t resolve_column(const std::string& node, const Json& c) {
    if (c.is_number_integer()) {
      const auto k = c.get<long long>();
      if (k < 1) fail("node '" + node + "': column indices are 1-based, got " + c.dump());
      if (!names_.empty() && static_cast<std::size_t>(k) > names_.size())
        fail("node '" + node + "': column " + c.dump() + " exceeds the " + std::to_string(names_.size()) + " columns");
      max_index_ = std::max(max_index_, static_cast<std::size_t>(k));
      return static_cast<std::size_t>(k - 1);
    }
    if (!c.is_string()) fail("node '" + node + "': columns must be names or 1-based indices");
    const auto name = c.get<std::string>();
    if (names_.empty()) fail("node '" + node + "': column '" + name + "' given by name but no variable names are known");
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) fail("node '" + node + "': column '" + name + "' not found in the data header");
    return static_cast<std::size_t>(it - names_.begin());
  }

  Copula make_copula(const std::string& name, const Json& n, int dim, bool& given) {
    if (!n.contains("family") || !n["family"].is_string()) fail("node '" + name + "': 'family' is required");
    CopulaFamily f;
    try {
      f = copula_family_from_string(n["family"].get<std::string>());
    } catch (const ParameterError& e) {
      fail("node '" + name + "': " + e.what());
    }
    given = true;
    if (dim == 1) return Copula::independence(1);
    auto number = [&](const char* key) {
      if (!n[key].is_number()) fail("node '" + name + "': '" + key + "' must be a number");
      return n[key].get<double>();
    };
    try {
      switch (f) {
        case CopulaFamily::independence:
          return Copula::independence(dim);
        case CopulaFamily::clayton:
        case CopulaFamily::gumbel:
        case CopulaFamily::frank: {
          const Family g = f == CopulaFamily::clayton ? Family::clayton
                           : f == CopulaFamily::gumbel ? Family::gumbel
                                                       : Family::frank;
          if (n.contains("theta")) return Copula::archimedean(Generator(g, number("theta")), dim);
          given = false;
          const double start = f == CopulaFamily::clayton ? 1.0 : f == CopulaFamily::gumbel ? 1.5 : 2.0;
          return Copula::archimedean(Generator(g, start), dim);
        }
        case CopulaFamily::gaussian:
        case CopulaFamily::student_t: {
          Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(dim, dim);
          if (n.contains("corr")) {
            const Json& c = n["corr"];
            if (!c.is_array() || c.size() != static_cast<std::size_t>(dim))
              fail("node '" + name + "': 'corr' must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
            for (int i = 0; i < dim; ++i) {
              if (!c[i].is_array() || c[i].size() != static_cast<std::size_t>(dim))
                fail("node '" + name + "': 'corr' row " + std::to_string(i + 1) + " has the wrong length");
              for (int j = 0; j < dim; ++j) {
                if (!c[i][j].is_number()) fail("node '" + name + "': 'corr' entries must be numbers");
                corr(i, j) = c[i][j].get<double>();
              }
            }
          } else {
            given = false;
          }
          if (f == CopulaFamily::gaussian) return Copula::gaussian(corr);
          double nu = 5.0;
          if (n.contains("nu"))
            nu = number("nu");
          else
            given = false;
          return Copula::student_t(corr, nu);
        }
      }
    } catch (const ParameterError& e) {
      fail("node '" + name + "': " + e.what());
    } catch (const DimensionError& e) {
      fail("node '" + name + "': " + e.what());
    }
    fail("node '" + name + "': unsupported family");
  }

  ModelNode build_node(const std::string& name, std::set<std::string>& stack, bool& parameterized) {
    if (stack.count(name)) fail("cycle through node '" + name + "'");
    if (used_.count(name)) fail("node '" + name + "' has more than one parent");
    stack.insert(name);
    used_.insert(name);
    const Json& n = *nodes_.at(name);
    ModelNode node;
    node.name = name;
    const bool has_children = n.contains("children"), has_columns = n.contains("columns");
    if (has_children == has_columns) fail("node '" + name + "' needs exactly one of 'children' or 'columns'");
    if (has_children) {
      if (!n["children"].is_array() || n["children"].empty()) fail("node '" + name + "': 'children' must be a non-empty list");
      for (const auto& c : n["children"]) {
        if (!c.is_string()) fail("node '" + name + "': children are node names");
        const auto child = c.get<std::string>();
        if (!nodes_.count(child)) fail("node '" + name + "': unknown child '" + child + "'");
        node.children.push_back(build_node(child, stack, parameterized));
      }
    } else {
      if (!n["columns"].is_array() || n["columns"].empty()) fail("node '" + name + "': 'columns' must be a non-empty list");
      for (const auto& c : n["columns"]) node.columns.push_back(resolve_column(name, c));
    }
    bool given = true;
    node.copula = make_copula(name, n, static_cast<int>(node.arity()), given);
    if (!given) parameterized = false;
    if (n.contains("fixed")) {
      if (!n["fixed"].is_boolean()) fail("node '" + name + "': 'fixed' must be true or false");
      node.fixed = n["fixed"].get<bool>();
      if (node.fixed && !given) fail("node '" + name + "': fixed nodes must state their parameters");
    }
    stack.erase(name);
    return node;
  }

  std::string src_;
  std::vector<std::string> variables_;
  std::vector<std::string> names_;
  std::map<std::string, const Json*> nodes_;
  std::vector<std::string> order_;
  std::set<std::string> used_;
  std::string root_;
  std::size_t max_index_ = 0;
};

void node_json(const ModelNode& node, const std::vector<std::string>& names, Json& out) {
  Json j;
  j["name"] = node.name;
  j["family"] = to_string(family_of(node.copula));
  if (node.copula.kind() == CopulaKind::archimedean) j["theta"] = node.copula.generator().theta();
  if (node.copula.is_elliptical()) j["corr"] = matrix_json(node.copula.correlation());
  if (node.copula.kind() == CopulaKind::student_t) j["nu"] = node.copula.nu();
  if (node.fixed) j["fixed"] = true;
  if (node.is_leaf()) {
    Json cols = Json::array();
    for (auto c : node.columns) cols.push_back(names[c]);
    j["columns"] = std::move(cols);
  } else {
    Json ch = Json::array();
    for (const auto& c : node.children) ch.push_back(c.name);
    j["children"] = std::move(ch);
  }
  out.push_back(std::move(j));
  for (const auto& c : node.children) node_json(c, names, out);
}

Json model_json(const ModelConfig& config) {
  const HierarchicalModel& m = config.model;
  std::vector<std::string> names = m.variables;
  if (names.size() != m.n_vars) {
    names.clear();
    for (std::size_t i = 0; i < m.n_vars; ++i) names.push_back("u" + std::to_string(i + 1));
  }
  Json j;
  j["format"] = kModelFormat;
  j["seed"] = config.seed;
  j["kendall_mc"] = config.kendall_mc;
  j["epsilon_rule"] = {{"mode", config.epsilon.mode == ToleranceRule::Mode::relative ? "relative" : "absolute"},
                       {"value", config.epsilon.eps0}};
  j["variables"] = names;
  j["root"] = m.root.name;
  Json nodes = Json::array();
  node_json(m.root, names, nodes);
  j["nodes"] = std::move(nodes);
  return j;
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

Dataset parse_csv(const std::string& text, const std::string& source) {
  Dataset d;
  std::vector<double> flat;
  std::size_t line_no = 0, pos = 0, rows = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw InputError(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (pos >= text.size()) break;
      fail("empty line");
    }
    std::vector<std::string> fields;
    std::size_t s = 0;
    while (true) {
      const std::size_t c = line.find(',', s);
      fields.push_back(line.substr(s, c == std::string::npos ? std::string::npos : c - s));
      if (c == std::string::npos) break;
      s = c + 1;
    }
    if (line_no == 1) {
      std::set<std::string> seen;
      for (auto& f : fields) {
        if (f.empty()) fail("empty column name in header");
        if (!seen.insert(f).second) fail("duplicate column name '" + f + "'");
      }
      d.header = std::move(fields);
      continue;
    }
    if (fields.size() != d.header.size())
      fail("expected " + std::to_string(d.header.size()) + " fields, found " + std::to_string(fields.size()));
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const std::string& f = fields[k];
      if (f.empty()) fail("missing value in column '" + d.header[k] + "'");
      double v = 0.0;
      const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
      if (r.ec != std::errc() || r.ptr != f.data() + f.size() || !std::isfinite(v))
        fail("column '" + d.header[k] + "': '" + f + "' is not a finite number");
      flat.push_back(v);
    }
    ++rows;
  }
  if (d.header.empty()) {
    line_no = 1;
    fail("missing header row");
  }
  d.values = RowMatrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d.header.size()));
  std::copy(flat.begin(), flat.end(), d.values.data());
  return d;
}

Dataset read_csv(const std::filesystem::path& path) { return parse_csv(read_all(path), path.string()); }

std::string format_csv(const std::vector<std::string>& header, const RowMatrix& values) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_number(values(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path.string() + ": cannot write file");
    out << content;
    out.flush();
    if (!out) throw InputError(path.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError(path.string() + ": cannot replace file: " + ec.message());
  }
}

ModelConfig parse_model_config(const std::string& json_text, const std::vector<std::string>& columns,
                               const std::string& source) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw InputError(source + ": invalid JSON: " + e.what());
  }
  if (root.is_object() && root.contains("format") && root["format"] == kReportFormat) {
    if (!root.contains("model")) throw InputError(source + ": report has no 'model' section");
    root = root["model"];
  }
  ConfigParser parser(root, columns, source);
  ModelConfig cfg;
  try {
    if (root.contains("seed")) cfg.seed = root["seed"].get<std::uint64_t>();
    if (root.contains("kendall_mc")) cfg.kendall_mc = root["kendall_mc"].get<std::size_t>();
    if (root.contains("epsilon_rule")) {
      const Json& e = root["epsilon_rule"];
      const auto mode = e.value("mode", std::string("relative"));
      if (mode == "relative")
        cfg.epsilon.mode = ToleranceRule::Mode::relative;
      else if (mode == "absolute")
        cfg.epsilon.mode = ToleranceRule::Mode::absolute;
      else
        parser.fail("epsilon_rule.mode must be 'absolute' or 'relative'");
      cfg.epsilon.eps0 = e.value("value", cfg.epsilon.eps0);
      if (!(cfg.epsilon.eps0 > 0.0)) parser.fail("epsilon_rule.value must be positive");
    }
  } catch (const Json::type_error& e) {
    parser.fail(std::string("wrong value type: ") + e.what());
  }
  cfg.model = parser.build(cfg.fully_parameterized);
  return cfg;
}

ModelConfig read_model_config(const std::filesystem::path& path, const std::vector<std::string>& columns) {
  return parse_model_config(read_all(path), columns, path.string());
}

std::string model_config_json(const ModelConfig& config, int indent) { return model_json(config).dump(indent) + "\n"; }

std::string fit_report_json(const FitResult& fit, const ModelConfig& config, const FitReportInfo& info) {
  const FitReport& r = fit.report;
  Json j;
  j["format"] = kReportFormat;
  j["method"] = info.method;
  j["kendall_mode"] = info.kendall_mode;
  j["pseudo_observations"] = info.pseudo_observations;
  j["n_obs"] = r.n_obs;
  j["n_params"] = r.n_params;
  j["loglik"] = {{"two_step", r.loglik_two_step},
                 {"joint_start", r.joint_run ? Json(r.loglik_joint_start) : Json(nullptr)},
                 {"joint", r.joint_run ? Json(r.loglik_joint) : Json(nullptr)}};
  j["aic"] = aic(r.loglik(), r.n_params);
  j["bic"] = bic(r.loglik(), r.n_params, r.n_obs);
  j["clamped_rows"] = {{"two_step", r.clamped_two_step}, {"joint", r.joint_run ? Json(r.clamped_joint) : Json(nullptr)}};
  j["optimizer"] = {{"joint_evals", r.joint_evals},
                    {"joint_iterations", r.joint_iterations},
                    {"converged", r.converged()}};
  Json nodes = Json::array();
  for (const auto& n : r.nodes) {
    Json e;
    e["path"] = n.path;
    e["family"] = to_string(n.family);
    e["dim"] = n.dim;
    if (n.family == CopulaFamily::clayton || n.family == CopulaFamily::gumbel || n.family == CopulaFamily::frank)
      e["theta"] = n.theta;
    if (n.corr.size() > 0) e["corr"] = matrix_json(n.corr);
    if (n.family == CopulaFamily::student_t) e["nu"] = n.nu;
    e["method"] = n.method;
    e["loglik"] = number_or_null(n.loglik);
    e["evals"] = n.evals;
    e["converged"] = n.converged;
    e["kendall"] = n.kendall;
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  ModelConfig fitted = config;
  fitted.model = fit.model;
  j["model"] = model_json(fitted);
  return j.dump(2) + "\n";
}

std::string backtest_report_json(const BacktestReport& report, const RollingOptions& options) {
  Json j;
  j["format"] = kBacktestFormat;
  j["level"] = report.level;
  j["window"] = report.window;
  j["horizon"] = report.horizon;
  j["refit_every"] = options.refit_every;
  j["mc"] = options.mc;
  j["margin"] = to_string(options.margin);
  j["refits"] = report.refits;
  j["n_exceed"] = report.n_exceed;
  j["expected_exceed"] = (1.0 - report.level) * static_cast<double>(report.horizon);
  j["uc"] = {{"lr", report.lr_uc}, {"p", round4(report.p_uc)}};
  j["degenerate"] = report.degenerate;
  j["ind"] = {{"lr", number_or_null(report.lr_ind)}, {"p", number_or_null(round4(report.p_ind))}};
  j["cc"] = {{"lr", number_or_null(report.lr_cc)}, {"p", number_or_null(round4(report.p_cc))}};
  Json series = Json::array();
  for (std::size_t t = 0; t < report.hits.size(); ++t) {
    Json s;
    s["day"] = report.window + t;
    if (t < report.var.size()) s["var"] = report.var[t];
    if (t < report.realized.size()) s["realized"] = report.realized[t];
    s["hit"] = report.hits[t] != 0;
    series.push_back(std::move(s));
  }
  j["series"] = std::move(series);
  return j.dump(2) + "\n";
}

std::string study_csv(const std::vector<StudyCell>& cells) {
  std::string out = "nesting,tau0,tau1,tau2,n,method,ok,failed,bias,sd,mse\n";
  for (const auto& c : cells) {
    out += std::string(to_string(c.nesting)) + "," + format_number(c.tau0) + "," + format_number(c.tau1) + "," +
           format_number(c.tau2) + "," + std::to_string(c.n) + "," + std::string(to_string(c.method)) + "," +
           std::to_string(c.ok) + "," + std::to_string(c.failed) + "," + format_number(c.bias) + "," +
           format_number(c.sd) + "," + format_number(c.mse) + "\n";
  }
  return out;
}

}  // namespace hkc
