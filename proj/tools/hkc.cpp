// Command-line front end: fit, simulate, density, kendall, backtest, study.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hkc/backtest.hpp"
#include "hkc/config.hpp"
#include "hkc/errors.hpp"
#include "hkc/estimation.hpp"
#include "hkc/rng.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kNumericWarning = 3;

struct Common {
  int threads = 1;
  std::optional<std::size_t> kendall_mc;
  std::optional<double> epsilon;
  std::string epsilon_mode;
  std::size_t max_attempts = hkc::kDefaultMaxAttempts;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--kendall-mc", c.kendall_mc, "Draws per empirical Kendall function")->check(CLI::Range(1000, 100000000));
  cmd->add_option("--epsilon", c.epsilon, "Level-set rejection tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--epsilon-mode", c.epsilon_mode, "Tolerance rule")->check(CLI::IsMember({"abs", "rel"}));
  cmd->add_option("--max-attempts", c.max_attempts, "Rejection attempt cap")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
}

// Config values overridden by the command line.
void apply_common(const Common& c, hkc::ModelConfig& cfg) {
  if (c.kendall_mc) cfg.kendall_mc = *c.kendall_mc;
  if (c.epsilon) cfg.epsilon.eps0 = *c.epsilon;
  if (c.epsilon_mode == "abs") cfg.epsilon.mode = hkc::ToleranceRule::Mode::absolute;
  if (c.epsilon_mode == "rel") cfg.epsilon.mode = hkc::ToleranceRule::Mode::relative;
  if (c.seed) cfg.seed = *c.seed;
}

hkc::KendallPolicy policy_for(const hkc::ModelConfig& cfg, bool empirical = false) {
  hkc::KendallPolicy p;
  p.force_empirical = empirical;
  p.build.mc_size = cfg.kendall_mc;
  p.seed = cfg.seed;
  return p;
}

hkc::SampleOptions sampling_for(const hkc::ModelConfig& cfg, const Common& c, const std::string& method) {
  hkc::SampleOptions o;
  o.tolerance = cfg.epsilon;
  o.max_attempts = c.max_attempts;
  if (method == "exact") o.method = hkc::SampleMethod::exact;
  if (method == "rejection") o.method = hkc::SampleMethod::rejection;
  return o;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw hkc::InputError(what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

hkc::ModelConfig load_prepared(const std::string& path, const Common& c, const std::vector<std::string>& columns = {}) {
  hkc::ModelConfig cfg = hkc::read_model_config(path, columns);
  apply_common(c, cfg);
  hkc::prepare_kendall(cfg.model, policy_for(cfg));
  hkc::require_valid(cfg.model, cfg.model.n_vars);
  return cfg;
}

int cmd_fit(const std::string& data_path, const std::string& model_path, const std::string& method,
            const std::string& kendall, bool frozen, bool uniform, const std::string& out, const Common& c) {
  const hkc::Dataset data = hkc::read_csv(data_path);
  if (data.values.rows() < 2) throw hkc::InputError(data_path + ": need at least two data rows");
  hkc::ModelConfig cfg = load_prepared(model_path, c, data.header);
  hkc::RowMatrix u;
  if (uniform) {
    for (Eigen::Index r = 0; r < data.values.rows(); ++r)
      for (Eigen::Index k = 0; k < data.values.cols(); ++k)
        if (!(data.values(r, k) > 0.0 && data.values(r, k) < 1.0))
          throw hkc::InputError(data_path + ":" + std::to_string(r + 2) + ": --uniform data must lie in (0,1)");
    u = data.values;
  } else {
    u = hkc::pseudo_observations(data.values);
  }
  hkc::FitOptions fo;
  fo.kendall_mode = kendall == "empirical" ? hkc::KendallMode::empirical : hkc::KendallMode::closed_form;
  fo.kendall_build.mc_size = cfg.kendall_mc;
  fo.seed = cfg.seed;
  fo.threads = c.threads;
  fo.force_frozen_kendall = frozen;
  hkc::FitResult fit = hkc::fit_two_step(cfg.model, u, fo);
  if (method == "mle") fit = hkc::fit_joint_mle(fit, u, fo);
  hkc::write_file_atomic(out, hkc::fit_report_json(fit, cfg, {method, kendall, !uniform}));
  std::printf("two-step log-lik %.6f\n", fit.report.loglik_two_step);
  if (fit.report.joint_run) std::printf("joint MLE log-lik %.6f\n", fit.report.loglik_joint);
  for (const auto& n : fit.report.nodes)
    if (n.dim > 1) std::printf("%-24s %-12s %s\n", n.path.c_str(), std::string(hkc::to_string(n.family)).c_str(), n.method.c_str());
  if (fit.report.clamped_two_step > 0 || fit.report.clamped_joint > 0)
    std::fprintf(stderr, "warning: %zu rows hit the density floor\n",
                 std::max(fit.report.clamped_two_step, fit.report.clamped_joint));
  if (!fit.report.converged()) {
    std::fprintf(stderr, "warning: optimizer did not converge; report written with the best iterate\n");
    return kNumericWarning;
  }
  return kOk;
}

int cmd_simulate(const std::string& model_path, std::size_t n, const std::string& method, const std::string& out,
                 const Common& c) {
  hkc::ModelConfig cfg = load_prepared(model_path, c);
  if (!cfg.fully_parameterized) throw hkc::InputError(model_path + ": simulation needs every node's parameters");
  if (method == "exact" && !hkc::exact_sampling_available(cfg.model))
    throw hkc::InputError("exact sampling needs Archimedean clusters; use --method rejection");
  hkc::RngStream rng(cfg.seed);
  const hkc::RowMatrix u = hkc::model_sample(cfg.model, n, rng, sampling_for(cfg, c, method));
  std::vector<std::string> header = cfg.model.variables;
  if (header.size() != cfg.model.n_vars) {
    header.clear();
    for (std::size_t i = 0; i < cfg.model.n_vars; ++i) header.push_back("u" + std::to_string(i + 1));
  }
  hkc::write_file_atomic(out, hkc::format_csv(header, u));
  return kOk;
}

int cmd_density(const std::string& model_path, const std::string& point, bool log_scale, const Common& c) {
  hkc::ModelConfig cfg = load_prepared(model_path, c);
  if (!cfg.fully_parameterized) throw hkc::InputError(model_path + ": density needs every node's parameters");
  const std::vector<double> u = parse_list(point, "--point");
  if (u.size() != cfg.model.n_vars)
    throw hkc::InputError("--point has " + std::to_string(u.size()) + " values, the model has " +
                          std::to_string(cfg.model.n_vars) + " variables");
  for (double x : u)
    if (!(x > 0.0 && x < 1.0)) throw hkc::InputError("--point values must lie in (0,1)");
  const double ld = hkc::model_log_density(cfg.model, u);
  std::printf("%s\n", hkc::format_number(log_scale ? ld : std::exp(ld)).c_str());
  return kOk;
}

int cmd_kendall(const std::string& family, std::optional<double> theta, int dim, int grid, const std::string& out) {
  const hkc::CopulaFamily f = hkc::copula_family_from_string(family);
  hkc::KendallFunction k;
  if (f == hkc::CopulaFamily::independence) {
    k = dim == 1 ? hkc::KendallFunction::identity() : hkc::KendallFunction::closed_form(hkc::Generator::independence(), dim);
  } else if (f == hkc::CopulaFamily::clayton || f == hkc::CopulaFamily::gumbel || f == hkc::CopulaFamily::frank) {
    if (!theta) throw hkc::InputError("--theta is required for " + family);
    const hkc::Family g = f == hkc::CopulaFamily::clayton  ? hkc::Family::clayton
                          : f == hkc::CopulaFamily::gumbel ? hkc::Family::gumbel
                                                           : hkc::Family::frank;
    k = hkc::Copula::archimedean(hkc::Generator(g, *theta), dim).closed_kendall();
  } else {
    throw hkc::InputError("closed-form Kendall functions exist only for independence, clayton, gumbel and frank");
  }
  hkc::RowMatrix table(grid + 1, 2);
  for (int i = 0; i <= grid; ++i) {
    const double t = static_cast<double>(i) / grid;
    table(i, 0) = t;
    table(i, 1) = k.cdf(t);
  }
  const std::string csv = hkc::format_csv({"t", "K"}, table);
  if (out.empty())
    std::fputs(csv.c_str(), stdout);
  else
    hkc::write_file_atomic(out, csv);
  return kOk;
}

struct BacktestArgs {
  std::string data, model, out, margin = "empirical", weights;
  double level = 0.99;
  std::size_t window = 500;
  std::size_t refit_every = 25;
  std::size_t mc = 10000;
  double margin_nu = 5.0;
};

int cmd_backtest(const BacktestArgs& a, const Common& c) {
  const hkc::Dataset data = hkc::read_csv(a.data);
  hkc::ModelConfig cfg = load_prepared(a.model, c, data.header);
  hkc::RollingOptions o;
  o.window = a.window;
  o.level = a.level;
  o.refit_every = a.refit_every;
  o.mc = a.mc;
  o.margin = hkc::margin_kind_from_string(a.margin);
  o.margin_nu = a.margin_nu;
  if (!a.weights.empty()) o.weights = parse_list(a.weights, "--weights");
  o.fit.kendall_build.mc_size = cfg.kendall_mc;
  o.fit.threads = c.threads;
  o.sampling = sampling_for(cfg, c, "auto");
  o.seed = cfg.seed;
  const hkc::BacktestReport rep = hkc::rolling_backtest(cfg.model, data.values, o);
  hkc::write_file_atomic(a.out, hkc::backtest_report_json(rep, o));
  std::printf("level %.4g  days %zu  exceedances %zu (expected %.1f)\n", rep.level, rep.horizon, rep.n_exceed,
              (1.0 - rep.level) * static_cast<double>(rep.horizon));
  std::printf("UC  LR %.4f  p %.2f\n", rep.lr_uc, rep.p_uc);
  if (rep.degenerate) {
    std::printf("IND unavailable (all days equal)\n");
  } else {
    std::printf("IND LR %.4f  p %.2f\n", rep.lr_ind, rep.p_ind);
    std::printf("CC  LR %.4f  p %.2f\n", rep.lr_cc, rep.p_cc);
  }
  return kOk;
}

struct StudyArgs {
  std::string nesting = "clayton,gumbel,frank";
  std::string tau0 = "0.4,0.7";
  std::string taus = "0.4:0.7";
  std::string sizes = "250,500,1000";
  std::string methods = "two_step_closed,two_step_empirical,joint_mle";
  std::string cluster1 = "clayton", cluster2 = "gumbel";
  std::size_t reps = 100;
  std::string out;
};

int cmd_study(const StudyArgs& a, const Common& c) {
  hkc::StudyConfig s;
  auto split = [](const std::string& text) {
    std::vector<std::string> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(item);
    return v;
  };
  s.nesting.clear();
  for (const auto& f : split(a.nesting)) s.nesting.push_back(hkc::copula_family_from_string(f));
  s.tau0 = parse_list(a.tau0, "--tau0");
  s.cluster_taus.clear();
  for (const auto& p : split(a.taus)) {
    const auto colon = p.find(':');
    if (colon == std::string::npos) throw hkc::InputError("--cluster-taus entries look like 0.4:0.7");
    s.cluster_taus.emplace_back(parse_list(p.substr(0, colon), "--cluster-taus")[0],
                                parse_list(p.substr(colon + 1), "--cluster-taus")[0]);
  }
  s.sizes.clear();
  for (double n : parse_list(a.sizes, "--sizes")) {
    if (!(n >= 10) || n != std::floor(n)) throw hkc::InputError("--sizes must be integers >= 10");
    s.sizes.push_back(static_cast<std::size_t>(n));
  }
  s.methods.clear();
  for (const auto& m : split(a.methods)) {
    if (m == "two_step_closed") s.methods.push_back(hkc::StudyMethod::two_step_closed);
    else if (m == "two_step_empirical") s.methods.push_back(hkc::StudyMethod::two_step_empirical);
    else if (m == "joint_mle") s.methods.push_back(hkc::StudyMethod::joint_mle);
    else throw hkc::InputError("unknown study method '" + m + "'");
  }
  s.cluster1 = hkc::copula_family_from_string(a.cluster1);
  s.cluster2 = hkc::copula_family_from_string(a.cluster2);
  s.replications = a.reps;
  if (c.kendall_mc) s.kendall_mc = *c.kendall_mc;
  s.seed = c.seed.value_or(1);
  s.threads = c.threads;
  const auto cells = hkc::simulation_study(s);
  const std::string csv = hkc::study_csv(cells);
  if (a.out.empty())
    std::fputs(csv.c_str(), stdout);
  else
    hkc::write_file_atomic(a.out, csv);
  std::size_t failed = 0;
  for (const auto& cell : cells) failed += cell.failed;
  if (failed > 0) {
    std::fprintf(stderr, "warning: %zu replications failed\n", failed);
    return kNumericWarning;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical Kendall copulas: fitting, simulation, densities and VaR backtests"};
  app.require_subcommand(1);
  Common common;

  auto* fit = app.add_subcommand("fit", "Fit a model to a data file");
  std::string fit_data, fit_model, fit_method = "two-step", fit_kendall = "closed", fit_out;
  bool fit_frozen = false, fit_uniform = false;
  fit->add_option("--data", fit_data, "CSV with a header row")->required();
  fit->add_option("--model", fit_model, "Model config (JSON)")->required();
  fit->add_option("--method", fit_method, "Estimator")->check(CLI::IsMember({"two-step", "mle"}));
  fit->add_option("--kendall", fit_kendall, "Kendall functions of Archimedean clusters")
      ->check(CLI::IsMember({"closed", "empirical"}));
  fit->add_flag("--frozen-kendall", fit_frozen, "Allow joint MLE with elliptical clusters held fixed");
  fit->add_flag("--uniform", fit_uniform, "Data are already uniforms; skip the rank transform");
  fit->add_option("--out", fit_out, "Report path")->required();
  add_common(fit, common);

  auto* sim = app.add_subcommand("simulate", "Draw from a model");
  std::string sim_model, sim_method = "auto", sim_out;
  std::size_t sim_n = 0;
  sim->add_option("--model", sim_model, "Model config or fit report")->required();
  sim->add_option("--n", sim_n, "Number of rows")->required();
  sim->add_option("--method", sim_method, "Cluster sampler")->check(CLI::IsMember({"auto", "exact", "rejection"}));
  sim->add_option("--out", sim_out, "CSV path")->required();
  add_common(sim, common);

  auto* den = app.add_subcommand("density", "Evaluate the model density at a point");
  std::string den_model, den_point;
  bool den_log = false;
  den->add_option("--model", den_model, "Model config or fit report")->required();
  den->add_option("--point", den_point, "Comma-separated u values")->required();
  den->add_flag("--log", den_log, "Print the log density");
  add_common(den, common);

  auto* ken = app.add_subcommand("kendall", "Tabulate a closed-form Kendall function");
  std::string ken_family, ken_out;
  std::optional<double> ken_theta;
  int ken_dim = 2, ken_grid = 10;
  ken->add_option("--family", ken_family, "Archimedean family or independence")->required();
  ken->add_option("--theta", ken_theta, "Generator parameter");
  ken->add_option("--dim", ken_dim, "Dimension")->check(CLI::Range(1, hkc::Generator::kMaxOrder));
  ken->add_option("--grid", ken_grid, "Number of grid intervals on [0,1]")->check(CLI::Range(1, 10000000));
  ken->add_option("--out", ken_out, "CSV path (stdout when omitted)");

  auto* bt = app.add_subcommand("backtest", "Rolling VaR forecast and coverage tests");
  BacktestArgs ba;
  bt->add_option("--data", ba.data, "Returns CSV with a header row")->required();
  bt->add_option("--model", ba.model, "Model config (families and structure)")->required();
  bt->add_option("--level", ba.level, "VaR confidence level")->check(CLI::Range(0.5, 0.9999));
  bt->add_option("--window", ba.window, "Training window length");
  bt->add_option("--refit-every", ba.refit_every, "Days between copula refits")->check(CLI::PositiveNumber);
  bt->add_option("--mc", ba.mc, "Monte Carlo draws per forecast")->check(CLI::Range(10000, 100000000));
  bt->add_option("--margin", ba.margin, "Marginal model")->check(CLI::IsMember({"empirical", "normal", "student_t"}));
  bt->add_option("--margin-nu", ba.margin_nu, "Degrees of freedom of student_t margins");
  bt->add_option("--weights", ba.weights, "Comma-separated portfolio weights (equal by default)");
  bt->add_option("--out", ba.out, "Report path")->required();
  add_common(bt, common);

  auto* st = app.add_subcommand("study", "Simulation study of the nesting-parameter estimators");
  StudyArgs sa;
  st->add_option("--nesting", sa.nesting, "Nesting families");
  st->add_option("--tau0", sa.tau0, "Nesting tau values");
  st->add_option("--cluster-taus", sa.taus, "Cluster tau pairs, e.g. 0.4:0.7,0.7:0.4");
  st->add_option("--cluster1", sa.cluster1, "Family of the first cluster");
  st->add_option("--cluster2", sa.cluster2, "Family of the second cluster");
  st->add_option("--sizes", sa.sizes, "Sample sizes");
  st->add_option("--reps", sa.reps, "Replications per cell");
  st->add_option("--methods", sa.methods, "two_step_closed, two_step_empirical, joint_mle");
  st->add_option("--out", sa.out, "CSV path (stdout when omitted)");
  add_common(st, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*fit) return cmd_fit(fit_data, fit_model, fit_method, fit_kendall, fit_frozen, fit_uniform, fit_out, common);
    if (*sim) return cmd_simulate(sim_model, sim_n, sim_method, sim_out, common);
    if (*den) return cmd_density(den_model, den_point, den_log, common);
    if (*ken) return cmd_kendall(ken_family, ken_theta, ken_dim, ken_grid, ken_out);
    if (*bt) return cmd_backtest(ba, common);
    if (*st) return cmd_study(sa, common);
  } catch (const hkc::ValidationError& e) {
    std::fprintf(stderr, "error: invalid model\n");
    for (const auto& issue : e.issues()) std::fprintf(stderr, "  %s\n", issue.c_str());
    return kInputError;
  } catch (const hkc::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericWarning;
  } catch (const hkc::AttemptCapError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericWarning;
  } catch (const std::exception& e) {
    // Input, parameter, domain and dimension errors all trace back to the inputs.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return kOk;
}
