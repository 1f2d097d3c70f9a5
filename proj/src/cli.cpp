#include "hetqr/cli.hpp"

#include "hetqr/estimators.hpp"
#include "hetqr/het_qr.hpp"
#include "hetqr/qr_fit.hpp"
#include "hetqr/report_io.hpp"
#include "hetqr/study.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

namespace hetqr {

namespace {

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
      throw InvalidInput(std::string("bad number in ") + what + ": '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InvalidInput(std::string(what) + " is empty");
  return out;
}

// CLI11 consumes its argument vector from the back.
int parse_args(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               bool& done) {
  std::vector<std::string> rev(args.rbegin(), args.rend());
  done = false;
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    done = true;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    done = true;
    return kExitBadInput;
  }
  return kExitOk;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

struct FinalFit {
  FitReport report;
  Matrix omega;
  Matrix penalties;
};

FinalFit fit_at(Method method, const Dataset& data, const QuantileGrid& grid, double lambda,
                const EstimatorOptions& opts) {
  FinalFit f;
  const double total = static_cast<double>(data.n()) * lambda;
  switch (method) {
    case Method::QR:
      f.penalties = Matrix::Zero(grid.size(), data.p());
      f.report = baseline_report(data, grid, fit_qr(data, grid, opts.hetqr.lp), f.penalties, 0.0);
      break;
    case Method::QRLasso:
      f.penalties = Matrix::Constant(grid.size(), data.p(), total);
      f.report = baseline_report(data, grid, fit_qr_lasso(data, grid, lambda, opts.hetqr.lp), f.penalties, lambda);
      break;
    case Method::QRALasso: {
      const CoefficientSet pilot = opts.alasso_pilot ? *opts.alasso_pilot : fit_qr(data, grid, opts.hetqr.lp);
      const double clip = opts.clip;
      f.penalties = pilot.slopes.unaryExpr([total, clip](double g) { return total / std::max(std::abs(g), clip); });
      f.report = baseline_report(data, grid, fit_qr_alasso(data, grid, lambda, pilot, clip, opts.hetqr.lp),
                                 f.penalties, lambda);
      break;
    }
    case Method::HetQR: {
      HetQrConfig cfg = opts.hetqr;
      cfg.lambda_n = lambda;
      if (data.n() > data.p()) {
        const PenaltyWeights w = make_weights(data, grid, cfg.weight_clip, cfg.lp);
        f.report = fit_hetqr(data, grid, w, cfg);
        f.omega = w.omega();
      } else {
        HighDimFit h = fit_hetqr_highdim(data, grid, cfg);
        f.report = std::move(h.fit);
        f.omega = h.weights.omega();
        f.report.notes.emplace_back("p >= n: weights from an omega = 1 pilot fit at the same lambda");
      }
      break;
    }
  }
  return f;
}

std::vector<Index> varying_columns(const Dataset& d) {
  std::vector<Index> keep;
  for (Index j = 0; j < d.p(); ++j) {
    if (d.z().col(j).maxCoeff() != d.z().col(j).minCoeff()) keep.push_back(j);
  }
  return keep;
}

void print_table(std::ostream& out, const StoredFit& f) {
  const FitReport& r = f.report;
  std::vector<std::string> labels{"(Intercept)"};
  labels.insert(labels.end(), f.feature_names.begin(), f.feature_names.end());
  std::size_t w0 = 0;
  for (const auto& l : labels) w0 = std::max(w0, l.size());
  const std::size_t w = 12;
  out << fmt::format("{:<{}}", "", w0);
  for (double t : f.taus) out << fmt::format(" {:>{}}", fmt::format("tau={:g}", t), w);
  out << '\n';
  for (std::size_t row = 0; row < labels.size(); ++row) {
    out << fmt::format("{:<{}}", labels[row], w0);
    for (Index m = 0; m < r.coef.levels(); ++m) {
      const double v = row == 0 ? r.coef.intercepts(m) : r.coef.slopes(m, static_cast<Index>(row - 1));
      const bool blank = row > 0 && std::abs(v) < kZeroThreshold;
      out << fmt::format(" {:>{}}", blank ? std::string() : fmt::format("{:.4f}", v), w);
    }
    out << '\n';
  }
  out << fmt::format("method {}  lambda {:g}  objective {:.10g}  model size {}  iterations {}  converged {}\n",
                     to_string(f.method), r.lambda, r.objective, r.pattern.size(), r.iterations,
                     r.converged ? "yes" : "no");
}

}  // namespace

int cmd_fit(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fit quantile regression models at several quantile levels", "hetqr fit"};
  std::string data_path, taus_s = "0.25,0.5,0.75", method_s = "hetqr", tune_s, out_path, grid_s;
  double lambda = 0.0;
  int lambda_points = 30, max_iter = 100;
  double tol = 1e-6;
  std::uint64_t seed = 1;
  app.add_option("--data", data_path, "CSV file: header row, response first")->required();
  app.add_option("--taus", taus_s, "comma-separated quantile levels")->capture_default_str();
  app.add_option("--method", method_s, "qr, qr-lasso, qr-alasso or hetqr")->capture_default_str();
  auto* lambda_opt = app.add_option("--lambda", lambda, "fixed tuning parameter");
  auto* tune_opt = app.add_option("--tune", tune_s, "cv:<k> or valid:<csv> (default cv:3 when --lambda is absent)");
  lambda_opt->excludes(tune_opt);
  app.add_option("--lambda-grid", grid_s, "comma-separated lambda candidates for tuning");
  app.add_option("--lambda-points", lambda_points, "size of the default log-spaced grid")->capture_default_str();
  app.add_option("--seed", seed, "fold assignment seed for cv tuning")->capture_default_str();
  app.add_option("--max-iter", max_iter, "Het-QR outer iteration cap")->capture_default_str();
  app.add_option("--tol", tol, "Het-QR relative objective tolerance")->capture_default_str();
  app.add_option("--out", out_path, "write the fit report as JSON");
  bool done = false;
  if (int code = parse_args(app, args, out, err, done); done) return code;

  return guarded(err, [&]() -> int {
    const Dataset data = load_csv(data_path);
    const QuantileGrid grid(parse_list(taus_s, "--taus"));
    const Method method = parse_method(method_s);
    EstimatorOptions opts;
    opts.hetqr.max_outer_iters = max_iter;
    opts.hetqr.tol = tol;
    opts.hetqr.validate();

    StoredFit stored;
    stored.method = method;
    stored.taus = grid.taus();
    stored.pis = grid.pis();
    stored.feature_names = data.feature_names();
    stored.n = data.n();

    const std::vector<Index> keep = varying_columns(data);
    for (Index j = 0; j < data.p(); ++j) {
      if (std::find(keep.begin(), keep.end(), j) == keep.end()) {
        stored.dropped_columns.push_back(data.feature_names()[static_cast<std::size_t>(j)]);
      }
    }
    if (!stored.dropped_columns.empty()) {
      err << "note: dropped " << stored.dropped_columns.size() << " constant column(s); their slopes are 0\n";
    }

    FinalFit fit;
    if (keep.empty()) {
      // nothing left to regress on: the fit is the per-level sample quantile
      fit.report = baseline_report(data, grid, CoefficientSet::zeros(grid.size(), data.p()),
                                   Matrix::Zero(grid.size(), data.p()), lambda_opt->count() ? lambda : 0.0);
      for (Index m = 0; m < grid.size(); ++m) fit.report.coef.intercepts(m) = sample_quantile(data.y(), grid.tau(m));
      fit.report.objective = stacked_loss(data, grid, fit.report.coef);
      fit.report.objective_trace = {fit.report.objective};
      fit.report.notes.emplace_back("all covariates constant: intercept-only fit");
      fit.omega = Matrix::Ones(grid.size(), data.p());
      fit.penalties = Matrix::Zero(grid.size(), data.p());
    } else {
      const Dataset work = data.columns(keep);
      const LambdaGrid lambdas =
          grid_s.empty() ? LambdaGrid::log_spaced(work.n(), lambda_points) : LambdaGrid{parse_list(grid_s, "--lambda-grid")};
      std::string tune_choice = tune_s.empty() ? "cv:3" : tune_s;

      std::optional<Dataset> valid;
      int folds = 0;
      auto tune = [&](const Fitter& fitter) {
        if (valid) return tune_validation(work, *valid, grid, lambdas, fitter);
        return tune_cv(work, grid, lambdas, folds, seed, fitter);
      };
      if (method != Method::QR && !lambda_opt->count()) {
        if (tune_choice.rfind("cv:", 0) == 0) {
          folds = static_cast<int>(parse_list(tune_choice.substr(3), "--tune cv:k")[0]);
          if (folds < 2) throw InvalidInput("--tune cv:k needs k >= 2");
        } else if (tune_choice.rfind("valid:", 0) == 0) {
          const Dataset v = load_csv(tune_choice.substr(6));
          if (v.feature_names() != data.feature_names()) {
            throw InvalidInput("validation CSV must have the same columns as --data");
          }
          valid = v.columns(keep);
        } else {
          throw InvalidInput("--tune must be cv:<k> or valid:<csv>");
        }
      }
      if (method == Method::QR && data.p() >= data.n()) {
        err << "warning: p >= n; unpenalized quantile regression interpolates the data\n";
      }
      if (method == Method::QRALasso && work.p() >= work.n()) {
        // the pilot comes from QR-LASSO when p >= n
        double pilot_lambda = lambda;
        if (!lambda_opt->count()) pilot_lambda = tune(make_fitter(Method::QRLasso, grid, opts)).best_lambda;
        opts.alasso_pilot = fit_qr_lasso(work, grid, pilot_lambda, opts.hetqr.lp);
      }

      double chosen = lambda;
      if (method != Method::QR && !lambda_opt->count()) {
        TuningResult t = tune(make_fitter(method, grid, opts));
        for (const auto& w : t.warnings) err << "warning: " << w << '\n';
        chosen = t.best_lambda;
        t.best_fit = FitReport{};
        stored.tuning = std::move(t);
      }
      FinalFit small = fit_at(method, work, grid, chosen, opts);

      // scatter back to the full column set
      fit.report = small.report;
      fit.report.coef = CoefficientSet::zeros(grid.size(), data.p());
      fit.report.coef.intercepts = small.report.coef.intercepts;
      fit.report.xi = Vector::Zero(data.p());
      fit.omega = Matrix::Ones(grid.size(), data.p());
      fit.penalties = Matrix::Zero(grid.size(), data.p());
      for (std::size_t k = 0; k < keep.size(); ++k) {
        const Index j = keep[k], kk = static_cast<Index>(k);
        fit.report.coef.slopes.col(j) = small.report.coef.slopes.col(kk);
        if (small.report.xi.size() == work.p()) fit.report.xi(j) = small.report.xi(kk);
        if (small.omega.size() > 0) fit.omega.col(j) = small.omega.col(kk);
        if (small.penalties.size() > 0) fit.penalties.col(j) = small.penalties.col(kk);
      }
      fit.report.pattern = SparsityPattern::of(fit.report.coef);
    }

    stored.report = std::move(fit.report);
    stored.omega = std::move(fit.omega);
    stored.l1_penalties = std::move(fit.penalties);
    for (const auto& note : stored.report.notes) err << "note: " << note << '\n';
    print_table(out, stored);
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      if (!f) throw InvalidInput("cannot write " + out_path);
      write_fit_json(f, stored);
    }
    return kExitOk;
  });
}

int cmd_simulate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte-Carlo comparison of the estimators on a simulation design", "hetqr simulate"};
  std::string scenario_s, methods_s, taus_s, config_path, out_dir = ".";
  Index n = 500, p = 0;
  int reps = 100, lambda_points = 30;
  std::uint64_t seed = 1;
  unsigned hw = std::thread::hardware_concurrency();
  int jobs = hw == 0 ? 1 : static_cast<int>(hw);
  Index valid_mult = 10, test_mult = 100;
  auto* scenario_opt = app.add_option("--scenario", scenario_s,
                                      "hetero6, hetero100, block-<ar|cs>-<normal|t3|exp>, highdim600, table1-p6, ...");
  auto* config_opt = app.add_option("--config", config_path, "key = value study file; flags override it");
  auto* n_opt = app.add_option("--n", n, "training sample size")->capture_default_str();
  auto* p_opt = app.add_option("--p", p, "covariate count for block designs");
  auto* reps_opt = app.add_option("--reps", reps, "replications")->capture_default_str();
  auto* methods_opt = app.add_option("--methods", methods_s, "comma-separated methods (default: all)");
  auto* seed_opt = app.add_option("--seed", seed, "study seed")->capture_default_str();
  auto* taus_opt = app.add_option("--taus", taus_s, "quantile levels (default 0.25,0.5,0.75)");
  auto* points_opt = app.add_option("--lambda-points", lambda_points, "size of the lambda grid")->capture_default_str();
  auto* valid_opt = app.add_option("--valid-multiplier", valid_mult, "validation size / n")->capture_default_str();
  auto* test_opt = app.add_option("--test-multiplier", test_mult, "test size / n")->capture_default_str();
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads for replications");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  bool done = false;
  if (int code = parse_args(app, args, out, err, done); done) return code;

  return guarded(err, [&]() -> int {
    StudyConfig c;
    if (config_opt->count()) {
      std::ifstream f(config_path);
      if (!f) throw InvalidInput("cannot open config " + config_path);
      c = parse_study_config(f);
    } else if (!scenario_opt->count()) {
      throw InvalidInput("--scenario or --config is required");
    } else {
      c.scenario.n = n;
      c.scenario.seed = seed;
      c.replications = reps;
      c.jobs = jobs;
    }
    if (scenario_opt->count()) {
      const Scenario s = parse_scenario(scenario_s);
      const Index keep_n = c.scenario.n;
      const std::uint64_t keep_seed = c.scenario.seed;
      c.scenario = s;
      c.scenario.n = keep_n;
      c.scenario.seed = keep_seed;
    }
    if (n_opt->count()) c.scenario.n = n;
    if (p_opt->count()) c.scenario.p = p;
    if (seed_opt->count()) c.scenario.seed = seed;
    if (reps_opt->count()) c.replications = reps;
    if (jobs_opt->count()) c.jobs = jobs;
    if (methods_opt->count()) {
      c.methods.clear();
      std::stringstream ss(methods_s);
      std::string m;
      while (std::getline(ss, m, ',')) c.methods.push_back(parse_method(m));
    }
    if (taus_opt->count()) c.taus = parse_list(taus_s, "--taus");
    if (points_opt->count()) c.lambda_points = lambda_points;
    if (valid_opt->count()) c.valid_multiplier = valid_mult;
    if (test_opt->count()) c.test_multiplier = test_mult;
    c.validate();

    const StudyResult r = run_study(c);
    for (const auto& note : r.notices) err << "note: " << note << '\n';

    std::filesystem::create_directories(out_dir);
    const std::string stem = (std::filesystem::path(out_dir) / c.scenario.name()).string();
    auto write = [&](const std::string& path, auto&& fn) {
      std::ofstream f(path);
      if (!f) throw InvalidInput("cannot write " + path);
      fn(f);
    };
    write(stem + "_table.csv", [&](std::ostream& f) { write_table_csv(f, r); });
    write(stem + "_table.txt", [&](std::ostream& f) { write_table_text(f, r); });
    write(stem + "_replications.csv", [&](std::ostream& f) { write_replications_csv(f, r); });
    write_table_text(out, r);

    for (const auto& row : r.rows) {
      if (row.trace_violations > 0) {
        err << "warning: " << row.trace_violations << " Het-QR objective increase(s) above 1e-10\n";
      }
    }
    if (r.failures == c.replications) return kExitSolver;
    if (r.failures > 0) {
      err << r.failures << " of " << c.replications << " replications failed; see " << stem << "_replications.csv\n";
      return kExitPartial;
    }
    return kExitOk;
  });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const char* usage =
      "usage: hetqr <command> [options]\n"
      "commands:\n"
      "  fit       fit qr, qr-lasso, qr-alasso or hetqr on a CSV file\n"
      "  simulate  run a Monte-Carlo study on a simulation design\n"
      "exit codes: 0 ok, 1 internal error, 2 bad input or flags, 3 solver failure,\n"
      "            4 some simulation replications failed\n"
      "run 'hetqr <command> --help' for options\n";
  if (args.empty()) {
    err << usage;
    return kExitBadInput;
  }
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (args[0] == "fit") return cmd_fit(rest, out, err);
  if (args[0] == "simulate") return cmd_simulate(rest, out, err);
  if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    out << usage;
    return kExitOk;
  }
  err << "unknown command '" << args[0] << "'\n" << usage;
  return kExitBadInput;
}

}  // namespace hetqr
