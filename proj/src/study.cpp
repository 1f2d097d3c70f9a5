#include "hetqr/study.hpp"

#include "hetqr/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <atomic>
#include <charconv>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace hetqr {

LambdaGrid StudyConfig::lambda_grid() const {
  if (lambdas) return *lambdas;
  return LambdaGrid::log_spaced(scenario.n, lambda_points, lambda_min, lambda_max);
}

void StudyConfig::validate() const {
  scenario.validate();
  if (replications < 1) throw InvalidInput("replications must be >= 1");
  if (methods.empty()) throw InvalidInput("no methods requested");
  if (valid_multiplier < 1 || test_multiplier < 1 || test_chunk < 1) throw InvalidInput("multipliers must be >= 1");
  if (jobs < 1) throw InvalidInput("jobs must be >= 1");
  QuantileGrid check(taus);
  lambda_grid().validate();
  hetqr.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw InvalidInput("bad value for " + key + ": '" + v + "'");
  return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_number<double>(key, item));
  return out;
}

}  // namespace

StudyConfig parse_study_config(std::istream& in) {
  StudyConfig c;
  std::optional<Index> n, p;
  std::optional<std::uint64_t> seed;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "scenario") c.scenario = parse_scenario(val);
    else if (key == "n") n = parse_number<Index>(key, val);
    else if (key == "p") p = parse_number<Index>(key, val);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, val);
    else if (key == "reps" || key == "replications") c.replications = parse_number<int>(key, val);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& m : split_list(val)) c.methods.push_back(parse_method(m));
    } else if (key == "taus") c.taus = parse_doubles(key, val);
    else if (key == "lambda_points") c.lambda_points = parse_number<int>(key, val);
    else if (key == "lambda_min") c.lambda_min = parse_number<double>(key, val);
    else if (key == "lambda_max") c.lambda_max = parse_number<double>(key, val);
    else if (key == "lambdas") c.lambdas = LambdaGrid{parse_doubles(key, val)};
    else if (key == "valid_multiplier") c.valid_multiplier = parse_number<Index>(key, val);
    else if (key == "test_multiplier") c.test_multiplier = parse_number<Index>(key, val);
    else if (key == "jobs") c.jobs = parse_number<int>(key, val);
    else if (key == "max_outer_iters") c.hetqr.max_outer_iters = parse_number<int>(key, val);
    else if (key == "tol") c.hetqr.tol = parse_number<double>(key, val);
    else throw InvalidInput("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  // scenario may come after n/p/seed in the file
  if (n) c.scenario.n = *n;
  if (p) c.scenario.p = *p;
  if (seed) c.scenario.seed = *seed;
  c.validate();
  return c;
}

const MethodMetrics* ReplicationResult::find(Method m) const {
  for (const auto& mm : methods)
    if (mm.method == m) return &mm;
  return nullptr;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  CompensatedSum total;
  for (double v : values) total.add(v);
  s.mean = total.value() / s.count;
  if (s.count > 1) {
    CompensatedSum sq;
    for (double v : values) sq.add((v - s.mean) * (v - s.mean));
    s.se = std::sqrt(sq.value() / (s.count - 1) / s.count);
  }
  return s;
}

namespace {

std::vector<Method> effective_methods(const StudyConfig& c, std::vector<std::string>& notices) {
  std::vector<Method> out;
  for (Method m : {Method::QR, Method::QRLasso, Method::QRALasso, Method::HetQR}) {
    if (std::find(c.methods.begin(), c.methods.end(), m) == c.methods.end()) continue;
    if (m == Method::QR && c.scenario.covariates() >= c.scenario.n) {
      notices.push_back("qr omitted: unpenalized quantile regression is not designed for p >= n");
      continue;
    }
    out.push_back(m);
  }
  return out;
}

struct TestScores {
  CompensatedSum qpe, pe;
};

}  // namespace

ReplicationResult run_replication(const StudyConfig& c, const std::vector<Method>& methods, int rep) {
  ReplicationResult result;
  result.rep = rep;
  result.seed = derive_seed(c.scenario.seed, static_cast<std::uint64_t>(rep));
  try {
    const QuantileGrid grid(c.taus);
    const LambdaGrid lambdas = c.lambda_grid();
    const Index n = c.scenario.n;
    std::mt19937_64 train_rng(derive_seed(result.seed, 0));
    std::mt19937_64 valid_rng(derive_seed(result.seed, 1));
    std::mt19937_64 test_rng(derive_seed(result.seed, 2));
    const Dataset train = draw(c.scenario, n, train_rng);
    const Dataset valid = draw(c.scenario, c.valid_multiplier * n, valid_rng);
    const OracleTruth truth(c.scenario);
    const CoefficientSet true_coef = truth.at(grid);
    const SparsityPattern true_pattern = truth.pattern(grid);
    const bool highdim = train.p() >= train.n();

    std::vector<MethodMetrics> metrics;
    std::vector<CoefficientSet> fits;
    std::optional<CoefficientSet> lasso_fit;
    std::optional<double> lasso_lambda;
    auto tuned_lasso = [&]() {
      if (!lasso_fit) {
        TuningResult t = tune_validation(train, valid, grid, lambdas, make_fitter(Method::QRLasso, grid, {}));
        lasso_fit = t.best_fit.coef;
        lasso_lambda = t.best_lambda;
      }
    };

    for (Method m : methods) {
      MethodMetrics mm;
      mm.method = m;
      EstimatorOptions opts;
      opts.hetqr = c.hetqr;
      if (m == Method::HetQR) {
        opts.hetqr_observer = [&mm](double, const FitReport& f) {
          ++mm.fits_checked;
          mm.trace_violations += trace_violations(f.objective_trace);
          if (!f.converged) ++mm.nonconverged;
        };
      }
      FitReport fit;
      if (m == Method::QR) {
        fit = make_fitter(m, grid, opts)(train)(0.0);
      } else if (m == Method::QRLasso) {
        tuned_lasso();
        fit.coef = *lasso_fit;
        fit.lambda = *lasso_lambda;
      } else {
        if (m == Method::QRALasso && highdim) {
          tuned_lasso();
          opts.alasso_pilot = lasso_fit;
        }
        TuningResult t = tune_validation(train, valid, grid, lambdas, make_fitter(m, grid, opts));
        fit = std::move(t.best_fit);
        fit.lambda = t.best_lambda;
      }
      const SparsityPattern pattern = SparsityPattern::of(fit.coef);
      mm.size = static_cast<double>(model_size(pattern));
      mm.fm = f_measure(pattern, true_pattern);
      mm.pee = pee(fit.coef, true_coef.slopes);
      mm.l2 = theta_l2_error(fit.coef, true_coef);
      mm.lambda = fit.lambda;
      metrics.push_back(mm);
      fits.push_back(std::move(fit.coef));
    }

    // the 100n test set is scored in chunks to keep memory flat at p = 600
    std::vector<TestScores> scores(metrics.size());
    const Index total = c.test_multiplier * n;
    for (Index done = 0; done < total;) {
      const Index rows = std::min(c.test_chunk, total - done);
      const Dataset chunk = draw(c.scenario, rows, test_rng);
      for (std::size_t k = 0; k < metrics.size(); ++k) {
        scores[k].qpe.add(qpe(fits[k], truth, chunk, grid) * static_cast<double>(rows));
        scores[k].pe.add(pe(fits[k], chunk, grid) * static_cast<double>(rows));
      }
      done += rows;
    }
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      metrics[k].qpe = scores[k].qpe.value() / static_cast<double>(total);
      metrics[k].pe = scores[k].pe.value() / static_cast<double>(total);
    }
    result.methods = std::move(metrics);
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
    result.methods.clear();
  }
  return result;
}

StudyResult run_study(const StudyConfig& config) {
  config.validate();
  StudyResult r;
  r.config = config;
  r.methods = effective_methods(config, r.notices);
  if (r.methods.empty()) throw InvalidInput("no applicable methods for this scenario");
  r.true_size = OracleTruth(config.scenario).pattern(QuantileGrid(config.taus)).size();
  r.replications.resize(static_cast<std::size_t>(config.replications));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int rep; (rep = next.fetch_add(1)) < config.replications;) {
      r.replications[static_cast<std::size_t>(rep)] = run_replication(config, r.methods, rep);
    }
  };
  const int jobs = std::min(config.jobs, config.replications);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& rep : r.replications) {
    if (!rep.ok) {
      ++r.failures;
      r.notices.push_back("replication " + std::to_string(rep.rep) + " failed: " + rep.error);
    }
  }
  for (Method m : r.methods) {
    StudyRow row;
    row.method = m;
    std::vector<double> size, fm, pe_v, qpe_v, pee_v, l2;
    for (const auto& rep : r.replications) {
      if (!rep.ok) continue;
      const MethodMetrics* mm = rep.find(m);
      size.push_back(mm->size);
      fm.push_back(mm->fm);
      pee_v.push_back(mm->pee);
      qpe_v.push_back(mm->qpe);
      pe_v.push_back(mm->pe);
      l2.push_back(mm->l2);
      row.fits_checked += mm->fits_checked;
      row.trace_violations += mm->trace_violations;
      row.nonconverged += mm->nonconverged;
    }
    row.size = summarize(size);
    row.fm = summarize(fm);
    row.pee = summarize(pee_v);
    row.qpe = summarize(qpe_v);
    row.pe = summarize(pe_v);
    row.l2 = summarize(l2);
    r.rows.push_back(row);
  }
  return r;
}

namespace {

std::string method_label(Method m) {
  switch (m) {
    case Method::QR: return "QR";
    case Method::QRLasso: return "QR-LASSO";
    case Method::QRALasso: return "QR-aLASSO";
    case Method::HetQR: return "Het-QR";
  }
  return "?";
}

std::string cell(const Summary& s, double scale, int digits) {
  if (s.count == 0) return "NA";
  const double mean = s.mean * scale;
  if (s.se == 0.0) {
    if (mean == std::round(mean)) return fmt::format("{:.0f}", mean);
    return fmt::format("{:.{}f}", mean, digits);
  }
  return fmt::format("{:.{}f}({:.{}f})", mean, digits, s.se * scale, digits);
}

}  // namespace

void write_table_csv(std::ostream& out, const StudyResult& r) {
  out << "method,replications,failures,size_mean,size_se,fm_mean,fm_se,pee_mean,pee_se,qpe_mean,qpe_se,pe_mean,pe_se,"
         "l2_mean,l2_se,hetqr_fits_checked,hetqr_trace_violations,hetqr_nonconverged\n";
  for (const auto& row : r.rows) {
    out << to_string(row.method) << ',' << row.size.count << ',' << r.failures;
    for (const Summary* s : {&row.size, &row.fm, &row.pee, &row.qpe, &row.pe, &row.l2}) {
      out << fmt::format(",{:.10g},{:.10g}", s->mean, s->se);
    }
    out << ',' << row.fits_checked << ',' << row.trace_violations << ',' << row.nonconverged << '\n';
  }
}

void write_table_text(std::ostream& out, const StudyResult& r) {
  const auto& c = r.config;
  out << fmt::format("scenario {}  n={}  p={}  replications={}  seed={}  true model size={}\n", c.scenario.name(),
                     c.scenario.n, c.scenario.covariates(), c.replications, c.scenario.seed, r.true_size);
  for (const auto& note : r.notices) out << "note: " << note << '\n';
  std::vector<std::array<std::string, 6>> lines;
  lines.push_back({"Method", "Model-size", "FM(%)", "PEEx100", "QPEx10^3", "PEx10^3"});
  for (const auto& row : r.rows) {
    lines.push_back({method_label(row.method), cell(row.size, 1.0, 1),
                     row.method == Method::QR ? std::string("-") : cell(row.fm, 100.0, 0), cell(row.pee, 100.0, 1),
                     cell(row.qpe, 1000.0, 1), cell(row.pe, 1000.0, 1)});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& l : lines)
    for (std::size_t k = 0; k < l.size(); ++k) width[k] = std::max(width[k], l[k].size());
  for (const auto& l : lines) {
    std::string text = fmt::format("{:<{}}", l[0], width[0]);
    for (std::size_t k = 1; k < l.size(); ++k) text += fmt::format("  {:>{}}", l[k], width[k]);
    out << text << '\n';
  }
  if (r.failures > 0) out << r.failures << " of " << c.replications << " replications failed\n";
}

void write_replications_csv(std::ostream& out, const StudyResult& r) {
  out << "rep,seed,ok,method,size,fm,pee,qpe,pe,l2,lambda,fits_checked,trace_violations,nonconverged,error\n";
  for (const auto& rep : r.replications) {
    if (!rep.ok) {
      std::string err = rep.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << rep.rep << ',' << rep.seed << ",0,,,,,,,,,,,," << err << '\n';
      continue;
    }
    for (const auto& mm : rep.methods) {
      out << fmt::format("{},{},1,{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{},{},{},\n", rep.rep,
                         rep.seed, to_string(mm.method), mm.size, mm.fm, mm.pee, mm.qpe, mm.pe, mm.l2, mm.lambda,
                         mm.fits_checked, mm.trace_violations, mm.nonconverged);
    }
  }
}

}  // namespace hetqr
