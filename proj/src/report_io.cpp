#include "hetqr/report_io.hpp"

#include "hetqr/het_qr.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>

namespace hetqr {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from(const json& j, Index rows, Index cols, const char* what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) throw InvalidInput(std::string(what) + ": wrong row count");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw InvalidInput(std::string(what) + ": wrong column count");
    }
    for (Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Vector vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string(what) + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

void write_fit_json(std::ostream& out, const StoredFit& fit) {
  const FitReport& r = fit.report;
  json j;
  j["schema"] = kReportSchema;
  j["method"] = to_string(fit.method);
  j["taus"] = fit.taus;
  j["pis"] = fit.pis;
  j["feature_names"] = fit.feature_names;
  j["n"] = fit.n;
  j["lambda"] = r.lambda;
  j["intercepts"] = vector_json(r.coef.intercepts);
  j["slopes"] = matrix_json(r.coef.slopes);
  json pattern = json::array();
  for (Index m = 0; m < r.pattern.active.rows(); ++m) {
    json row = json::array();
    for (Index k = 0; k < r.pattern.active.cols(); ++k) row.push_back(static_cast<bool>(r.pattern.active(m, k)));
    pattern.push_back(std::move(row));
  }
  j["pattern"] = std::move(pattern);
  j["model_size"] = r.pattern.size();
  j["objective"] = r.objective;
  j["objective_trace"] = r.objective_trace;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["xi"] = vector_json(r.xi);
  j["notes"] = r.notes;
  j["dropped_columns"] = fit.dropped_columns;
  if (fit.method == Method::HetQR) {
    j["omega"] = matrix_json(fit.omega);
  } else {
    j["l1_penalties"] = matrix_json(fit.l1_penalties);
  }
  if (fit.tuning) {
    const TuningResult& t = *fit.tuning;
    j["tuning"] = {{"method", to_string(t.method)},
                   {"best_lambda", t.best_lambda},
                   {"lambdas", t.lambdas},
                   {"scores", t.scores},
                   {"warnings", t.warnings}};
  }
  out << j.dump(2) << '\n';
}

StoredFit read_fit_json(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("fit report is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("schema").get<int>() != kReportSchema) throw InvalidInput("unsupported fit report schema");
    StoredFit f;
    f.method = parse_method(j.at("method").get<std::string>());
    f.taus = j.at("taus").get<std::vector<double>>();
    f.pis = j.at("pis").get<std::vector<double>>();
    f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    f.n = j.at("n").get<Index>();
    const Index levels = static_cast<Index>(f.taus.size());
    const Index p = static_cast<Index>(f.feature_names.size());
    FitReport& r = f.report;
    r.lambda = j.at("lambda").get<double>();
    r.coef.intercepts = vector_from(j.at("intercepts"), "intercepts");
    r.coef.slopes = matrix_from(j.at("slopes"), levels, p, "slopes");
    r.coef.check_shape(levels, p);
    r.pattern = SparsityPattern::of(r.coef);
    r.objective = j.at("objective").get<double>();
    r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.xi = vector_from(j.at("xi"), "xi");
    r.notes = j.at("notes").get<std::vector<std::string>>();
    f.dropped_columns = j.value("dropped_columns", std::vector<std::string>{});
    if (f.method == Method::HetQR) {
      f.omega = matrix_from(j.at("omega"), levels, p, "omega");
    } else {
      f.l1_penalties = matrix_from(j.at("l1_penalties"), levels, p, "l1_penalties");
    }
    if (j.contains("tuning")) {
      const json& t = j["tuning"];
      TuningResult tr;
      tr.method = t.at("method").get<std::string>() == "cv" ? TuningMethod::KFoldCV : TuningMethod::ValidationSet;
      tr.best_lambda = t.at("best_lambda").get<double>();
      tr.lambdas = t.at("lambdas").get<std::vector<double>>();
      tr.scores = t.at("scores").get<std::vector<double>>();
      tr.warnings = t.at("warnings").get<std::vector<std::string>>();
      f.tuning = std::move(tr);
    }
    return f;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed fit report: ") + e.what());
  }
}

double recompute_objective(const StoredFit& fit, const Dataset& data) {
  const QuantileGrid grid(fit.taus, fit.pis);
  if (data.p() != fit.report.coef.p()) throw InvalidInput("data has a different number of covariates than the fit");
  if (fit.method == Method::HetQR) {
    return objective(data, grid, fit.report.coef, PenaltyWeights(fit.omega, fit.report.lambda));
  }
  return weighted_l1_objective(data, grid, fit.report.coef, fit.l1_penalties);
}

}  // namespace hetqr
