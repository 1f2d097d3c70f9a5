#include "hetqr/estimators.hpp"

#include <memory>

namespace hetqr {

std::string to_string(Method m) {
  switch (m) {
    case Method::QR: return "qr";
    case Method::QRLasso: return "qr-lasso";
    case Method::QRALasso: return "qr-alasso";
    case Method::HetQR: return "hetqr";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "qr") return Method::QR;
  if (name == "qr-lasso") return Method::QRLasso;
  if (name == "qr-alasso") return Method::QRALasso;
  if (name == "hetqr" || name == "het-qr") return Method::HetQR;
  throw InvalidInput("unknown method '" + name + "' (expected qr, qr-lasso, qr-alasso or hetqr)");
}

bool uses_lambda(Method m) { return m != Method::QR; }

FitReport baseline_report(const Dataset& data, const QuantileGrid& grid, CoefficientSet coef, const Matrix& penalties,
                          double lambda) {
  FitReport r;
  r.objective = weighted_l1_objective(data, grid, coef, penalties);
  r.objective_trace.push_back(r.objective);
  r.pattern = SparsityPattern::of(coef);
  r.coef = std::move(coef);
  r.iterations = 1;
  r.converged = true;
  r.xi = Vector::Zero(r.coef.p());
  r.lambda = lambda;
  return r;
}

namespace {

Matrix alasso_penalties(const CoefficientSet& pilot, double total, double clip) {
  return pilot.slopes.unaryExpr([total, clip](double g) { return total / std::max(std::abs(g), clip); });
}

}  // namespace

Fitter make_fitter(Method method, const QuantileGrid& grid, const EstimatorOptions& opts) {
  const SolverOptions lp = opts.hetqr.lp;
  switch (method) {
    case Method::QR:
      return [grid, lp](const Dataset& train) -> LambdaFit {
        auto fit = std::make_shared<FitReport>(
            baseline_report(train, grid, fit_qr(train, grid, lp), Matrix::Zero(grid.size(), train.p()), 0.0));
        return [fit](double) { return *fit; };
      };
    case Method::QRLasso:
      return [grid, lp](const Dataset& train) -> LambdaFit {
        return [grid, lp, train](double lambda) {
          const double total = static_cast<double>(train.n()) * lambda;
          return baseline_report(train, grid, fit_qr_lasso(train, grid, lambda, lp),
                                 Matrix::Constant(grid.size(), train.p(), total), lambda);
        };
      };
    case Method::QRALasso:
      return [grid, opts, lp](const Dataset& train) -> LambdaFit {
        CoefficientSet pilot;
        if (opts.alasso_pilot) {
          pilot = *opts.alasso_pilot;
        } else if (train.n() > train.p()) {
          pilot = fit_qr(train, grid, lp);
        } else {
          throw InvalidInput("qr-alasso with p >= n needs an explicit pilot (e.g. a tuned qr-lasso fit)");
        }
        pilot.check_shape(grid.size(), train.p());
        const double clip = opts.clip;
        return [grid, lp, train, pilot, clip](double lambda) {
          const double total = static_cast<double>(train.n()) * lambda;
          return baseline_report(train, grid, fit_qr_alasso(train, grid, lambda, pilot, clip, lp),
                                 alasso_penalties(pilot, total, clip), lambda);
        };
      };
    case Method::HetQR:
      return [grid, opts](const Dataset& train) -> LambdaFit {
        const FitObserver observe = opts.hetqr_observer;
        if (train.n() > train.p()) {
          const PenaltyWeights w = make_weights(train, grid, opts.hetqr.weight_clip, opts.hetqr.lp);
          return [grid, opts, train, w, observe](double lambda) {
            HetQrConfig cfg = opts.hetqr;
            cfg.lambda_n = lambda;
            FitReport r = fit_hetqr(train, grid, w, cfg);
            if (observe) observe(lambda, r);
            return r;
          };
        }
        return [grid, opts, train, observe](double lambda) {
          HetQrConfig cfg = opts.hetqr;
          cfg.lambda_n = lambda;
          HighDimFit h = fit_hetqr_highdim(train, grid, cfg);
          if (observe) {
            observe(lambda, h.pilot);
            observe(lambda, h.fit);
          }
          return std::move(h.fit);
        };
      };
  }
  throw InvalidInput("unknown method");
}

}  // namespace hetqr
