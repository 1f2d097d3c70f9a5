#include "hetqr/qr_fit.hpp"

#include <sstream>

namespace hetqr {

namespace {

std::string describe_tau(double tau) {
  std::ostringstream os;
  os << tau;
  return os.str();
}

}  // namespace

CoefficientSet fit_weighted_l1(const Dataset& data, const QuantileGrid& grid, const Matrix& penalties,
                               const SolverOptions& opts) {
  if (penalties.rows() != grid.size() || penalties.cols() != data.p()) {
    throw InvalidInput("penalty matrix must be levels x covariates");
  }
  CoefficientSet out = CoefficientSet::zeros(grid.size(), data.p());
  for (Index m = 0; m < grid.size(); ++m) {
    const double tau = grid.tau(m);
    PenalizedQrFit fit;
    try {
      fit = solve_penalized_qr(data, tau, penalties.row(m).transpose(), grid.pi(m), opts);
    } catch (const SolverFailure& e) {
      throw SolverFailure(std::string(e.what()) + " (tau=" + describe_tau(tau) + ")", tau);
    }
    if (fit.lp.status != LpStatus::Optimal) {
      throw SolverFailure(std::string("quantile fit stopped with status ") + to_string(fit.lp.status) +
                              " (tau=" + describe_tau(tau) + ")",
                          tau);
    }
    out.intercepts(m) = fit.intercept;
    out.slopes.row(m) = fit.slopes.transpose();
    if (fit.slopes.size() == 0 || fit.slopes.cwiseAbs().maxCoeff() == 0.0) {
      // Intercept-only: every point of the sample-quantile interval is optimal;
      // report the lower order statistic so the answer does not depend on the pivot path.
      const double q = sample_quantile(data.y(), tau);
      const auto [lo, hi] = sample_quantile_interval(data.y(), tau);
      if (fit.intercept >= lo - 1e-9 * (1 + std::abs(lo)) && fit.intercept <= hi + 1e-9 * (1 + std::abs(hi))) {
        out.intercepts(m) = q;
      }
    }
  }
  return out;
}

CoefficientSet fit_qr(const Dataset& data, const QuantileGrid& grid, const SolverOptions& opts) {
  return fit_weighted_l1(data, grid, Matrix::Zero(grid.size(), data.p()), opts);
}

CoefficientSet fit_qr_lasso(const Dataset& data, const QuantileGrid& grid, double lambda, const SolverOptions& opts) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be finite and >= 0");
  const double total = static_cast<double>(data.n()) * lambda;
  return fit_weighted_l1(data, grid, Matrix::Constant(grid.size(), data.p(), total), opts);
}

CoefficientSet fit_qr_alasso(const Dataset& data, const QuantileGrid& grid, double lambda, const CoefficientSet& pilot,
                             double clip, const SolverOptions& opts) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be finite and >= 0");
  pilot.check_shape(grid.size(), data.p());
  const double total = static_cast<double>(data.n()) * lambda;
  const Matrix penalties =
      pilot.slopes.unaryExpr([total, clip](double g) { return total / std::max(std::abs(g), clip); });
  return fit_weighted_l1(data, grid, penalties, opts);
}

double weighted_l1_objective(const Dataset& data, const QuantileGrid& grid, const CoefficientSet& coef,
                             const Matrix& penalties) {
  CompensatedSum total;
  total.add(stacked_loss(data, grid, coef));
  for (Index m = 0; m < coef.levels(); ++m) {
    for (Index j = 0; j < coef.p(); ++j) {
      const double g = std::abs(coef.slopes(m, j));
      if (g != 0.0) total.add(penalties(m, j) * g);
    }
  }
  return total.value();
}

}  // namespace hetqr
