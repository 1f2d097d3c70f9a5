#include "hetqr/metrics.hpp"

namespace hetqr {

Index model_size(const SparsityPattern& pattern) { return pattern.size(); }

double f_measure(const SparsityPattern& est, const SparsityPattern& truth) {
  if (est.active.rows() != truth.active.rows() || est.active.cols() != truth.active.cols()) {
    throw InvalidInput("f_measure: pattern shapes differ");
  }
  const Index total = est.size() + truth.size();
  if (total == 0) return 1.0;
  const Index hits = (est.active.array() && truth.active.array()).count();
  return 2.0 * static_cast<double>(hits) / static_cast<double>(total);
}

double pee(const CoefficientSet& est, const Matrix& true_slopes) {
  if (est.slopes.rows() != true_slopes.rows() || est.slopes.cols() != true_slopes.cols()) {
    throw InvalidInput("pee: shapes differ");
  }
  CompensatedSum s;
  for (Index m = 0; m < true_slopes.rows(); ++m)
    for (Index j = 0; j < true_slopes.cols(); ++j) s.add(std::abs(est.slopes(m, j) - true_slopes(m, j)));
  return s.value() / static_cast<double>(true_slopes.rows());
}

double qpe(const CoefficientSet& est, const OracleTruth& oracle, const Dataset& test, const QuantileGrid& grid) {
  est.check_shape(grid.size(), test.p());
  if (oracle.p() != test.p()) throw InvalidInput("qpe: oracle and test data disagree on p");
  const CoefficientSet truth = oracle.at(grid);
  const Matrix gap_slopes = truth.slopes - est.slopes;
  const Vector gap_icpt = truth.intercepts - est.intercepts;
  // gaps(i, m) = true minus fitted conditional quantile
  Matrix gaps = test.z() * gap_slopes.transpose();
  gaps.rowwise() += gap_icpt.transpose();
  CompensatedSum s;
  for (Index i = 0; i < gaps.rows(); ++i) s.add(gaps.row(i).squaredNorm() / static_cast<double>(grid.size()));
  return s.value() / static_cast<double>(test.n());
}

double pe(const CoefficientSet& est, const Dataset& test, const QuantileGrid& grid) {
  return stacked_loss(test, grid, est) / static_cast<double>(test.n());
}

double theta_l2_error(const CoefficientSet& est, const CoefficientSet& truth) {
  truth.check_shape(est.levels(), est.p());
  return std::sqrt((est.intercepts - truth.intercepts).squaredNorm() + (est.slopes - truth.slopes).squaredNorm());
}

int trace_violations(const std::vector<double>& trace, double tol) {
  int bad = 0;
  for (std::size_t k = 1; k < trace.size(); ++k)
    if (trace[k] > trace[k - 1] + tol) ++bad;
  return bad;
}

}  // namespace hetqr
