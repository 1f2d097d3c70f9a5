#pragma once

#include "hetqr/model.hpp"
#include "hetqr/simgen.hpp"

namespace hetqr {

Index model_size(const SparsityPattern& pattern);

/// 2 S_a / M_a: true positives over the summed estimated and true model sizes.
/// Two empty patterns score 1.
double f_measure(const SparsityPattern& est, const SparsityPattern& truth);

/// sum_mj |est_mj - truth_mj| / M over slopes only.
double pee(const CoefficientSet& est, const Matrix& true_slopes);

/// Mean over test subjects of the level-averaged squared gap between the
/// true and fitted conditional quantiles.
double qpe(const CoefficientSet& est, const OracleTruth& oracle, const Dataset& test, const QuantileGrid& grid);

/// stacked_loss on the test data divided by its size.
double pe(const CoefficientSet& est, const Dataset& test, const QuantileGrid& grid);

/// Euclidean norm of the stacked (intercept, slopes) difference over all levels.
double theta_l2_error(const CoefficientSet& est, const CoefficientSet& truth);

/// Number of steps with trace[k+1] > trace[k] + tol.
int trace_violations(const std::vector<double>& trace, double tol = 1e-10);

}  // namespace hetqr
