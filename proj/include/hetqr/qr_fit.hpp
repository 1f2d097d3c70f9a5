#pragma once

#include "hetqr/lp_core.hpp"
#include "hetqr/model.hpp"

namespace hetqr {

/// Pilot slopes below this magnitude are clipped before taking reciprocals.
inline constexpr double kPilotClip = 1e-4;

/// Unpenalized quantile regression, one independent fit per level.
CoefficientSet fit_qr(const Dataset& data, const QuantileGrid& grid, const SolverOptions& opts = {});

/// L1-penalized quantile regression per level with total penalty n * lambda * sum_j |gamma_j|.
CoefficientSet fit_qr_lasso(const Dataset& data, const QuantileGrid& grid, double lambda,
                            const SolverOptions& opts = {});

/// Adaptive lasso per level: lambda_mj = n * lambda / max(|pilot_mj|, clip).
CoefficientSet fit_qr_alasso(const Dataset& data, const QuantileGrid& grid, double lambda,
                             const CoefficientSet& pilot, double clip = kPilotClip, const SolverOptions& opts = {});

/// Per-level weighted L1 fit with an explicit M x p penalty matrix (entries may be +inf).
CoefficientSet fit_weighted_l1(const Dataset& data, const QuantileGrid& grid, const Matrix& penalties,
                               const SolverOptions& opts = {});

/// stacked_loss + sum_mj penalties_mj |gamma_mj| (infinite penalties on zero slopes contribute 0).
double weighted_l1_objective(const Dataset& data, const QuantileGrid& grid, const CoefficientSet& coef,
                             const Matrix& penalties);

}  // namespace hetqr
