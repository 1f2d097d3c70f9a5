#pragma once

#include "hetqr/lp_core.hpp"
#include "hetqr/model.hpp"
#include "hetqr/qr_fit.hpp"

#include <optional>

namespace hetqr {

struct HetQrConfig {
  double lambda_n = 0.0;
  int max_outer_iters = 100;
  /// Stop when |L_k - L_{k-1}| <= tol * |L_{k-1}|.
  double tol = 1e-6;
  /// Per-coefficient penalties use omega / max(xi, xi_floor).
  double xi_floor = 1e-8;
  double weight_clip = kPilotClip;
  SolverOptions lp;

  void validate() const;
};

/// lambda_1 with 2 sqrt(lambda_1) = n lambda_n.
double lambda1_for(double lambda_n, Index n);

/// omega_mj = 1 / max(|gamma~_mj|, clip) with gamma~ from unpenalized QR. Requires n > p.
PenaltyWeights make_weights(const Dataset& data, const QuantileGrid& grid, double clip = kPilotClip,
                            const SolverOptions& opts = {});

/// Two-stage weights for any n, p: fit with omega = 1 at config.lambda_n, then
/// take clipped reciprocals of that fit's slopes.
PenaltyWeights make_weights_highdim(const Dataset& data, const QuantileGrid& grid, const HetQrConfig& config);

/// Closed-form xi_j = sqrt(sum_m omega_mj |gamma_mj|) / sqrt(lambda1); exactly 0 for empty groups.
Vector xi_update(const CoefficientSet& coef, const PenaltyWeights& w, double lambda1);

/// L_n = stacked_loss + group_penalty.
double objective(const Dataset& data, const QuantileGrid& grid, const CoefficientSet& coef, const PenaltyWeights& w);

/// lambda1 sum_j xi_j + sum_j xi_j^{-1} sum_m omega_mj |gamma_mj|, with 0/0 taken as 0.
double transformed_penalty(const CoefficientSet& coef, const PenaltyWeights& w, const Vector& xi, double lambda1);

/// One outer iteration from `current`: xi-update, then the M weighted-L1 block solves.
/// Groups whose xi is exactly zero are held at zero.
CoefficientSet hetqr_step(const Dataset& data, const QuantileGrid& grid, const PenaltyWeights& w,
                          const HetQrConfig& config, const CoefficientSet& current);

/// Alternating minimization of L_n at config.lambda_n (the lambda stored in `w` is ignored).
///
/// Starts from `init` when given, otherwise from unpenalized QR (n > p) or,
/// for p >= n, from the block solve at xi_j = lambda1^{-1/2}. Starting at the
/// zero vector would be a fixed point: every xi vanishes and no group can enter.
FitReport fit_hetqr(const Dataset& data, const QuantileGrid& grid, const PenaltyWeights& w, const HetQrConfig& config,
                    const std::optional<CoefficientSet>& init = std::nullopt);

struct HighDimFit {
  FitReport pilot;
  PenaltyWeights weights;
  FitReport fit;
};

/// The p > n pipeline: omega = 1 pilot, reciprocal weights, then a refit
/// started from the pilot's coefficients.
HighDimFit fit_hetqr_highdim(const Dataset& data, const QuantileGrid& grid, const HetQrConfig& config);

}  // namespace hetqr
