#pragma once

#include "hetqr/model.hpp"

#include <utility>

namespace hetqr {

/// min_beta sum_i w_i rho_{t_i}(y_i - x_i' beta).
///
/// Rows may be real observations or penalty pseudo-rows; every row carries its
/// own quantile level and positive weight.
struct PinballProblem {
  Matrix x;
  Vector y;
  Vector t;
  Vector w;

  Index rows() const { return x.rows(); }
  Index cols() const { return x.cols(); }
  void validate() const;
};

enum class LpStatus { Optimal, IterationLimit, Infeasible };

const char* to_string(LpStatus s);

struct LpSolution {
  Vector beta;
  double objective = 0.0;
  /// Shifted dual d_i in [0,1]; d_i = t_i - 1{r_i < 0} + 1 - t_i away from zero residuals.
  Vector dual;
  LpStatus status = LpStatus::Infeasible;
  int iterations = 0;
  /// True when beta is a basic solution whose optimality was certified by its duals.
  bool certified_vertex = false;
  int pivots = 0;
};

struct SolverOptions {
  int max_iterations = 200;
  /// Stop when the duality gap drops below gap_tolerance * (1 + |objective|).
  double gap_tolerance = 1e-8;
  double step_fraction = 0.99995;
  /// Recover an exact vertex from the interior-point iterate.
  bool crossover = true;
  int max_pivots = 200;
};

/// Frisch-Newton primal-dual interior point on the bounded dual, followed by a
/// crossover to an optimal vertex (simplex pivots on the residual-sign basis).
LpSolution solve_pinball(const PinballProblem& prob, const SolverOptions& opts = {});

double pinball_objective(const PinballProblem& prob, const Vector& beta);

struct PenalizedQrFit {
  double intercept = 0.0;
  Vector slopes;
  LpSolution lp;
};

/// min sum_i pi rho_tau(y_i - g0 - z_i' g) + sum_j lambda_j |g_j|.
///
/// Each lambda_j > 0 becomes one pseudo-row (response 0, design 2 lambda_j e_j,
/// level 0.5), since rho_{0.5}(2 lambda g) = lambda |g|. An infinite lambda_j
/// pins g_j to zero; so does any lambda_j at or above the loss's Lipschitz
/// constant in that coordinate, where zero is provably optimal.
PenalizedQrFit solve_penalized_qr(const Dataset& data, double tau, const Vector& slope_penalties,
                                  double loss_weight = 1.0, const SolverOptions& opts = {});

/// Smallest minimizer of sum_i rho_tau(y_i - c): the order statistic y_(ceil(n tau)).
double sample_quantile(const Vector& y, double tau);

/// Every c in [lo, hi] minimizes sum_i rho_tau(y_i - c); the interval is a
/// single point unless n tau is an integer.
std::pair<double, double> sample_quantile_interval(const Vector& y, double tau);

}  // namespace hetqr
