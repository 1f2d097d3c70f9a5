#pragma once

#include "hetqr/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hetqr {

/// Candidate tuning parameters, ascending. Repeats are tolerated and resolved by the tie rule.
struct LambdaGrid {
  std::vector<double> values;

  /// `points` log-spaced values over [lo, hi] / n.
  static LambdaGrid log_spaced(Index n, int points = 30, double lo = 1e-4, double hi = 100.0);
  void validate() const;
};

enum class TuningMethod { ValidationSet, KFoldCV };
std::string to_string(TuningMethod m);

/// A fitter bound to one training set; maps lambda to a fit.
using LambdaFit = std::function<FitReport(double lambda)>;
/// Binds an estimator to training data. Expensive per-dataset setup (pilot fits,
/// adaptive weights) happens here, once per training set.
using Fitter = std::function<LambdaFit(const Dataset& train)>;
/// Sees every successful fit made during tuning.
using FitObserver = std::function<void(double lambda, const FitReport& fit)>;

struct TuningResult {
  double best_lambda = 0.0;
  Index best_index = 0;
  /// Surviving lambdas and their held-out check loss, in grid order.
  std::vector<double> lambdas;
  std::vector<double> scores;
  TuningMethod method = TuningMethod::ValidationSet;
  std::vector<std::string> warnings;
  /// Fit on the full training data at best_lambda.
  FitReport best_fit;
};

/// Fit on `train` at each lambda and score by stacked_loss on `valid`.
/// Ties go to the larger lambda.
TuningResult tune_validation(const Dataset& train, const Dataset& valid, const QuantileGrid& grid,
                             const LambdaGrid& lambdas, const Fitter& fitter, const FitObserver& observer = {});

/// Seeded k-fold partition; each index appears in exactly one fold.
std::vector<std::vector<Index>> make_folds(Index n, int k, std::uint64_t seed);

/// k-fold CV with the summed held-out check loss as score; the returned
/// best_fit is refit on all of `data`.
TuningResult tune_cv(const Dataset& data, const QuantileGrid& grid, const LambdaGrid& lambdas, int k,
                     std::uint64_t seed, const Fitter& fitter, const FitObserver& observer = {});

}  // namespace hetqr
