#include "hetqr/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

namespace hetqr {

LambdaGrid LambdaGrid::log_spaced(Index n, int points, double lo, double hi) {
  if (n < 1) throw InvalidInput("log_spaced: n must be positive");
  if (points < 1 || !(lo > 0.0) || !(hi >= lo)) throw InvalidInput("log_spaced: need points >= 1 and 0 < lo <= hi");
  LambdaGrid g;
  const double scale = 1.0 / static_cast<double>(n);
  if (points == 1) {
    g.values.push_back(lo * scale);
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < points; ++i) {
    g.values.push_back(std::exp(a + (b - a) * i / (points - 1)) * scale);
  }
  return g;
}

void LambdaGrid::validate() const {
  if (values.empty()) throw InvalidInput("lambda grid is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0) throw InvalidInput("lambda values must be finite and >= 0");
    if (i > 0 && values[i] < values[i - 1]) throw InvalidInput("lambda grid must be sorted ascending");
  }
}

std::string to_string(TuningMethod m) { return m == TuningMethod::ValidationSet ? "validation" : "cv"; }

namespace {

std::string failure_note(double lambda, const std::exception& e) {
  return "lambda=" + std::to_string(lambda) + " excluded: " + e.what();
}

// Ascending scan with <= keeps the largest lambda among equal scores.
void pick_best(TuningResult& r) {
  if (r.scores.empty()) throw SolverFailure("tuning failed: every lambda in the grid failed to fit");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    if (r.scores[i] <= best) {
      best = r.scores[i];
      r.best_index = static_cast<Index>(i);
    }
  }
  r.best_lambda = r.lambdas[static_cast<std::size_t>(r.best_index)];
}

}  // namespace

TuningResult tune_validation(const Dataset& train, const Dataset& valid, const QuantileGrid& grid,
                             const LambdaGrid& lambdas, const Fitter& fitter, const FitObserver& observer) {
  lambdas.validate();
  if (valid.p() != train.p()) throw InvalidInput("validation data must have the training covariates");
  TuningResult r;
  r.method = TuningMethod::ValidationSet;
  const LambdaFit fit_at = fitter(train);
  std::vector<FitReport> fits;
  for (double lambda : lambdas.values) {
    try {
      FitReport f = fit_at(lambda);
      if (observer) observer(lambda, f);
      r.scores.push_back(stacked_loss(valid, grid, f.coef));
      r.lambdas.push_back(lambda);
      fits.push_back(std::move(f));
    } catch (const SolverFailure& e) {
      r.warnings.push_back(failure_note(lambda, e));
    }
  }
  pick_best(r);
  r.best_fit = std::move(fits[static_cast<std::size_t>(r.best_index)]);
  return r;
}

std::vector<std::vector<Index>> make_folds(Index n, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("need at least 2 folds");
  if (n < k) throw InvalidInput("need at least as many observations as folds");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < perm.size(); ++i) folds[i % folds.size()].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

TuningResult tune_cv(const Dataset& data, const QuantileGrid& grid, const LambdaGrid& lambdas, int k,
                     std::uint64_t seed, const Fitter& fitter, const FitObserver& observer) {
  lambdas.validate();
  const auto folds = make_folds(data.n(), k, seed);
  const std::size_t L = lambdas.values.size();
  std::vector<CompensatedSum> totals(L);
  std::vector<bool> alive(L, true);
  std::vector<std::string> warnings;

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<Index> train_idx;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    const Dataset train = data.rows(train_idx);
    const Dataset held = data.rows(folds[f]);
    LambdaFit fit_at;
    try {
      fit_at = fitter(train);
    } catch (const SolverFailure& e) {
      throw SolverFailure("cv fold " + std::to_string(f) + " setup failed: " + e.what());
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (!alive[l]) continue;
      try {
        const FitReport rep = fit_at(lambdas.values[l]);
        if (observer) observer(lambdas.values[l], rep);
        totals[l].add(stacked_loss(held, grid, rep.coef));
      } catch (const SolverFailure& e) {
        alive[l] = false;
        warnings.push_back(failure_note(lambdas.values[l], e));
      }
    }
  }

  TuningResult r;
  r.method = TuningMethod::KFoldCV;
  r.warnings = std::move(warnings);
  for (std::size_t l = 0; l < L; ++l) {
    if (!alive[l]) continue;
    r.lambdas.push_back(lambdas.values[l]);
    r.scores.push_back(totals[l].value());
  }
  pick_best(r);
  r.best_fit = fitter(data)(r.best_lambda);
  if (observer) observer(r.best_lambda, r.best_fit);
  return r;
}

}  // namespace hetqr
