#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetqr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Bad arguments: dimension mismatch, out-of-range levels, malformed input files.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The LP engine could not produce a usable solution.
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const std::string& what, std::optional<double> tau = std::nullopt)
      : std::runtime_error(what), tau_(tau) {}
  std::optional<double> tau() const { return tau_; }

 private:
  std::optional<double> tau_;
};

/// |gamma| below this counts as an exact zero when reading off a sparsity pattern.
inline constexpr double kZeroThreshold = 1e-6;

/// Neumaier-compensated running sum. Objective traces are compared at 1e-10,
/// so plain accumulation over thousands of terms is not accurate enough.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Response vector plus n x p covariate matrix. Immutable once built.
class Dataset {
 public:
  Dataset(Vector y, Matrix z, std::vector<std::string> feature_names = {});

  const Vector& y() const { return y_; }
  const Matrix& z() const { return z_; }
  Index n() const { return y_.size(); }
  Index p() const { return z_.cols(); }
  const std::vector<std::string>& feature_names() const { return names_; }

  /// Rows in the given order (duplicates allowed).
  Dataset rows(std::span<const Index> idx) const;
  /// Columns in the given order; names follow.
  Dataset columns(std::span<const Index> idx) const;

 private:
  Vector y_;
  Matrix z_;
  std::vector<std::string> names_;
};

/// Header row, first column is the response, remaining columns covariates.
Dataset read_csv(std::istream& in);
Dataset load_csv(const std::string& path);
void write_csv(std::ostream& out, const Dataset& data);

/// Ordered quantile levels with optional positive per-level loss weights.
class QuantileGrid {
 public:
  explicit QuantileGrid(std::vector<double> taus, std::vector<double> pis = {});

  Index size() const { return static_cast<Index>(taus_.size()); }
  double tau(Index m) const { return taus_[static_cast<std::size_t>(m)]; }
  double pi(Index m) const { return pis_[static_cast<std::size_t>(m)]; }
  const std::vector<double>& taus() const { return taus_; }
  const std::vector<double>& pis() const { return pis_; }

 private:
  std::vector<double> taus_;
  std::vector<double> pis_;
};

/// Intercepts (length M) and slopes (M x p); row m belongs to tau_m.
struct CoefficientSet {
  Vector intercepts;
  Matrix slopes;

  static CoefficientSet zeros(Index levels, Index p);
  Index levels() const { return intercepts.size(); }
  Index p() const { return slopes.cols(); }
  void check_shape(Index levels, Index p) const;
  /// Quantile m's parameter vector (intercept first).
  Vector theta(Index m) const;
};

/// Positive per-coefficient weights omega (M x p) and the tuning parameter.
class PenaltyWeights {
 public:
  /// Zero weights are raised to `clip`, infinite ones lowered to 1/clip.
  PenaltyWeights(Matrix omega, double lambda_n, double clip = 1e-4);

  /// omega_mj = 1 / max(|pilot_mj|, clip).
  static PenaltyWeights reciprocal(const Matrix& pilot_slopes, double lambda_n, double clip = 1e-4);
  static PenaltyWeights ones(Index levels, Index p, double lambda_n);

  const Matrix& omega() const { return omega_; }
  double lambda_n() const { return lambda_n_; }
  PenaltyWeights with_lambda(double lambda_n) const;

 private:
  Matrix omega_;
  double lambda_n_;
};

struct SparsityPattern {
  BoolMatrix active;

  static SparsityPattern of(const CoefficientSet& coef, double threshold = kZeroThreshold);
  static SparsityPattern of(const Matrix& slopes, double threshold = kZeroThreshold);
  Index size() const { return active.count(); }
};

struct FitReport {
  CoefficientSet coef;
  SparsityPattern pattern;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  Vector xi;
  double lambda = 0.0;
  std::vector<std::string> notes;
  /// L_n at `coef`. Equals the last trace entry unless a final step was rejected.
  double objective = 0.0;
};

/// rho_tau(u) = u (tau - 1{u < 0}).
double check_loss(double u, double tau);

/// sum_m pi_m sum_i rho_{tau_m}(y_i - gamma_m0 - z_i' gamma_m).
double stacked_loss(const Dataset& data, const QuantileGrid& grid, const CoefficientSet& coef);

/// n lambda_n sum_j sqrt(sum_m omega_mj |gamma_mj|). Intercepts are never penalized.
double group_penalty(const CoefficientSet& coef, const PenaltyWeights& w, Index n);

}  // namespace hetqr
