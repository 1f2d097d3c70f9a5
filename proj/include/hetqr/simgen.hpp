#pragma once

#include "hetqr/model.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace hetqr {

enum class ScenarioKind { HeteroScale6, HeteroScale100, BlockSparse, HighDim600 };
enum class ErrorDist { Normal, T3, Exp1 };
enum class Correlation { AR, CS };

std::string to_string(ScenarioKind k);
std::string to_string(ErrorDist e);
std::string to_string(Correlation c);

struct Scenario {
  ScenarioKind kind = ScenarioKind::HeteroScale6;
  Index n = 500;
  std::uint64_t seed = 1;
  /// Block designs only; the heteroscedastic designs always use normal errors.
  ErrorDist error = ErrorDist::Normal;
  Correlation corr = Correlation::AR;
  double rho = 0.5;
  /// Covariate count; 0 means the design default (6, 100, 100, 600). Block
  /// designs accept any p >= 8, filled with blocks of 5 (the last may be short).
  Index p = 0;

  Index covariates() const;
  void validate() const;
  std::string name() const;
};

/// Names: hetero6, hetero100, block-<ar|cs>-<normal|t3|exp>, highdim600[-<ar|cs>-<normal|t3|exp>],
/// and the table aliases table1-p6, table1-p100, table2-ar, table2-cs, table3-*, table4-*, table5.
Scenario parse_scenario(const std::string& name);

/// The generator-known conditional quantile function of a scenario.
class OracleTruth {
 public:
  explicit OracleTruth(const Scenario& s);

  Index p() const { return p_; }
  Vector gamma(double tau) const;
  double intercept(double tau) const;
  double quantile(double tau, const Eigen::Ref<const Vector>& z) const;

  CoefficientSet at(const QuantileGrid& grid) const;
  SparsityPattern pattern(const QuantileGrid& grid) const;

 private:
  ScenarioKind kind_;
  ErrorDist error_;
  Index p_;
};

/// F^{-1}(u) for the error law.
double error_quantile(ErrorDist e, double u);

struct Simulated {
  Dataset data;
  OracleTruth truth;
};

/// n draws from the scenario using `rng`; the scenario's own n and seed are ignored.
Dataset draw(const Scenario& s, Index n, std::mt19937_64& rng);

/// Draw s.n observations seeded by s.seed.
Simulated generate(const Scenario& s);

/// Splitmix64 mix of (seed, stream); used to give every replication and data
/// role its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Correlation matrix of one block of the given size.
Matrix block_correlation(Correlation c, double rho, Index size);

}  // namespace hetqr
