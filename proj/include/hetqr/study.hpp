#pragma once

#include "hetqr/estimators.hpp"
#include "hetqr/simgen.hpp"
#include "hetqr/tuning.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hetqr {

struct StudyConfig {
  Scenario scenario;
  std::vector<Method> methods{Method::QR, Method::QRLasso, Method::QRALasso, Method::HetQR};
  int replications = 100;
  std::vector<double> taus{0.25, 0.5, 0.75};
  /// Explicit lambda grid; otherwise LambdaGrid::log_spaced(n, lambda_points, lambda_min, lambda_max).
  std::optional<LambdaGrid> lambdas;
  int lambda_points = 30;
  double lambda_min = 1e-4;
  double lambda_max = 100.0;
  Index valid_multiplier = 10;
  Index test_multiplier = 100;
  /// Test rows are generated and scored this many at a time.
  Index test_chunk = 5000;
  int jobs = 1;
  HetQrConfig hetqr;

  LambdaGrid lambda_grid() const;
  void validate() const;
};

/// key = value lines; '#' starts a comment. Keys: scenario, n, p, seed, reps,
/// methods, taus, lambda_points, lambda_min, lambda_max, lambdas,
/// valid_multiplier, test_multiplier, jobs, max_outer_iters, tol.
StudyConfig parse_study_config(std::istream& in);

struct MethodMetrics {
  Method method = Method::QR;
  double size = 0, fm = 0, pee = 0, qpe = 0, pe = 0, l2 = 0;
  double lambda = 0;
  /// Het-QR only: traces inspected and steps that rose by more than 1e-10.
  int fits_checked = 0;
  int trace_violations = 0;
  int nonconverged = 0;
};

struct ReplicationResult {
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<MethodMetrics> methods;
  const MethodMetrics* find(Method m) const;
};

struct Summary {
  double mean = 0.0;
  /// Standard error of the sample mean.
  double se = 0.0;
  int count = 0;
};

Summary summarize(const std::vector<double>& values);

struct StudyRow {
  Method method = Method::QR;
  Summary size, fm, pee, qpe, pe, l2;
  int fits_checked = 0;
  int trace_violations = 0;
  int nonconverged = 0;
};

struct StudyResult {
  StudyConfig config;
  std::vector<Method> methods;
  std::vector<std::string> notices;
  std::vector<ReplicationResult> replications;
  std::vector<StudyRow> rows;
  int failures = 0;
  Index true_size = 0;
};

/// Each replication draws train (n), validation (valid_multiplier * n) and test
/// (test_multiplier * n) sets from its own derived seed, tunes every method on
/// the validation set and scores it on the test set.
StudyResult run_study(const StudyConfig& config);

/// One replication; exposed so callers can run a subset.
ReplicationResult run_replication(const StudyConfig& config, const std::vector<Method>& methods, int rep);

void write_table_csv(std::ostream& out, const StudyResult& r);
/// Aligned mean(SE) cells; FM in percent, PEE x 100, QPE and PE x 1000.
void write_table_text(std::ostream& out, const StudyResult& r);
void write_replications_csv(std::ostream& out, const StudyResult& r);

}  // namespace hetqr
