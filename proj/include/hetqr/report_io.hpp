#pragma once

#include "hetqr/estimators.hpp"
#include "hetqr/model.hpp"
#include "hetqr/tuning.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hetqr {

inline constexpr int kReportSchema = 1;

/// Everything needed to reproduce a fit's objective from the data alone.
struct StoredFit {
  Method method = Method::HetQR;
  std::vector<double> taus;
  std::vector<double> pis;
  std::vector<std::string> feature_names;
  Index n = 0;
  FitReport report;
  /// Het-QR: penalty weights of L_n. Baselines: per-coefficient L1 penalties.
  Matrix omega;
  Matrix l1_penalties;
  std::optional<TuningResult> tuning;
  std::vector<std::string> dropped_columns;
};

void write_fit_json(std::ostream& out, const StoredFit& fit);
StoredFit read_fit_json(std::istream& in);

/// Recompute the minimized objective on `data` from the stored coefficients and penalties.
double recompute_objective(const StoredFit& fit, const Dataset& data);

}  // namespace hetqr
