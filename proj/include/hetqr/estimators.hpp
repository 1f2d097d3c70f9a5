#pragma once

#include "hetqr/het_qr.hpp"
#include "hetqr/tuning.hpp"

#include <optional>
#include <string>

namespace hetqr {

enum class Method { QR, QRLasso, QRALasso, HetQR };

std::string to_string(Method m);
/// Accepts qr, qr-lasso, qr-alasso, hetqr.
Method parse_method(const std::string& name);
bool uses_lambda(Method m);

struct EstimatorOptions {
  HetQrConfig hetqr;
  double clip = kPilotClip;
  /// QR-aLASSO pilot. When absent it is fit_qr on the training data, which needs n > p.
  std::optional<CoefficientSet> alasso_pilot;
  /// Called with every Het-QR fit made internally, pilots included.
  FitObserver hetqr_observer;
};

/// Wrap a per-level fit as a one-iteration report whose objective is the
/// weighted-L1 objective the method minimized.
FitReport baseline_report(const Dataset& data, const QuantileGrid& grid, CoefficientSet coef, const Matrix& penalties,
                          double lambda);

/// Het-QR uses weights from unpenalized QR when n > p and the two-stage
/// omega = 1 pilot otherwise.
Fitter make_fitter(Method method, const QuantileGrid& grid, const EstimatorOptions& opts = {});

}  // namespace hetqr
