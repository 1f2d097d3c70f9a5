#include "hetqr/model.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hetqr {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

double parse_number(const std::string& field, std::size_t line_no) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (!field.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw InvalidInput("line " + std::to_string(line_no) + ": cannot parse '" + field + "' as a number");
  }
  if (!std::isfinite(v)) {
    throw InvalidInput("line " + std::to_string(line_no) + ": non-finite value '" + field + "'");
  }
  return v;
}

}  // namespace

Dataset::Dataset(Vector y, Matrix z, std::vector<std::string> feature_names)
    : y_(std::move(y)), z_(std::move(z)), names_(std::move(feature_names)) {
  if (y_.size() < 1) throw InvalidInput("dataset needs at least one observation");
  if (z_.cols() < 1) throw InvalidInput("dataset needs at least one covariate");
  if (z_.rows() != y_.size()) {
    throw InvalidInput("covariate matrix has " + std::to_string(z_.rows()) + " rows but response has " +
                       std::to_string(y_.size()));
  }
  if (!y_.allFinite() || !z_.allFinite()) throw InvalidInput("dataset contains non-finite entries");
  if (names_.empty()) {
    names_.reserve(static_cast<std::size_t>(z_.cols()));
    for (Index j = 0; j < z_.cols(); ++j) names_.push_back("z" + std::to_string(j + 1));
  } else if (static_cast<Index>(names_.size()) != z_.cols()) {
    throw InvalidInput("feature_names length does not match covariate count");
  }
}

Dataset Dataset::rows(std::span<const Index> idx) const {
  Vector y(static_cast<Index>(idx.size()));
  Matrix z(static_cast<Index>(idx.size()), p());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index i = idx[k];
    if (i < 0 || i >= n()) throw InvalidInput("row index out of range");
    y(static_cast<Index>(k)) = y_(i);
    z.row(static_cast<Index>(k)) = z_.row(i);
  }
  return Dataset(std::move(y), std::move(z), names_);
}

Dataset Dataset::columns(std::span<const Index> idx) const {
  Matrix z(n(), static_cast<Index>(idx.size()));
  std::vector<std::string> names;
  names.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index j = idx[k];
    if (j < 0 || j >= p()) throw InvalidInput("column index out of range");
    z.col(static_cast<Index>(k)) = z_.col(j);
    names.push_back(names_[static_cast<std::size_t>(j)]);
  }
  return Dataset(y_, std::move(z), std::move(names));
}

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    header = split_fields(line);
    break;
  }
  if (header.size() < 2) throw InvalidInput("CSV needs a header with a response column and at least one covariate");

  const std::size_t width = header.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != width) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                         " fields, found " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) values.push_back(parse_number(f, line_no));
    ++rows;
  }
  if (rows == 0) throw InvalidInput("CSV has no data rows");

  const Index n = static_cast<Index>(rows);
  const Index p = static_cast<Index>(width - 1);
  Vector y(n);
  Matrix z(n, p);
  for (Index i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * width;
    y(i) = values[base];
    for (Index j = 0; j < p; ++j) z(i, j) = values[base + 1 + static_cast<std::size_t>(j)];
  }
  return Dataset(std::move(y), std::move(z), std::vector<std::string>(header.begin() + 1, header.end()));
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& data) {
  out << "y";
  for (const auto& name : data.feature_names()) out << ',' << name;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < data.n(); ++i) {
    out << data.y()(i);
    for (Index j = 0; j < data.p(); ++j) out << ',' << data.z()(i, j);
    out << '\n';
  }
}

QuantileGrid::QuantileGrid(std::vector<double> taus, std::vector<double> pis)
    : taus_(std::move(taus)), pis_(std::move(pis)) {
  if (taus_.empty()) throw InvalidInput("quantile grid is empty");
  for (std::size_t m = 0; m < taus_.size(); ++m) {
    if (!(taus_[m] > 0.0 && taus_[m] < 1.0)) throw InvalidInput("quantile levels must lie in (0,1)");
    if (m > 0 && !(taus_[m] > taus_[m - 1])) throw InvalidInput("quantile levels must be strictly increasing");
  }
  if (pis_.empty()) pis_.assign(taus_.size(), 1.0);
  if (pis_.size() != taus_.size()) throw InvalidInput("loss weights must match the number of quantile levels");
  for (double w : pis_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidInput("loss weights must be positive and finite");
  }
}

CoefficientSet CoefficientSet::zeros(Index levels, Index p) {
  return CoefficientSet{Vector::Zero(levels), Matrix::Zero(levels, p)};
}

void CoefficientSet::check_shape(Index levels, Index p) const {
  if (intercepts.size() != levels || slopes.rows() != levels || slopes.cols() != p) {
    throw InvalidInput("coefficient set is " + std::to_string(slopes.rows()) + "x" + std::to_string(slopes.cols()) +
                       ", expected " + std::to_string(levels) + "x" + std::to_string(p));
  }
}

Vector CoefficientSet::theta(Index m) const {
  Vector out(p() + 1);
  out(0) = intercepts(m);
  out.tail(p()) = slopes.row(m).transpose();
  return out;
}

PenaltyWeights::PenaltyWeights(Matrix omega, double lambda_n, double clip)
    : omega_(std::move(omega)), lambda_n_(lambda_n) {
  if (!(lambda_n_ >= 0.0) || !std::isfinite(lambda_n_)) throw InvalidInput("lambda_n must be finite and >= 0");
  if (!(clip > 0.0)) throw InvalidInput("weight clip must be positive");
  for (Index k = 0; k < omega_.size(); ++k) {
    double& v = omega_.data()[k];
    if (std::isnan(v) || v < 0.0) throw InvalidInput("penalty weights must be nonnegative numbers");
    if (v == 0.0) v = clip;
    if (std::isinf(v)) v = 1.0 / clip;
  }
}

PenaltyWeights PenaltyWeights::reciprocal(const Matrix& pilot_slopes, double lambda_n, double clip) {
  Matrix omega = pilot_slopes.unaryExpr([clip](double g) { return 1.0 / std::max(std::abs(g), clip); });
  return PenaltyWeights(std::move(omega), lambda_n, clip);
}

PenaltyWeights PenaltyWeights::ones(Index levels, Index p, double lambda_n) {
  return PenaltyWeights(Matrix::Ones(levels, p), lambda_n);
}

PenaltyWeights PenaltyWeights::with_lambda(double lambda_n) const {
  PenaltyWeights out = *this;
  if (!(lambda_n >= 0.0) || !std::isfinite(lambda_n)) throw InvalidInput("lambda_n must be finite and >= 0");
  out.lambda_n_ = lambda_n;
  return out;
}

SparsityPattern SparsityPattern::of(const CoefficientSet& coef, double threshold) {
  return of(coef.slopes, threshold);
}

SparsityPattern SparsityPattern::of(const Matrix& slopes, double threshold) {
  return SparsityPattern{slopes.unaryExpr([threshold](double g) { return std::abs(g) >= threshold; })};
}

double check_loss(double u, double tau) {
  if (!std::isfinite(u)) throw InvalidInput("check_loss: residual must be finite");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("check_loss: tau must lie in (0,1)");
  return u >= 0.0 ? u * tau : u * (tau - 1.0);
}

double stacked_loss(const Dataset& data, const QuantileGrid& grid, const CoefficientSet& coef) {
  coef.check_shape(grid.size(), data.p());
  CompensatedSum total;
  for (Index m = 0; m < grid.size(); ++m) {
    const double tau = grid.tau(m);
    const Vector fitted = data.z() * coef.slopes.row(m).transpose();
    CompensatedSum level;
    for (Index i = 0; i < data.n(); ++i) {
      level.add(check_loss(data.y()(i) - coef.intercepts(m) - fitted(i), tau));
    }
    total.add(grid.pi(m) * level.value());
  }
  return total.value();
}

double group_penalty(const CoefficientSet& coef, const PenaltyWeights& w, Index n) {
  if (w.omega().rows() != coef.slopes.rows() || w.omega().cols() != coef.slopes.cols()) {
    throw InvalidInput("penalty weights do not match coefficient dimensions");
  }
  if (w.lambda_n() == 0.0) return 0.0;
  CompensatedSum total;
  for (Index j = 0; j < coef.p(); ++j) {
    CompensatedSum group;
    for (Index m = 0; m < coef.levels(); ++m) group.add(w.omega()(m, j) * std::abs(coef.slopes(m, j)));
    total.add(std::sqrt(group.value()));
  }
  return static_cast<double>(n) * w.lambda_n() * total.value();
}

}  // namespace hetqr
