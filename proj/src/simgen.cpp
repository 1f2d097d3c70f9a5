#include "hetqr/simgen.hpp"

#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <charconv>
#include <map>

namespace hetqr {

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::HeteroScale6: return "hetero6";
    case ScenarioKind::HeteroScale100: return "hetero100";
    case ScenarioKind::BlockSparse: return "block";
    case ScenarioKind::HighDim600: return "highdim600";
  }
  return "?";
}

std::string to_string(ErrorDist e) {
  switch (e) {
    case ErrorDist::Normal: return "normal";
    case ErrorDist::T3: return "t3";
    case ErrorDist::Exp1: return "exp";
  }
  return "?";
}

std::string to_string(Correlation c) { return c == Correlation::AR ? "ar" : "cs"; }

namespace {

bool is_block(ScenarioKind k) { return k == ScenarioKind::BlockSparse || k == ScenarioKind::HighDim600; }

Index default_p(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::HeteroScale6: return 6;
    case ScenarioKind::HeteroScale100: return 100;
    case ScenarioKind::BlockSparse: return 100;
    case ScenarioKind::HighDim600: return 600;
  }
  return 0;
}

constexpr Index kBlockSize = 5;

}  // namespace

Index Scenario::covariates() const { return p == 0 ? default_p(kind) : p; }

void Scenario::validate() const {
  if (n < 1) throw InvalidInput("scenario n must be positive");
  if (!(rho > -0.25 && rho < 1.0)) throw InvalidInput("rho must keep the block correlation positive definite");
  if (p != 0) {
    if (!is_block(kind)) throw InvalidInput("only block designs accept a custom p");
    if (p < 8) throw InvalidInput("block designs need p >= 8 (the true support reaches covariate 8)");
  }
}

std::string Scenario::name() const {
  if (!is_block(kind)) return to_string(kind);
  std::string s = to_string(kind) + "-" + to_string(corr) + "-" + to_string(error);
  if (p != 0 && p != default_p(kind)) s += "-p" + std::to_string(p);
  return s;
}

Scenario parse_scenario(const std::string& raw) {
  static const std::map<std::string, std::string> aliases = {
      {"table1-p6", "hetero6"},           {"table1-p100", "hetero100"},      {"table2-ar", "block-ar-normal"},
      {"table2-cs", "block-cs-normal"},   {"table3-ar", "block-ar-t3"},      {"table3-cs", "block-cs-t3"},
      {"table4-ar", "block-ar-exp"},      {"table4-cs", "block-cs-exp"},     {"table5", "highdim600"},
  };
  std::string name = raw;
  if (auto it = aliases.find(name); it != aliases.end()) name = it->second;

  Scenario s;
  std::vector<std::string> parts;
  for (std::size_t start = 0;;) {
    const std::size_t dash = name.find('-', start);
    parts.push_back(name.substr(start, dash == std::string::npos ? std::string::npos : dash - start));
    if (dash == std::string::npos) break;
    start = dash + 1;
  }
  const auto bad = [&raw]() { return InvalidInput("unknown scenario '" + raw + "'"); };
  if (parts[0] == "hetero6" && parts.size() == 1) {
    s.kind = ScenarioKind::HeteroScale6;
    return s;
  }
  if (parts[0] == "hetero100" && parts.size() == 1) {
    s.kind = ScenarioKind::HeteroScale100;
    return s;
  }
  if (parts[0] == "block") {
    s.kind = ScenarioKind::BlockSparse;
  } else if (parts[0] == "highdim600") {
    s.kind = ScenarioKind::HighDim600;
  } else {
    throw bad();
  }
  std::size_t i = 1;
  if (parts.size() >= 3) {
    if (parts[1] == "ar") s.corr = Correlation::AR;
    else if (parts[1] == "cs") s.corr = Correlation::CS;
    else throw bad();
    if (parts[2] == "normal") s.error = ErrorDist::Normal;
    else if (parts[2] == "t3") s.error = ErrorDist::T3;
    else if (parts[2] == "exp") s.error = ErrorDist::Exp1;
    else throw bad();
    i = 3;
  } else if (s.kind == ScenarioKind::BlockSparse) {
    throw bad();
  }
  if (i < parts.size()) {
    const std::string& tail = parts[i];
    Index p = 0;
    if (tail.size() < 2 || tail[0] != 'p' ||
        std::from_chars(tail.data() + 1, tail.data() + tail.size(), p).ec != std::errc{} || i + 1 != parts.size()) {
      throw bad();
    }
    s.p = p;
  }
  s.validate();
  return s;
}

double error_quantile(ErrorDist e, double u) {
  switch (e) {
    case ErrorDist::Normal: return boost::math::quantile(boost::math::normal_distribution<double>(), u);
    case ErrorDist::T3: return boost::math::quantile(boost::math::students_t_distribution<double>(3.0), u);
    case ErrorDist::Exp1: return boost::math::quantile(boost::math::exponential_distribution<double>(1.0), u);
  }
  throw InvalidInput("unknown error distribution");
}

OracleTruth::OracleTruth(const Scenario& s) : kind_(s.kind), error_(s.error), p_(s.covariates()) { s.validate(); }

Vector OracleTruth::gamma(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("tau must lie in (0,1)");
  Vector g = Vector::Zero(p_);
  switch (kind_) {
    case ScenarioKind::HeteroScale6:
    case ScenarioKind::HeteroScale100:
      g(0) = 1.0;
      g(1) = 1.0;
      g(5) = 2.0 + 2.0 * error_quantile(ErrorDist::Normal, tau);
      break;
    case ScenarioKind::BlockSparse:
      if (tau <= 0.3) {
        g(0) = 0.5, g(5) = 0.6;
      } else if (tau <= 0.7) {
        g(0) = 0.5, g(5) = 0.6, g(7) = 0.7;
      } else {
        g(0) = 0.6, g(5) = 0.7, g(7) = 0.7;
      }
      break;
    case ScenarioKind::HighDim600:
      if (tau <= 0.3) {
        g(0) = 0.6, g(5) = 0.6;
      } else if (tau <= 0.7) {
        g(0) = 0.6, g(2) = 0.8, g(5) = 0.7, g(7) = 0.8;
      } else {
        g(0) = 0.8, g(2) = 0.8, g(5) = 0.8, g(7) = 1.0;
      }
      break;
  }
  return g;
}

double OracleTruth::intercept(double tau) const {
  if (!is_block(kind_)) return 1.0;
  return 1.0 + error_quantile(error_, tau);
}

double OracleTruth::quantile(double tau, const Eigen::Ref<const Vector>& z) const {
  if (z.size() != p_) throw InvalidInput("covariate vector has the wrong length");
  return intercept(tau) + z.dot(gamma(tau));
}

CoefficientSet OracleTruth::at(const QuantileGrid& grid) const {
  CoefficientSet c = CoefficientSet::zeros(grid.size(), p_);
  for (Index m = 0; m < grid.size(); ++m) {
    c.intercepts(m) = intercept(grid.tau(m));
    c.slopes.row(m) = gamma(grid.tau(m)).transpose();
  }
  return c;
}

SparsityPattern OracleTruth::pattern(const QuantileGrid& grid) const {
  SparsityPattern sp;
  sp.active = at(grid).slopes.array() != 0.0;
  return sp;
}

Matrix block_correlation(Correlation c, double rho, Index size) {
  Matrix r(size, size);
  for (Index i = 0; i < size; ++i) {
    for (Index j = 0; j < size; ++j) {
      if (i == j) r(i, j) = 1.0;
      else r(i, j) = c == Correlation::AR ? std::pow(rho, static_cast<double>(std::abs(i - j))) : rho;
    }
  }
  return r;
}

Dataset draw(const Scenario& s, Index n, std::mt19937_64& rng) {
  s.validate();
  const Index p = s.covariates();
  Matrix z(n, p);
  Vector y(n);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;

  if (!is_block(s.kind)) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < p; ++j) z(i, j) = unif(rng);
      const double eps = normal(rng);
      y(i) = 1.0 + z(i, 0) + z(i, 1) + 2.0 * z(i, 5) + 2.0 * z(i, 5) * eps;
    }
    return Dataset(std::move(y), std::move(z));
  }

  const Matrix full = block_correlation(s.corr, s.rho, kBlockSize);
  const Matrix chol = full.llt().matrixL();
  const Index tail = p % kBlockSize;
  const Matrix chol_tail =
      tail == 0 ? Matrix() : Matrix(block_correlation(s.corr, s.rho, tail).llt().matrixL());
  const OracleTruth truth(s);
  Vector e(kBlockSize);
  for (Index i = 0; i < n; ++i) {
    for (Index start = 0; start < p; start += kBlockSize) {
      const Index len = std::min(kBlockSize, p - start);
      const Matrix& L = len == kBlockSize ? chol : chol_tail;
      for (Index k = 0; k < len; ++k) e(k) = normal(rng);
      const Vector x = L * e.head(len);
      for (Index k = 0; k < len; ++k) z(i, start + k) = std::abs(1.0 + x(k));
    }
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    y(i) = truth.quantile(u, z.row(i).transpose());
  }
  return Dataset(std::move(y), std::move(z));
}

Simulated generate(const Scenario& s) {
  std::mt19937_64 rng(s.seed);
  Dataset d = draw(s, s.n, rng);
  return Simulated{std::move(d), OracleTruth(s)};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1342543de82ef95ULL + 1));
}

}  // namespace hetqr
