#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hetqr/lp_core.hpp"
#include "oracles.hpp"

#include <random>

using namespace hetqr;

namespace {

PinballProblem intercept_only(const Vector& y, double tau) {
  return PinballProblem{Matrix::Ones(y.size(), 1), y, Vector::Constant(y.size(), tau), Vector::Ones(y.size())};
}

PinballProblem random_problem(std::mt19937_64& rng, Index r, Index q, bool random_levels) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> lvl(0.05, 0.95), wt(0.2, 3.0);
  PinballProblem p{Matrix(r, q), Vector(r), Vector(r), Vector(r)};
  for (Index i = 0; i < r; ++i) {
    p.x(i, 0) = 1.0;
    for (Index j = 1; j < q; ++j) p.x(i, j) = nd(rng);
    p.y(i) = nd(rng) * 2.0;
    p.t(i) = random_levels ? lvl(rng) : 0.3;
    p.w(i) = random_levels ? wt(rng) : 1.0;
  }
  return p;
}

}  // namespace

TEST_CASE("intercept-only examples") {
  Vector y(3);
  y << 1, 2, 3;
  auto s = solve_pinball(intercept_only(y, 0.5));
  CHECK(s.status == LpStatus::Optimal);
  CHECK(s.beta(0) == doctest::Approx(2.0).epsilon(1e-9));

  Vector y5(5);
  y5 << 1, 2, 3, 4, 5;
  auto s5 = solve_pinball(intercept_only(y5, 0.25));
  // grid search over the order statistics, where an intercept-only minimizer must lie
  double best = 1e300, arg = 0;
  for (Index k = 0; k < 5; ++k) {
    double v = 0;
    for (Index i = 0; i < 5; ++i) v += oracle::rho(y5(i) - y5(k), 0.25);
    if (v < best) best = v, arg = y5(k);
  }
  CHECK(arg == 2.0);
  CHECK(s5.beta(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(s5.objective == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("two points are interpolated exactly") {
  PinballProblem p{Matrix(2, 2), Vector(2), Vector::Constant(2, 0.5), Vector::Ones(2)};
  p.x << 1, 0, 1, 1;
  p.y << 0, 1;
  auto s = solve_pinball(p);
  CHECK(s.beta(0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.beta(1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(s.objective) < 1e-9);
}

TEST_CASE("reported objective equals recomputed loss; dual is feasible") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    auto p = random_problem(rng, 60, 4, true);
    auto s = solve_pinball(p);
    REQUIRE(s.status == LpStatus::Optimal);
    const double recomputed = oracle::pinball(p.x, p.y, p.t, p.w, s.beta);
    CHECK(std::abs(s.objective - recomputed) <= 1e-8 * (1 + std::abs(recomputed)));
    CHECK(s.dual.minCoeff() >= -1e-9);
    CHECK(s.dual.maxCoeff() <= 1 + 1e-9);
    // A'd = A'(1 - t) with A = diag(w) X
    const Matrix a = p.w.asDiagonal() * p.x;
    const Vector lhs = a.transpose() * s.dual;
    const Vector rhs = a.transpose() * (Vector::Ones(60) - p.t);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-6 * 60);
  }
}

TEST_CASE("I1: no perturbation improves the solution") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_problem(rng, 40, 3, rep % 2 == 0);
    auto s = solve_pinball(p);
    const double f = pinball_objective(p, s.beta);
    CHECK(f <= pinball_objective(p, Vector::Zero(3)) + 1e-12);
    for (int k = 0; k < 100; ++k) {
      Vector d(3);
      for (Index j = 0; j < 3; ++j) d(j) = nd(rng);
      d *= 1e-3 / d.norm();
      CHECK(f <= pinball_objective(p, s.beta + d) + 1e-12);
    }
  }
}

TEST_CASE("I2: sample-quantile counts for the intercept-only problem") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (double tau : {0.1, 0.25, 0.5, 0.73, 0.9}) {
    for (Index r : {7, 20, 101}) {
      Vector y(r);
      for (Index i = 0; i < r; ++i) y(i) = nd(rng);
      auto s = solve_pinball(intercept_only(y, tau));
      Index neg = 0, nonpos = 0;
      for (Index i = 0; i < r; ++i) {
        const double res = y(i) - s.beta(0);
        if (res < -1e-9) ++neg;
        if (res <= 1e-9) ++nonpos;
      }
      CHECK(static_cast<double>(neg) <= r * tau + 1e-9);
      CHECK(static_cast<double>(nonpos) >= r * tau - 1e-9);
    }
  }
}

TEST_CASE("I2: subgradient box for the penalized problem") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> lam(0.0, 8.0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 50, p = 4;
    Vector y(n);
    Matrix z(n, p);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < p; ++j) z(i, j) = nd(rng);
      y(i) = z(i, 0) + nd(rng);
    }
    Vector pen(p);
    for (Index j = 0; j < p; ++j) pen(j) = lam(rng);
    const double tau = 0.35;
    auto fit = solve_penalized_qr(Dataset(y, z), tau, pen);
    // g_j = sum_i z_ij (tau - 1{r_i < 0}); rows with zero residual may take any
    // multiplier in [tau - 1, tau], which widens the box by their |z_ij|.
    Matrix x(n, p + 1);
    x.col(0).setOnes();
    x.rightCols(p) = z;
    Vector beta(p + 1);
    beta << fit.intercept, fit.slopes;
    const Vector res = y - x * beta;
    for (Index j = 0; j <= p; ++j) {
      double g = 0, slack = 0;
      for (Index i = 0; i < n; ++i) {
        if (std::abs(res(i)) < 1e-9) slack += std::abs(x(i, j));
        else g += x(i, j) * (tau - (res(i) < 0 ? 1.0 : 0.0));
      }
      const double bound = j == 0 ? 0.0 : pen(j - 1);
      CHECK(std::abs(g) <= bound + slack + 1e-6 * n);
      if (j > 0 && std::abs(beta(j)) > 1e-9) {
        // active coefficients: the penalty's subgradient is exactly sign * lambda
        CHECK(std::abs(std::abs(g) - pen(j - 1)) <= slack + 1e-6 * n);
      }
    }
  }
}

TEST_CASE("I3: location and scale equivariance") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    auto p = random_problem(rng, 30, 3, false);
    auto s = solve_pinball(p);
    PinballProblem shifted = p;
    shifted.y.array() += 3.5;
    auto ss = solve_pinball(shifted);
    CHECK(ss.beta(0) == doctest::Approx(s.beta(0) + 3.5).epsilon(1e-7));
    CHECK((ss.beta.tail(2) - s.beta.tail(2)).cwiseAbs().maxCoeff() < 1e-7);
    PinballProblem scaled = p;
    scaled.y *= 2.5;
    auto sc = solve_pinball(scaled);
    CHECK((sc.beta - 2.5 * s.beta).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("I4: brute-force vertex oracle on small instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> rows(1, 8), cols(1, 2);
  int checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const Index q = cols(rng);
    const Index r = std::max<Index>(rows(rng), 1);
    auto p = random_problem(rng, r, q, true);
    auto s = solve_pinball(p);
    auto b = oracle::brute_pinball(p.x, p.y, p.t, p.w);
    CHECK(s.objective == doctest::Approx(b.objective).epsilon(1e-6).scale(1.0));
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("penalized fit examples") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  const Index n = 40, p = 3;
  Vector y(n);
  Matrix z(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) z(i, j) = nd(rng);
    y(i) = 1 + z(i, 1) + nd(rng);
  }
  Dataset d(y, z);

  auto plain = solve_penalized_qr(d, 0.4, Vector::Zero(p));
  PinballProblem prob{Matrix(n, p + 1), y, Vector::Constant(n, 0.4), Vector::Ones(n)};
  prob.x.col(0).setOnes();
  prob.x.rightCols(p) = z;
  auto direct = solve_pinball(prob);
  CHECK(std::abs(plain.intercept - direct.beta(0)) < 1e-6);
  CHECK((plain.slopes - direct.beta.tail(p)).cwiseAbs().maxCoeff() < 1e-6);

  for (double tau : {0.25, 0.5, 0.75}) {
    auto big = solve_penalized_qr(d, tau, Vector::Constant(p, 1e6));
    CHECK(big.slopes.cwiseAbs().maxCoeff() == 0.0);
    const auto [lo, hi] = sample_quantile_interval(y, tau);
    CHECK(big.intercept >= lo - 1e-6);
    CHECK(big.intercept <= hi + 1e-6);
  }
}

TEST_CASE("penalized n=6, p=1 instance matches the vertex oracle") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 25; ++rep) {
    Vector y(6);
    Matrix z(6, 1);
    for (Index i = 0; i < 6; ++i) {
      z(i, 0) = nd(rng);
      y(i) = 0.8 * z(i, 0) + nd(rng);
    }
    for (double tau : {0.3, 0.5}) {
      auto fit = solve_penalized_qr(Dataset(y, z), tau, Vector::Constant(1, 0.5));
      Vector beta(2);
      beta << fit.intercept, fit.slopes(0);
      Matrix x(6, 2);
      x.col(0).setOnes();
      x.col(1) = z.col(0);
      const double got = oracle::pinball(x, y, Vector::Constant(6, tau), Vector::Ones(6), beta) +
                         0.5 * std::abs(fit.slopes(0));
      auto b = oracle::brute_penalized(y, z, tau, Vector::Constant(1, 0.5));
      CHECK(got == doctest::Approx(b.objective).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("degenerate data solves without error") {
  Vector y = Vector::Constant(10, 3.0);
  Matrix z(10, 2);
  for (Index i = 0; i < 10; ++i) z(i, 0) = static_cast<double>(i % 3), z(i, 1) = 1.0;
  auto f = solve_penalized_qr(Dataset(y, z), 0.5, Vector::Zero(2));
  CHECK(f.lp.status == LpStatus::Optimal);
  CHECK(std::abs(f.lp.objective) < 1e-8);

  // duplicated rows
  Vector y2(8);
  y2 << 1, 1, 2, 2, 3, 3, 4, 4;
  Matrix z2(8, 1);
  z2 << 1, 1, 2, 2, 3, 3, 4, 4;
  auto g = solve_penalized_qr(Dataset(y2, z2), 0.3, Vector::Constant(1, 0.1));
  CHECK(g.lp.status == LpStatus::Optimal);

  // an all-zero column is fine when penalized
  Matrix z3 = Matrix::Zero(5, 2);
  z3.col(0) << 1, 2, 3, 4, 5;
  Vector y3(5);
  y3 << 2, 4, 6, 8, 10;
  auto h = solve_penalized_qr(Dataset(y3, z3), 0.5, Vector::Constant(2, 0.01));
  CHECK(h.slopes(1) == 0.0);
  CHECK(h.slopes(0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("infinite penalty pins a coefficient at zero") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Vector y(30);
  Matrix z(30, 2);
  for (Index i = 0; i < 30; ++i) {
    z(i, 0) = nd(rng), z(i, 1) = nd(rng);
    y(i) = 3 * z(i, 0) + z(i, 1);
  }
  Vector pen(2);
  pen << std::numeric_limits<double>::infinity(), 0.0;
  auto f = solve_penalized_qr(Dataset(y, z), 0.5, pen);
  CHECK(f.slopes(0) == 0.0);
  CHECK_THROWS_AS(solve_penalized_qr(Dataset(y, z), 0.5, Vector::Constant(2, -1.0)), InvalidInput);
}

TEST_CASE("iteration limit is reported") {
  std::mt19937_64 rng(1);
  auto p = random_problem(rng, 200, 2, true);
  SolverOptions o;
  o.max_iterations = 1;
  o.crossover = false;
  auto s = solve_pinball(p, o);
  CHECK(s.status == LpStatus::IterationLimit);
}

TEST_CASE("sample quantile interval") {
  Vector y(4);
  y << 4, 1, 3, 2;
  CHECK(sample_quantile(y, 0.5) == 2.0);
  auto [lo, hi] = sample_quantile_interval(y, 0.5);
  CHECK(lo == 2.0);
  CHECK(hi == 3.0);
  auto [a, b] = sample_quantile_interval(y, 0.3);
  CHECK(a == 2.0);
  CHECK(b == 2.0);
}
