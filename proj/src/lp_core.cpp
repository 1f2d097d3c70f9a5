#include "hetqr/lp_core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace hetqr {

namespace {

constexpr double kBig = 1e20;

// Rows with a single nonzero (penalty pseudo-rows) only touch the diagonal of
// A' D A, so they are kept out of the dense rank update.
struct RowSplit {
  std::vector<Index> dense;
  std::vector<Index> single_row;
  std::vector<Index> single_col;
  Matrix dense_rows;
};

RowSplit split_rows(const Matrix& a) {
  RowSplit out;
  for (Index i = 0; i < a.rows(); ++i) {
    Index nnz = 0;
    Index col = -1;
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) {
        ++nnz;
        col = j;
      }
    }
    if (nnz == 1) {
      out.single_row.push_back(i);
      out.single_col.push_back(col);
    } else {
      out.dense.push_back(i);
    }
  }
  out.dense_rows.resize(static_cast<Index>(out.dense.size()), a.cols());
  for (std::size_t k = 0; k < out.dense.size(); ++k) out.dense_rows.row(static_cast<Index>(k)) = a.row(out.dense[k]);
  return out;
}

class NormalSolver {
 public:
  NormalSolver(const Matrix& a, const RowSplit& split) : a_(a), split_(split), normal_(a.cols(), a.cols()) {}

  void factor(const Eigen::ArrayXd& d) {
    Eigen::ArrayXd root(static_cast<Index>(split_.dense.size()));
    for (std::size_t k = 0; k < split_.dense.size(); ++k) root(static_cast<Index>(k)) = std::sqrt(d(split_.dense[k]));
    normal_.setZero();
    if (!split_.dense.empty()) {
      const Matrix scaled = (split_.dense_rows.array().colwise() * root).matrix();
      normal_.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
    }
    for (std::size_t k = 0; k < split_.single_row.size(); ++k) {
      const Index i = split_.single_row[k];
      const Index j = split_.single_col[k];
      normal_(j, j) += d(i) * a_(i, j) * a_(i, j);
    }
    llt_.compute(normal_);
    double ridge = 1e-13 * std::max(1.0, normal_.diagonal().cwiseAbs().maxCoeff());
    while (llt_.info() != Eigen::Success) {
      // Rank-deficient design (p >= n, collinear columns): a tiny ridge keeps
      // the Newton system solvable without moving the optimum appreciably.
      Matrix jittered = normal_;
      jittered.diagonal().array() += ridge;
      llt_.compute(jittered);
      ridge *= 10.0;
      if (ridge > 1e6) throw SolverFailure("normal equations could not be factored");
    }
  }

  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }

 private:
  const Matrix& a_;
  const RowSplit& split_;
  Matrix normal_;
  Eigen::LLT<Matrix, Eigen::Lower> llt_;
};

double scaled_objective(const Matrix& a, const Vector& c, const Eigen::ArrayXd& t, const Vector& beta) {
  const Vector r = c - a * beta;
  CompensatedSum s;
  for (Index i = 0; i < r.size(); ++i) s.add(r(i) >= 0.0 ? r(i) * t(i) : r(i) * (t(i) - 1.0));
  return s.value();
}

struct IpmResult {
  Vector beta;
  Vector dual;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
};

double max_step(const Eigen::ArrayXd& v, const Eigen::ArrayXd& dv) {
  double step = kBig;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) step = std::min(step, -v(i) / dv(i));
  }
  return step;
}

// Frisch-Newton predictor-corrector on
//   max c'd  s.t.  A'd = A'(1 - t),  0 <= d <= 1,
// whose Lagrange multipliers are -beta.
IpmResult frisch_newton(const Matrix& a, const Vector& c, const Eigen::ArrayXd& t, const SolverOptions& opts) {
  const Index r = a.rows();
  const RowSplit split = split_rows(a);
  NormalSolver normal(a, split);

  Eigen::ArrayXd x = 1.0 - t;
  const Vector b = a.transpose() * x.matrix();

  Eigen::ArrayXd d = Eigen::ArrayXd::Ones(r);
  normal.factor(d);
  Vector yv = normal.solve(a.transpose() * (-c));

  Eigen::ArrayXd s = (-c - a * yv).array();
  Eigen::ArrayXd z(r);
  Eigen::ArrayXd w(r);
  constexpr double eps = 1e-6;
  for (Index i = 0; i < r; ++i) {
    z(i) = std::max(s(i), 0.0);
    w(i) = std::max(-s(i), 0.0);
    if (std::abs(s(i)) < eps) {
      z(i) += eps;
      w(i) += eps;
    }
  }
  s = 1.0 - x;

  IpmResult out;
  double gap = (z * x).sum() + (w * s).sum();
  double obj = scaled_objective(a, c, t, -yv);

  Eigen::ArrayXd dx(r), ds(r), dz(r), dw(r), dr(r);
  int it = 0;
  while (!(gap < opts.gap_tolerance * (1.0 + std::abs(obj))) && it < opts.max_iterations) {
    ++it;
    d = 1.0 / (z / x + w / s);
    ds = z - w;
    dz = d * ds;
    Vector dy = b - a.transpose() * x.matrix() + a.transpose() * dz.matrix();
    const Vector rhs = dy;
    normal.factor(d);
    dy = normal.solve(dy);
    ds = (a * dy).array() - ds;
    dx = d * ds;
    ds = -dx;
    dz = -z * (dx / x + 1.0);
    dw = -w * (ds / s + 1.0);
    double deltap = std::min(opts.step_fraction * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
    double deltad = std::min(opts.step_fraction * std::min(max_step(z, dz), max_step(w, dw)), 1.0);

    if (std::min(deltap, deltad) < 1.0) {
      double mu = (z * x).sum() + (w * s).sum();
      const double g = ((z + deltad * dz) * (x + deltap * dx)).sum() + ((w + deltad * dw) * (s + deltap * ds)).sum();
      mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(r));
      const Eigen::ArrayXd dxdz = dx * dz;
      const Eigen::ArrayXd dsdw = ds * dw;
      dr = d * (mu * (1.0 / s - 1.0 / x) + dxdz / x - dsdw / s);
      dy = normal.solve(rhs + a.transpose() * dr.matrix());
      const Eigen::ArrayXd u = (a * dy).array();
      dx = d * (u - z + w) - dr;
      ds = -dx;
      dz = -z + (mu - z * dx - dxdz) / x;
      dw = -w + (mu - w * ds - dsdw) / s;
      deltap = std::min(opts.step_fraction * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
      deltad = std::min(opts.step_fraction * std::min(max_step(z, dz), max_step(w, dw)), 1.0);
    }
    x += deltap * dx;
    s += deltap * ds;
    yv += deltad * dy;
    z += deltad * dz;
    w += deltad * dw;
    gap = (z * x).sum() + (w * s).sum();
    obj = scaled_objective(a, c, t, -yv);
  }
  out.beta = -yv;
  out.dual = x.matrix();
  out.iterations = it;
  out.converged = gap < opts.gap_tolerance * (1.0 + std::abs(obj));
  out.objective = obj;
  return out;
}

struct VertexResult {
  Vector beta;
  Vector dual;
  double objective = 0.0;
  bool certified = false;
  int pivots = 0;
};

std::vector<Index> rows_by_closeness(const Matrix& a, const Vector& resid) {
  std::vector<Index> order;
  std::vector<double> key(static_cast<std::size_t>(a.rows()));
  for (Index i = 0; i < a.rows(); ++i) {
    const double norm = a.row(i).norm();
    if (norm == 0.0) continue;
    key[static_cast<std::size_t>(i)] = std::abs(resid(i)) / norm;
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](Index l, Index rr) { return key[static_cast<std::size_t>(l)] < key[static_cast<std::size_t>(rr)]; });
  return order;
}

Matrix gather_rows(const Matrix& a, const std::vector<Index>& rows) {
  Matrix bm(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) bm.row(static_cast<Index>(k)) = a.row(rows[k]);
  return bm;
}

// Greedy pick of q linearly independent rows, preferring rows closest to
// interpolation at the interior iterate (the basis it is converging to).
// Near a nondegenerate optimum the q closest rows already form that basis.
std::optional<std::vector<Index>> initial_basis(const Matrix& a, const std::vector<Index>& order,
                                                Eigen::PartialPivLU<Matrix>& lu) {
  const Index q = a.cols();
  if (static_cast<Index>(order.size()) < q) return std::nullopt;
  std::vector<Index> head(order.begin(), order.begin() + q);
  lu.compute(gather_rows(a, head));
  if (lu.rcond() > 1e-10) return head;

  Matrix basis_q(q, q);
  Index k = 0;
  std::vector<Index> basis;
  for (Index i : order) {
    Vector v = a.row(i).transpose();
    const double v0 = v.norm();
    for (int pass = 0; pass < 2 && k > 0; ++pass) v -= basis_q.leftCols(k) * (basis_q.leftCols(k).transpose() * v);
    const double vn = v.norm();
    if (vn > 1e-9 * v0) {
      basis_q.col(k) = v / vn;
      basis.push_back(i);
      if (++k == q) {
        lu.compute(gather_rows(a, basis));
        return basis;
      }
    }
  }
  return std::nullopt;
}

// Solves B' x = h given the LU of B (P B = L U).
Vector solve_transposed(const Eigen::PartialPivLU<Matrix>& lu, const Vector& h) {
  Vector x = lu.matrixLU().triangularView<Eigen::Upper>().transpose().solve(h);
  lu.matrixLU().triangularView<Eigen::UnitLower>().transpose().solveInPlace(x);
  return lu.permutationP().transpose() * x;
}

// A basic singleton row pins its coefficient exactly (zero for penalty rows).
void snap_singletons(const Matrix& bm, const Vector& cb, Vector& beta) {
  const Index q = bm.cols();
  for (Index k = 0; k < q; ++k) {
    Index nnz = 0;
    Index col = -1;
    for (Index j = 0; j < q; ++j) {
      if (bm(k, j) != 0.0) {
        ++nnz;
        col = j;
      }
    }
    if (nnz == 1) beta(col) = cb(k) / bm(k, col);
  }
}

// Simplex cleanup from the crossover basis. At a basis B the nonbasic
// multipliers are fixed by residual signs, a_N = t - 1{r < 0}, and
// A'a = 0 determines a_B. The vertex is optimal iff t_B - 1 <= a_B <= t_B;
// otherwise the most violated basic row leaves and a ratio test along the
// piecewise-linear ray picks the entering row.
std::optional<VertexResult> crossover(const Matrix& a, const Vector& c, const Eigen::ArrayXd& t, const Vector& beta0,
                                      int max_pivots) {
  const Index r = a.rows();
  const Index q = a.cols();
  Eigen::PartialPivLU<Matrix> lu;
  auto basis_opt = initial_basis(a, rows_by_closeness(a, c - a * beta0), lu);
  if (!basis_opt) return std::nullopt;
  std::vector<Index> basis = std::move(*basis_opt);

  std::vector<char> in_basis(static_cast<std::size_t>(r), 0);
  for (Index i : basis) in_basis[static_cast<std::size_t>(i)] = 1;

  const double c_scale = 1.0 + c.cwiseAbs().maxCoeff();
  const double zero_tol = 1e-11 * c_scale;
  constexpr double kCertTol = 1e-9;

  // The LU of the current basis is exact; the explicit inverse is only formed
  // once pivoting starts and is then kept up to date by rank-one updates.
  bool lu_current = true;
  Matrix binv;
  auto refresh = [&]() {
    lu.compute(gather_rows(a, basis));
    binv = lu.inverse();
    lu_current = true;
  };

  VertexResult best;
  best.objective = std::numeric_limits<double>::infinity();
  Vector cb(q);
  Eigen::ArrayXd mult(r);

  for (int pivot = 0;; ++pivot) {
    for (Index k = 0; k < q; ++k) cb(k) = c(basis[static_cast<std::size_t>(k)]);
    const Vector beta = lu_current ? Vector(lu.solve(cb)) : Vector(binv * cb);
    Vector resid = c - a * beta;
    for (Index i : basis) resid(i) = 0.0;

    for (Index i = 0; i < r; ++i) mult(i) = resid(i) < -zero_tol ? t(i) - 1.0 : t(i);
    for (Index i : basis) mult(i) = 0.0;
    const Vector h = a.transpose() * mult.matrix();
    const Vector a_basic = lu_current ? Vector(-solve_transposed(lu, h)) : Vector(-(binv.transpose() * h));
    for (Index k = 0; k < q; ++k) mult(basis[static_cast<std::size_t>(k)]) = a_basic(k);

    Index leave = -1;
    double worst = kCertTol;
    double direction = 0.0;
    for (Index k = 0; k < q; ++k) {
      const double tk = t(basis[static_cast<std::size_t>(k)]);
      const double over = a_basic(k) - tk;
      const double under = (tk - 1.0) - a_basic(k);
      if (over > worst) {
        worst = over;
        leave = k;
        direction = 1.0;
      }
      if (under > worst) {
        worst = under;
        leave = k;
        direction = -1.0;
      }
    }

    const double obj = scaled_objective(a, c, t, beta);
    if (obj < best.objective || leave < 0) {
      best.beta = beta;
      best.objective = obj;
      best.dual = (mult + 1.0 - t).cwiseMax(0.0).cwiseMin(1.0).matrix();
      best.pivots = pivot;
    }
    if (leave < 0) {
      if (!lu_current) lu.compute(gather_rows(a, basis));
      const Matrix bm = gather_rows(a, basis);
      best.beta = lu.solve(cb);
      snap_singletons(bm, cb, best.beta);
      best.objective = scaled_objective(a, c, t, best.beta);
      best.certified = true;
      best.pivots = pivot;
      return best;
    }
    if (pivot >= max_pivots) return best;
    if (binv.size() == 0) binv = lu.inverse();

    // Moving along delta changes basic residual `leave` by direction * s and
    // keeps the other basic residuals at zero.
    const Vector delta = -direction * binv.col(leave);
    const Vector g = a * delta;
    struct Break {
      double s;
      Index row;
      double slope;
    };
    std::vector<Break> breaks;
    for (Index i = 0; i < r; ++i) {
      if (in_basis[static_cast<std::size_t>(i)] || g(i) == 0.0) continue;
      const double ri = resid(i);
      if ((ri > zero_tol && g(i) > 0.0) || (ri < -zero_tol && g(i) < 0.0)) {
        breaks.push_back({ri / g(i), i, std::abs(g(i))});
      } else if (std::abs(ri) <= zero_tol && g(i) > 0.0) {
        breaks.push_back({0.0, i, std::abs(g(i))});
      }
    }
    std::sort(breaks.begin(), breaks.end(), [](const Break& l, const Break& rr) {
      return l.s < rr.s || (l.s == rr.s && l.row < rr.row);
    });
    double slope = -worst;
    Index enter = -1;
    for (const auto& br : breaks) {
      slope += br.slope;
      if (slope >= 0.0) {
        enter = br.row;
        break;
      }
    }
    if (enter < 0) return best;

    const Vector col = binv.col(leave);
    const double denom = a.row(enter).dot(col);
    if (std::abs(denom) < 1e-12 * a.row(enter).norm() * col.norm()) return best;
    const Index old = basis[static_cast<std::size_t>(leave)];
    const Eigen::RowVectorXd v = a.row(enter) - a.row(old);
    const Eigen::RowVectorXd vb = v * binv;
    binv -= col * vb / denom;
    in_basis[static_cast<std::size_t>(old)] = 0;
    in_basis[static_cast<std::size_t>(enter)] = 1;
    basis[static_cast<std::size_t>(leave)] = enter;
    lu_current = false;
    if ((pivot + 1) % 32 == 0) refresh();
  }
}

}  // namespace

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal:
      return "optimal";
    case LpStatus::IterationLimit:
      return "iteration-limit";
    case LpStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

void PinballProblem::validate() const {
  const Index r = x.rows();
  if (r < 1 || x.cols() < 1) throw InvalidInput("pinball problem needs at least one row and one column");
  if (y.size() != r || t.size() != r || w.size() != r) throw InvalidInput("pinball problem vectors must have one entry per row");
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("pinball problem has non-finite data");
  for (Index i = 0; i < r; ++i) {
    if (!(t(i) > 0.0 && t(i) < 1.0)) throw InvalidInput("row quantile levels must lie in (0,1)");
    if (!(w(i) > 0.0) || !std::isfinite(w(i))) throw InvalidInput("row weights must be positive and finite");
  }
}

double pinball_objective(const PinballProblem& prob, const Vector& beta) {
  const Vector r = prob.y - prob.x * beta;
  CompensatedSum s;
  for (Index i = 0; i < r.size(); ++i) {
    s.add(prob.w(i) * (r(i) >= 0.0 ? r(i) * prob.t(i) : r(i) * (prob.t(i) - 1.0)));
  }
  return s.value();
}

LpSolution solve_pinball(const PinballProblem& prob, const SolverOptions& opts) {
  prob.validate();
  const Matrix a = prob.w.asDiagonal() * prob.x;
  const Vector c = prob.w.cwiseProduct(prob.y);
  const Eigen::ArrayXd t = prob.t.array();

  const IpmResult ipm = frisch_newton(a, c, t, opts);
  if (!ipm.beta.allFinite()) throw SolverFailure("interior point iterate diverged");

  LpSolution sol;
  sol.beta = ipm.beta;
  sol.dual = ipm.dual;
  sol.iterations = ipm.iterations;
  sol.status = ipm.converged ? LpStatus::Optimal : LpStatus::IterationLimit;

  if (opts.crossover) {
    if (auto vertex = crossover(a, c, t, ipm.beta, opts.max_pivots)) {
      sol.pivots = vertex->pivots;
      if (vertex->certified || vertex->objective <= ipm.objective) {
        sol.beta = vertex->beta;
        sol.dual = vertex->dual;
        sol.certified_vertex = vertex->certified;
        if (vertex->certified) sol.status = LpStatus::Optimal;
      }
    }
  }
  sol.objective = pinball_objective(prob, sol.beta);
  return sol;
}

PenalizedQrFit solve_penalized_qr(const Dataset& data, double tau, const Vector& slope_penalties, double loss_weight,
                                  const SolverOptions& opts) {
  const Index n = data.n();
  const Index p = data.p();
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("tau must lie in (0,1)");
  if (slope_penalties.size() != p) throw InvalidInput("need one penalty per slope");
  if (!(loss_weight > 0.0)) throw InvalidInput("loss weight must be positive");

  const double lip_scale = loss_weight * std::max(tau, 1.0 - tau);
  std::vector<Index> keep;
  Index pseudo = 0;
  for (Index j = 0; j < p; ++j) {
    const double lam = slope_penalties(j);
    if (std::isnan(lam) || lam < 0.0) throw InvalidInput("slope penalties must be nonnegative");
    if (std::isinf(lam)) continue;
    const double lipschitz = lip_scale * data.z().col(j).cwiseAbs().sum();
    if (lam >= lipschitz) continue;
    keep.push_back(j);
    if (lam > 0.0) ++pseudo;
  }

  const Index q = 1 + static_cast<Index>(keep.size());
  PinballProblem prob;
  prob.x = Matrix::Zero(n + pseudo, q);
  prob.y = Vector::Zero(n + pseudo);
  prob.t = Vector::Constant(n + pseudo, 0.5);
  prob.w = Vector::Ones(n + pseudo);
  prob.x.col(0).head(n).setOnes();
  for (std::size_t k = 0; k < keep.size(); ++k) prob.x.col(static_cast<Index>(k) + 1).head(n) = data.z().col(keep[k]);
  prob.y.head(n) = data.y();
  prob.t.head(n).setConstant(tau);
  prob.w.head(n).setConstant(loss_weight);
  Index row = n;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const double lam = slope_penalties(keep[k]);
    if (lam > 0.0) prob.x(row++, static_cast<Index>(k) + 1) = 2.0 * lam;
  }

  PenalizedQrFit fit;
  fit.lp = solve_pinball(prob, opts);
  fit.intercept = fit.lp.beta(0);
  fit.slopes = Vector::Zero(p);
  for (std::size_t k = 0; k < keep.size(); ++k) fit.slopes(keep[k]) = fit.lp.beta(static_cast<Index>(k) + 1);
  return fit;
}

double sample_quantile(const Vector& y, double tau) {
  return sample_quantile_interval(y, tau).first;
}

std::pair<double, double> sample_quantile_interval(const Vector& y, double tau) {
  if (y.size() < 1) throw InvalidInput("sample_quantile: empty sample");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("sample_quantile: tau must lie in (0,1)");
  std::vector<double> v(y.data(), y.data() + y.size());
  std::sort(v.begin(), v.end());
  const double pos = static_cast<double>(v.size()) * tau;
  const double rounded = std::round(pos);
  if (std::abs(pos - rounded) < 1e-9 * static_cast<double>(v.size())) {
    const auto k = static_cast<std::size_t>(rounded);
    // k in [1, n-1] because 0 < tau < 1 and pos is (numerically) integral.
    const std::size_t lo = std::max<std::size_t>(k, 1) - 1;
    const std::size_t hi = std::min(k, v.size() - 1);
    return {v[lo], v[hi]};
  }
  const auto k = static_cast<std::size_t>(std::ceil(pos));
  return {v[k - 1], v[k - 1]};
}

}  // namespace hetqr
