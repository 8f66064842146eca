#pragma once

// Small dense solvers: Gaussian elimination, a two-phase tableau simplex for
// linear programs and a primal active-set method for least-squares-type convex
// quadratic programs. Sized for a few dozen variables and constraints.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gshap/errors.hpp"
#include "gshap/matrix.hpp"

namespace gshap {

// Largest admissible constraint violation of a returned LP/QP point.
inline constexpr double kFeasibilityTolerance = 1e-8;
// Pivots smaller than this (relative to the matrix scale) mark a matrix singular.
inline constexpr double kPivotTolerance = 1e-12;

// Solves A x = b by Gaussian elimination with partial (row) pivoting.
inline Vector solve_linear_system(Matrix a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InputError("solve_linear_system: matrix is not square");
  if (b.size() != n) throw InputError("solve_linear_system: right-hand side has the wrong length");
  Vector x(b.begin(), b.end());
  const double scale = a.max_abs();
  if (n > 0 && scale == 0.0) throw SingularMatrixError("solve_linear_system: zero matrix");

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (std::abs(a(piv, k)) < kPivotTolerance * scale)
      throw SingularMatrixError("solve_linear_system: matrix is singular to working precision");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(x[k], x[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      x[i] -= f * x[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = x[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
    x[k] = s / a(k, k);
  }
  return x;
}

enum class Sense { minimize, maximize };

enum class SolveOutcome { optimal, infeasible, unbounded };

inline const char* to_string(SolveOutcome s) {
  switch (s) {
    case SolveOutcome::optimal: return "optimal";
    case SolveOutcome::infeasible: return "infeasible";
    case SolveOutcome::unbounded: return "unbounded";
  }
  return "unknown";
}

struct SolveStatus {
  SolveOutcome status = SolveOutcome::infeasible;
  Vector solution;  // empty unless optimal
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;

  bool optimal() const noexcept { return status == SolveOutcome::optimal; }
};

// optimize c'x subject to A x <= b and optional per-variable bounds.
// Empty bound vectors mean every variable is free on that side.
struct LinearProgram {
  Vector objective;
  Matrix a;
  Vector b;
  std::vector<std::optional<double>> lower;
  std::vector<std::optional<double>> upper;
  Sense sense = Sense::minimize;

  std::size_t variables() const noexcept { return objective.size(); }

  void validate() const {
    const std::size_t n = variables();
    if (a.rows() != b.size()) throw InputError("LinearProgram: A and b have different row counts");
    if (a.rows() > 0 && a.cols() != n) throw InputError("LinearProgram: A has the wrong column count");
    if (!lower.empty() && lower.size() != n) throw InputError("LinearProgram: lower bounds have the wrong length");
    if (!upper.empty() && upper.size() != n) throw InputError("LinearProgram: upper bounds have the wrong length");
    for (std::size_t j = 0; j < n && !lower.empty() && !upper.empty(); ++j)
      if (lower[j] && upper[j] && *lower[j] > *upper[j])
        throw InputError("LinearProgram: lower bound exceeds upper bound for variable " + std::to_string(j));
  }
};

// minimize ||M x + v||^2 subject to A x <= b and optional per-variable bounds.
struct QuadraticProgram {
  Matrix target;
  Vector offset;
  Matrix a;
  Vector b;
  std::vector<std::optional<double>> lower;
  std::vector<std::optional<double>> upper;

  std::size_t variables() const noexcept { return target.cols(); }

  void validate() const {
    const std::size_t n = variables();
    if (target.rows() != offset.size()) throw InputError("QuadraticProgram: M and v have different row counts");
    if (a.rows() != b.size()) throw InputError("QuadraticProgram: A and b have different row counts");
    if (a.rows() > 0 && a.cols() != n) throw InputError("QuadraticProgram: A has the wrong column count");
    if (!lower.empty() && lower.size() != n) throw InputError("QuadraticProgram: lower bounds have the wrong length");
    if (!upper.empty() && upper.size() != n) throw InputError("QuadraticProgram: upper bounds have the wrong length");
    for (std::size_t j = 0; j < n && !lower.empty() && !upper.empty(); ++j)
      if (lower[j] && upper[j] && *lower[j] > *upper[j])
        throw InputError("QuadraticProgram: lower bound exceeds upper bound for variable " + std::to_string(j));
  }

  double objective_at(std::span<const double> x) const {
    Vector r = target * x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += offset[i];
    return dot(r, r);
  }
};

namespace detail {

// Stacks A x <= b with the bound rows (x_j <= u_j, -x_j <= -l_j).
inline void stack_bounds(std::size_t n, const Matrix& a, const Vector& b,
                         const std::vector<std::optional<double>>& lower,
                         const std::vector<std::optional<double>>& upper, Matrix& out_a, Vector& out_b) {
  out_a = Matrix(0, n);
  out_b.clear();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    out_a.append_row(a.row(i));
    out_b.push_back(b[i]);
  }
  Vector unit(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!upper.empty() && upper[j]) {
      unit[j] = 1.0;
      out_a.append_row(unit);
      out_b.push_back(*upper[j]);
      unit[j] = 0.0;
    }
    if (!lower.empty() && lower[j]) {
      unit[j] = -1.0;
      out_a.append_row(unit);
      out_b.push_back(-*lower[j]);
      unit[j] = 0.0;
    }
  }
}

// Tableau entries below this magnitude are treated as zero by the simplex.
inline constexpr double kTableauZero = 1e-10;

// Two-phase dense tableau simplex on: minimize c'y, A y = b, y >= 0, b >= 0.
// Bland's rule (lowest index) is used for both entering and leaving choices.
class TableauSimplex {
 public:
  TableauSimplex(const Matrix& a, const Vector& b, const Vector& c, std::size_t artificial_from)
      : m_(a.rows()), n_(a.cols()), artificial_from_(artificial_from), t_(a.rows() + 1, a.cols() + 1) {
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) t_(i, j) = a(i, j);
      t_(i, n_) = b[i];
    }
    cost_ = c;
    basis_.assign(m_, 0);
  }

  void set_basis(std::size_t row, std::size_t var) { basis_[row] = var; }

  SolveStatus run() {
    SolveStatus st;
    // Phase 1: minimize the sum of artificial variables.
    if (artificial_from_ < n_) {
      Vector phase1(n_, 0.0);
      for (std::size_t j = artificial_from_; j < n_; ++j) phase1[j] = 1.0;
      load_objective(phase1);
      if (iterate(n_, st.iterations) != SolveOutcome::optimal)
        throw Error("simplex: phase 1 reported unbounded, which cannot happen");
      double rhs_scale = 1.0;
      for (std::size_t i = 0; i < m_; ++i) rhs_scale = std::max(rhs_scale, std::abs(t_(i, n_)));
      if (-t_(m_, n_) > kFeasibilityTolerance * rhs_scale) {
        st.status = SolveOutcome::infeasible;
        return st;
      }
      drive_out_artificials();
    }
    load_objective(cost_);
    const SolveOutcome out = iterate(artificial_from_, st.iterations);
    st.status = out;
    if (out != SolveOutcome::optimal) return st;
    st.solution.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] != kDropped) st.solution[basis_[i]] = t_(i, n_);
    st.objective = -t_(m_, n_);
    return st;
  }

 private:
  static constexpr std::size_t kDropped = std::numeric_limits<std::size_t>::max();

  void load_objective(const Vector& c) {
    for (std::size_t j = 0; j <= n_; ++j) t_(m_, j) = j < n_ ? c[j] : 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] == kDropped) continue;
      const double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) t_(m_, j) -= cb * t_(i, j);
    }
  }

  void pivot(std::size_t r, std::size_t e) {
    const double p = t_(r, e);
    for (std::size_t j = 0; j <= n_; ++j) t_(r, j) /= p;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, e);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) t_(i, j) -= f * t_(r, j);
      t_(i, e) = 0.0;
    }
    basis_[r] = e;
  }

  // Columns at index >= column_limit never enter the basis.
  SolveOutcome iterate(std::size_t column_limit, std::size_t& iterations) {
    const std::size_t cap = 50 * (m_ + n_ + 10);
    for (std::size_t it = 0; it < cap; ++it) {
      std::size_t enter = kDropped;
      for (std::size_t j = 0; j < column_limit; ++j)
        if (t_(m_, j) < -kTableauZero) {
          enter = j;
          break;
        }
      if (enter == kDropped) return SolveOutcome::optimal;
      std::size_t leave = kDropped;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        if (basis_[i] == kDropped || t_(i, enter) <= kTableauZero) continue;
        const double ratio = t_(i, n_) / t_(i, enter);
        if (ratio < best - kTableauZero ||
            (std::abs(ratio - best) <= kTableauZero && basis_[i] < basis_[leave])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave == kDropped) return SolveOutcome::unbounded;
      pivot(leave, enter);
      ++iterations;
    }
    throw Error("simplex: iteration limit reached");
  }

  void drive_out_artificials() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < artificial_from_) continue;
      std::size_t col = kDropped;
      for (std::size_t j = 0; j < artificial_from_; ++j)
        if (std::abs(t_(i, j)) > kTableauZero) {
          col = j;
          break;
        }
      if (col == kDropped)
        basis_[i] = kDropped;  // redundant equality row
      else
        pivot(i, col);
    }
  }

  std::size_t m_, n_, artificial_from_;
  Matrix t_;
  Vector cost_;
  std::vector<std::size_t> basis_;
};

}  // namespace detail

// Solves a linear program with the two-phase simplex method and Bland's rule.
// Infeasible and unbounded programs are reported through the status, not thrown.
inline SolveStatus solve_lp(const LinearProgram& lp) {
  lp.validate();
  const std::size_t n = lp.variables();

  // Map each original variable onto non-negative columns: x = offset + sum(sign * y).
  struct Column {
    std::size_t var;
    double sign;
  };
  std::vector<Column> cols;
  Vector offset(n, 0.0);
  Matrix rows_a(0, n);
  Vector rows_b;
  for (std::size_t i = 0; i < lp.a.rows(); ++i) {
    rows_a.append_row(lp.a.row(i));
    rows_b.push_back(lp.b[i]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const auto lo = lp.lower.empty() ? std::nullopt : lp.lower[j];
    const auto hi = lp.upper.empty() ? std::nullopt : lp.upper[j];
    if (lo) {
      offset[j] = *lo;
      cols.push_back({j, 1.0});
      if (hi) {
        Vector unit(n, 0.0);
        unit[j] = 1.0;
        rows_a.append_row(unit);
        rows_b.push_back(*hi);
      }
    } else if (hi) {
      offset[j] = *hi;
      cols.push_back({j, -1.0});
    } else {
      cols.push_back({j, 1.0});
      cols.push_back({j, -1.0});
    }
  }

  const std::size_t m = rows_a.rows();
  const std::size_t ny = cols.size();
  // Row i: (A T) y + s_i = b_i - A offset, flipped when the right-hand side is negative.
  std::vector<bool> flipped(m, false);
  std::size_t n_art = 0;
  Vector rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    rhs[i] = rows_b[i] - dot(rows_a.row(i), offset);
    if (rhs[i] < 0.0) {
      flipped[i] = true;
      ++n_art;
    }
  }
  const std::size_t total = ny + m + n_art;
  Matrix eq(m, total);
  Vector eq_b(m);
  std::size_t art = ny + m;
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = flipped[i] ? -1.0 : 1.0;
    for (std::size_t k = 0; k < ny; ++k) eq(i, k) = s * rows_a(i, cols[k].var) * cols[k].sign;
    eq(i, ny + i) = s;
    eq_b[i] = s * rhs[i];
    if (flipped[i]) {
      eq(i, art) = 1.0;
      basis[i] = art++;
    } else {
      basis[i] = ny + i;
    }
  }
  Vector cost(total, 0.0);
  const double dir = lp.sense == Sense::maximize ? -1.0 : 1.0;
  for (std::size_t k = 0; k < ny; ++k) cost[k] = dir * lp.objective[cols[k].var] * cols[k].sign;

  detail::TableauSimplex simplex(eq, eq_b, cost, ny + m);
  for (std::size_t i = 0; i < m; ++i) simplex.set_basis(i, basis[i]);
  SolveStatus raw = simplex.run();

  SolveStatus st;
  st.status = raw.status;
  st.iterations = raw.iterations;
  if (!raw.optimal()) return st;
  st.solution = offset;
  for (std::size_t k = 0; k < ny; ++k) st.solution[cols[k].var] += cols[k].sign * raw.solution[k];
  st.objective = dot(lp.objective, st.solution);
  return st;
}

namespace detail {

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues; `vectors` receives eigenvectors as columns.
inline Vector symmetric_eigen(Matrix a, Matrix& vectors) {
  const std::size_t n = a.rows();
  vectors = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off <= 1e-30 * std::max(1.0, a.max_abs() * a.max_abs())) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors(k, p), vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
  }
  Vector values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return values;
}

// x = -pinv(H) g for symmetric positive semidefinite H.
inline Vector pseudo_inverse_step(const Matrix& h, std::span<const double> g) {
  const std::size_t n = h.rows();
  Matrix v;
  const Vector lambda = symmetric_eigen(h, v);
  double top = 0.0;
  for (double l : lambda) top = std::max(top, std::abs(l));
  Vector x(n, 0.0);
  if (top == 0.0) return x;
  for (std::size_t k = 0; k < n; ++k) {
    if (lambda[k] <= 1e-12 * top) continue;
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) proj += v(i, k) * g[i];
    for (std::size_t i = 0; i < n; ++i) x[i] -= v(i, k) * proj / lambda[k];
  }
  return x;
}

// Orthonormal basis (as columns) of the null space of the given rows.
inline Matrix null_space(const Matrix& rows, std::size_t n) {
  std::vector<Vector> basis;  // orthonormal basis of the row space
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    Vector r(rows.row(i).begin(), rows.row(i).end());
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) {
        const double d = dot(r, q);
        for (std::size_t k = 0; k < n; ++k) r[k] -= d * q[k];
      }
    const double nr = norm2(r);
    if (nr > 1e-10) {
      for (double& v : r) v /= nr;
      basis.push_back(std::move(r));
    }
  }
  std::vector<Vector> null;
  for (std::size_t e = 0; e < n && basis.size() + null.size() < n; ++e) {
    Vector r(n, 0.0);
    r[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        const double d = dot(r, q);
        for (std::size_t k = 0; k < n; ++k) r[k] -= d * q[k];
      }
      for (const auto& q : null) {
        const double d = dot(r, q);
        for (std::size_t k = 0; k < n; ++k) r[k] -= d * q[k];
      }
    }
    const double nr = norm2(r);
    if (nr > 1e-8) {
      for (double& v : r) v /= nr;
      null.push_back(std::move(r));
    }
  }
  Matrix z(n, null.size());
  for (std::size_t k = 0; k < null.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) z(i, k) = null[k][i];
  return z;
}

// True when `row` is numerically independent of the rows already in `set`.
inline bool independent_of(const Matrix& set, std::span<const double> row) {
  if (set.rows() == 0) return norm2(row) > 0.0;
  const Matrix z = null_space(set, row.size());
  double proj = 0.0;
  for (std::size_t k = 0; k < z.cols(); ++k) {
    double d = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) d += z(i, k) * row[i];
    proj += d * d;
  }
  return std::sqrt(proj) > 1e-9 * std::max(1.0, norm2(row));
}

}  // namespace detail

// Solves a convex least-squares-type QP with a primal active-set method.
//
// Start point: the minimum-norm unconstrained minimizer x0 = -pinv(H) g. When x0
// is infeasible, the point of the feasible region nearest to x0 in the l1 sense
// (computed by solve_lp) is used instead. From there the method adds the
// lowest-index blocking constraint and drops the constraint with the most
// negative multiplier (lowest index on ties), so the result is deterministic.
inline SolveStatus solve_qp(const QuadraticProgram& qp) {
  qp.validate();
  const std::size_t n = qp.variables();
  Matrix a;
  Vector b;
  detail::stack_bounds(n, qp.a, qp.b, qp.lower, qp.upper, a, b);
  const std::size_t m = a.rows();

  // Objective ||Mx + v||^2 = x'(M'M)x + 2 v'Mx + v'v; gradient H x + g0.
  const Matrix mt = qp.target.transpose();
  Matrix h = mt * qp.target;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h(i, j) *= 2.0;
  Vector g0 = mt * qp.offset;
  for (double& v : g0) v *= 2.0;

  auto violation = [&](std::span<const double> x) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, dot(a.row(i), x) - b[i]);
    return worst;
  };
  auto tol_for = [&](std::size_t i) { return kFeasibilityTolerance * std::max(1.0, std::abs(b[i])); };

  SolveStatus st;
  Vector x = detail::pseudo_inverse_step(h, g0);
  bool feasible = true;
  for (std::size_t i = 0; i < m; ++i)
    if (dot(a.row(i), x) - b[i] > tol_for(i)) feasible = false;
  if (!feasible) {
    // min sum t  s.t.  x - t <= x0,  -x - t <= -x0,  A x <= b,  t >= 0.
    LinearProgram proj;
    proj.objective.assign(2 * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) proj.objective[n + j] = 1.0;
    proj.a = Matrix(0, 2 * n);
    Vector row(2 * n);
    for (std::size_t j = 0; j < n; ++j) {
      std::fill(row.begin(), row.end(), 0.0);
      row[j] = 1.0;
      row[n + j] = -1.0;
      proj.a.append_row(row);
      proj.b.push_back(x[j]);
      row[j] = -1.0;
      proj.a.append_row(row);
      proj.b.push_back(-x[j]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      std::fill(row.begin(), row.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) row[j] = a(i, j);
      proj.a.append_row(row);
      proj.b.push_back(b[i]);
    }
    proj.lower.assign(2 * n, std::nullopt);
    for (std::size_t j = 0; j < n; ++j) proj.lower[n + j] = 0.0;
    const SolveStatus start = solve_lp(proj);
    st.iterations += start.iterations;
    if (!start.optimal()) {
      st.status = SolveOutcome::infeasible;
      return st;
    }
    x.assign(start.solution.begin(), start.solution.begin() + static_cast<std::ptrdiff_t>(n));
  }

  // Working set: lowest-index independent subset of the active constraints.
  std::vector<std::size_t> work;
  auto working_rows = [&]() {
    Matrix w(0, n);
    for (std::size_t i : work) w.append_row(a.row(i));
    return w;
  };
  for (std::size_t i = 0; i < m; ++i)
    if (std::abs(dot(a.row(i), x) - b[i]) <= tol_for(i) && detail::independent_of(working_rows(), a.row(i)))
      work.push_back(i);

  const std::size_t cap = 100 * (n + m + 10);
  for (std::size_t it = 0; it < cap; ++it) {
    ++st.iterations;
    Vector grad = h * x;
    for (std::size_t i = 0; i < n; ++i) grad[i] += g0[i];

    const Matrix w = working_rows();
    const Matrix z = detail::null_space(w, n);
    Vector p(n, 0.0);
    if (z.cols() > 0) {
      const Matrix zt = z.transpose();
      const Matrix hz = zt * h * z;
      const Vector gz = zt * grad;
      p = z * detail::pseudo_inverse_step(hz, gz);
    }

    if (norm_inf(p) <= 1e-12 * (1.0 + norm_inf(x))) {
      if (work.empty()) break;
      // Multipliers from A_W' lambda = -grad (least squares; rows are independent).
      const Matrix wwt = w * w.transpose();
      const Vector rhs = w * grad;
      Vector lambda = solve_linear_system(wwt, rhs);
      for (double& l : lambda) l = -l;
      std::size_t drop = work.size();
      double most_negative = -1e-10 * (1.0 + norm_inf(grad));
      for (std::size_t k = 0; k < work.size(); ++k)
        if (lambda[k] < most_negative) {
          most_negative = lambda[k];
          drop = k;
        }
      if (drop == work.size()) break;
      work.erase(work.begin() + static_cast<std::ptrdiff_t>(drop));
      continue;
    }

    double step = 1.0;
    std::size_t blocking = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ap = dot(a.row(i), p);
      if (ap <= 1e-14 * norm2(a.row(i)) * norm2(p)) continue;
      const double ratio = std::max(0.0, (b[i] - dot(a.row(i), x)) / ap);
      if (ratio < step) {
        step = ratio;
        blocking = i;
      }
    }
    for (std::size_t k = 0; k < n; ++k) x[k] += step * p[k];
    if (blocking < m) {
      work.push_back(blocking);
      std::sort(work.begin(), work.end());
    }
    if (it + 1 == cap) throw Error("solve_qp: iteration limit reached");
  }

  if (violation(x) > kFeasibilityTolerance * (1.0 + norm_inf(b))) {
    st.status = SolveOutcome::infeasible;
    return st;
  }
  st.status = SolveOutcome::optimal;
  st.objective = qp.objective_at(x);
  st.solution = std::move(x);
  return st;
}

}  // namespace gshap
