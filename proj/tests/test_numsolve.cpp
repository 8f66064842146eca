#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gshap/numsolve.hpp"

using namespace gshap;

namespace {

Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix q(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector v(n);
    for (auto& x : v) x = nd(rng);
    for (std::size_t k = 0; k < j; ++k) {
      double d = 0;
      for (std::size_t i = 0; i < n; ++i) d += v[i] * q(i, k);
      for (std::size_t i = 0; i < n; ++i) v[i] -= d * q(i, k);
    }
    const double nv = norm2(v);
    for (std::size_t i = 0; i < n; ++i) q(i, j) = v[i] / nv;
  }
  return q;
}

// Solves a square system by Cramer-free Gauss-Jordan with full pivoting; used only as an oracle.
bool gauss_jordan(Matrix a, Vector b, Vector& x) {
  const std::size_t n = a.rows();
  std::vector<std::size_t> col(n);
  for (std::size_t i = 0; i < n; ++i) col[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pr = k, pc = k;
    double best = 0;
    for (std::size_t i = k; i < n; ++i)
      for (std::size_t j = k; j < n; ++j)
        if (std::abs(a(i, j)) > best) best = std::abs(a(i, j)), pr = i, pc = j;
    if (best < 1e-12) return false;
    for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pr, j));
    std::swap(b[k], b[pr]);
    for (std::size_t i = 0; i < n; ++i) std::swap(a(i, k), a(i, pc));
    std::swap(col[k], col[pc]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) x[col[k]] = b[k] / a(k, k);
  return true;
}

struct VertexOracle {
  bool feasible = false;
  double best = 0;
};

// Best objective over every basic feasible point of {A x <= b}, x in R^n.
VertexOracle enumerate_vertices(const Matrix& a, const Vector& b, const Vector& c, bool maximize) {
  const std::size_t m = a.rows(), n = a.cols();
  VertexOracle out;
  std::vector<std::size_t> pick(n);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
    if (depth == n) {
      Matrix sq(n, n);
      Vector rhs(n);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < n; ++j) sq(r, j) = a(pick[r], j);
        rhs[r] = b[pick[r]];
      }
      Vector x;
      if (!gauss_jordan(sq, rhs, x)) return;
      for (std::size_t i = 0; i < m; ++i)
        if (dot(a.row(i), x) > b[i] + 1e-9) return;
      const double v = dot(c, x);
      if (!out.feasible || (maximize ? v > out.best : v < out.best)) out.best = v;
      out.feasible = true;
      return;
    }
    for (std::size_t i = start; i < m; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return out;
}

}  // namespace

TEST(LinearSystem, IdentityAndDiagonal) {
  EXPECT_EQ(solve_linear_system(Matrix::identity(3), Vector{1, 2, 3}), (Vector{1, 2, 3}));
  const Vector x = solve_linear_system(Matrix{{2, 0}, {0, 4}}, Vector{1, 1});
  EXPECT_DOUBLE_EQ(x[0], 0.5);
  EXPECT_DOUBLE_EQ(x[1], 0.25);
}

TEST(LinearSystem, RandomResidual) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    Matrix a(6, 6);
    Vector b(6);
    for (std::size_t i = 0; i < 6; ++i) {
      b[i] = nd(rng);
      for (std::size_t j = 0; j < 6; ++j) a(i, j) = nd(rng);
    }
    const Vector x = solve_linear_system(a, b);
    Vector r = a * x;
    for (std::size_t i = 0; i < 6; ++i) r[i] -= b[i];
    EXPECT_LE(norm_inf(r), 1e-10 * (1.0 + a.max_abs() * norm_inf(x)));
  }
}

TEST(LinearSystem, RecoversKnownSolutionUpToCondition1e6) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (std::size_t n : {2, 4, 8}) {
    // A = Q diag(s) Q' with singular values spread over [1e-6, 1].
    const Matrix q = random_orthogonal(n, rng);
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i) s(i, i) = std::pow(1e-6, static_cast<double>(i) / (n - 1));
    const Matrix a = q * s * q.transpose();
    Vector x0(n);
    for (auto& v : x0) v = nd(rng);
    const Vector x = solve_linear_system(a, a * x0);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], x0[i], 1e-6 * (1.0 + norm_inf(x0)));
  }
}

TEST(LinearSystem, SingularRaises) {
  EXPECT_THROW(solve_linear_system(Matrix{{1, 2}, {2, 4}}, Vector{1, 2}), SingularMatrixError);
  EXPECT_THROW(solve_linear_system(Matrix(3, 3), Vector{0, 0, 0}), SingularMatrixError);
}

TEST(LinearProgram, MaximizeUnderCap) {
  LinearProgram lp;
  lp.objective = {1.0};
  lp.a = Matrix{{1.0}, {-1.0}};
  lp.b = {3.0, 0.03};
  lp.sense = Sense::maximize;
  const auto st = solve_lp(lp);
  ASSERT_TRUE(st.optimal());
  EXPECT_NEAR(st.objective, 3.0, 1e-12);
  EXPECT_NEAR(st.solution[0], 3.0, 1e-12);
}

TEST(LinearProgram, Infeasible) {
  LinearProgram lp;
  lp.objective = {1.0};
  lp.a = Matrix{{-1.0}, {1.0}};  // x >= -0.03, x <= -0.06
  lp.b = {0.03, -0.06};
  EXPECT_EQ(solve_lp(lp).status, SolveOutcome::infeasible);
}

TEST(LinearProgram, Unbounded) {
  LinearProgram lp;
  lp.objective = {1.0, 1.0};
  lp.a = Matrix{{-1.0, 0.0}};
  lp.b = {0.0};
  lp.sense = Sense::maximize;
  EXPECT_EQ(solve_lp(lp).status, SolveOutcome::unbounded);
}

TEST(LinearProgram, VariableBounds) {
  LinearProgram lp;
  lp.objective = {1.0, -2.0};
  lp.a = Matrix(0, 2);
  lp.lower = {-1.0, std::nullopt};
  lp.upper = {std::nullopt, 4.0};
  const auto st = solve_lp(lp);
  ASSERT_TRUE(st.optimal());
  EXPECT_NEAR(st.objective, -1.0 - 8.0, 1e-12);
  EXPECT_THROW(solve_lp(LinearProgram{{1.0}, Matrix(0, 1), {}, {2.0}, {1.0}}), InputError);
}

TEST(LinearProgram, DegenerateCyclingExampleTerminates) {
  // Beale's example: cycles under the textbook largest-coefficient rule.
  LinearProgram lp;
  lp.objective = {-0.75, 150.0, -0.02, 6.0};
  lp.a = Matrix{{0.25, -60.0, -0.04, 9.0}, {0.5, -90.0, -0.02, 3.0}, {0.0, 0.0, 1.0, 0.0}};
  lp.b = {0.0, 0.0, 1.0};
  lp.lower = {0.0, 0.0, 0.0, 0.0};
  const auto st = solve_lp(lp);
  ASSERT_TRUE(st.optimal());
  EXPECT_NEAR(st.objective, -0.05, 1e-10);
}

TEST(LinearProgram, MatchesVertexEnumeration) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int feasible = 0, infeasible = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rep % 2;
    const std::size_t extra = 1 + rep % 3;  // plus a 2n-row box keeps every instance bounded
    Matrix a(0, n);
    Vector b;
    Vector row(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::fill(row.begin(), row.end(), 0.0);
      row[j] = 1.0;
      a.append_row(row);
      b.push_back(2.0);
      row[j] = -1.0;
      a.append_row(row);
      b.push_back(2.0);
    }
    for (std::size_t k = 0; k < extra; ++k) {
      for (auto& v : row) v = u(rng);
      a.append_row(row);
      b.push_back(u(rng) * 1.5);
    }
    Vector c(n);
    for (auto& v : c) v = u(rng);
    const bool maximize = rep % 2 == 0;
    const auto oracle = enumerate_vertices(a, b, c, maximize);
    const auto st = solve_lp(LinearProgram{c, a, b, {}, {}, maximize ? Sense::maximize : Sense::minimize});
    if (!oracle.feasible) {
      ++infeasible;
      EXPECT_EQ(st.status, SolveOutcome::infeasible);
      continue;
    }
    ++feasible;
    ASSERT_TRUE(st.optimal()) << "rep " << rep;
    EXPECT_NEAR(st.objective, oracle.best, 1e-8);
    for (std::size_t i = 0; i < a.rows(); ++i) EXPECT_LE(dot(a.row(i), st.solution), b[i] + 1e-8);
  }
  EXPECT_GT(feasible, 50);
  EXPECT_GT(infeasible, 0);
}

TEST(QuadraticProgram, ProjectionOntoHalfLine) {
  QuadraticProgram qp;
  qp.target = Matrix{{1.0}};
  qp.offset = {-1.0};
  qp.a = Matrix{{1.0}};
  qp.b = {0.5};
  const auto st = solve_qp(qp);
  ASSERT_TRUE(st.optimal());
  EXPECT_NEAR(st.solution[0], 0.5, 1e-12);
  EXPECT_NEAR(st.objective, 0.25, 1e-12);
}

TEST(QuadraticProgram, BoxedMinimumNorm) {
  QuadraticProgram qp;
  qp.target = Matrix{{1.0}};
  qp.offset = {0.0};
  qp.a = Matrix(0, 1);
  qp.lower = {1.0};
  qp.upper = {2.0};
  const auto st = solve_qp(qp);
  ASSERT_TRUE(st.optimal());
  EXPECT_NEAR(st.solution[0], 1.0, 1e-12);
}

TEST(QuadraticProgram, InfeasibleRegion) {
  QuadraticProgram qp;
  qp.target = Matrix{{1.0}};
  qp.offset = {0.0};
  qp.a = Matrix{{-1.0}, {1.0}};
  qp.b = {0.03, -0.06};
  EXPECT_EQ(solve_qp(qp).status, SolveOutcome::infeasible);
}

TEST(QuadraticProgram, RankDeficientTarget) {
  // Objective depends on x0 + x1 only; the constraint pins a face.
  QuadraticProgram qp;
  qp.target = Matrix{{1.0, 1.0}};
  qp.offset = {-3.0};
  qp.a = Matrix{{1.0, 0.0}, {0.0, 1.0}};
  qp.b = {1.0, 1.0};
  const auto st = solve_qp(qp);
  ASSERT_TRUE(st.optimal());
  EXPECT_NEAR(st.objective, 1.0, 1e-10);
  EXPECT_NEAR(st.solution[0] + st.solution[1], 2.0, 1e-10);
}

namespace {

struct RandomQp {
  QuadraticProgram qp;
  Vector lo, hi;
};

// Four variables in a small box plus one general cut through its interior.
RandomQp random_boxed_qp(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RandomQp r;
  const std::size_t n = 4, rows = 3 + rng() % 3;
  r.qp.target = Matrix(rows, n);
  r.qp.offset.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    r.qp.offset[i] = u(rng);
    for (std::size_t j = 0; j < n; ++j) r.qp.target(i, j) = u(rng);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double c = u(rng);
    r.lo.push_back(c - 0.02);
    r.hi.push_back(c + 0.02);
    r.qp.lower.push_back(c - 0.02);
    r.qp.upper.push_back(c + 0.02);
  }
  Vector cut(n), mid(n);
  for (std::size_t j = 0; j < n; ++j) {
    cut[j] = u(rng);
    mid[j] = 0.5 * (r.lo[j] + r.hi[j]);
  }
  r.qp.a = Matrix(0, n);
  r.qp.a.append_row(cut);
  r.qp.b = {dot(cut, mid) + 0.005};
  return r;
}

bool qp_feasible(const QuadraticProgram& qp, const Vector& x, double tol) {
  for (std::size_t j = 0; j < x.size(); ++j)
    if (x[j] < *qp.lower[j] - tol || x[j] > *qp.upper[j] + tol) return false;
  for (std::size_t i = 0; i < qp.a.rows(); ++i)
    if (dot(qp.a.row(i), x) > qp.b[i] + tol) return false;
  return true;
}

}  // namespace

TEST(QuadraticProgram, MatchesDenseGridSearch) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 3; ++rep) {
    const auto r = random_boxed_qp(rng);
    const auto st = solve_qp(r.qp);
    ASSERT_TRUE(st.optimal());
    // Exhaustive grid at 1e-3 spacing over the 0.04-wide box.
    const int steps = 40;
    double best = std::numeric_limits<double>::infinity();
    Vector x(4);
    for (int i0 = 0; i0 <= steps; ++i0)
      for (int i1 = 0; i1 <= steps; ++i1)
        for (int i2 = 0; i2 <= steps; ++i2)
          for (int i3 = 0; i3 <= steps; ++i3) {
            const int idx[4] = {i0, i1, i2, i3};
            for (int j = 0; j < 4; ++j) x[j] = r.lo[j] + 1e-3 * idx[j];
            if (!qp_feasible(r.qp, x, 0.0)) continue;
            best = std::min(best, r.qp.objective_at(x));
          }
    EXPECT_LE(st.objective, best + 1e-5);
    // The grid is within half a spacing of the optimum in every coordinate.
    EXPECT_GE(st.objective, best - 1e-2);
  }
}

TEST(QuadraticProgram, DominatesRandomFeasiblePoints) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const auto r = random_boxed_qp(rng);
    const auto st = solve_qp(r.qp);
    ASSERT_TRUE(st.optimal());
    EXPECT_TRUE(qp_feasible(r.qp, st.solution, 1e-8));
    int tried = 0;
    Vector x(4);
    while (tried < 1000) {
      for (int j = 0; j < 4; ++j) x[j] = std::uniform_real_distribution<double>(r.lo[j], r.hi[j])(rng);
      if (!qp_feasible(r.qp, x, 0.0)) continue;
      ++tried;
      EXPECT_LE(st.objective, r.qp.objective_at(x) + 1e-12);
    }
  }
}

TEST(QuadraticProgram, KktConditions) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rep % 4, m = 1 + rep % 5;
    QuadraticProgram qp;
    qp.target = Matrix(n + 1, n);
    qp.offset.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      qp.offset[i] = 3.0 * u(rng);
      for (std::size_t j = 0; j < n; ++j) qp.target(i, j) = u(rng);
    }
    qp.a = Matrix(m, n);
    qp.b.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      qp.b[i] = std::abs(u(rng)) * 0.5;  // origin is feasible
      for (std::size_t j = 0; j < n; ++j) qp.a(i, j) = u(rng);
    }
    const auto st = solve_qp(qp);
    ASSERT_TRUE(st.optimal());
    const Vector& x = st.solution;

    // grad = 2 M'(Mx + v)
    Vector r = qp.target * x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += qp.offset[i];
    Vector grad = qp.target.transpose() * r;
    for (auto& g : grad) g *= 2.0;

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < m; ++i) {
      const double slack = qp.b[i] - dot(qp.a.row(i), x);
      EXPECT_GE(slack, -1e-8);
      if (slack <= 1e-7) active.push_back(i);
    }
    // Non-negative least squares for grad + A_act' lambda = 0 by active subset search.
    double best_residual = norm_inf(grad);
    const std::size_t k = active.size();
    for (std::size_t subset = 1; subset < (std::size_t{1} << k); ++subset) {
      std::vector<std::size_t> rows;
      for (std::size_t t = 0; t < k; ++t)
        if (subset >> t & 1) rows.push_back(active[t]);
      Matrix at(n, rows.size());
      for (std::size_t c = 0; c < rows.size(); ++c)
        for (std::size_t j = 0; j < n; ++j) at(j, c) = qp.a(rows[c], j);
      const Matrix ata = at.transpose() * at;
      Vector atg = at.transpose() * grad;
      for (auto& v : atg) v = -v;
      Vector lambda;
      if (!gauss_jordan(ata, atg, lambda)) continue;
      bool nonneg = true;
      for (double l : lambda) nonneg = nonneg && l >= -1e-9;
      if (!nonneg) continue;
      Vector res = grad;
      const Vector al = at * lambda;
      for (std::size_t j = 0; j < n; ++j) res[j] += al[j];
      best_residual = std::min(best_residual, norm_inf(res));
    }
    EXPECT_LE(best_residual, 1e-8) << "rep " << rep;
  }
}
