#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gshap/coalition.hpp"
#include "gshap/errors.hpp"
#include "gshap/matrix.hpp"
#include "gshap/numsolve.hpp"
#include "gshap/shapley.hpp"

namespace gshap {

struct ConstraintTerm {
  CoalitionMask coalition;
  double coef = 0.0;
};

// sum(coef * g(coalition)) <= rhs
struct ConstraintRow {
  std::vector<ConstraintTerm> terms;
  double rhs = 0.0;
};

// Linear inequalities over the values of proper coalitions of an n-group partition.
class LinearConstraintSet {
 public:
  explicit LinearConstraintSet(std::size_t n_groups) : n_(n_groups) {}

  std::size_t groups() const noexcept { return n_; }
  const std::vector<ConstraintRow>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }

  void add(ConstraintRow row) {
    const std::uint64_t full = CoalitionMask::full(n_).bits();
    for (const auto& t : row.terms) {
      if (t.coalition.empty() || t.coalition.bits() >= full)
        throw InputError("LinearConstraintSet: constraint references a coalition that is not proper and non-empty");
      if (!std::isfinite(t.coef)) throw InputError("LinearConstraintSet: coefficients must be finite");
    }
    if (!std::isfinite(row.rhs)) throw InputError("LinearConstraintSet: right-hand sides must be finite");
    rows_.push_back(std::move(row));
  }

  // lo <= g(m) <= hi
  void add_box(CoalitionMask m, double lo, double hi) {
    add({{{m, -1.0}}, -lo});
    add({{{m, 1.0}}, hi});
  }

  void add_equality(CoalitionMask m, double value) { add_box(m, value, value); }

 private:
  std::size_t n_;
  std::vector<ConstraintRow> rows_;
};

enum class BoundDirection { lower, upper };

struct PartialInferenceResult {
  std::vector<SolveStatus> lower;  // SLB per group (empty when not requested)
  std::vector<SolveStatus> upper;  // SUB per group
  SolveOutcome feasibility = SolveOutcome::infeasible;
  std::optional<ShapleyResult> smns;
  Vector completed_utilities;  // canonical order; empty unless SMNS is optimal
};

namespace detail {

// The Shapley vector restricted to the missing entries:
// phi(y) = constant + slope * y, with y the missing values in canonical order,
// and the constraint set rewritten as A y <= b once observed values are substituted.
struct ReducedProblem {
  std::vector<CoalitionMask> missing;
  Vector constant;
  Matrix slope;
  Matrix a;
  Vector b;
  bool trivially_infeasible = false;
};

inline ReducedProblem reduce(const UtilityTable& table, const LinearConstraintSet& constraints) {
  const std::size_t n = table.groups();
  if (constraints.groups() != n) throw InputError("constraint set and utility table have different group counts");
  const CoalitionIndex index(n);
  const AffineShapleyMap map = affine_shapley_map(n);

  ReducedProblem r;
  r.missing = table.missing();
  const std::size_t k = r.missing.size();
  std::vector<std::size_t> var_of(index.size(), CoalitionIndex::npos);
  for (std::size_t v = 0; v < k; ++v) var_of[index.row(r.missing[v])] = v;

  r.constant.assign(n, 0.0);
  r.slope = Matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double c = map.grand_coef[i] * table.grand();
    for (std::size_t row = 0; row < index.size(); ++row) {
      if (var_of[row] != CoalitionIndex::npos)
        r.slope(i, var_of[row]) = map.linear(i, row);
      else
        c += map.linear(i, row) * *table.value(index.mask(row));
    }
    r.constant[i] = c;
  }

  r.a = Matrix(0, k);
  Vector coeffs(k);
  for (const auto& row : constraints.rows()) {
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    double rhs = row.rhs;
    for (const auto& t : row.terms) {
      const std::size_t v = var_of[index.row(t.coalition)];
      if (v == CoalitionIndex::npos)
        rhs -= t.coef * *table.value(t.coalition);
      else
        coeffs[v] += t.coef;
    }
    if (k == 0 || norm_inf(coeffs) == 0.0) {
      if (rhs < -kFeasibilityTolerance * (1.0 + std::abs(row.rhs))) r.trivially_infeasible = true;
      continue;
    }
    r.a.append_row(coeffs);
    r.b.push_back(rhs);
  }
  return r;
}

inline Vector complete_utilities(const UtilityTable& table, std::span<const CoalitionMask> missing,
                                 std::span<const double> y) {
  UtilityTable filled = table;
  for (std::size_t v = 0; v < missing.size(); ++v) filled.set(missing[v], y[v]);
  return filled.canonical_values();
}

}  // namespace detail

// Shapley lower / upper bound for one group over every completion of the
// missing entries that satisfies the constraints. The status solution holds the
// completed utility vector in canonical order; the objective holds the bound.
inline SolveStatus shapley_bound(const UtilityTable& table, const LinearConstraintSet& constraints, std::size_t group,
                                 BoundDirection direction) {
  if (group >= table.groups()) throw InputError("shapley_bound: group index out of range");
  const detail::ReducedProblem r = detail::reduce(table, constraints);
  SolveStatus st;
  if (r.trivially_infeasible) return st;
  if (r.missing.empty()) {
    st.status = SolveOutcome::optimal;
    st.objective = r.constant[group];
    st.solution = table.canonical_values();
    return st;
  }
  LinearProgram lp;
  lp.objective.assign(r.slope.row(group).begin(), r.slope.row(group).end());
  lp.a = r.a;
  lp.b = r.b;
  lp.sense = direction == BoundDirection::upper ? Sense::maximize : Sense::minimize;
  st = solve_lp(lp);
  if (!st.optimal()) return st;
  st.objective += r.constant[group];
  st.solution = detail::complete_utilities(table, r.missing, st.solution);
  return st;
}

// Completion of the missing entries whose Shapley vector is closest (l2) to the
// equal split g(P)/n. Bounds are not computed here; see infer_partial.
inline PartialInferenceResult shapley_minimum_norm(const UtilityTable& table, const LinearConstraintSet& constraints) {
  const std::size_t n = table.groups();
  const detail::ReducedProblem r = detail::reduce(table, constraints);
  PartialInferenceResult out;
  if (r.trivially_infeasible) return out;

  Vector y;
  if (!r.missing.empty()) {
    QuadraticProgram qp;
    qp.target = r.slope;
    qp.offset = r.constant;
    for (double& v : qp.offset) v -= table.grand() / static_cast<double>(n);
    qp.a = r.a;
    qp.b = r.b;
    const SolveStatus st = solve_qp(qp);
    if (!st.optimal()) {
      out.feasibility = st.status;
      return out;
    }
    y = st.solution;
  }
  out.feasibility = SolveOutcome::optimal;
  out.completed_utilities = detail::complete_utilities(table, r.missing, y);
  const UtilityTable filled = UtilityTable::complete(table.partition(), out.completed_utilities, table.grand());
  ShapleyResult res = cls_shapley(filled);
  res.method = Method::smns;
  out.smns = std::move(res);
  return out;
}

// SLB and SUB for every group plus the minimum norm solution.
inline PartialInferenceResult infer_partial(const UtilityTable& table, const LinearConstraintSet& constraints) {
  PartialInferenceResult out = shapley_minimum_norm(table, constraints);
  for (std::size_t j = 0; j < table.groups(); ++j) {
    out.lower.push_back(shapley_bound(table, constraints, j, BoundDirection::lower));
    out.upper.push_back(shapley_bound(table, constraints, j, BoundDirection::upper));
  }
  return out;
}

enum class BoxMode {
  difference,  // g_min <= g <= g_max on the reported differences
  level,       // bounds read on baseline-normalized levels: g_min - 1 <= g <= g_max - 1
};

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Either side may be left open.
struct ValueBox {
  std::optional<double> g_min;
  std::optional<double> g_max;
};

// Sign restrictions for a three-group table whose two pair coalitions containing
// one common group are missing. For each missing pair {i,k} with remaining group l:
//   g(i) sgn(g(k)) <= g({i,k}),  g(k) sgn(g(i)) <= g({i,k}),  g({i,k}) sgn(g(l)) <= g(P)
// plus an optional box on each missing pair (lower rows first, then upper).
inline LinearConstraintSet build_globalization_constraints(const UtilityTable& table, std::optional<ValueBox> box,
                                                           BoxMode mode = BoxMode::difference) {
  const auto unsupported = [] {
    return UnsupportedError(
        "build_globalization_constraints: expects three groups with exactly the two pair coalitions sharing one "
        "group missing; supply a constraint file for other patterns");
  };
  if (table.groups() != 3) throw unsupported();
  const auto missing = table.missing();
  if (missing.size() != 2 || missing[0].size() != 2 || missing[1].size() != 2) throw unsupported();
  const CoalitionMask shared(missing[0].bits() & missing[1].bits());
  if (shared.size() != 1) throw unsupported();

  LinearConstraintSet out(3);
  for (CoalitionMask pair : missing) {
    const auto members = pair.members();
    const std::size_t i = members[0], k = members[1];
    const auto l = static_cast<std::size_t>(std::countr_zero(CoalitionMask::full(3).bits() ^ pair.bits()));
    const double gi = table.at(CoalitionMask::of({i}));
    const double gk = table.at(CoalitionMask::of({k}));
    const double gl = table.at(CoalitionMask::of({l}));
    out.add({{{pair, -1.0}}, -gi * sign_of(gk)});
    out.add({{{pair, -1.0}}, -gk * sign_of(gi)});
    out.add({{{pair, static_cast<double>(sign_of(gl))}}, table.grand()});
  }
  if (box) {
    const double shift = mode == BoxMode::level ? 1.0 : 0.0;
    if (box->g_min && box->g_max && *box->g_min > *box->g_max)
      throw InputError("build_globalization_constraints: box lower bound exceeds upper bound");
    for (CoalitionMask pair : missing) {
      if (box->g_min) out.add({{{pair, -1.0}}, -(*box->g_min - shift)});
      if (box->g_max) out.add({{{pair, 1.0}}, *box->g_max - shift});
    }
  }
  return out;
}

}  // namespace gshap
