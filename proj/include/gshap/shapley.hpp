#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gshap/coalition.hpp"
#include "gshap/errors.hpp"
#include "gshap/matrix.hpp"
#include "gshap/numsolve.hpp"

namespace gshap {

enum class Method { exact_subtractive, exact_additive, permutation_oracle, cls, sampled, smns };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::exact_subtractive: return "exact-subtractive";
    case Method::exact_additive: return "exact-additive";
    case Method::permutation_oracle: return "permutation-oracle";
    case Method::cls: return "cls";
    case Method::sampled: return "sampled";
    case Method::smns: return "smns";
  }
  return "unknown";
}

// |g(P)| at or below this leaves shares undefined.
inline constexpr double kZeroGrandThreshold = 1e-12;

struct ShapleyResult {
  GroupPartition partition;
  Vector values;
  Vector shares;  // NaN entries when shares_defined is false
  bool shares_defined = false;
  Method method = Method::cls;
  double grand = 0.0;

  double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }
};

inline ShapleyResult make_result(GroupPartition partition, Vector values, double grand, Method method) {
  ShapleyResult r{std::move(partition), std::move(values), {}, false, method, grand};
  r.shares_defined = std::abs(grand) > kZeroGrandThreshold;
  r.shares.resize(r.values.size(), std::numeric_limits<double>::quiet_NaN());
  if (r.shares_defined)
    for (std::size_t i = 0; i < r.values.size(); ++i) r.shares[i] = r.values[i] / grand;
  return r;
}

// A set function over coalitions. `pure` promises that concurrent invocation is
// safe and that repeated calls return the same value.
struct ValueFunction {
  std::function<double(CoalitionMask)> evaluate;
  bool pure = true;
  double cost_hint = 1.0;

  double operator()(CoalitionMask m) const { return evaluate(m); }
};

// Looks values up in a utility table; missing coalitions raise IncompleteTableError.
inline ValueFunction table_value_function(const UtilityTable& table) {
  return ValueFunction{[table](CoalitionMask m) { return table.at(m); }, true, 0.0};
}

// Per-run cache around a value function; each coalition is evaluated at most once.
class MemoizedValueFunction {
 public:
  explicit MemoizedValueFunction(ValueFunction vf) : vf_(std::move(vf)) {}

  double operator()(CoalitionMask m) {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(m); it != cache_.end()) return it->second;
    }
    const double v = vf_(m);
    std::lock_guard lock(mu_);
    cache_.emplace(m, v);
    return v;
  }

  // Evaluates every coalition not yet cached; concurrently when the function is pure.
  void prefetch(std::span<const CoalitionMask> masks) {
    std::vector<CoalitionMask> todo;
    {
      std::lock_guard lock(mu_);
      for (CoalitionMask m : masks)
        if (!cache_.contains(m)) todo.push_back(m);
    }
    std::sort(todo.begin(), todo.end());
    todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
    const std::size_t workers =
        vf_.pure ? std::min<std::size_t>(todo.size(), std::max(1U, std::thread::hardware_concurrency())) : 1;
    if (workers <= 1) {
      for (CoalitionMask m : todo) (*this)(m);
      return;
    }
    std::vector<double> out(todo.size());
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < todo.size(); i += workers) out[i] = vf_(todo[i]);
        });
    }
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < todo.size(); ++i) cache_.emplace(todo[i], out[i]);
  }

  std::size_t evaluations() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  ValueFunction vf_;
  mutable std::mutex mu_;
  std::map<CoalitionMask, double> cache_;
};

namespace detail {

// (s-1)!(n-s)!/n! = 1 / (n * C(n-1, s-1))
inline double shapley_coefficient(std::size_t n, std::size_t s) {
  return 1.0 / (static_cast<double>(n) * static_cast<double>(binomial(n - 1, s - 1)));
}

inline Vector cls_solve(const Matrix& a, const Vector& b, double grand) {
  const std::size_t n = a.rows();
  const Vector x = solve_linear_system(a, b);
  const Vector y = solve_linear_system(a, Vector(n, 1.0));
  const double sx = std::accumulate(x.begin(), x.end(), 0.0);
  const double sy = std::accumulate(y.begin(), y.end(), 0.0);
  const double lambda = (sx - grand) / sy;
  Vector phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = x[i] - y[i] * lambda;
  return phi;
}

// A = D'WD and b = D'Wg accumulated from coalition rows without materializing D.
inline void normal_equations(std::size_t n, std::span<const CoalitionMask> rows, std::span<const double> weights,
                             std::span<const double> utilities, Matrix& a, Vector& b) {
  a = Matrix(n, n);
  b.assign(n, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto members = rows[r].members();
    for (std::size_t i : members) {
      b[i] += weights[r] * utilities[r];
      for (std::size_t j : members) a(i, j) += weights[r];
    }
  }
}

}  // namespace detail

// Group Shapley value from the subtract-M form: sum over coalitions containing M.
inline ShapleyResult exact_shapley_subtractive(const UtilityTable& table) {
  require_complete(table);
  const std::size_t n = table.groups();
  const std::uint64_t full = table.partition().full_mask().bits();
  Vector phi(n, 0.0);
  for (std::uint64_t bits = 1; bits <= full; ++bits) {
    const CoalitionMask s(bits);
    const double coef = detail::shapley_coefficient(n, s.size());
    const double gs = *table.value(s);
    for (std::size_t m : s.members()) phi[m] += coef * (gs - *table.value(s.without(m)));
  }
  return make_result(table.partition(), std::move(phi), table.grand(), Method::exact_subtractive);
}

// Group Shapley value from the add-M form: sum over coalitions excluding M.
inline ShapleyResult exact_shapley_additive(const UtilityTable& table) {
  require_complete(table);
  const std::size_t n = table.groups();
  const std::uint64_t full = table.partition().full_mask().bits();
  Vector phi(n, 0.0);
  for (std::uint64_t bits = 0; bits < full; ++bits) {
    const CoalitionMask s(bits);
    const std::size_t k = s.size();
    // k!(n-k-1)!/n! equals the subtractive coefficient at size k+1.
    const double coef = detail::shapley_coefficient(n, k + 1);
    const double gs = *table.value(s);
    for (std::size_t m = 0; m < n; ++m)
      if (!s.contains(m)) phi[m] += coef * (*table.value(s.with(m)) - gs);
  }
  return make_result(table.partition(), std::move(phi), table.grand(), Method::exact_additive);
}

inline constexpr std::size_t kMaxPermutationGroups = 8;

// Brute-force average of marginal contributions over all orderings of the groups.
inline ShapleyResult permutation_oracle(const UtilityTable& table) {
  const std::size_t n = table.groups();
  if (n > kMaxPermutationGroups)
    throw CapacityError("permutation_oracle: at most " + std::to_string(kMaxPermutationGroups) + " groups");
  require_complete(table);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vector phi(n, 0.0);
  std::size_t count = 0;
  do {
    CoalitionMask pred;
    double prev = 0.0;
    for (std::size_t m : order) {
      const CoalitionMask next = pred.with(m);
      const double cur = *table.value(next);
      phi[m] += cur - prev;
      prev = cur;
      pred = next;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= static_cast<double>(count);
  return make_result(table.partition(), std::move(phi), table.grand(), Method::permutation_oracle);
}

// Constrained weighted least squares: minimize (g - D phi)'K(g - D phi) subject to
// sum(phi) = g(P), solved in closed form from A = D'KD and b = D'Kg.
inline ShapleyResult cls_shapley(const UtilityTable& table) {
  if (table.groups() < 2) throw DomainError("cls_shapley: at least two groups are required");
  const DesignSystem sys = build_design_system(table);
  Matrix a;
  Vector b;
  detail::normal_equations(sys.groups, sys.rows, sys.weights, sys.utilities, a, b);
  Vector phi;
  try {
    phi = detail::cls_solve(a, b, sys.grand);
  } catch (const SingularMatrixError& e) {
    throw Error(std::string("cls_shapley: normal matrix is singular (internal invariant violated): ") + e.what());
  }
  return make_result(table.partition(), std::move(phi), table.grand(), Method::cls);
}

inline constexpr std::size_t kMaxAffineGroups = 12;

// phi = L g_vec + m g(P) for g_vec in canonical coalition order.
struct AffineShapleyMap {
  Matrix linear;  // |groups| x (2^|groups| - 2)
  Vector grand_coef;

  Vector apply(std::span<const double> utilities, double grand) const {
    Vector phi = linear * utilities;
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += grand_coef[i] * grand;
    return phi;
  }
};

inline AffineShapleyMap affine_shapley_map(std::size_t n) {
  if (n < 2) throw DomainError("affine_shapley_map: at least two groups are required");
  if (n > kMaxAffineGroups)
    throw CapacityError("affine_shapley_map: at most " + std::to_string(kMaxAffineGroups) + " groups");
  const auto rows = enumerate_proper_coalitions(n);
  Vector weights;
  for (CoalitionMask m : rows) weights.push_back(kernel_weight(n, m.size()));
  Matrix a;
  Vector unused;
  detail::normal_equations(n, rows, weights, Vector(rows.size(), 0.0), a, unused);

  AffineShapleyMap map{Matrix(n, rows.size()), Vector(n)};
  Vector b(n);
  for (std::size_t c = 0; c < rows.size(); ++c) {
    // Unit utility on coalition c: b = D'K e_c.
    std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t i : rows[c].members()) b[i] = weights[c];
    const Vector col = detail::cls_solve(a, b, 0.0);
    for (std::size_t i = 0; i < n; ++i) map.linear(i, c) = col[i];
  }
  map.grand_coef = detail::cls_solve(a, Vector(n, 0.0), 1.0);
  return map;
}

inline AffineShapleyMap affine_shapley_map(const GroupPartition& partition) {
  return affine_shapley_map(partition.size());
}

struct SampledShapleyOptions {
  // Enumerate every proper coalition with exact kernel weights when q >= 2^n - 2.
  bool exhaustive = false;
};

struct SampledShapleyResult {
  ShapleyResult result;
  std::size_t distinct_coalitions = 0;  // proper coalitions evaluated
  std::size_t draws = 0;
};

// Kernel-weighted sampled estimator. Draws q proper coalitions with replacement
// with probability proportional to the Shapley kernel, weights each distinct
// coalition by its draw frequency and solves the constrained least squares.
inline SampledShapleyResult sampled_shapley(const ValueFunction& vf, const GroupPartition& partition,
                                            std::size_t q, std::uint64_t seed,
                                            SampledShapleyOptions options = {}) {
  const std::size_t n = partition.size();
  if (n < 2) throw DomainError("sampled_shapley: at least two groups are required");
  if (q < n) throw DomainError("sampled_shapley: q must be at least the number of groups");
  if (const double g0 = vf(CoalitionMask{}); g0 != 0.0)
    throw ContractViolation("sampled_shapley: value function returned " + std::to_string(g0) +
                            " for the empty coalition");

  MemoizedValueFunction memo(vf);
  std::vector<CoalitionMask> rows;
  Vector weights;

  const bool enumerate = options.exhaustive && n <= kMaxEnumeratedGroups &&
                         q >= (std::size_t{1} << n) - 2;
  if (enumerate) {
    rows = enumerate_proper_coalitions(n);
    for (CoalitionMask m : rows) weights.push_back(kernel_weight(n, m.size()));
  } else {
    // Size s has total kernel mass C(n,s) k(n,s) = n(n-1) / (s(n-s)).
    std::vector<double> size_mass(n - 1);
    for (std::size_t s = 1; s < n; ++s) size_mass[s - 1] = 1.0 / static_cast<double>(s * (n - s));
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick_size(size_mass.begin(), size_mass.end());
    std::map<CoalitionMask, std::size_t> counts;
    std::vector<std::size_t> idx(n);
    for (std::size_t draw = 0; draw < q; ++draw) {
      const std::size_t s = pick_size(rng) + 1;
      std::iota(idx.begin(), idx.end(), 0);
      std::uint64_t bits = 0;
      for (std::size_t k = 0; k < s; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(idx[k], idx[pick(rng)]);
        bits |= std::uint64_t{1} << idx[k];
      }
      ++counts[CoalitionMask(bits)];
    }
    for (const auto& [m, c] : counts) {
      rows.push_back(m);
      weights.push_back(static_cast<double>(c));
    }
  }

  std::vector<CoalitionMask> to_eval = rows;
  to_eval.push_back(partition.full_mask());
  memo.prefetch(to_eval);
  Vector utilities;
  for (CoalitionMask m : rows) utilities.push_back(memo(m));
  const double grand = memo(partition.full_mask());

  Matrix a;
  Vector b;
  detail::normal_equations(n, rows, weights, utilities, a, b);
  Vector phi;
  try {
    phi = detail::cls_solve(a, b, grand);
  } catch (const SingularMatrixError&) {
    throw DomainError("sampled_shapley: sampled coalitions do not identify every group; increase q");
  }
  SampledShapleyResult out{make_result(partition, std::move(phi), grand, Method::sampled), rows.size(), q};
  return out;
}

// Numeric design matrix with named columns, used as the background sample.
struct FeatureMatrix {
  std::vector<std::string> names;
  Matrix rows;
};

using Predictor = std::function<double(std::span<const double>)>;

// g_x(A) = E[f(x_A, X_rest)] - E[f(X)] estimated over the background rows.
// Features are matched to groups through the partition's member lists.
inline ValueFunction marginal_value_function(Predictor predictor, FeatureMatrix background, Vector x_star,
                                             const GroupPartition& partition) {
  const std::size_t p = background.names.size();
  if (background.rows.rows() == 0) throw InputError("marginal_value_function: background sample is empty");
  if (background.rows.cols() != p) throw InputError("marginal_value_function: background width does not match names");
  if (x_star.size() != p) throw InputError("marginal_value_function: x_star has the wrong dimension");
  partition.require_covers(background.names);
  std::vector<std::size_t> group_of(p);
  for (std::size_t j = 0; j < p; ++j) group_of[j] = *partition.group_of(background.names[j]);

  const std::size_t nrows = background.rows.rows();
  double base = 0.0;
  for (std::size_t r = 0; r < nrows; ++r) base += predictor(background.rows.row(r));
  base /= static_cast<double>(nrows);

  auto eval = [predictor = std::move(predictor), background = std::move(background), x_star = std::move(x_star),
               group_of = std::move(group_of), base, nrows, p](CoalitionMask m) -> double {
    if (m.empty()) return 0.0;
    Vector row(p);
    double total = 0.0;
    for (std::size_t r = 0; r < nrows; ++r) {
      const auto src = background.rows.row(r);
      for (std::size_t j = 0; j < p; ++j) row[j] = m.contains(group_of[j]) ? x_star[j] : src[j];
      total += predictor(row);
    }
    return total / static_cast<double>(nrows) - base;
  };
  return ValueFunction{std::move(eval), true, static_cast<double>(nrows)};
}

struct CeterisParibusResult {
  GroupPartition partition;
  Vector values;  // vf({M}) for each group M
  double grand = 0.0;
  bool efficiency_holds = false;
};

// One-at-a-time contributions vf({M}) measured from the void setting. This is a
// semivalue and in general does not add up to vf(P).
inline CeterisParibusResult ceteris_paribus_decomposition(const ValueFunction& vf_from_zero,
                                                          const GroupPartition& partition) {
  if (const double g0 = vf_from_zero(CoalitionMask{}); g0 != 0.0)
    throw ContractViolation("ceteris_paribus_decomposition: value function is non-zero at the empty coalition");
  CeterisParibusResult r{partition, {}, vf_from_zero(partition.full_mask()), false};
  for (std::size_t m = 0; m < partition.size(); ++m) r.values.push_back(vf_from_zero(CoalitionMask::of({m})));
  const double sum = std::accumulate(r.values.begin(), r.values.end(), 0.0);
  r.efficiency_holds = std::abs(sum - r.grand) <= 1e-8 * (1.0 + std::abs(r.grand));
  return r;
}

struct CeterisParibusComparison {
  CeterisParibusResult ceteris_paribus;
  ShapleyResult shapley;
};

// Reports the one-at-a-time contributions next to the group Shapley values of the same table.
inline CeterisParibusComparison compare_with_ceteris_paribus(const UtilityTable& table) {
  return {ceteris_paribus_decomposition(table_value_function(table), table.partition()), cls_shapley(table)};
}

}  // namespace gshap
