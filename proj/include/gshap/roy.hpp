#pragma once

// Two-sector, two-period Roy model with forward-looking period-1 sector choice,
// simulated by Monte Carlo with common random numbers.
//
// Covariates: x_si = (1, z_si) with z_si ~ N(z_mean, z_sd^2) independent across
// sectors and workers. This law is an assumption of the simulator; the model
// itself only fixes that beta_s has two components.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "gshap/coalition.hpp"
#include "gshap/errors.hpp"
#include "gshap/matrix.hpp"
#include "gshap/shapley.hpp"

namespace gshap::roy {

struct RoyParams {
  std::array<double, 2> beta1{1.0, 1.0};
  std::array<double, 2> beta2{0.5, 1.0};
  double gamma1 = 0.0;
  double gamma2 = 1.0;
  double sigma1_sq = 2.0;
  double sigma2_sq = 3.0;
  double tau = 0.0;  // cross-sector error correlation
  double rho = 0.95;  // discount factor

  void validate() const {
    if (!(sigma1_sq > 0.0) || !(sigma2_sq > 0.0)) throw ConfigError("RoyParams: error variances must be positive");
    if (!(std::abs(tau) < 1.0)) throw ConfigError("RoyParams: tau must lie in (-1, 1)");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("RoyParams: rho must lie in [0, 1]");
  }

  friend bool operator==(const RoyParams&, const RoyParams&) = default;
};

// Parameters that coalitions may switch between benchmark and counterfactual values.
inline const std::vector<std::string>& free_parameter_names() {
  static const std::vector<std::string> names{"beta1", "beta2", "gamma1", "gamma2", "sigma1_sq", "sigma2_sq"};
  return names;
}

// Held at their benchmark values; may not appear in a group.
inline const std::vector<std::string>& fixed_parameter_names() {
  static const std::vector<std::string> names{"tau", "rho"};
  return names;
}

// Copies the named parameter from `from` into `to`.
inline void splice_parameter(RoyParams& to, const RoyParams& from, const std::string& name) {
  if (name == "beta1") to.beta1 = from.beta1;
  else if (name == "beta2") to.beta2 = from.beta2;
  else if (name == "gamma1") to.gamma1 = from.gamma1;
  else if (name == "gamma2") to.gamma2 = from.gamma2;
  else if (name == "sigma1_sq") to.sigma1_sq = from.sigma1_sq;
  else if (name == "sigma2_sq") to.sigma2_sq = from.sigma2_sq;
  else if (name == "tau" || name == "rho") throw ConfigError("parameter '" + name + "' is fixed and cannot be grouped");
  else throw ConfigError("unknown Roy parameter '" + name + "'");
}

struct CovariateSpec {
  double z_mean = 0.0;
  double z_sd = 1.0;
};

struct SimConfig {
  std::size_t n_draws = 1'000'000;
  std::uint64_t seed = 20240601;
  CovariateSpec covariates;
  double q_low = 0.1;
  double q_high = 0.9;

  void validate() const {
    if (n_draws == 0) throw ConfigError("SimConfig: n_draws must be positive");
    if (!(q_low > 0.0 && q_low < q_high && q_high < 1.0))
      throw ConfigError("SimConfig: quantile levels must satisfy 0 < low < high < 1");
    if (!(covariates.z_sd >= 0.0)) throw ConfigError("SimConfig: covariate sd must be non-negative");
  }
};

struct RoyScenario {
  RoyParams benchmark;
  RoyParams counterfactual;
  GroupPartition partition;

  // Member lists must name free parameters only, and every free parameter whose
  // value differs between the two parameter sets must belong to some group.
  void validate() const {
    benchmark.validate();
    counterfactual.validate();
    if (!partition.has_members()) throw ConfigError("RoyScenario: groups need member lists");
    for (std::size_t g = 0; g < partition.size(); ++g)
      for (const auto& m : partition.members(g)) {
        RoyParams probe = benchmark;
        splice_parameter(probe, counterfactual, m);
      }
    if (benchmark.tau != counterfactual.tau || benchmark.rho != counterfactual.rho)
      throw ConfigError("RoyScenario: tau and rho are fixed and must agree between benchmark and counterfactual");
    for (const auto& name : free_parameter_names()) {
      RoyParams probe = benchmark;
      splice_parameter(probe, counterfactual, name);
      if (!(probe == benchmark) && !partition.group_of(name))
        throw ConfigError("RoyScenario: parameter '" + name + "' changes but belongs to no group");
    }
  }

  // Benchmark parameters with the counterfactual values of every group in `coalition`.
  RoyParams splice(CoalitionMask coalition) const {
    RoyParams out = benchmark;
    for (std::size_t g : coalition.members())
      for (const auto& m : partition.members(g)) splice_parameter(out, counterfactual, m);
    return out;
  }
};

struct Panel {
  Vector w1, w2;                    // realized wage levels
  Vector w2_forgone;                 // period-2 wage in the sector not chosen
  std::vector<std::uint8_t> d1, d2;  // chosen sector, 1 or 2

  std::size_t size() const noexcept { return w1.size(); }
};

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// E[max(W1, W2)] for independent log-normals log W_k ~ N(m_k, v_k).
inline double expected_max_lognormal(double m1, double v1, double m2, double v2) {
  const double s = std::sqrt(v1 + v2);
  if (s == 0.0) return std::max(std::exp(m1), std::exp(m2));
  return std::exp(m1 + v1 / 2.0) * standard_normal_cdf((m1 - m2 + v1) / s) +
         std::exp(m2 + v2 / 2.0) * standard_normal_cdf((m2 - m1 + v2) / s);
}

// Draws per independently seeded block; fixed so results do not depend on thread count.
inline constexpr std::size_t kBlockSize = 1 << 16;

namespace detail {

inline void simulate_block(const RoyParams& p, const SimConfig& cfg, std::size_t block, Panel& out) {
  const std::size_t begin = block * kBlockSize;
  const std::size_t end = std::min(cfg.n_draws, begin + kBlockSize);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  const double s1 = std::sqrt(p.sigma1_sq), s2 = std::sqrt(p.sigma2_sq);
  for (std::size_t i = begin; i < end; ++i) {
    // Draw order is fixed so every parameter set sees the same standard normals.
    const double z1 = cfg.covariates.z_mean + cfg.covariates.z_sd * normal(rng);
    const double z2 = cfg.covariates.z_mean + cfg.covariates.z_sd * normal(rng);
    const double e11 = normal(rng), e21 = normal(rng), e12 = normal(rng), e22 = normal(rng);

    const double m1 = p.beta1[0] + p.beta1[1] * z1;
    const double m2 = p.beta2[0] + p.beta2[1] * z2;
    const double w11 = std::exp(m1 + s1 * e11);
    const double w21 = std::exp(m2 + s2 * e21);
    const double cont1 = expected_max_lognormal(m1 + p.gamma1, p.sigma1_sq, m2, p.sigma2_sq);
    const double cont2 = expected_max_lognormal(m1, p.sigma1_sq, m2 + p.gamma2, p.sigma2_sq);
    const bool first = w11 + p.rho * cont1 > w21 + p.rho * cont2;

    const double l12 = m1 + (first ? p.gamma1 : 0.0) + s1 * e12;
    const double l22 = m2 + (first ? 0.0 : p.gamma2) + s2 * e22;
    const bool second = l12 > l22;
    out.w1[i] = first ? w11 : w21;
    out.d1[i] = first ? 1 : 2;
    out.w2[i] = std::exp(second ? l12 : l22);
    out.w2_forgone[i] = std::exp(second ? l22 : l12);
    out.d2[i] = second ? 1 : 2;
  }
}

}  // namespace detail

// Simulates n_draws workers over the two periods. Deterministic given the seed.
inline Panel simulate_panel(const RoyParams& params, const SimConfig& config) {
  params.validate();
  config.validate();
  if (params.tau != 0.0)
    throw UnsupportedError("simulate_panel: the closed-form continuation value requires tau = 0");
  Panel panel;
  panel.w1.resize(config.n_draws);
  panel.w2.resize(config.n_draws);
  panel.w2_forgone.resize(config.n_draws);
  panel.d1.resize(config.n_draws);
  panel.d2.resize(config.n_draws);
  const std::size_t blocks = (config.n_draws + kBlockSize - 1) / kBlockSize;
  const std::size_t workers = std::min<std::size_t>(blocks, std::max(1U, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) detail::simulate_block(params, config, b, panel);
    return panel;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t b = w; b < blocks; b += workers) detail::simulate_block(params, config, b, panel);
    });
  return panel;
}

// Order statistic at 1-based rank ceil(level * n); `values` is reordered.
inline double quantile_in_place(std::vector<double>& values, double level) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

inline double quantile(std::vector<double> values, double level) { return quantile_in_place(values, level); }

struct PeriodInequality {
  std::optional<double> between;                  // E[w | d=1] - E[w | d=2]
  std::array<std::optional<double>, 2> within;     // Q(high | s) - Q(low | s)
  double overall = 0.0;                            // Q(high) - Q(low)
};

struct InequalityMeasures {
  PeriodInequality period1, period2;
};

namespace detail {

inline PeriodInequality period_measures(const Vector& w, const std::vector<std::uint8_t>& d, double lo, double hi) {
  if (w.empty()) throw InputError("inequality_measures: empty panel");
  PeriodInequality out;
  std::array<std::vector<double>, 2> by_sector;
  std::array<double, 2> sums{0.0, 0.0};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::size_t s = d[i] == 1 ? 0 : 1;
    by_sector[s].push_back(w[i]);
    sums[s] += w[i];
  }
  for (std::size_t s = 0; s < 2; ++s)
    if (!by_sector[s].empty()) {
      const double qh = quantile_in_place(by_sector[s], hi);
      const double ql = quantile_in_place(by_sector[s], lo);
      out.within[s] = qh - ql;
    }
  if (!by_sector[0].empty() && !by_sector[1].empty())
    out.between = sums[0] / static_cast<double>(by_sector[0].size()) -
                  sums[1] / static_cast<double>(by_sector[1].size());
  std::vector<double> all = w;
  const double qh = quantile_in_place(all, hi);
  const double ql = quantile_in_place(all, lo);
  out.overall = qh - ql;
  return out;
}

}  // namespace detail

// Between-sector, within-sector and overall inequality of wage levels per period.
// Conditional measures are nullopt when a sector is empty.
inline InequalityMeasures inequality_measures(const Panel& panel, const SimConfig& config) {
  return {detail::period_measures(panel.w1, panel.d1, config.q_low, config.q_high),
          detail::period_measures(panel.w2, panel.d2, config.q_low, config.q_high)};
}

inline double overall_spread(std::vector<double> w, const SimConfig& config) {
  const double qh = quantile_in_place(w, config.q_high);
  const double ql = quantile_in_place(w, config.q_low);
  return qh - ql;
}

// f(theta): change in overall inequality (high-low quantile spread) from period 1 to period 2.
inline double overall_inequality_change(const RoyParams& params, const SimConfig& config) {
  Panel panel = simulate_panel(params, config);
  const double h1 = overall_spread(std::move(panel.w1), config);
  const double h2 = overall_spread(std::move(panel.w2), config);
  return h2 - h1;
}

// g(A) = f(theta^c_A, theta^b_rest) - f(theta^b), every evaluation using the same seed.
inline ValueFunction roy_counterfactual_value_function(RoyScenario scenario, SimConfig config) {
  scenario.validate();
  config.validate();
  const double baseline = overall_inequality_change(scenario.benchmark, config);
  auto eval = [scenario = std::move(scenario), config, baseline](CoalitionMask m) -> double {
    if (m.bits() >= (std::uint64_t{1} << scenario.partition.size()))
      throw InputError("roy value function: coalition references unknown groups");
    if (m.empty()) return 0.0;
    return overall_inequality_change(scenario.splice(m), config) - baseline;
  };
  return ValueFunction{std::move(eval), true, static_cast<double>(config.n_draws)};
}

// Evaluates the counterfactual value function on every coalition.
inline UtilityTable roy_utility_table(const RoyScenario& scenario, const SimConfig& config) {
  const ValueFunction vf = roy_counterfactual_value_function(scenario, config);
  UtilityTable table(scenario.partition, vf(scenario.partition.full_mask()));
  for (CoalitionMask m : enumerate_proper_coalitions(scenario.partition)) table.set(m, vf(m));
  return table;
}

}  // namespace gshap::roy
