#pragma once

// GP-based power control over a fixed subcarrier allocation.
//
// Variables are normalized powers x = p / cap (cap is the user budget for the
// network programs and the per-subcarrier equalization power for the
// subcarrier program), one per allocated (cell, subcarrier) link.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcofdma/error.hpp"
#include "mcofdma/gp/posynomial.hpp"
#include "mcofdma/gp/solver.hpp"
#include "mcofdma/model.hpp"

namespace mcofdma::gp {

/// Smallest normalized power used by the condensation loop.
inline constexpr double kPowerFloor = 1e-12;

/// One GP variable per allocated (l, n).
struct LinkIndex {
  struct Link {
    std::size_t l, n, k;
  };
  std::vector<Link> links;
  std::vector<std::vector<int>> var;  // var[l][n], -1 when unallocated

  explicit LinkIndex(const Allocation& alloc) : var(alloc.num_cells(), std::vector<int>(alloc.subcarriers(), -1)) {
    for (std::size_t l = 0; l < alloc.num_cells(); ++l) {
      for (std::size_t n = 0; n < alloc.subcarriers(); ++n) {
        const int k = alloc.owner(l, n);
        if (k < 0) continue;
        var[l][n] = static_cast<int>(links.size());
        links.push_back({l, n, static_cast<std::size_t>(k)});
      }
    }
  }
  std::size_t size() const { return links.size(); }
};

struct PowerControlResult {
  PowerMatrix powers;
  GpStatus status = GpStatus::kOptimal;
  std::size_t gp_iterations = 0;  // Newton steps summed over all solves
  std::size_t rounds = 0;         // GP solves performed
  /// Per round: sum over links of log2((sigma^2 + I) / (p h + sigma^2 + I)),
  /// i.e. minus L times the throughput; index 0 is the starting point.
  std::vector<double> objective_trace;
};

namespace detail {

inline void require_complete(const Allocation& alloc, const ChannelSet& ch, const NetworkConfig& cfg) {
  cfg.check();
  if (alloc.num_cells() != ch.num_cells() || alloc.users_per_cell() != ch.users_per_cell() ||
      alloc.subcarriers() != ch.subcarriers()) {
    throw UsageError("power control: allocation shape does not match the channels");
  }
  if (!alloc.is_complete()) throw UsageError("power control: allocation must be complete");
}

/// sigma^2 + I_{n,l} as a posynomial in the normalized link variables.
inline Posynomial noise_plus_interference(const LinkIndex& idx, const ChannelSet& ch, const NetworkConfig& cfg,
                                          std::size_t n, std::size_t l) {
  Posynomial f = Posynomial::constant(cfg.noise_power);
  for (std::size_t j = 0; j < ch.num_cells(); ++j) {
    if (j == l) continue;
    const int v = idx.var[j][n];
    if (v < 0) continue;
    const auto& lk = idx.links[static_cast<std::size_t>(v)];
    const double c = ch.g(n, lk.k, j, l) * cfg.max_power(lk.k);
    if (c > 0.0) f += Monomial::variable(static_cast<VarId>(v), c);
  }
  return f;
}

inline Monomial signal(const LinkIndex& idx, const ChannelSet& ch, const NetworkConfig& cfg, std::size_t v) {
  const auto& lk = idx.links[v];
  const double h = ch.h(lk.n, lk.k, lk.l);
  if (!(h > 0.0)) throw UsageError("power control: allocated link has zero direct gain");
  return Monomial::variable(static_cast<VarId>(v), h * cfg.max_power(lk.k));
}

/// Per-user budget constraints sum_n x_{l,n} <= 1.
inline void add_budgets(GpProblem& prob, const LinkIndex& idx, const Allocation& alloc) {
  for (std::size_t l = 0; l < alloc.num_cells(); ++l) {
    for (std::size_t k = 0; k < alloc.users_per_cell(); ++k) {
      Posynomial budget;
      for (std::size_t n = 0; n < alloc.subcarriers(); ++n) {
        if (alloc.allocated(n, k, l)) budget += Monomial::variable(static_cast<VarId>(idx.var[l][n]));
      }
      if (!budget.empty()) prob.inequalities.push_back(std::move(budget));
    }
  }
}

inline std::vector<double> normalized(const LinkIndex& idx, const PowerMatrix& p, const NetworkConfig& cfg) {
  std::vector<double> x(idx.size());
  for (std::size_t v = 0; v < idx.size(); ++v) {
    const auto& lk = idx.links[v];
    const double cap = cfg.max_power(lk.k);
    x[v] = std::max(p(lk.n, lk.k, lk.l), kPowerFloor * cap) / cap;
  }
  return x;
}

inline PowerMatrix denormalized(const LinkIndex& idx, std::span<const double> x, const Allocation& alloc,
                                const NetworkConfig& cfg) {
  PowerMatrix p(alloc.num_cells(), alloc.users_per_cell(), alloc.subcarriers());
  for (std::size_t v = 0; v < idx.size(); ++v) {
    const auto& lk = idx.links[v];
    p(lk.n, lk.k, lk.l) = x[v] * cfg.max_power(lk.k);
  }
  return p;
}

/// sum over links of log2((sigma^2 + I) / (p h + sigma^2 + I)).
inline double rate_objective(const Allocation& alloc, const PowerMatrix& p, const ChannelSet& ch,
                             const NetworkConfig& cfg) {
  double s = 0.0;
  for (std::size_t l = 0; l < alloc.num_cells(); ++l) {
    for (std::size_t n = 0; n < alloc.subcarriers(); ++n) {
      const int k = alloc.owner(l, n);
      const double ni = cfg.noise_power + interference(alloc, p, ch, n, l);
      s += std::log2(ni / (ni + p(n, static_cast<std::size_t>(k), l) * ch.h(n, static_cast<std::size_t>(k), l)));
    }
  }
  return s;
}

}  // namespace detail

/// The high-SINR program: minimize prod over links of (sigma^2 + I) / (p h)
/// subject to the user budgets. Variable v is p / p_max for idx.links[v].
inline GpProblem high_sinr_problem(const LinkIndex& idx, const Allocation& alloc, const ChannelSet& ch,
                                   const NetworkConfig& cfg) {
  GpProblem prob;
  prob.num_variables = idx.size();
  for (std::size_t v = 0; v < idx.size(); ++v) {
    const auto& lk = idx.links[v];
    prob.objective.push_back(detail::noise_plus_interference(idx, ch, cfg, lk.n, lk.l) /
                             detail::signal(idx, ch, cfg, v));
  }
  detail::add_budgets(prob, idx, alloc);
  return prob;
}

inline PowerControlResult high_sinr_power(const Allocation& alloc, const ChannelSet& ch, const NetworkConfig& cfg,
                                          const SolverOptions& options = {}) {
  detail::require_complete(alloc, ch, cfg);
  const LinkIndex idx(alloc);
  const GpProblem prob = high_sinr_problem(idx, alloc, ch, cfg);
  std::vector<double> x0 = detail::normalized(idx, equal_split_powers(alloc, cfg), cfg);
  for (double& x : x0) x *= 0.99;  // strictly inside the budgets
  const GpSolution sol = solve_gp(prob, x0, options);
  PowerControlResult res;
  res.status = sol.status;
  res.gp_iterations = sol.iterations;
  res.rounds = 1;
  res.powers = sol.values.empty() ? PowerMatrix(alloc.num_cells(), alloc.users_per_cell(), alloc.subcarriers())
                                  : detail::denormalized(idx, sol.values, alloc, cfg);
  if (!sol.values.empty()) res.objective_trace.push_back(detail::rate_objective(alloc, res.powers, ch, cfg));
  return res;
}

struct CondensationOptions {
  double tol = 1e-6;        // absolute change of the rate objective
  std::size_t max_rounds = 100;
  /// Allowed rise of the objective between rounds before the monotonicity
  /// invariant is declared broken (absorbs solver tolerance).
  double monotone_slack = 1e-7;
  SolverOptions solver;
};

/// Successive single condensation for the exact rate objective
/// prod (sigma^2 + I) / (p h + sigma^2 + I), started from x0.
inline PowerControlResult general_sinr_power(const Allocation& alloc, const ChannelSet& ch, const NetworkConfig& cfg,
                                             const PowerMatrix& x0, const CondensationOptions& options = {}) {
  detail::require_complete(alloc, ch, cfg);
  mcofdma::detail::check_shapes(alloc, x0, cfg.num_cells, cfg.users_per_cell, cfg.subcarriers);
  const LinkIndex idx(alloc);

  std::vector<Posynomial> numer(idx.size()), denom(idx.size());
  for (std::size_t v = 0; v < idx.size(); ++v) {
    const auto& lk = idx.links[v];
    numer[v] = detail::noise_plus_interference(idx, ch, cfg, lk.n, lk.l);
    denom[v] = numer[v] + Posynomial(detail::signal(idx, ch, cfg, v));
  }

  std::vector<double> x = detail::normalized(idx, x0, cfg);
  PowerControlResult res;
  res.powers = detail::denormalized(idx, x, alloc, cfg);
  res.objective_trace.push_back(detail::rate_objective(alloc, res.powers, ch, cfg));

  GpProblem prob;
  prob.num_variables = idx.size();
  detail::add_budgets(prob, idx, alloc);
  // Floor x >= kPowerFloor: switched-off links would otherwise underflow to
  // zero, where the next condensation is undefined.
  for (std::size_t v = 0; v < idx.size(); ++v) prob.inequalities.push_back(Monomial(kPowerFloor, {{v, -1.0}}));
  prob.objective.resize(idx.size());

  while (res.rounds < options.max_rounds) {
    for (std::size_t v = 0; v < idx.size(); ++v) prob.objective[v] = numer[v] / condense(denom[v], x);
    std::vector<double> start = x;
    for (double& v : start) v = std::max(v * (1.0 - 1e-6), 2.0 * kPowerFloor);  // strictly interior
    const GpSolution sol = solve_gp(prob, start, options.solver);
    ++res.rounds;
    res.gp_iterations += sol.iterations;
    if (sol.status == GpStatus::kInfeasible) {
      res.status = sol.status;
      return res;
    }
    const PowerMatrix cand = detail::denormalized(idx, sol.values, alloc, cfg);
    const double obj = detail::rate_objective(alloc, cand, ch, cfg);
    const double prev = res.objective_trace.back();
    if (obj > prev + options.monotone_slack * std::max(1.0, std::abs(prev))) {
      throw InternalError("successive condensation increased the objective from " + std::to_string(prev) + " to " +
                          std::to_string(obj));
    }
    if (!sol.optimal()) res.status = sol.status;
    if (obj <= prev) {
      x = sol.values;
      res.powers = cand;
      res.objective_trace.push_back(obj);
    } else {
      res.objective_trace.push_back(prev);  // within solver slack: keep the incumbent
    }
    if (std::abs(prev - res.objective_trace.back()) < options.tol) break;
  }
  return res;
}

struct SubcarrierPowers {
  std::vector<double> powers;  // per cell, watts
  GpStatus status = GpStatus::kOptimal;
  std::size_t iterations = 0;
};

/// Variable l is p_l / p_eq[l]; minimize prod_l (sigma^2 + I_{n,l}) / (p_l h_l)
/// subject to p_l <= p_eq[l].
inline GpProblem subcarrier_problem(std::size_t n, const Allocation& alloc, const ChannelSet& ch,
                                    const NetworkConfig& cfg, std::span<const double> p_eq) {
  const std::size_t L = ch.num_cells();
  GpProblem prob;
  prob.num_variables = L;
  std::vector<std::size_t> owner(L);
  for (std::size_t l = 0; l < L; ++l) {
    const int k = alloc.owner(l, n);
    if (k < 0) throw UsageError("subcarrier_gp: every cell needs an allocated user on the subcarrier");
    owner[l] = static_cast<std::size_t>(k);
    if (!(p_eq[l] > 0.0) || !std::isfinite(p_eq[l])) throw UsageError("subcarrier_gp: caps must be positive");
  }
  for (std::size_t l = 0; l < L; ++l) {
    Posynomial f = Posynomial::constant(cfg.noise_power);
    for (std::size_t j = 0; j < L; ++j) {
      if (j == l) continue;
      const double c = ch.g(n, owner[j], j, l) * p_eq[j];
      if (c > 0.0) f += Monomial::variable(j, c);
    }
    const double h = ch.h(n, owner[l], l);
    if (!(h > 0.0)) throw UsageError("subcarrier_gp: allocated link has zero direct gain");
    prob.objective.push_back(f / Monomial::variable(l, h * p_eq[l]));
    prob.inequalities.push_back(Monomial::variable(l));
  }
  return prob;
}

inline SubcarrierPowers subcarrier_gp(std::size_t n, const Allocation& alloc, const ChannelSet& ch,
                                      const NetworkConfig& cfg, std::span<const double> p_eq,
                                      const SolverOptions& options = {}) {
  cfg.check();
  const std::size_t L = ch.num_cells();
  if (n >= ch.subcarriers()) throw UsageError("subcarrier_gp: subcarrier out of range");
  if (p_eq.size() != L) throw UsageError("subcarrier_gp: need one cap per cell");
  const GpProblem prob = subcarrier_problem(n, alloc, ch, cfg, p_eq);
  const std::vector<double> x0(L, 0.5);
  const GpSolution sol = solve_gp(prob, x0, options);
  SubcarrierPowers out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.powers.resize(L);
  for (std::size_t l = 0; l < L; ++l) out.powers[l] = std::min(sol.values[l], 1.0) * p_eq[l];
  return out;
}

}  // namespace mcofdma::gp
