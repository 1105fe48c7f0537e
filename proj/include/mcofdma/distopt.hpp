#pragma once

// Distributed per-subcarrier power control by dual decomposition.
//
// Cells first allocate subcarriers on their own (no-interference greedy) and
// start at the equal-split powers. Then, per subcarrier, each base station
// keeps log-domain copies z~_{lj} of the interference it receives from every
// other cell j. Consistency prices eta_{lj} tie the copies to the true
// log-powers; with prices fixed, each cell's Lagrangian separates and is
// minimized locally. Prices move by a diminishing subgradient step on the
// measured inconsistency. Natural log throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "mcofdma/bounds.hpp"
#include "mcofdma/error.hpp"
#include "mcofdma/model.hpp"

namespace mcofdma {

/// One subcarrier's data: the user each cell serves on it, its direct gain,
/// its power cap, and gain[j][l] from cell j's user to base station l.
struct SubcarrierLinks {
  std::size_t subcarrier = 0;
  std::vector<std::size_t> user;
  std::vector<double> direct;
  std::vector<double> cap;
  std::vector<std::vector<double>> gain;
  double noise = 1.0;

  std::size_t cells() const { return user.size(); }

  static SubcarrierLinks from(std::size_t n, const Allocation& alloc, const PowerMatrix& caps, const ChannelSet& ch,
                              const NetworkConfig& cfg) {
    const std::size_t L = cfg.num_cells;
    SubcarrierLinks s;
    s.subcarrier = n;
    s.noise = cfg.noise_power;
    s.user.resize(L);
    s.direct.resize(L);
    s.cap.resize(L);
    s.gain.assign(L, std::vector<double>(L, 0.0));
    for (std::size_t l = 0; l < L; ++l) {
      const int k = alloc.owner(l, n);
      if (k < 0) throw UsageError("distributed power control: subcarrier without owner");
      s.user[l] = static_cast<std::size_t>(k);
      s.direct[l] = ch.h(n, s.user[l], l);
      s.cap[l] = caps(n, s.user[l], l);
      if (!(s.direct[l] > 0.0) || !(s.cap[l] > 0.0)) {
        throw UsageError("distributed power control: allocated link needs positive gain and cap");
      }
    }
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t l = 0; l < L; ++l) {
        if (j != l) s.gain[j][l] = ch.g(n, s.user[j], j, l);
      }
    }
    return s;
  }
};

/// Per-subcarrier dual state. eta[l][j] and z_tilde[l][j] belong to base
/// station l and refer to interference from cell j (diagonal unused).
struct DualState {
  std::vector<std::vector<double>> eta;
  std::vector<double> lambda;
  std::vector<std::vector<double>> z_tilde;
  std::vector<double> p_tilde;
  std::size_t t = 1;
  double delta = 1.0;
  bool clamped_measurement = false;

  explicit DualState(std::size_t L = 0)
      : eta(L, std::vector<double>(L, 0.0)), lambda(L, 0.0), z_tilde(L, std::vector<double>(L, 0.0)),
        p_tilde(L, 0.0) {}

  std::size_t cells() const { return p_tilde.size(); }
};

/// Value cell `sender` passes to `receiver`: the price sender holds on the
/// interference receiver causes it. Receivers add up what they get.
struct PriceMessage {
  std::size_t sender = 0;
  std::size_t receiver = 0;
  std::size_t subcarrier = 0;
  double price = 0.0;
};

struct DistOptions {
  std::size_t rounds_max = 500;
  double delta = 1.0;
  double rho = 1.0;             // proximal weight on the log-power step
  double tol = 1e-6;            // on max |eta change| and max |p~ change|
  double price_floor = 1e-9;    // smallest -eta kept in the price projection
  double price_margin = 1e-9;   // keeps sum_j -eta_{lj} below 1
};

namespace detail {

inline double log_floor_power(double cap) { return std::log(cap * 1e-12); }

/// Euclidean projection of a onto {a_i >= lo, sum a <= s}.
inline void project_capped(std::vector<double>& a, double lo, double s) {
  for (double& v : a) v = std::max(v, lo);
  const double sum = std::accumulate(a.begin(), a.end(), 0.0);
  if (sum <= s || a.empty()) return;
  // Find tau with sum max(a_i - tau, lo) = s.
  double tl = 0.0, th = *std::max_element(a.begin(), a.end()) - lo;
  for (int it = 0; it < 200; ++it) {
    const double tau = 0.5 * (tl + th);
    double f = 0.0;
    for (double v : a) f += std::max(v - tau, lo);
    (f > s ? tl : th) = tau;
  }
  for (double& v : a) v = std::max(v - th, lo);
}

inline void project_prices(DualState& state, const DistOptions& opt) {
  const std::size_t L = state.cells();
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> a;
    for (std::size_t j = 0; j < L; ++j) {
      if (j != l) a.push_back(-state.eta[l][j]);
    }
    project_capped(a, opt.price_floor, 1.0 - opt.price_margin);
    std::size_t i = 0;
    for (std::size_t j = 0; j < L; ++j) {
      if (j != l) state.eta[l][j] = -a[i++];
    }
  }
}

inline double received_price(const DualState& state, std::size_t l) {
  double s = 0.0;
  for (std::size_t j = 0; j < state.cells(); ++j) {
    if (j != l) s += state.eta[j][l];
  }
  return s;
}

}  // namespace detail

/// Cell l's Lagrangian: ln((sigma^2 + sum_j e^{z~_lj}) / (e^{p~_l} h_l))
/// + sum_j eta_lj z~_lj - (sum_j eta_jl) p~_l + lambda_l (p~_l - ln cap_l).
inline double local_lagrangian(std::size_t l, const DualState& state, const SubcarrierLinks& links) {
  const std::size_t L = links.cells();
  if (l >= L || state.cells() != L) throw UsageError("local_lagrangian: cell out of range");
  double s = links.noise, lin = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    if (j == l) continue;
    s += std::exp(state.z_tilde[l][j]);
    lin += state.eta[l][j] * state.z_tilde[l][j];
  }
  const double p = state.p_tilde[l];
  return std::log(s) - p - std::log(links.direct[l]) + lin - detail::received_price(state, l) * p +
         state.lambda[l] * (p - std::log(links.cap[l]));
}

struct LagrangianGradient {
  double d_p = 0.0;
  std::vector<double> d_z;  // indexed by j, zero at j = l
};

inline LagrangianGradient local_lagrangian_gradient(std::size_t l, const DualState& state,
                                                    const SubcarrierLinks& links) {
  const std::size_t L = links.cells();
  LagrangianGradient g;
  g.d_z.assign(L, 0.0);
  double s = links.noise;
  for (std::size_t j = 0; j < L; ++j) {
    if (j != l) s += std::exp(state.z_tilde[l][j]);
  }
  for (std::size_t j = 0; j < L; ++j) {
    if (j != l) g.d_z[j] = std::exp(state.z_tilde[l][j]) / s + state.eta[l][j];
  }
  g.d_p = -1.0 - detail::received_price(state, l) + state.lambda[l];
  return g;
}

struct LocalSolution {
  double p_tilde = 0.0;
  std::vector<double> z_tilde;  // indexed by j
  double lambda = 0.0;
};

/// Minimizes cell l's Lagrangian plus (rho/2)(p~ - p~_prev)^2 over
/// p~ <= ln cap (and the power floor) and the copies z~_lj. Closed form:
/// with a_j = -eta_lj, e^{z~_lj} = a_j sigma^2 / (1 - sum a); the p~ step is a
/// projected proximal step on the linear price term.
inline LocalSolution local_minimize(std::size_t l, const DualState& state, const SubcarrierLinks& links,
                                    const DistOptions& opt = {}) {
  const std::size_t L = links.cells();
  if (l >= L || state.cells() != L) throw UsageError("local_minimize: cell out of range");
  LocalSolution sol;
  std::vector<double> a;
  for (std::size_t j = 0; j < L; ++j) {
    if (j != l) a.push_back(-state.eta[l][j]);
  }
  detail::project_capped(a, opt.price_floor, 1.0 - opt.price_margin);
  const double A = std::accumulate(a.begin(), a.end(), 0.0);
  sol.z_tilde.assign(L, 0.0);
  std::size_t i = 0;
  for (std::size_t j = 0; j < L; ++j) {
    if (j != l) sol.z_tilde[j] = std::log(a[i++] * links.noise / (1.0 - A));
  }
  const double coef = 1.0 + detail::received_price(state, l);
  const double hi = std::log(links.cap[l]), lo = detail::log_floor_power(links.cap[l]);
  const double unconstrained = state.p_tilde[l] + coef / opt.rho;
  sol.p_tilde = std::clamp(unconstrained, lo, hi);
  sol.lambda = sol.p_tilde == hi ? std::max(0.0, coef - opt.rho * (hi - state.p_tilde[l])) : 0.0;
  if (!std::isfinite(sol.p_tilde)) throw InternalError("local_minimize: non-finite iterate");
  for (double z : sol.z_tilde) {
    if (!std::isfinite(z)) throw InternalError("local_minimize: non-finite iterate");
  }
  return sol;
}

/// Subgradient step eta_lj += (delta / t)(z~_lj - ln measured_lj), then the
/// prices are projected back to where the local problems are bounded.
/// measured[l][j] is the interference base station l receives from cell j.
inline DualState price_update(DualState state, const std::vector<std::vector<double>>& measured,
                              const DistOptions& opt = {}) {
  const std::size_t L = state.cells();
  if (state.t < 1 || !(state.delta > 0.0)) throw UsageError("price_update: need t >= 1 and delta > 0");
  if (measured.size() != L) throw UsageError("price_update: measurement shape mismatch");
  const double step = state.delta / static_cast<double>(state.t);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t j = 0; j < L; ++j) {
      if (j == l) continue;
      double m = measured[l][j];
      if (!(m > 0.0)) {
        m = 1e-300;
        state.clamped_measurement = true;
      }
      state.eta[l][j] += step * (state.z_tilde[l][j] - std::log(m));
    }
  }
  detail::project_prices(state, opt);
  ++state.t;
  return state;
}

/// Interference base station l receives from cell j at log-powers p~.
inline std::vector<std::vector<double>> measure_interference(const DualState& state, const SubcarrierLinks& links) {
  const std::size_t L = links.cells();
  std::vector<std::vector<double>> m(L, std::vector<double>(L, 0.0));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t j = 0; j < L; ++j) {
      if (j != l) m[l][j] = std::exp(state.p_tilde[j]) * links.gain[j][l];
    }
  }
  return m;
}

/// sum_l ln((sigma^2 + I_l) / (p_l h_l)) at the state's log-powers.
inline double subcarrier_objective(const DualState& state, const SubcarrierLinks& links) {
  double f = 0.0;
  for (std::size_t l = 0; l < links.cells(); ++l) {
    double s = links.noise;
    for (std::size_t j = 0; j < links.cells(); ++j) {
      if (j != l) s += std::exp(state.p_tilde[j]) * links.gain[j][l];
    }
    f += std::log(s) - state.p_tilde[l] - std::log(links.direct[l]);
  }
  return f;
}

/// Prices consistent with the given log-powers: -eta_lj is the share of
/// base station l's noise plus interference that comes from cell j.
inline DualState warm_start(const SubcarrierLinks& links, std::vector<double> p_tilde, const DistOptions& opt = {}) {
  const std::size_t L = links.cells();
  DualState s(L);
  s.p_tilde = std::move(p_tilde);
  s.delta = opt.delta;
  const auto m = measure_interference(s, links);
  for (std::size_t l = 0; l < L; ++l) {
    double total = links.noise;
    for (std::size_t j = 0; j < L; ++j) total += m[l][j];
    for (std::size_t j = 0; j < L; ++j) {
      if (j == l) continue;
      s.eta[l][j] = -m[l][j] / total;
      s.z_tilde[l][j] = std::log(std::max(m[l][j], 1e-300));
    }
  }
  detail::project_prices(s, opt);
  return s;
}

struct RoundRecord {
  std::size_t subcarrier = 0;
  std::size_t round = 0;
  double max_price_delta = 0.0;
  double max_power_delta = 0.0;
  double objective = 0.0;
};

struct SubcarrierRun {
  std::vector<double> powers;  // per cell, watts
  std::size_t rounds = 0;
  bool converged = false;
  std::size_t messages = 0;
  bool clamped_measurement = false;
};

/// Synchronous rounds on one subcarrier: exchange prices, minimize locally,
/// measure, update prices. Returns the final iterate on convergence and the
/// best objective seen otherwise.
inline SubcarrierRun run_subcarrier(const SubcarrierLinks& links, const DistOptions& opt = {},
                                    std::vector<RoundRecord>* trace = nullptr) {
  const std::size_t L = links.cells();
  if (opt.rounds_max < 1 || !(opt.delta > 0.0) || !(opt.rho > 0.0)) {
    throw UsageError("distributed power control: need rounds_max >= 1, delta > 0, rho > 0");
  }
  std::vector<double> start(L);
  for (std::size_t l = 0; l < L; ++l) start[l] = std::log(links.cap[l]);
  DualState state = warm_start(links, start, opt);
  SubcarrierRun run;
  std::vector<double> best = state.p_tilde;
  double best_f = subcarrier_objective(state, links);
  for (std::size_t round = 1; round <= opt.rounds_max; ++round) {
    // Price exchange: every cell tells every other cell the price it holds on it.
    std::vector<PriceMessage> inbox;
    for (std::size_t sender = 0; sender < L; ++sender) {
      for (std::size_t receiver = 0; receiver < L; ++receiver) {
        if (sender != receiver) inbox.push_back({sender, receiver, links.subcarrier, state.eta[sender][receiver]});
      }
    }
    run.messages += inbox.size();

    DualState next = state;
    double dp = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const LocalSolution s = local_minimize(l, state, links, opt);
      dp = std::max(dp, std::abs(s.p_tilde - state.p_tilde[l]));
      next.p_tilde[l] = s.p_tilde;
      next.lambda[l] = s.lambda;
      for (std::size_t j = 0; j < L; ++j) {
        if (j != l) next.z_tilde[l][j] = s.z_tilde[j];
      }
    }
    next = price_update(std::move(next), measure_interference(next, links), opt);
    double de = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t j = 0; j < L; ++j) de = std::max(de, std::abs(next.eta[l][j] - state.eta[l][j]));
    }
    state = std::move(next);
    run.rounds = round;
    const double f = subcarrier_objective(state, links);
    if (f < best_f) {
      best_f = f;
      best = state.p_tilde;
    }
    if (trace) trace->push_back({links.subcarrier, round, de, dp, f});
    if (de < opt.tol && dp < opt.tol) {
      run.converged = true;
      break;
    }
  }
  run.clamped_measurement = state.clamped_measurement;
  const auto& chosen = run.converged ? state.p_tilde : best;
  run.powers.resize(L);
  for (std::size_t l = 0; l < L; ++l) run.powers[l] = std::min(std::exp(chosen[l]), links.cap[l]);
  return run;
}

struct DistributedResult {
  Allocation allocation;
  PowerMatrix powers;
  std::vector<RoundRecord> trace;
  std::vector<std::size_t> rounds;  // per subcarrier
  bool converged = true;            // every subcarrier converged
  std::size_t messages = 0;
  bool clamped_measurement = false;
};

inline DistributedResult run_distributed(const ChannelSet& ch, const NetworkConfig& cfg, const DistOptions& opt = {}) {
  const GreedyResult local = alg1_allocate(ch, cfg, BoundMode::kUB);
  DistributedResult res;
  res.allocation = local.allocation;
  res.powers = local.powers;
  for (std::size_t n = 0; n < cfg.subcarriers; ++n) {
    const SubcarrierLinks links = SubcarrierLinks::from(n, local.allocation, local.powers, ch, cfg);
    const SubcarrierRun run = run_subcarrier(links, opt, &res.trace);
    for (std::size_t l = 0; l < cfg.num_cells; ++l) res.powers(n, links.user[l], l) = run.powers[l];
    res.rounds.push_back(run.rounds);
    res.converged = res.converged && run.converged;
    res.messages += run.messages;
    res.clamped_measurement = res.clamped_measurement || run.clamped_measurement;
  }
  return res;
}

}  // namespace mcofdma
