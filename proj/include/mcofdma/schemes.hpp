#pragma once

// Centralized schemes.
//
// Scheme A: greedy initial allocation on the chi metric, then sweeps that
// reassign one subcarrier at a time while the network throughput still grows
// by at least epsilon, then optional GP power control.
// Scheme B: the same initial allocation followed by one small GP per
// subcarrier with the equal-split powers as caps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "mcofdma/bounds.hpp"
#include "mcofdma/error.hpp"
#include "mcofdma/gp/power.hpp"
#include "mcofdma/model.hpp"

namespace mcofdma {

using gp::CondensationOptions;
using gp::GpStatus;
using gp::PowerControlResult;
using gp::SolverOptions;
using gp::SubcarrierPowers;
using gp::general_sinr_power;
using gp::high_sinr_power;
using gp::subcarrier_gp;

/// Sum over the other cells of the full-power gain user (l, k) has toward them.
inline double chi_denominator(const ChannelSet& ch, const NetworkConfig& cfg, std::size_t n, std::size_t k,
                              std::size_t l) {
  double den = 0.0;
  for (std::size_t j = 0; j < ch.num_cells(); ++j) {
    if (j != l) den += cfg.max_power(k) * ch.g(n, k, l, j);
  }
  return den;
}

/// chi = p h / sum_{j != l} p_max g_{n,k,lj}; +inf where nothing leaks out.
inline MetricMatrix chi_metric(const PowerMatrix& powers, const ChannelSet& ch, const NetworkConfig& cfg) {
  detail::check_network(ch, cfg);
  const std::size_t L = ch.num_cells(), K = ch.users_per_cell(), N = ch.subcarriers();
  MetricMatrix chi(L, Matrix::Zero(N, K));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t k = 0; k < K; ++k) {
        const double den = chi_denominator(ch, cfg, n, k, l);
        chi[l](n, k) = den > 0.0 ? powers(n, k, l) * ch.h(n, k, l) / den : std::numeric_limits<double>::infinity();
      }
    }
  }
  return chi;
}

inline GreedyResult initial_allocation(const ChannelSet& ch, const NetworkConfig& cfg) {
  return detail::greedy_allocate(ch, cfg, [&](const PowerMatrix& p, std::size_t n, std::size_t k, std::size_t l) {
    return detail::Score::of(p(n, k, l) * ch.h(n, k, l), chi_denominator(ch, cfg, n, k, l));
  });
}

enum class PowerPhase { kNone, kHighSinr, kGeneralSinr };

struct SchemeAOptions {
  double epsilon = 1e-3;        // bps/Hz/cell
  std::size_t max_sweeps = 50;  // M
  SolverOptions solver;
  CondensationOptions condensation;
};

struct SchemeAResult {
  Allocation allocation;
  PowerMatrix powers_phase1;                 // equal split
  std::optional<PowerMatrix> powers_phase2;  // GP powers when requested
  std::optional<GpStatus> power_status;
  std::vector<double> throughput_trace;      // initial value, then one entry per sweep
  std::size_t sweeps = 0;
  std::size_t reassignments = 0;

  const PowerMatrix& final_powers() const { return powers_phase2 ? *powers_phase2 : powers_phase1; }
};

namespace detail {

/// Network throughput under equal-split powers, kept up to date across
/// single-subcarrier reassignments. Only the subcarriers whose power changes
/// are re-evaluated, in the moving cell and in every cell they interfere with.
class EqualSplitTracker {
 public:
  EqualSplitTracker(const Allocation& alloc, const ChannelSet& ch, const NetworkConfig& cfg)
      : ch_(ch), cfg_(cfg), L_(cfg.num_cells), K_(cfg.users_per_cell), N_(cfg.subcarriers) {
    owner_.assign(L_, std::vector<int>(N_));
    count_.assign(L_, std::vector<std::size_t>(K_, 0));
    for (std::size_t l = 0; l < L_; ++l) {
      for (std::size_t n = 0; n < N_; ++n) {
        owner_[l][n] = alloc.owner(l, n);
        ++count_[l][static_cast<std::size_t>(owner_[l][n])];
      }
    }
    resync();
  }

  /// Recomputes interference, rates and the total from scratch.
  void resync() {
    power_.assign(L_, std::vector<double>(N_));
    for (std::size_t l = 0; l < L_; ++l) {
      for (std::size_t n = 0; n < N_; ++n) power_[l][n] = share(l, static_cast<std::size_t>(owner_[l][n]), 0);
    }
    interf_.assign(L_, std::vector<double>(N_, 0.0));
    for (std::size_t l = 0; l < L_; ++l) {
      for (std::size_t n = 0; n < N_; ++n) {
        for (std::size_t j = 0; j < L_; ++j) {
          if (j != l) interf_[l][n] += power_[j][n] * gain(n, j, owner_[j][n], l);
        }
      }
    }
    sum_ = 0.0;
    for (std::size_t l = 0; l < L_; ++l) {
      for (std::size_t n = 0; n < N_; ++n) sum_ += rate(l, n, owner_[l][n], power_[l][n], interf_[l][n]);
    }
  }

  double throughput() const { return sum_ / static_cast<double>(L_); }
  int owner(std::size_t l, std::size_t n) const { return owner_[l][n]; }

  /// Change of the rate sum (not divided by L) if subcarrier n of cell l moved to k.
  double gain_if_moved(std::size_t l, std::size_t n, std::size_t k) const {
    const auto from = static_cast<std::size_t>(owner_[l][n]);
    if (from == k) return 0.0;
    const double p_from = share(l, from, -1);
    const double p_to = share(l, k, +1);
    double delta = 0.0;
    for (std::size_t m = 0; m < N_; ++m) {
      const auto o = static_cast<std::size_t>(owner_[l][m]);
      std::size_t new_owner = o;
      double new_p;
      if (m == n) {
        new_owner = k;
        new_p = p_to;
      } else if (o == from) {
        new_p = p_from;
      } else if (o == k) {
        new_p = p_to;
      } else {
        continue;
      }
      delta += rate(l, m, static_cast<int>(new_owner), new_p, interf_[l][m]) -
               rate(l, m, static_cast<int>(o), power_[l][m], interf_[l][m]);
      for (std::size_t j = 0; j < L_; ++j) {
        if (j == l) continue;
        const double i_new = interf_[j][m] - power_[l][m] * gain(m, l, static_cast<int>(o), j) +
                             new_p * gain(m, l, static_cast<int>(new_owner), j);
        delta += rate(j, m, owner_[j][m], power_[j][m], std::max(i_new, 0.0)) -
                 rate(j, m, owner_[j][m], power_[j][m], interf_[j][m]);
      }
    }
    return delta;
  }

  void move(std::size_t l, std::size_t n, std::size_t k) {
    const auto from = static_cast<std::size_t>(owner_[l][n]);
    if (from == k) return;
    --count_[l][from];
    ++count_[l][k];
    owner_[l][n] = static_cast<int>(k);
    resync();
  }

  Allocation allocation() const {
    Allocation a(L_, K_, N_);
    for (std::size_t l = 0; l < L_; ++l) {
      for (std::size_t n = 0; n < N_; ++n) {
        a.cell(l)(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(owner_[l][n])) = 1;
      }
    }
    return a;
  }

 private:
  double share(std::size_t l, std::size_t k, int change) const {
    const auto c = static_cast<long>(count_[l][k]) + change;
    return c > 0 ? cfg_.max_power(k) / static_cast<double>(c) : 0.0;
  }
  // gain from user k of cell `from` to base station `to` on subcarrier n
  double gain(std::size_t n, std::size_t from, int k, std::size_t to) const {
    return ch_.g(n, static_cast<std::size_t>(k), from, to);
  }
  double rate(std::size_t l, std::size_t n, int k, double p, double interference) const {
    return std::log2(1.0 + p * ch_.h(n, static_cast<std::size_t>(k), l) / (cfg_.noise_power + interference));
  }

  const ChannelSet& ch_;
  const NetworkConfig& cfg_;
  std::size_t L_, K_, N_;
  std::vector<std::vector<int>> owner_;
  std::vector<std::vector<std::size_t>> count_;
  std::vector<std::vector<double>> power_;
  std::vector<std::vector<double>> interf_;
  double sum_ = 0.0;
};

}  // namespace detail

/// Sweeps cells and subcarriers in index order. Each (l, n) goes to the user
/// whose taking it raises the network throughput the most, with every user's
/// equal-split power recomputed for the move; the incumbent keeps it unless
/// someone strictly improves on it.
inline SchemeAResult iterative_improvement(const Allocation& alloc, const ChannelSet& ch, const NetworkConfig& cfg,
                                           const SchemeAOptions& options = {}) {
  detail::check_network(ch, cfg);
  if (alloc.num_cells() != cfg.num_cells || alloc.users_per_cell() != cfg.users_per_cell ||
      alloc.subcarriers() != cfg.subcarriers) {
    throw UsageError("iterative_improvement: allocation shape does not match the network configuration");
  }
  if (!alloc.is_complete()) throw UsageError("iterative_improvement: allocation must be complete");
  if (options.max_sweeps == 0) throw UsageError("iterative_improvement: max_sweeps must be >= 1");

  detail::EqualSplitTracker tracker(alloc, ch, cfg);
  SchemeAResult res;
  double c_old = tracker.throughput();
  res.throughput_trace.push_back(c_old);
  while (res.sweeps < options.max_sweeps) {
    const std::size_t moves_before = res.reassignments;
    for (std::size_t l = 0; l < cfg.num_cells; ++l) {
      for (std::size_t n = 0; n < cfg.subcarriers; ++n) {
        // Moves must beat rounding in the incremental sum to count as gains.
        const double threshold = 1e-12 * std::max(1.0, tracker.throughput() * static_cast<double>(cfg.num_cells));
        double best_gain = threshold;
        int best = -1;
        for (std::size_t k = 0; k < cfg.users_per_cell; ++k) {
          const double gain = tracker.gain_if_moved(l, n, k);
          if (gain > best_gain) {
            best_gain = gain;
            best = static_cast<int>(k);
          }
        }
        if (best >= 0) {
          tracker.move(l, n, static_cast<std::size_t>(best));
          ++res.reassignments;
        }
      }
    }
    ++res.sweeps;
    const double c_new = tracker.throughput();
    res.throughput_trace.push_back(c_new);
    const double improvement = c_new - c_old;
    c_old = c_new;
    if (improvement < options.epsilon || res.reassignments == moves_before) break;
  }
  res.allocation = tracker.allocation();
  res.powers_phase1 = equal_split_powers(res.allocation, cfg);
  return res;
}

inline SchemeAResult scheme_a(const ChannelSet& ch, const NetworkConfig& cfg, PowerPhase phase = PowerPhase::kNone,
                              const SchemeAOptions& options = {}) {
  const GreedyResult init = initial_allocation(ch, cfg);
  SchemeAResult res = iterative_improvement(init.allocation, ch, cfg, options);
  if (phase == PowerPhase::kNone) return res;
  PowerControlResult pc = high_sinr_power(res.allocation, ch, cfg, options.solver);
  if (phase == PowerPhase::kGeneralSinr && pc.status == GpStatus::kOptimal) {
    pc = general_sinr_power(res.allocation, ch, cfg, pc.powers, options.condensation);
  }
  res.power_status = pc.status;
  res.powers_phase2 = std::move(pc.powers);
  return res;
}

struct LeftoverEntry {
  std::size_t subcarrier = 0;
  std::size_t cell = 0;
  double watts = 0.0;       // p_eq - p_gp
  std::size_t targets = 0;  // unprocessed subcarriers that shared it; 0 means forfeited
};

struct SchemeBResult {
  Allocation allocation;
  PowerMatrix powers;
  std::vector<LeftoverEntry> leftover_log;
  GpStatus status = GpStatus::kOptimal;  // worst status over the per-subcarrier GPs
  std::size_t gp_iterations = 0;
};

inline SchemeBResult scheme_b(const ChannelSet& ch, const NetworkConfig& cfg, const SolverOptions& options = {}) {
  const GreedyResult init = initial_allocation(ch, cfg);
  SchemeBResult res{init.allocation, init.powers, {}, GpStatus::kOptimal, 0};
  const std::size_t L = cfg.num_cells, N = cfg.subcarriers;
  std::vector<double> caps(L);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t l = 0; l < L; ++l) {
      caps[l] = res.powers(n, static_cast<std::size_t>(res.allocation.owner(l, n)), l);
    }
    const SubcarrierPowers gp = subcarrier_gp(n, res.allocation, ch, cfg, caps, options);
    res.gp_iterations += gp.iterations;
    if (gp.status != GpStatus::kOptimal) {
      if (res.status == GpStatus::kOptimal || gp.status == GpStatus::kInfeasible) res.status = gp.status;
      continue;  // keep the caps on this subcarrier
    }
    for (std::size_t l = 0; l < L; ++l) {
      const auto k = static_cast<std::size_t>(res.allocation.owner(l, n));
      const double p = std::clamp(gp.powers[l], 0.0, caps[l]);
      res.powers(n, k, l) = p;
      const double left = caps[l] - p;
      if (!(left > 0.0)) continue;
      std::vector<std::size_t> later;
      for (std::size_t m = n + 1; m < N; ++m) {
        if (res.allocation.owner(l, m) == static_cast<int>(k)) later.push_back(m);
      }
      for (std::size_t m : later) res.powers(m, k, l) += left / static_cast<double>(later.size());
      res.leftover_log.push_back({n, l, left, later.size()});
    }
  }
  return res;
}

}  // namespace mcofdma
