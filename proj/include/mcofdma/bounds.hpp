#pragma once

// Throughput bounds from single-cell greedy allocations.
//
// The greedy engine below is shared with the centralized schemes: every
// round it gives each user a provisional equal share of its budget over the
// subcarriers it holds or could still receive in its own cell, scores every
// free (cell, subcarrier, user) triple, and assigns the best one.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mcofdma/error.hpp"
#include "mcofdma/model.hpp"

namespace mcofdma {

enum class BoundMode { kLB, kUB };

/// Per cell N x K metric values; +inf marks a zero denominator.
using MetricMatrix = std::vector<Matrix>;

struct GreedyResult {
  Allocation allocation;
  PowerMatrix powers;      // final equal-split powers
  std::size_t steps = 0;   // allocation rounds, always N * L
};

namespace detail {

inline void check_network(const ChannelSet& ch, const NetworkConfig& cfg) {
  cfg.check();
  ch.check();
  if (ch.num_cells() != cfg.num_cells || ch.users_per_cell() != cfg.users_per_cell ||
      ch.subcarriers() != cfg.subcarriers) {
    throw UsageError("channel set shape does not match the network configuration");
  }
}

/// p_max[k] / (subcarriers held by k + free subcarriers of the cell), on
/// every entry of the N x K cell matrix.
inline PowerMatrix provisional_powers(const Allocation& alloc, const NetworkConfig& cfg) {
  const std::size_t L = alloc.num_cells(), K = alloc.users_per_cell(), N = alloc.subcarriers();
  PowerMatrix p(L, K, N);
  for (std::size_t l = 0; l < L; ++l) {
    std::size_t free = 0;
    for (std::size_t n = 0; n < N; ++n) free += alloc.owner(l, n) < 0 ? 1 : 0;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t denom = alloc.subcarrier_count(l, k) + free;
      if (denom == 0) continue;
      p.cell(l).col(static_cast<Eigen::Index>(k)).setConstant(cfg.max_power(k) / static_cast<double>(denom));
    }
  }
  return p;
}

/// Ratio metric num / den where den may vanish. Infinite scores outrank
/// finite ones and are ranked among themselves by the numerator.
struct Score {
  bool infinite = false;
  double value = -std::numeric_limits<double>::infinity();

  static Score of(double num, double den) {
    if (den > 0.0) return {false, num / den};
    return {true, num};
  }
  bool operator>(const Score& o) const {
    if (infinite != o.infinite) return infinite;
    return value > o.value;
  }
};

/// Greedy loop. score(p, n, k, l) ranks candidate (n, k) in cell l given
/// provisional powers p. Strict comparison during a scan in (l, n, k) order
/// gives the lowest-index tie-break.
template <typename ScoreFn>
GreedyResult greedy_allocate(const ChannelSet& ch, const NetworkConfig& cfg, ScoreFn score) {
  check_network(ch, cfg);
  const std::size_t L = cfg.num_cells, K = cfg.users_per_cell, N = cfg.subcarriers;
  GreedyResult res{Allocation(L, K, N), {}, 0};
  for (std::size_t round = 0; round < N * L; ++round) {
    const PowerMatrix p = provisional_powers(res.allocation, cfg);
    Score best;
    std::size_t bl = L, bn = N, bk = K;
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t n = 0; n < N; ++n) {
        if (res.allocation.owner(l, n) >= 0) continue;
        for (std::size_t k = 0; k < K; ++k) {
          const Score s = score(p, n, k, l);
          if (bl == L || s > best) {
            best = s;
            bl = l;
            bn = n;
            bk = k;
          }
        }
      }
    }
    if (bl == L) throw InternalError("greedy allocation ran out of candidates");
    res.allocation.cell(bl)(static_cast<Eigen::Index>(bn), static_cast<Eigen::Index>(bk)) = 1;
    ++res.steps;
  }
  res.powers = equal_split_powers(res.allocation, cfg);
  return res;
}

}  // namespace detail

/// xi_{n,l}: interference at base station l on subcarrier n if every user of
/// every other cell transmitted there at full power.
inline double worst_case_ici(const ChannelSet& ch, const NetworkConfig& cfg, std::size_t n, std::size_t l) {
  if (l >= ch.num_cells() || n >= ch.subcarriers()) throw UsageError("worst_case_ici: index out of range");
  double xi = 0.0;
  for (std::size_t j = 0; j < ch.num_cells(); ++j) {
    if (j == l) continue;
    for (std::size_t k = 0; k < ch.users_per_cell(); ++k) xi += cfg.max_power(k) * ch.g(n, k, j, l);
  }
  return xi;
}

/// LB: p h / (xi + sigma^2); UB: p h / sigma^2.
inline MetricMatrix q_metric(const PowerMatrix& powers, const ChannelSet& ch, BoundMode mode,
                             const NetworkConfig& cfg) {
  const std::size_t L = ch.num_cells(), K = ch.users_per_cell(), N = ch.subcarriers();
  MetricMatrix q(L, Matrix::Zero(N, K));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < N; ++n) {
      const double den = cfg.noise_power + (mode == BoundMode::kLB ? worst_case_ici(ch, cfg, n, l) : 0.0);
      for (std::size_t k = 0; k < K; ++k) q[l](n, k) = powers(n, k, l) * ch.h(n, k, l) / den;
    }
  }
  return q;
}

inline GreedyResult alg1_allocate(const ChannelSet& ch, const NetworkConfig& cfg, BoundMode mode) {
  detail::check_network(ch, cfg);
  std::vector<std::vector<double>> den(cfg.num_cells, std::vector<double>(cfg.subcarriers, cfg.noise_power));
  if (mode == BoundMode::kLB) {
    for (std::size_t l = 0; l < cfg.num_cells; ++l) {
      for (std::size_t n = 0; n < cfg.subcarriers; ++n) den[l][n] += worst_case_ici(ch, cfg, n, l);
    }
  }
  return detail::greedy_allocate(ch, cfg, [&](const PowerMatrix& p, std::size_t n, std::size_t k, std::size_t l) {
    return detail::Score::of(p(n, k, l) * ch.h(n, k, l), den[l][n]);
  });
}

/// Rate of the LB allocation with the worst-case interference xi in place of
/// the actual interference.
inline double lower_bound_simple(const ChannelSet& ch, const NetworkConfig& cfg) {
  const GreedyResult g = alg1_allocate(ch, cfg, BoundMode::kLB);
  double total = 0.0;
  for (std::size_t l = 0; l < cfg.num_cells; ++l) {
    for (std::size_t n = 0; n < cfg.subcarriers; ++n) {
      const auto k = static_cast<std::size_t>(g.allocation.owner(l, n));
      total += std::log2(1.0 + g.powers(n, k, l) * ch.h(n, k, l) / (cfg.noise_power + worst_case_ici(ch, cfg, n, l)));
    }
  }
  return total / static_cast<double>(cfg.num_cells);
}

/// UB allocation evaluated as if there were no inter-cell interference.
inline double upper_bound(const ChannelSet& ch, const NetworkConfig& cfg) {
  const GreedyResult g = alg1_allocate(ch, cfg, BoundMode::kUB);
  return network_throughput(g.allocation, g.powers, ch.without_interference(), cfg);
}

/// UB allocation evaluated with the interference it actually causes.
inline double single_cell_under_ici(const ChannelSet& ch, const NetworkConfig& cfg) {
  const GreedyResult g = alg1_allocate(ch, cfg, BoundMode::kUB);
  return network_throughput(g.allocation, g.powers, ch, cfg);
}

}  // namespace mcofdma
