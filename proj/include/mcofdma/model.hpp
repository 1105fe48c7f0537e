#pragma once

// Core domain types for the multi-cell uplink OFDMA sum-rate problem:
// channel gains, subcarrier assignments, and transmit powers, plus the
// interference / throughput evaluation and feasibility checks shared by
// every allocation scheme.
//
// Indexing: cells l, j in [0, L); subcarriers n in [0, N); users k in [0, K).
// Every per-cell matrix is N x K (rows are subcarriers, columns are users).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcofdma/error.hpp"

namespace mcofdma {

using Matrix = Eigen::MatrixXd;
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Absolute slack allowed on per-user power budgets, in watts.
inline constexpr double kFeasibilityTol = 1e-9;

struct NetworkConfig {
  std::size_t num_cells = 1;        // L
  std::size_t users_per_cell = 1;   // K
  std::size_t subcarriers = 1;      // N
  std::vector<double> p_max{};      // watts, length K; empty means all 1 W
  double noise_power = 1.0;         // sigma^2 per subcarrier, watts
  double convergence_eps = 1e-3;    // bps/Hz/cell
  std::size_t max_outer_iters = 50;
  std::uint64_t rng_seed = 0;

  double max_power(std::size_t k) const { return p_max.empty() ? 1.0 : p_max.at(k); }

  /// Throws UsageError when an invariant does not hold.
  void check() const {
    if (num_cells < 1 || users_per_cell < 1 || subcarriers < 1) {
      throw UsageError("NetworkConfig: L, K and N must all be >= 1");
    }
    if (!p_max.empty() && p_max.size() != users_per_cell) {
      throw UsageError("NetworkConfig: p_max must have K entries");
    }
    for (double p : p_max) {
      if (!(p > 0.0) || !std::isfinite(p)) throw UsageError("NetworkConfig: p_max entries must be > 0");
    }
    if (!(noise_power > 0.0) || !std::isfinite(noise_power)) {
      throw UsageError("NetworkConfig: noise_power must be > 0");
    }
    if (!(convergence_eps > 0.0)) throw UsageError("NetworkConfig: convergence_eps must be > 0");
  }
};

/// Direct gains H_l and cross gains G_lj (linear scale).
///
/// cross(l, j)(n, k) is g_{n,k,lj}: the gain from user k of cell l into the
/// base station of cell j.
class ChannelSet {
 public:
  ChannelSet() = default;

  ChannelSet(std::size_t L, std::size_t K, std::size_t N)
      : L_(L), K_(K), N_(N), direct_(L, Matrix::Zero(N, K)), cross_(L * L) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t j = 0; j < L; ++j) {
        if (l != j) cross_[l * L + j] = Matrix::Zero(N, K);
      }
    }
  }

  std::size_t num_cells() const { return L_; }
  std::size_t users_per_cell() const { return K_; }
  std::size_t subcarriers() const { return N_; }

  const Matrix& direct(std::size_t l) const { return direct_.at(l); }
  Matrix& direct(std::size_t l) { return direct_.at(l); }

  const Matrix& cross(std::size_t from, std::size_t to) const { return cross_.at(cross_index(from, to)); }
  Matrix& cross(std::size_t from, std::size_t to) { return cross_.at(cross_index(from, to)); }

  double h(std::size_t n, std::size_t k, std::size_t l) const { return direct_[l](n, k); }
  /// g_{n,k,lj}
  double g(std::size_t n, std::size_t k, std::size_t l, std::size_t j) const { return cross_[l * L_ + j](n, k); }

  /// Throws UsageError on shape mismatch or negative / non-finite entries.
  void check() const {
    auto check_matrix = [&](const Matrix& m, const char* what) {
      if (static_cast<std::size_t>(m.rows()) != N_ || static_cast<std::size_t>(m.cols()) != K_) {
        throw UsageError(std::string("ChannelSet: ") + what + " has wrong shape");
      }
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double v = m.data()[i];
        if (!std::isfinite(v) || v < 0.0) throw UsageError(std::string("ChannelSet: ") + what + " has invalid entry");
      }
    };
    for (const auto& m : direct_) check_matrix(m, "H");
    for (std::size_t l = 0; l < L_; ++l) {
      for (std::size_t j = 0; j < L_; ++j) {
        if (l != j) check_matrix(cross_[l * L_ + j], "G");
      }
    }
  }

  /// Copy with every cross gain set to zero (the interference-free network).
  ChannelSet without_interference() const {
    ChannelSet out = *this;
    for (std::size_t l = 0; l < L_; ++l) {
      for (std::size_t j = 0; j < L_; ++j) {
        if (l != j) out.cross_[l * L_ + j].setZero();
      }
    }
    return out;
  }

  friend bool operator==(const ChannelSet& a, const ChannelSet& b) {
    if (a.L_ != b.L_ || a.K_ != b.K_ || a.N_ != b.N_) return false;
    for (std::size_t i = 0; i < a.direct_.size(); ++i) {
      if (a.direct_[i] != b.direct_[i]) return false;
    }
    for (std::size_t i = 0; i < a.cross_.size(); ++i) {
      if (a.cross_[i].size() != b.cross_[i].size() || a.cross_[i] != b.cross_[i]) return false;
    }
    return true;
  }

 private:
  std::size_t cross_index(std::size_t from, std::size_t to) const {
    if (from >= L_ || to >= L_ || from == to) throw UsageError("ChannelSet: invalid cross-gain cell pair");
    return from * L_ + to;
  }

  std::size_t L_ = 0, K_ = 0, N_ = 0;
  std::vector<Matrix> direct_;
  std::vector<Matrix> cross_;  // L*L, diagonal slots unused
};

/// Binary subcarrier-to-user assignment, one N x K matrix per cell.
class Allocation {
 public:
  Allocation() = default;
  Allocation(std::size_t L, std::size_t K, std::size_t N) : K_(K), N_(N), cells_(L, BinaryMatrix::Zero(N, K)) {}

  /// owners[l][n] is the user holding subcarrier n in cell l, or -1.
  static Allocation from_owners(const std::vector<std::vector<int>>& owners, std::size_t K) {
    const std::size_t L = owners.size();
    const std::size_t N = L ? owners[0].size() : 0;
    Allocation a(L, K, N);
    for (std::size_t l = 0; l < L; ++l) {
      if (owners[l].size() != N) throw UsageError("Allocation: ragged owner table");
      for (std::size_t n = 0; n < N; ++n) {
        const int k = owners[l][n];
        if (k < 0) continue;
        if (static_cast<std::size_t>(k) >= K) throw UsageError("Allocation: user index out of range");
        a.cells_[l](n, k) = 1;
      }
    }
    return a;
  }

  std::size_t num_cells() const { return cells_.size(); }
  std::size_t users_per_cell() const { return K_; }
  std::size_t subcarriers() const { return N_; }

  const BinaryMatrix& cell(std::size_t l) const { return cells_.at(l); }
  BinaryMatrix& cell(std::size_t l) { return cells_.at(l); }

  bool allocated(std::size_t n, std::size_t k, std::size_t l) const { return cells_[l](n, k) != 0; }

  /// First user holding (n, l), or -1.
  int owner(std::size_t l, std::size_t n) const {
    for (std::size_t k = 0; k < K_; ++k) {
      if (cells_[l](n, k)) return static_cast<int>(k);
    }
    return -1;
  }

  std::vector<std::vector<int>> owners() const {
    std::vector<std::vector<int>> out(cells_.size(), std::vector<int>(N_, -1));
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      for (std::size_t n = 0; n < N_; ++n) out[l][n] = owner(l, n);
    }
    return out;
  }

  /// Every row of every cell sums to exactly one.
  bool is_complete() const {
    for (const auto& m : cells_) {
      for (Eigen::Index n = 0; n < m.rows(); ++n) {
        int s = 0;
        for (Eigen::Index k = 0; k < m.cols(); ++k) s += m(n, k);
        if (s != 1) return false;
      }
    }
    return true;
  }

  std::size_t subcarrier_count(std::size_t l, std::size_t k) const {
    std::size_t c = 0;
    for (std::size_t n = 0; n < N_; ++n) c += cells_[l](n, k) ? 1 : 0;
    return c;
  }

  friend bool operator==(const Allocation& a, const Allocation& b) {
    if (a.K_ != b.K_ || a.N_ != b.N_ || a.cells_.size() != b.cells_.size()) return false;
    for (std::size_t l = 0; l < a.cells_.size(); ++l) {
      if (a.cells_[l] != b.cells_[l]) return false;
    }
    return true;
  }

 private:
  std::size_t K_ = 0, N_ = 0;
  std::vector<BinaryMatrix> cells_;
};

/// Transmit powers in watts, one N x K matrix per cell.
class PowerMatrix {
 public:
  PowerMatrix() = default;
  PowerMatrix(std::size_t L, std::size_t K, std::size_t N) : cells_(L, Matrix::Zero(N, K)) {}
  explicit PowerMatrix(std::vector<Matrix> cells) : cells_(std::move(cells)) {}

  std::size_t num_cells() const { return cells_.size(); }
  std::size_t subcarriers() const { return cells_.empty() ? 0 : static_cast<std::size_t>(cells_[0].rows()); }
  std::size_t users_per_cell() const { return cells_.empty() ? 0 : static_cast<std::size_t>(cells_[0].cols()); }

  const Matrix& cell(std::size_t l) const { return cells_.at(l); }
  Matrix& cell(std::size_t l) { return cells_.at(l); }

  double operator()(std::size_t n, std::size_t k, std::size_t l) const { return cells_[l](n, k); }
  double& operator()(std::size_t n, std::size_t k, std::size_t l) { return cells_[l](n, k); }

  /// Total power spent by user k of cell l.
  double user_total(std::size_t l, std::size_t k) const { return cells_.at(l).col(static_cast<Eigen::Index>(k)).sum(); }

  friend bool operator==(const PowerMatrix& a, const PowerMatrix& b) {
    if (a.cells_.size() != b.cells_.size()) return false;
    for (std::size_t l = 0; l < a.cells_.size(); ++l) {
      if (a.cells_[l].rows() != b.cells_[l].rows() || a.cells_[l].cols() != b.cells_[l].cols()) return false;
      if (a.cells_[l] != b.cells_[l]) return false;
    }
    return true;
  }

 private:
  std::vector<Matrix> cells_;
};

/// Each user's budget split evenly over its allocated subcarriers; users
/// without subcarriers get nothing.
inline PowerMatrix equal_split_powers(const Allocation& alloc, const NetworkConfig& cfg) {
  const std::size_t L = alloc.num_cells(), K = alloc.users_per_cell(), N = alloc.subcarriers();
  PowerMatrix p(L, K, N);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t c = alloc.subcarrier_count(l, k);
      if (c == 0) continue;
      const double share = cfg.max_power(k) / static_cast<double>(c);
      for (std::size_t n = 0; n < N; ++n) {
        if (alloc.allocated(n, k, l)) p(n, k, l) = share;
      }
    }
  }
  return p;
}

namespace detail {

inline void check_shapes(const Allocation& alloc, const PowerMatrix& powers, std::size_t L, std::size_t K,
                         std::size_t N) {
  if (alloc.num_cells() != L || alloc.users_per_cell() != K || alloc.subcarriers() != N) {
    throw UsageError("allocation shape does not match the network");
  }
  if (powers.num_cells() != L || powers.users_per_cell() != K || powers.subcarriers() != N) {
    throw UsageError("power matrix shape does not match the network");
  }
}

}  // namespace detail

/// Cumulative inter-cell interference I_{n,l} received at base station l on
/// subcarrier n.
inline double interference(const Allocation& alloc, const PowerMatrix& powers, const ChannelSet& ch, std::size_t n,
                           std::size_t l) {
  const std::size_t L = ch.num_cells(), K = ch.users_per_cell();
  if (l >= L || n >= ch.subcarriers()) throw UsageError("interference: index out of range");
  detail::check_shapes(alloc, powers, L, K, ch.subcarriers());
  double total = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    if (j == l) continue;
    for (std::size_t k = 0; k < K; ++k) {
      if (alloc.allocated(n, k, j)) total += powers(n, k, j) * ch.g(n, k, j, l);
    }
  }
  return total;
}

struct ValidationReport {
  bool shape_ok = true;
  bool one_user_per_subcarrier = true;  // constraint (3)
  bool binary = true;                   // constraint (4)
  bool power_budget = true;             // constraint (2)
  bool nonnegative_power = true;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;  // power parked on unallocated pairs

  bool ok() const { return shape_ok && one_user_per_subcarrier && binary && power_budget && nonnegative_power; }

  std::string summary() const {
    std::ostringstream os;
    os << (ok() ? "valid" : "invalid");
    for (const auto& e : errors) os << "; " << e;
    return os.str();
  }
};

inline ValidationReport validate(const Allocation& alloc, const PowerMatrix& powers, const NetworkConfig& cfg) {
  const std::size_t L = cfg.num_cells, K = cfg.users_per_cell, N = cfg.subcarriers;
  detail::check_shapes(alloc, powers, L, K, N);
  ValidationReport rep;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& a = alloc.cell(l);
    for (std::size_t n = 0; n < N; ++n) {
      int row = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const int v = a(n, k);
        if (v != 0 && v != 1) {
          rep.binary = false;
          rep.errors.push_back("non-binary alpha at cell " + std::to_string(l) + " subcarrier " + std::to_string(n));
        }
        row += v;
      }
      if (row != 1) {
        rep.one_user_per_subcarrier = false;
        rep.errors.push_back("cell " + std::to_string(l) + " subcarrier " + std::to_string(n) + " has row sum " +
                             std::to_string(row));
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      double total = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double p = powers(n, k, l);
        if (!(p >= 0.0) || !std::isfinite(p)) {
          rep.nonnegative_power = false;
          rep.errors.push_back("negative or non-finite power at cell " + std::to_string(l));
          continue;
        }
        total += p;
        if (!a(n, k) && p > kFeasibilityTol) {
          rep.warnings.push_back("power on unallocated pair (n=" + std::to_string(n) + ", k=" + std::to_string(k) +
                                 ", l=" + std::to_string(l) + ")");
        }
      }
      if (total > cfg.max_power(k) + kFeasibilityTol) {
        rep.power_budget = false;
        rep.errors.push_back("user " + std::to_string(k) + " of cell " + std::to_string(l) + " spends " +
                             std::to_string(total) + " W");
      }
    }
  }
  return rep;
}

/// Average network throughput in bps/Hz/cell:
/// (1/L) sum_l sum_k sum_n alpha log2(1 + p h / (sigma^2 + I_{n,l})).
inline double network_throughput(const Allocation& alloc, const PowerMatrix& powers, const ChannelSet& ch,
                                 const NetworkConfig& cfg) {
  const std::size_t L = ch.num_cells(), K = ch.users_per_cell(), N = ch.subcarriers();
  detail::check_shapes(alloc, powers, L, K, N);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < N; ++n) {
      int row = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const int v = alloc.cell(l)(n, k);
        if (v > 1) throw ValidationError("network_throughput: non-binary allocation");
        row += v;
      }
      if (row != 1) throw ValidationError("network_throughput: allocation is not complete");
    }
  }
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < N; ++n) {
      const int k = alloc.owner(l, n);
      const double signal = powers(n, static_cast<std::size_t>(k), l) * ch.h(n, static_cast<std::size_t>(k), l);
      if (signal <= 0.0) continue;
      total += std::log2(1.0 + signal / (cfg.noise_power + interference(alloc, powers, ch, n, l)));
    }
  }
  return total / static_cast<double>(L);
}

}  // namespace mcofdma
