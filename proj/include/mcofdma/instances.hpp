#pragma once

// Small hand-specified networks used as regression fixtures.

#include <vector>

#include "mcofdma/model.hpp"

namespace mcofdma::instances {

/// Two cells, two users, two subcarriers, unit noise and unit budgets.
struct WorkedExample {
  ChannelSet channels;
  NetworkConfig config;
};

inline WorkedExample motivating_example() {
  WorkedExample ex{ChannelSet(2, 2, 2), {}};
  Matrix h(2, 2);
  h << 1.0, 0.9, 0.8, 0.7;
  ex.channels.direct(0) = h;
  ex.channels.direct(1) = h;
  ex.channels.cross(0, 1) << 0.9, 0.2, 0.2, 0.9;
  ex.channels.cross(1, 0) << 0.7, 0.1, 0.1, 0.7;
  ex.config.num_cells = 2;
  ex.config.users_per_cell = 2;
  ex.config.subcarriers = 2;
  ex.config.p_max = {1.0, 1.0};
  ex.config.noise_power = 1.0;
  return ex;
}

/// Identity assignment (subcarrier n to user n) in every cell.
inline Allocation diagonal_allocation(std::size_t L) {
  return Allocation::from_owners(std::vector<std::vector<int>>(L, {0, 1}), 2);
}

/// Swapped assignment (subcarrier 0 to user 1, subcarrier 1 to user 0).
inline Allocation swapped_allocation(std::size_t L) {
  return Allocation::from_owners(std::vector<std::vector<int>>(L, {1, 0}), 2);
}

/// Two-cell power-control example; gains of order 1e-9 (direct) and
/// 1e-11 (cross). The noise power is not given with the data and is left
/// at a placeholder; callers calibrate it.
inline WorkedExample power_control_example() {
  WorkedExample ex{ChannelSet(2, 2, 2), {}};
  Matrix h(2, 2);
  h << 0.30e-9, 0.25e-9, 0.04e-9, 0.15e-9;
  ex.channels.direct(0) = h;
  ex.channels.direct(1) = h;
  ex.channels.cross(0, 1) << 0.06e-11, 0.05e-11, 0.16e-11, 0.06e-11;
  ex.channels.cross(1, 0) << 0.14e-11, 0.69e-11, 0.76e-11, 0.1935e-11;
  ex.config.num_cells = 2;
  ex.config.users_per_cell = 2;
  ex.config.subcarriers = 2;
  ex.config.p_max = {1.0, 1.0};
  ex.config.noise_power = 4.3e-13;
  return ex;
}

/// Cell 0: user 1 holds both subcarriers; cell 1: user 0 holds both.
inline Allocation power_control_allocation() {
  return Allocation::from_owners({{1, 1}, {0, 0}}, 2);
}

}  // namespace mcofdma::instances
