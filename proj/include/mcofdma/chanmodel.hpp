#pragma once

// Cell geometry, user placement and channel-gain generation.
//
// Gain model (dB): -122 - 10 gamma log10(max(d, d_ref)) - X + 10 log10(F),
// X ~ N(0, shadow_sigma_db^2) per (user, base station) link, F unit-mean
// exponential per (subcarrier, user, base station).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mcofdma/error.hpp"
#include "mcofdma/model.hpp"
#include "mcofdma/random.hpp"

namespace mcofdma {

enum class Layout { kLinear, kHex };

struct GeometryConfig {
  double cell_radius = 1.0;        // km
  double d_ref = 0.05;             // km
  double pathloss_exp = 3.0;       // gamma
  double shadow_sigma_db = 8.0;
  double bandwidth_hz = 2.0e7;
  double noise_psd = 8.6455e-15;   // W/Hz
  Layout layout = Layout::kHex;
  bool rayleigh_fading = true;     // false forces F = 1

  void check() const {
    if (!(d_ref > 0.0) || !(cell_radius > d_ref)) throw UsageError("GeometryConfig: need cell_radius > d_ref > 0");
    if (!(shadow_sigma_db >= 0.0)) throw UsageError("GeometryConfig: shadow_sigma_db must be >= 0");
    if (!(bandwidth_hz > 0.0)) throw UsageError("GeometryConfig: bandwidth_hz must be > 0");
    if (!(pathloss_exp > 0.0)) throw UsageError("GeometryConfig: pathloss_exp must be > 0");
  }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct UserPlacement {
  std::vector<Point> bs_positions;          // L
  std::vector<std::vector<Point>> users;    // L x K
};

enum class ScenarioKind { kA, kB };

/// Scenario A: users on a circle of radius `distance_km` at equally spaced
/// angles. Scenario B: users uniform over the serving disk.
struct Scenario {
  ScenarioKind kind = ScenarioKind::kA;
  double distance_km = 0.5;

  static Scenario A(double d) { return {ScenarioKind::kA, d}; }
  static Scenario B() { return {ScenarioKind::kB, 0.0}; }
};

/// Base-station sites. Hex: centre then the first ring at 2R, angles
/// 0, 60, ..., 300 degrees (L <= 7). Linear: collinear sites every 2R.
inline std::vector<Point> place_bs(const GeometryConfig& cfg, std::size_t L) {
  if (L < 1) throw UsageError("place_bs: need at least one cell");
  const double spacing = 2.0 * cfg.cell_radius;
  std::vector<Point> out;
  out.reserve(L);
  if (cfg.layout == Layout::kLinear) {
    for (std::size_t i = 0; i < L; ++i) out.push_back({spacing * static_cast<double>(i), 0.0});
    return out;
  }
  if (L > 7) throw UsageError("place_bs: hex layout supports at most 7 cells, got " + std::to_string(L));
  out.push_back({0.0, 0.0});
  for (std::size_t i = 1; i < L; ++i) {
    const double angle = std::numbers::pi / 3.0 * static_cast<double>(i - 1);
    out.push_back({spacing * std::cos(angle), spacing * std::sin(angle)});
  }
  return out;
}

inline UserPlacement place_users(const GeometryConfig& cfg, const std::vector<Point>& bs, const Scenario& scenario,
                                 std::size_t K, std::uint64_t seed) {
  cfg.check();
  if (K < 1) throw UsageError("place_users: need at least one user per cell");
  if (scenario.kind == ScenarioKind::kA &&
      !(scenario.distance_km >= cfg.d_ref && scenario.distance_km <= cfg.cell_radius)) {
    throw UsageError("place_users: scenario A distance must lie in [d_ref, cell_radius]");
  }
  UserPlacement out;
  out.bs_positions = bs;
  out.users.assign(bs.size(), {});
  Rng rng(derive_seed(seed, 0));
  for (std::size_t l = 0; l < bs.size(); ++l) {
    out.users[l].reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      double r = 0.0, theta = 0.0;
      if (scenario.kind == ScenarioKind::kA) {
        r = scenario.distance_km;
        theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(K);
      } else {
        r = cfg.cell_radius * std::sqrt(rng.uniform());
        theta = 2.0 * std::numbers::pi * rng.uniform();
      }
      out.users[l].push_back({bs[l].x + r * std::cos(theta), bs[l].y + r * std::sin(theta)});
    }
  }
  return out;
}

/// Linear power gain for a link of length `distance_km`.
inline double gain_linear(double distance_km, double shadow_db, double fading, const GeometryConfig& cfg) {
  if (!(distance_km > 0.0)) throw UsageError("gain_linear: distance must be positive");
  if (!(fading > 0.0)) throw UsageError("gain_linear: fading draw must be positive");
  const double d = std::max(distance_km, cfg.d_ref);
  const double gain_db = -122.0 - 10.0 * cfg.pathloss_exp * std::log10(d) - shadow_db + 10.0 * std::log10(fading);
  return std::pow(10.0, gain_db / 10.0);
}

/// Per-subcarrier noise power: PSD x bandwidth / N.
inline double noise_power(const GeometryConfig& cfg, std::size_t N) {
  if (N < 1) throw UsageError("noise_power: N must be >= 1");
  return cfg.noise_psd * cfg.bandwidth_hz / static_cast<double>(N);
}

inline ChannelSet generate_channels(const GeometryConfig& cfg, const UserPlacement& placement, std::size_t N,
                                    std::uint64_t seed) {
  cfg.check();
  const std::size_t L = placement.bs_positions.size();
  if (L == 0 || placement.users.size() != L) throw UsageError("generate_channels: malformed placement");
  const std::size_t K = placement.users[0].size();
  for (std::size_t l = 0; l < L; ++l) {
    if (placement.users[l].size() != K) throw UsageError("generate_channels: ragged placement");
    for (const auto& u : placement.users[l]) {
      if (distance(u, placement.bs_positions[l]) > cfg.cell_radius * (1.0 + 1e-12)) {
        throw UsageError("generate_channels: user outside its serving cell");
      }
    }
  }

  ChannelSet ch(L, K, N);
  Rng rng(derive_seed(seed, 1));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t b = 0; b < L; ++b) {
        const double shadow = cfg.shadow_sigma_db > 0.0 ? rng.normal(0.0, cfg.shadow_sigma_db) : 0.0;
        double d = distance(placement.users[l][k], placement.bs_positions[b]);
        if (d <= 0.0) d = cfg.d_ref;
        Matrix& target = (b == l) ? ch.direct(l) : ch.cross(l, b);
        for (std::size_t n = 0; n < N; ++n) {
          const double fading = cfg.rayleigh_fading ? rng.exponential() : 1.0;
          target(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = gain_linear(d, shadow, fading, cfg);
        }
      }
    }
  }
  return ch;
}

}  // namespace mcofdma
