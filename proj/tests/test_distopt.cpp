#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mcofdma/bounds.hpp"
#include "mcofdma/distopt.hpp"
#include "mcofdma/gp/power.hpp"
#include "mcofdma/instances.hpp"
#include "test_util.hpp"

using namespace mcofdma;

namespace {

SubcarrierLinks random_links(std::mt19937_64& gen, std::size_t L) {
  std::uniform_real_distribution<double> hd(0.1, 1.0), gd(0.01, 0.5), cd(0.2, 1.0), nd(0.05, 1.0);
  SubcarrierLinks s;
  s.user.assign(L, 0);
  s.gain.assign(L, std::vector<double>(L, 0.0));
  for (std::size_t l = 0; l < L; ++l) {
    s.direct.push_back(hd(gen));
    s.cap.push_back(cd(gen));
    for (std::size_t j = 0; j < L; ++j) {
      if (j != l) s.gain[l][j] = gd(gen);
    }
  }
  s.noise = nd(gen);
  return s;
}

DualState random_state(std::mt19937_64& gen, const SubcarrierLinks& links, double eta_lo, double eta_hi) {
  std::uniform_real_distribution<double> ed(eta_lo, eta_hi), zd(-4.0, 1.0), pd(-3.0, 0.0);
  const std::size_t L = links.cells();
  DualState s(L);
  for (std::size_t l = 0; l < L; ++l) {
    s.p_tilde[l] = std::log(links.cap[l]) + pd(gen);
    for (std::size_t j = 0; j < L; ++j) {
      if (j == l) continue;
      s.eta[l][j] = ed(gen);
      s.z_tilde[l][j] = zd(gen);
    }
  }
  return s;
}

double log_ratio(std::size_t l, const DualState& s, const SubcarrierLinks& links) {
  double den = links.noise;
  for (std::size_t j = 0; j < links.cells(); ++j) {
    if (j != l) den += std::exp(s.z_tilde[l][j]);
  }
  return std::log(den / (std::exp(s.p_tilde[l]) * links.direct[l]));
}

// Centralized objective gradient in log-powers, sum_l ln((sigma^2+I_l)/(p_l h_l)).
std::vector<double> centralized_gradient(const std::vector<double>& p, const SubcarrierLinks& links) {
  const std::size_t L = links.cells();
  std::vector<double> total(L, links.noise), grad(L, -1.0);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t j = 0; j < L; ++j) {
      if (j != l) total[l] += p[j] * links.gain[j][l];
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t j = 0; j < L; ++j) {
      if (j != l) grad[l] += p[l] * links.gain[l][j] / total[j];
    }
  }
  return grad;
}

}  // namespace

TEST(LocalLagrangian, ZeroMultipliersIsLogRatio) {
  std::mt19937_64 gen(101);
  const auto links = random_links(gen, 3);
  auto s = random_state(gen, links, 0.0, 0.0);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_NEAR(local_lagrangian(l, s, links), log_ratio(l, s, links), 1e-12);
}

TEST(LocalLagrangian, SymmetricCellsAgree) {
  SubcarrierLinks links;
  links.user = {0, 0};
  links.direct = {0.6, 0.6};
  links.cap = {0.5, 0.5};
  links.gain = {{0.0, 0.2}, {0.2, 0.0}};
  links.noise = 0.3;
  DualState s(2);
  s.p_tilde = {-1.0, -1.0};
  s.eta = {{0.0, -0.3}, {-0.3, 0.0}};
  s.z_tilde = {{0.0, -2.0}, {-2.0, 0.0}};
  s.lambda = {0.1, 0.1};
  EXPECT_DOUBLE_EQ(local_lagrangian(0, s, links), local_lagrangian(1, s, links));
}

TEST(LocalLagrangian, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(103);
  const double h = 1e-6;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t L = 2 + gen() % 3;
    const auto links = random_links(gen, L);
    auto s = random_state(gen, links, -1.0, 0.5);
    for (std::size_t l = 0; l < L; ++l) s.lambda[l] = 0.3 * static_cast<double>(l);
    for (std::size_t l = 0; l < L; ++l) {
      const auto g = local_lagrangian_gradient(l, s, links);
      auto up = s, dn = s;
      up.p_tilde[l] += h;
      dn.p_tilde[l] -= h;
      EXPECT_NEAR(g.d_p, (local_lagrangian(l, up, links) - local_lagrangian(l, dn, links)) / (2 * h), 1e-6);
      for (std::size_t j = 0; j < L; ++j) {
        if (j == l) continue;
        up = s;
        dn = s;
        up.z_tilde[l][j] += h;
        dn.z_tilde[l][j] -= h;
        EXPECT_NEAR(g.d_z[j], (local_lagrangian(l, up, links) - local_lagrangian(l, dn, links)) / (2 * h), 1e-6);
      }
    }
  }
}

TEST(LocalMinimize, NoInterferenceGoesToCap) {
  SubcarrierLinks links;
  links.user = {0};
  links.direct = {0.5};
  links.cap = {0.25};
  links.gain = {{0.0}};
  links.noise = 0.1;
  DualState s(1);
  s.p_tilde = {std::log(0.25) - 0.5};
  const auto sol = local_minimize(0, s, links);
  EXPECT_DOUBLE_EQ(sol.p_tilde, std::log(0.25));
  EXPECT_GT(sol.lambda, 0.0);
}

TEST(LocalMinimize, LargeReceivedPricePushesToCap) {
  std::mt19937_64 gen(107);
  const auto links = random_links(gen, 3);
  auto s = random_state(gen, links, -0.3, -0.1);
  s.eta[1][0] = 5.0;
  s.eta[2][0] = 5.0;
  EXPECT_DOUBLE_EQ(local_minimize(0, s, links).p_tilde, std::log(links.cap[0]));
}

TEST(LocalMinimize, MatchesGridOracle) {
  std::mt19937_64 gen(109);
  const DistOptions opt;
  for (int trial = 0; trial < 20; ++trial) {
    const auto links = random_links(gen, 2);
    auto s = random_state(gen, links, -0.9, -0.05);
    // The price on this cell's own interference may be big enough to pull
    // power down.
    std::uniform_real_distribution<double> big(-2.0, 0.0);
    s.eta[1][0] = big(gen);
    const double hi = std::log(links.cap[0]), prev = s.p_tilde[0];
    const auto objective = [&](double p, double z) {
      DualState t = s;
      t.p_tilde[0] = p;
      t.z_tilde[0][1] = z;
      t.lambda[0] = 0.0;
      return local_lagrangian(0, t, links) + 0.5 * opt.rho * (p - prev) * (p - prev);
    };
    const auto grid = testutil::grid_minimize_2d(
        objective, [&](double p, double) { return p <= hi; }, hi - 8.0, hi, -12.0, 6.0);
    const auto sol = local_minimize(0, s, links, opt);
    EXPECT_NEAR(sol.p_tilde, grid.y0, 1e-4);
    EXPECT_NEAR(sol.z_tilde[1], grid.y1, 1e-4);
    EXPECT_NEAR(objective(sol.p_tilde, sol.z_tilde[1]), grid.value, 1e-8);
    EXPECT_LE(objective(sol.p_tilde, sol.z_tilde[1]), grid.value + 1e-12);
  }
}

TEST(PriceUpdate, ConsistentCopiesLeavePricesAlone) {
  std::mt19937_64 gen(113);
  const auto links = random_links(gen, 3);
  auto s = random_state(gen, links, -0.3, -0.1);
  std::vector<std::vector<double>> measured(3, std::vector<double>(3, 0.0));
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != l) measured[l][j] = std::exp(s.z_tilde[l][j]);
    }
  }
  const auto next = price_update(s, measured);
  EXPECT_EQ(next.t, 2u);
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(next.eta[l][j], s.eta[l][j], 1e-15);
  }
  EXPECT_FALSE(next.clamped_measurement);
}

TEST(PriceUpdate, StepArithmeticAndClamp) {
  DualState s(2);
  s.eta = {{0.0, -0.9}, {-0.9, 0.0}};
  s.z_tilde = {{0.0, 0.5}, {0.0, 0.0}};
  const auto next = price_update(s, {{0.0, 1.0}, {1.0, 0.0}});
  EXPECT_NEAR(next.eta[0][1], -0.4, 1e-12);
  EXPECT_NEAR(next.eta[1][0], -0.9, 1e-12);
  const auto clamped = price_update(s, {{0.0, 0.0}, {1.0, 0.0}});
  EXPECT_TRUE(clamped.clamped_measurement);
  EXPECT_TRUE(std::isfinite(clamped.eta[0][1]));
  EXPECT_LT(clamped.eta[0][1], 0.0);
  DualState bad = s;
  bad.t = 0;
  EXPECT_THROW(price_update(bad, {{0.0, 1.0}, {1.0, 0.0}}), UsageError);
}

TEST(PriceUpdate, StepShrinksWithRound) {
  DualState s(2);
  s.eta = {{0.0, -0.9}, {-0.9, 0.0}};
  s.z_tilde = {{0.0, 0.5}, {0.5, 0.0}};
  s.t = 4;
  const auto next = price_update(s, {{0.0, 1.0}, {1.0, 0.0}});
  EXPECT_NEAR(next.eta[0][1], -0.9 + 0.5 / 4, 1e-12);
}

TEST(Distributed, ConsistentFixedPointIsKkt) {
  std::mt19937_64 gen(127);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t L = 2 + trial % 2;
    auto inst = testutil::random_instance(gen, L, 2, 1);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t j = 0; j < L; ++j) {
        if (j != l) inst.channels.cross(l, j) *= 4.0;
      }
    }
    inst.config.noise_power *= 0.05;
    const auto alloc = testutil::random_allocation(gen, inst.config);
    const auto caps = equal_split_powers(alloc, inst.config);
    const auto links = SubcarrierLinks::from(0, alloc, caps, inst.channels, inst.config);
    const auto central = gp::subcarrier_gp(0, alloc, inst.channels, inst.config, links.cap);
    ASSERT_EQ(central.status, gp::GpStatus::kOptimal);

    std::vector<double> logs(L);
    for (std::size_t l = 0; l < L; ++l) logs[l] = std::log(central.powers[l]);
    const DualState s = warm_start(links, logs);
    const auto grad = centralized_gradient(central.powers, links);
    for (std::size_t l = 0; l < L; ++l) {
      const auto sol = local_minimize(l, s, links);
      // Copies match the true received powers.
      for (std::size_t j = 0; j < L; ++j) {
        if (j != l) {
          EXPECT_NEAR(sol.z_tilde[j], std::log(central.powers[j] * links.gain[j][l]), 1e-6);
        }
      }
      // The local step stands still, and its multiplier closes stationarity
      // of the centralized problem: grad + lambda = 0, lambda >= 0, lambda = 0 off the cap.
      EXPECT_NEAR(sol.p_tilde, logs[l], 1e-6);
      EXPECT_NEAR(grad[l] + sol.lambda, 0.0, 1e-6);
      EXPECT_GE(sol.lambda, 0.0);
      if (central.powers[l] < links.cap[l] * (1 - 1e-6)) {
        EXPECT_NEAR(sol.lambda, 0.0, 1e-6);
      }
    }
  }
}

TEST(Distributed, PowerControlExampleMatchesCentralized) {
  const auto ex = instances::power_control_example();
  const auto r = run_distributed(ex.channels, ex.config);
  EXPECT_TRUE(r.converged);
  const auto local = alg1_allocate(ex.channels, ex.config, BoundMode::kUB);
  EXPECT_EQ(r.allocation, local.allocation);
  for (std::size_t n = 0; n < 2; ++n) {
    const auto links = SubcarrierLinks::from(n, local.allocation, local.powers, ex.channels, ex.config);
    const auto c = gp::subcarrier_gp(n, local.allocation, ex.channels, ex.config, links.cap);
    for (std::size_t l = 0; l < 2; ++l) EXPECT_NEAR(r.powers(n, links.user[l], l), c.powers[l], 1e-3 * links.cap[l]);
  }
}

TEST(Distributed, ZeroInterferenceConvergesAtOnce) {
  std::mt19937_64 gen(131);
  const auto inst = testutil::random_instance(gen, 3, 2, 4);
  const auto free = inst.channels.without_interference();
  const auto r = run_distributed(free, inst.config);
  EXPECT_TRUE(r.converged);
  for (std::size_t rounds : r.rounds) EXPECT_EQ(rounds, 1u);
  EXPECT_NEAR(network_throughput(r.allocation, r.powers, free, inst.config), upper_bound(free, inst.config), 1e-12);
}

TEST(Distributed, MessageAccountingAndDeterminism) {
  std::mt19937_64 gen(137);
  const auto inst = testutil::random_instance(gen, 4, 2, 3);
  const auto a = run_distributed(inst.channels, inst.config);
  std::size_t rounds = 0;
  for (std::size_t r : a.rounds) rounds += r;
  EXPECT_EQ(a.messages, rounds * 4 * 3);
  EXPECT_EQ(a.trace.size(), rounds);
  const auto b = run_distributed(inst.channels, inst.config);
  EXPECT_EQ(a.allocation, b.allocation);
  for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(a.powers.cell(l), b.powers.cell(l));
}

TEST(Distributed, NearCentralizedWithinBox) {
  std::mt19937_64 gen(139);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t L = 3 + trial % 2;
    auto inst = testutil::random_instance(gen, L, 2, 3);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t j = 0; j < L; ++j) {
        if (j != l) inst.channels.cross(l, j) *= 3.0;
      }
    }
    inst.config.noise_power *= 0.05;
    const auto r = run_distributed(inst.channels, inst.config);
    const auto rep = validate(r.allocation, r.powers, inst.config);
    EXPECT_TRUE(rep.ok()) << rep.summary();
    const auto caps = equal_split_powers(r.allocation, inst.config);
    for (std::size_t n = 0; n < 3; ++n) {
      const auto links = SubcarrierLinks::from(n, r.allocation, caps, inst.channels, inst.config);
      const auto c = gp::subcarrier_gp(n, r.allocation, inst.channels, inst.config, links.cap);
      DualState dist(L), cent(L);
      for (std::size_t l = 0; l < L; ++l) {
        EXPECT_LE(r.powers(n, links.user[l], l), links.cap[l]);
        dist.p_tilde[l] = std::log(r.powers(n, links.user[l], l));
        cent.p_tilde[l] = std::log(c.powers[l]);
      }
      const double gap = subcarrier_objective(dist, links) - subcarrier_objective(cent, links);
      EXPECT_GE(gap, -1e-7);
      worst_gap = std::max(worst_gap, gap);
    }
  }
  EXPECT_LT(worst_gap, 1e-3);
}

TEST(Distributed, LocalStepsRespectBox) {
  std::mt19937_64 gen(149);
  const auto links = random_links(gen, 3);
  std::vector<double> start(3);
  for (std::size_t l = 0; l < 3; ++l) start[l] = std::log(links.cap[l]);
  DualState s = warm_start(links, start);
  for (int round = 0; round < 50; ++round) {
    for (std::size_t l = 0; l < 3; ++l) {
      const auto sol = local_minimize(l, s, links);
      EXPECT_LE(sol.p_tilde, std::log(links.cap[l]));
      s.p_tilde[l] = sol.p_tilde;
      for (std::size_t j = 0; j < 3; ++j) {
        if (j != l) s.z_tilde[l][j] = sol.z_tilde[j];
      }
    }
    s = price_update(s, measure_interference(s, links));
  }
}
