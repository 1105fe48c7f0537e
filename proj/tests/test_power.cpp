#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mcofdma/gp/power.hpp"
#include "mcofdma/instances.hpp"
#include "test_util.hpp"

using namespace mcofdma;
using namespace mcofdma::gp;

namespace {

/// Per-user water-filling over its subcarriers (the exact optimum without
/// interference): p_n = max(0, mu - sigma^2 / h_n), sum p_n = budget.
std::vector<double> water_fill(const std::vector<double>& h, double sigma2, double budget) {
  double lo = 0.0, hi = budget + sigma2 / *std::min_element(h.begin(), h.end());
  for (int it = 0; it < 200; ++it) {
    const double mu = 0.5 * (lo + hi);
    double s = 0.0;
    for (double v : h) s += std::max(0.0, mu - sigma2 / v);
    (s > budget ? hi : lo) = mu;
  }
  std::vector<double> p;
  for (double v : h) p.push_back(std::max(0.0, 0.5 * (lo + hi) - sigma2 / v));
  return p;
}

}  // namespace

TEST(HighSinrPower, NoInterferenceSplitsEachBudgetEqually) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = testutil::random_instance(gen, 2, 2, 4);
    inst.channels = inst.channels.without_interference();
    const auto a = testutil::random_allocation(gen, inst.config);
    const auto res = high_sinr_power(a, inst.channels, inst.config);
    ASSERT_TRUE(res.status == GpStatus::kOptimal);
    const auto eq = equal_split_powers(a, inst.config);
    for (std::size_t l = 0; l < 2; ++l) {
      EXPECT_LT((res.powers.cell(l) - eq.cell(l)).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(HighSinrPower, SingleVariableUsesFullBudget) {
  ChannelSet ch(1, 1, 1);
  ch.direct(0)(0, 0) = 0.3;
  NetworkConfig cfg{1, 1, 1};
  cfg.p_max = {2.5};
  cfg.noise_power = 0.1;
  const auto res = high_sinr_power(Allocation::from_owners({{0}}, 1), ch, cfg);
  EXPECT_NEAR(res.powers(0, 0, 0), 2.5, 1e-8);
}

TEST(HighSinrPower, PowerControlExampleMatchesIndependentGp) {
  // Independent oracle: the same program solved by an external GP modeller
  // at the noise level that reproduces the example's equal-power throughput.
  auto ex = instances::power_control_example();
  ex.config.noise_power = 4.24805441002424e-13;
  const auto a = instances::power_control_allocation();
  const auto res = high_sinr_power(a, ex.channels, ex.config);
  ASSERT_TRUE(res.status == GpStatus::kOptimal);
  EXPECT_NEAR(res.powers(0, 1, 0), 0.512847, 1e-4);
  EXPECT_NEAR(res.powers(1, 1, 0), 0.487153, 1e-4);
  EXPECT_NEAR(res.powers(0, 0, 1), 0.677110, 1e-4);
  EXPECT_NEAR(res.powers(1, 0, 1), 0.322890, 1e-4);
  EXPECT_NEAR(network_throughput(a, res.powers, ex.channels, ex.config), 11.877943, 1e-4);
  EXPECT_TRUE(validate(a, res.powers, ex.config).ok());
}

TEST(HighSinrPower, NotWorseThanEqualPowerOnItsOwnObjective) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = testutil::random_instance(gen, 2, 2, 3);
    const auto a = testutil::random_allocation(gen, inst.config);
    const LinkIndex idx(a);
    const auto prob = high_sinr_problem(idx, a, inst.channels, inst.config);
    const auto res = high_sinr_power(a, inst.channels, inst.config);
    auto x_of = [&](const PowerMatrix& p) {
      std::vector<double> x;
      for (const auto& lk : idx.links) x.push_back(std::max(p(lk.n, lk.k, lk.l), 1e-300));
      return x;
    };
    EXPECT_LE(prob.log_objective(x_of(res.powers)), prob.log_objective(x_of(equal_split_powers(a, inst.config))) + 1e-9);
    EXPECT_TRUE(validate(a, res.powers, inst.config).ok());
  }
}

TEST(HighSinrPower, RejectsIncompleteAllocation) {
  const auto ex = instances::motivating_example();
  EXPECT_THROW(high_sinr_power(Allocation(2, 2, 2), ex.channels, ex.config), UsageError);
}

TEST(GeneralSinrPower, NoInterferenceConvergesToWaterFilling) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = testutil::random_instance(gen, 1, 2, 4);
    inst.config.noise_power = 0.5;  // low SNR so water-filling differs from equal split
    const auto a = testutil::random_allocation(gen, inst.config);
    CondensationOptions opt;
    opt.tol = 1e-10;
    const auto res = general_sinr_power(a, inst.channels, inst.config, equal_split_powers(a, inst.config), opt);
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> h;
      std::vector<std::size_t> ns;
      for (std::size_t n = 0; n < 4; ++n) {
        if (a.allocated(n, k, 0)) {
          h.push_back(inst.channels.h(n, k, 0));
          ns.push_back(n);
        }
      }
      if (h.empty()) continue;
      const auto wf = water_fill(h, inst.config.noise_power, 1.0);
      for (std::size_t i = 0; i < ns.size(); ++i) {
        // zero water level entries are approached from above by the log barrier
        EXPECT_NEAR(res.powers(ns[i], k, 0), wf[i], 2e-3) << "trial " << trial;
      }
    }
  }
}

TEST(GeneralSinrPower, MotivatingExampleImprovesOnEqualPower) {
  const auto ex = instances::motivating_example();
  const auto a = instances::swapped_allocation(2);
  const auto res = general_sinr_power(a, ex.channels, ex.config, equal_split_powers(a, ex.config));
  EXPECT_GE(network_throughput(a, res.powers, ex.channels, ex.config), 1.5977 - 5e-5);
  EXPECT_TRUE(validate(a, res.powers, ex.config).ok());
}

TEST(GeneralSinrPower, ObjectiveNonIncreasingAndIteratesFeasible) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = testutil::random_instance(gen, 2, 2, 3);
    const auto a = testutil::random_allocation(gen, inst.config);
    const auto start = high_sinr_power(a, inst.channels, inst.config).powers;
    const auto res = general_sinr_power(a, inst.channels, inst.config, start);
    ASSERT_GE(res.objective_trace.size(), 2u);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
      EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1]);
    }
    EXPECT_TRUE(validate(a, res.powers, inst.config).ok());
    // the trace is minus L times the throughput
    EXPECT_NEAR(-res.objective_trace.back() / 2.0,
                network_throughput(a, res.powers, inst.channels, inst.config), 1e-9);
  }
}

TEST(GeneralSinrPower, FixedPointStopsAfterOneRound) {
  ChannelSet ch(1, 1, 1);
  ch.direct(0)(0, 0) = 1.0;
  NetworkConfig cfg{1, 1, 1};
  const auto a = Allocation::from_owners({{0}}, 1);
  const auto res = general_sinr_power(a, ch, cfg, equal_split_powers(a, cfg));
  EXPECT_EQ(res.rounds, 1u);
  EXPECT_NEAR(res.powers(0, 0, 0), 1.0, 1e-8);
}

TEST(GeneralSinrPower, ZeroStartEntriesAreNudged) {
  const auto ex = instances::motivating_example();
  const auto a = instances::diagonal_allocation(2);
  const auto res = general_sinr_power(a, ex.channels, ex.config, PowerMatrix(2, 2, 2));
  EXPECT_TRUE(validate(a, res.powers, ex.config).ok());
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t n = 0; n < 2; ++n) EXPECT_GT(res.powers(n, n, l), 0.0);
  }
  EXPECT_LE(res.objective_trace.back(), res.objective_trace.front());
}

TEST(SubcarrierGp, SingleCellUsesCap) {
  ChannelSet ch(1, 2, 2);
  ch.direct(0).setConstant(0.5);
  NetworkConfig cfg{1, 2, 2};
  const auto a = Allocation::from_owners({{1, 0}}, 2);
  const std::vector<double> cap{0.37};
  const auto out = subcarrier_gp(1, a, ch, cfg, cap);
  EXPECT_NEAR(out.powers[0], 0.37, 1e-9);
  EXPECT_LE(out.powers[0], 0.37 + 1e-9);
}

TEST(SubcarrierGp, TwoCellsMatchGridOracle) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = testutil::random_instance(gen, 2, 2, 2);
    const auto a = testutil::random_allocation(gen, inst.config);
    const std::size_t n = gen() % 2;
    const std::vector<double> cap{0.2 + 0.8 * (gen() % 1000) / 1000.0, 0.2 + 0.8 * (gen() % 1000) / 1000.0};
    const auto out = subcarrier_gp(n, a, inst.channels, inst.config, cap);
    const std::size_t k0 = static_cast<std::size_t>(a.owner(0, n)), k1 = static_cast<std::size_t>(a.owner(1, n));
    const auto& ch = inst.channels;
    const double s2 = inst.config.noise_power;
    auto f = [&](double y0, double y1) {
      const double p0 = cap[0] * std::exp(y0), p1 = cap[1] * std::exp(y1);
      return std::log((s2 + p1 * ch.g(n, k1, 1, 0)) / (p0 * ch.h(n, k0, 0))) +
             std::log((s2 + p0 * ch.g(n, k0, 0, 1)) / (p1 * ch.h(n, k1, 1)));
    };
    const auto best = testutil::grid_minimize_2d(f, [](double, double) { return true; }, -6.0, 0.0, -6.0, 0.0);
    EXPECT_NEAR(out.powers[0], cap[0] * std::exp(best.y0), 1e-6);
    EXPECT_NEAR(out.powers[1], cap[1] * std::exp(best.y1), 1e-6);
    for (std::size_t l = 0; l < 2; ++l) EXPECT_LE(out.powers[l], cap[l] + 1e-9);
  }
}

TEST(SubcarrierGp, SymmetricInstanceGivesSymmetricPowers) {
  ChannelSet ch(2, 1, 1);
  ch.direct(0)(0, 0) = ch.direct(1)(0, 0) = 0.8;
  ch.cross(0, 1)(0, 0) = ch.cross(1, 0)(0, 0) = 0.3;
  NetworkConfig cfg{2, 1, 1};
  cfg.noise_power = 0.2;
  const auto a = Allocation::from_owners({{0}, {0}}, 1);
  const std::vector<double> cap{0.6, 0.6};
  const auto out = subcarrier_gp(0, a, ch, cfg, cap);
  EXPECT_NEAR(out.powers[0], out.powers[1], 1e-9);
}

TEST(SubcarrierGp, ThreeCellsSatisfyProjectedStationarity) {
  // With three or more cells the optimum can leave the caps; check the
  // log-domain KKT conditions numerically (central differences).
  std::mt19937_64 gen(5);
  std::size_t interior = 0;
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = testutil::random_instance(gen, 3, 1, 1);
    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t j = 0; j < 3; ++j) {
        if (l != j) inst.channels.cross(l, j)(0, 0) *= 20.0;
      }
    }
    inst.config.noise_power *= 0.01;
    const auto a = Allocation::from_owners({{0}, {0}, {0}}, 1);
    const std::vector<double> cap{1.0, 0.7, 0.4};
    const auto out = subcarrier_gp(0, a, inst.channels, inst.config, cap);
    auto obj = [&](std::vector<double> p) {
      double s = 0.0;
      for (std::size_t l = 0; l < 3; ++l) {
        double ni = inst.config.noise_power;
        for (std::size_t j = 0; j < 3; ++j) {
          if (j != l) ni += p[j] * inst.channels.g(0, 0, j, l);
        }
        s += std::log(ni / (p[l] * inst.channels.h(0, 0, l)));
      }
      return s;
    };
    for (std::size_t l = 0; l < 3; ++l) {
      ASSERT_LE(out.powers[l], cap[l] + 1e-9);
      auto up = out.powers, dn = out.powers;
      const double e = 1e-6;
      up[l] *= std::exp(e);
      dn[l] *= std::exp(-e);
      const double d = (obj(up) - obj(dn)) / (2 * e);
      if (out.powers[l] < cap[l] * (1 - 1e-6)) {
        ++interior;
        EXPECT_NEAR(d, 0.0, 1e-5);
      } else {
        EXPECT_LE(d, 1e-5);  // pushing against the cap
      }
    }
  }
  EXPECT_GT(interior, 0u);
}

TEST(SubcarrierGp, Errors) {
  const auto ex = instances::motivating_example();
  const auto a = instances::diagonal_allocation(2);
  const std::vector<double> one{0.5};
  EXPECT_THROW(subcarrier_gp(0, a, ex.channels, ex.config, one), UsageError);
  const std::vector<double> bad{0.5, 0.0};
  EXPECT_THROW(subcarrier_gp(0, a, ex.channels, ex.config, bad), UsageError);
  const std::vector<double> ok{0.5, 0.5};
  EXPECT_THROW(subcarrier_gp(0, Allocation(2, 2, 2), ex.channels, ex.config, ok), UsageError);
}
