#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flexreg/data.hpp"
#include "flexreg/dispatch.hpp"
#include "flexreg/economics.hpp"
#include "flexreg/fixture.hpp"
#include "flexreg/grid.hpp"
#include "flexreg/io.hpp"

// Release gate. Each test checks one acceptance criterion with its tolerance
// pinned here, and prints a one-line verdict so the suite output doubles as
// a checklist.

namespace {

namespace fs = std::filesystem;
using namespace flexreg;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

econ::MinerSpec s19xp_spec() {
  econ::MinerSpec spec;
  spec.efficiency_j_per_th = 21.5;
  spec.network_difficulty = 39.35e12;
  spec.block_reward_btc = 6.25;
  return spec;
}

class Acceptance : public ::testing::Test {
 protected:
  void Criterion(std::string text) { criterion_ = std::move(text); }

  void TearDown() override {
    std::printf("[ACCEPT] %s - %s\n", HasFailure() ? "FAIL" : "PASS", criterion_.c_str());
    std::fflush(stdout);
  }

 private:
  std::string criterion_ = "(criterion label missing)";
};

}  // namespace

TEST_F(Acceptance, MiningEnergyMatchesKnownMachines) {
  Criterion("energy per coin: 21.5 J/TH within 1% of 147 MWh/BTC, 29.5 J/TH within 1% of 202; < 1 ms");
  econ::MinerSpec xp = s19xp_spec();
  econ::MinerSpec jpro = xp;
  jpro.efficiency_j_per_th = 29.5;

  const auto start = Clock::now();
  const double e_xp = econ::energy_per_bitcoin(xp);
  const double e_jpro = econ::energy_per_bitcoin(jpro);
  const double elapsed = seconds_since(start);

  EXPECT_NEAR(e_xp, 147.0, 0.01 * 147.0);
  EXPECT_NEAR(e_jpro, 202.0, 0.01 * 202.0);
  EXPECT_LT(elapsed, 1e-3);
}

TEST_F(Acceptance, MiningRevenueRateAtReferencePrice) {
  Criterion("mining revenue at 22050 $/BTC with free electricity is $150/MWh within 1%");
  const double energy = econ::energy_per_bitcoin(s19xp_spec());
  const double rate = econ::mining_rate_of_return(22050.0, energy, econ::UsdPerMwh(0.0)).value();
  EXPECT_NEAR(rate, 150.0, 0.01 * 150.0);
}

TEST_F(Acceptance, OpportunityCostSpansTheElectricityBand) {
  Criterion("full-deployment opportunity cost runs $50-$100 per MW-hour as electricity runs 100-50 $/MWh; endpoints within 1%");
  const double energy = econ::energy_per_bitcoin(s19xp_spec());
  // Holding 1 MW of Reg-Up at 100% deployment forgoes one MWh of mining, so
  // with zero capacity prices the per-MW loss is exactly the mining margin.
  const auto cost = [&](double elec_usd_per_mwh) {
    const econ::UsdPerMwh rho =
        econ::mining_rate_of_return(22050.0, energy, econ::UsdPerMwh(elec_usd_per_mwh));
    const econ::Worthwhileness w =
        econ::worthwhileness(econ::UsdPerMw(0.0), econ::UsdPerMw(0.0), rho, -1.0, 0.0);
    return -w.up.value();
  };
  EXPECT_NEAR(cost(50.0), 100.0, 0.01 * 100.0);
  EXPECT_NEAR(cost(100.0), 50.0, 0.01 * 50.0);
  for (double elec = 50.0; elec <= 100.0; elec += 5.0) {
    EXPECT_LE(cost(elec), cost(50.0) + 1e-12);
    EXPECT_GE(cost(elec), cost(100.0) - 1e-12);
  }
}

TEST_F(Acceptance, MatchedFixtureRoundTripsItsSummaryStatistics) {
  Criterion("matched fixture ingests back to 21.67/8.46 $/MW mean prices and 16%/25% deployment rates within 0.5%");
  const fs::path dir = fs::path(::testing::TempDir()) / "accept_fixture";
  fs::remove_all(dir);
  const std::string cmd = std::string(FLEXREG_CLI_BIN) + " --out " + dir.string() +
                          " --seed 20220101 fixture --months 3 --match-table1 > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  ASSERT_EQ(WEXITSTATUS(status), 0);

  const auto records = data::load_market_csv(dir / "fixture.csv");
  ASSERT_FALSE(records.empty());
  double price_up_sum = 0.0, price_dn_sum = 0.0;
  for (const auto& r : records) {
    price_up_sum += r.price_up;
    price_dn_sum += r.price_dn;
  }
  const double n = double(records.size());
  const auto [eps_up, eps_dn] = data::overall_deployment_rates(records);

  EXPECT_NEAR(price_up_sum / n, 21.67, 0.005 * 21.67);
  EXPECT_NEAR(price_dn_sum / n, 8.46, 0.005 * 8.46);
  EXPECT_NEAR(-eps_up, 0.16, 0.005 * 0.16);
  EXPECT_NEAR(eps_dn, 0.25, 0.005 * 0.25);
}

TEST_F(Acceptance, BundledRampScenariosBracketTheMinute) {
  Criterion("bundled loss scenarios: 1.5 MW/s recovers in > 60 s, 15 MW/s in < 60 s, 50 MW/s at a 500 MW cap faster still; trio < 5 s");
  const auto start = Clock::now();
  const auto recovery = [&](const char* file) {
    const auto scenario = grid::load_scenario(fs::path(FLEXREG_CONFIG_DIR) / file, 800.0);
    const auto result = grid::simulate_contingency(scenario);
    const auto t = grid::recovery_time(result.trace, 59.98, 60.02);
    EXPECT_TRUE(t.has_value()) << file;
    return t.value_or(1e18);
  };
  const double existing = recovery("genloss_existing_ramp.scenario");
  const double fast = recovery("genloss_fast_ramp.scenario");
  const double miner = recovery("genloss_miner_ramp.scenario");
  const double elapsed = seconds_since(start);

  EXPECT_GT(existing, 60.0);
  EXPECT_LT(fast, 60.0);
  EXPECT_LT(miner, fast);
  EXPECT_LT(elapsed, 5.0);
}

TEST_F(Acceptance, ClosedFormDecisionMatchesBruteForceSearch) {
  Criterion("closed-form hourly decision matches a brute-force capacity grid search on 1,000 random fixture hours");
  data::FixtureSpec spec;
  spec.months = 3;
  spec.seed = 99;
  spec.match_summary = true;
  const auto records = data::generate_fixture(spec);
  const double energy = econ::energy_per_bitcoin(s19xp_spec());
  const double capacity = 10.0;
  const int grid_steps = 100;

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
  double closed_sum = 0.0, brute_sum = 0.0;
  std::size_t participating = 0;

  for (int i = 0; i < 1000; ++i) {
    const auto& r = records[pick(rng)];
    ASSERT_TRUE(r.btc_usd.has_value());
    const auto [eps_up, eps_dn] = data::realized_eps(r);
    const econ::HourEconomics hour = econ::make_hour_economics(
        io::local_hour_of_day(r.ts_epoch, -6.0), econ::UsdPerMw(r.price_up),
        econ::UsdPerMw(r.price_dn), eps_up, eps_dn, capacity, *r.btc_usd, energy,
        econ::UsdPerMwh(50.0));
    const econ::Worthwhileness w =
        econ::worthwhileness(hour.price_up, hour.price_dn, hour.rho, hour.eps_up, hour.eps_dn);

    const double closed = econ::optimal_participation_profit(w.up, w.dn, capacity);
    const double baseline = econ::net_reward(hour, econ::CapacityDecision{0.0, 0.0});
    double brute = 0.0;  // staying out is always feasible
    for (int iu = 0; iu <= grid_steps; ++iu) {
      for (int id = 0; id + iu <= grid_steps; ++id) {
        const econ::CapacityDecision d{capacity * iu / grid_steps, capacity * id / grid_steps};
        brute = std::max(brute, econ::net_reward(hour, d) - baseline);
      }
    }
    // One grid cell of the steeper axis bounds what the search can miss.
    const double tol =
        (capacity / grid_steps) * std::max({std::abs(w.up.value()), std::abs(w.dn.value()), 1.0}) +
        1e-9;
    EXPECT_NEAR(closed, brute, tol) << io::format_timestamp_utc(r.ts_epoch);

    closed_sum += closed;
    brute_sum += brute;
    if (std::max(w.up.value(), w.dn.value()) > 0.0) ++participating;
  }

  ASSERT_GT(participating, 0u);
  const double mean_tol = (capacity / grid_steps) * 1.0 + 1e-9;
  EXPECT_NEAR(closed_sum / double(participating), brute_sum / double(participating),
              mean_tol * double(1000) / double(participating));
}

TEST_F(Acceptance, DispatchInvariantsOnRandomInstances) {
  Criterion("dispatch sign/feasibility/exactness/proportionality on 10,000 random instances, sparse minimality exhaustive for m <= 6; < 30 s");
  const auto start = Clock::now();
  std::mt19937_64 rng(20260814);
  const auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  for (int iter = 0; iter < 10000; ++iter) {
    const std::size_t m = 1 + rng() % 12;
    dispatch::BoundVectors bounds;
    bounds.lo_mw.resize(m);
    bounds.hi_mw.resize(m);
    double total_hi = 0.0, total_lo = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      bounds.hi_mw[i] = rng() % 5 == 0 ? 0.0 : uniform(0.01, 10.0);
      bounds.lo_mw[i] = rng() % 5 == 0 ? 0.0 : -uniform(0.01, 10.0);
      total_hi += bounds.hi_mw[i];
      total_lo += bounds.lo_mw[i];
    }
    const double delta =
        iter % 50 == 0 ? 0.0 : uniform(-1.25, 1.25) * std::max({total_hi, -total_lo, 1.0});
    const std::vector<double>& bound = delta >= 0.0 ? bounds.hi_mw : bounds.lo_mw;
    const double attainable = delta >= 0.0 ? total_hi : total_lo;
    const bool saturated = std::abs(delta) > std::abs(attainable);

    const auto equitable = dispatch::allocate(delta, bounds, dispatch::Policy::Equitable);
    const auto sparse = dispatch::allocate(delta, bounds, dispatch::Policy::Sparse);

    for (const auto& x : {equitable, sparse}) {
      ASSERT_EQ(x.size(), m);
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (delta >= 0.0) {
          ASSERT_GE(x[i], 0.0) << "iter " << iter;  // never moves against the request
          ASSERT_LE(x[i], bounds.hi_mw[i] + 1e-12);
        } else {
          ASSERT_LE(x[i], 0.0) << "iter " << iter;
          ASSERT_GE(x[i], bounds.lo_mw[i] - 1e-12);
        }
        sum += x[i];
      }
      if (saturated) {
        for (std::size_t i = 0; i < m; ++i) ASSERT_EQ(x[i], bound[i]) << "iter " << iter;
      } else {
        ASSERT_NEAR(sum, delta, 1e-9 * std::max(1.0, std::abs(delta))) << "iter " << iter;
      }
    }

    if (!saturated && attainable != 0.0) {
      for (std::size_t i = 0; i < m; ++i) {
        ASSERT_NEAR(equitable[i], delta * bound[i] / attainable,
                    1e-8 * std::max(1.0, std::abs(delta)))
            << "iter " << iter;
      }
    }

    if (m <= 6) {
      std::size_t moved = 0;
      for (const double x : sparse) moved += x != 0.0 ? 1 : 0;
      const double target = std::min(std::abs(delta), std::abs(attainable));
      std::size_t fewest = m + 1;
      for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        double reach = 0.0;
        std::size_t size = 0;
        for (std::size_t i = 0; i < m; ++i) {
          if (mask & (std::size_t{1} << i)) {
            reach += std::abs(bound[i]);
            ++size;
          }
        }
        if (reach >= target - 1e-12 && size < fewest) fewest = size;
      }
      ASSERT_EQ(moved, fewest) << "iter " << iter;
    }
  }
  EXPECT_LT(seconds_since(start), 30.0);
}

TEST_F(Acceptance, RewardIdentityAndSplitProperties) {
  Criterion("reward identity within 1e-9, never-both-products split, mining-baseline monotonicity on 10,000 random inputs");
  std::mt19937_64 rng(4242);
  const auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double energy = 100.0;

  for (int iter = 0; iter < 10000; ++iter) {
    const double btc = uniform(0.0, 30000.0);
    const double rho = uniform(-200.0, 300.0);
    const double elec = btc / energy - rho;  // makes the margin come out at rho
    const double capacity = uniform(0.1, 20.0);
    const double c_up = uniform(0.0, 1.0) * capacity;
    const double c_dn = uniform(0.0, 1.0) * (capacity - c_up);
    const econ::HourEconomics hour = econ::make_hour_economics(
        int(rng() % 24), econ::UsdPerMw(uniform(0.0, 50.0)), econ::UsdPerMw(uniform(0.0, 50.0)),
        -uniform(0.0, 1.0), uniform(0.0, 1.0), capacity, btc, energy, econ::UsdPerMwh(elec));

    const double net = econ::net_reward(hour, econ::CapacityDecision{c_up, c_dn});
    const double streams =
        econ::dam_reward(hour.price_up, c_up, hour.price_dn, c_dn) +
        econ::base_reward(hour.rho, capacity, c_up, c_dn) +
        econ::deployment_reward(hour.rho, hour.eps_up, c_up, hour.eps_dn, c_dn);
    ASSERT_NEAR(net, streams, 1e-9 * std::max(1.0, std::abs(net))) << "iter " << iter;

    const econ::Worthwhileness w =
        econ::worthwhileness(hour.price_up, hour.price_dn, hour.rho, hour.eps_up, hour.eps_dn);
    const econ::CapacityDecision split = econ::optimal_capacity_split(w.up, w.dn, capacity);
    ASSERT_FALSE(split.c_up_mw > 0.0 && split.c_dn_mw > 0.0) << "iter " << iter;

    // Committing more capacity never raises the pre-deployment mining value.
    const double slack = capacity - c_up - c_dn;
    const double up2 = c_up + uniform(0.0, 1.0) * slack * 0.5;
    const double dn2 = c_dn + uniform(0.0, 1.0) * slack * 0.5;
    ASSERT_LE(econ::base_reward(hour.rho, capacity, up2, dn2),
              econ::base_reward(hour.rho, capacity, c_up, c_dn) + 1e-9)
        << "iter " << iter;
  }
}

TEST_F(Acceptance, FrequencyModelSteadyStateAndConvergence) {
  Criterion("steady frequency offset is -loss/damping within 1% by t = 10 M/D; halving dt halves the integration error (+-20%)");
  grid::GridParams params;
  params.inertia_mws_per_hz = 8000.0;
  params.damping_mw_per_hz = 2000.0;
  const double loss_mw = 100.0;

  const auto deviation_at = [&](double dt_s, double t_end_s) {
    grid::GridState state;
    const int steps = int(std::llround(t_end_s / dt_s));
    for (int k = 0; k < steps; ++k) {
      state = grid::step_frequency(state, params, k == 0 ? -loss_mw : 0.0, dt_s);
    }
    return state.freq_hz - params.nominal_hz;
  };

  const double settle_s = 10.0 * params.inertia_mws_per_hz / params.damping_mw_per_hz;
  const double target = -loss_mw / params.damping_mw_per_hz;
  EXPECT_NEAR(deviation_at(0.2, settle_s), target, 0.01 * std::abs(target));

  // Error against the continuous solution, probed mid-transient where the
  // first-order integrator is least accurate.
  const double probe_s = params.inertia_mws_per_hz / params.damping_mw_per_hz;
  const double exact =
      target * (1.0 - std::exp(-params.damping_mw_per_hz * probe_s / params.inertia_mws_per_hz));
  const double err_coarse = std::abs(deviation_at(0.2, probe_s) - exact);
  const double err_fine = std::abs(deviation_at(0.1, probe_s) - exact);
  ASSERT_GT(err_coarse, 0.0);
  const double ratio = err_fine / err_coarse;
  EXPECT_GE(ratio, 0.4);
  EXPECT_LE(ratio, 0.6);
}

TEST_F(Acceptance, FullEpisodeRunsUnderASecond) {
  Criterion("900-step episode with 50 entities completes in < 1 s");
  std::vector<dispatch::EntityLimits> fleet(50);
  for (int i = 0; i < 50; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "e%02d", i);
    fleet[i].entity_id = id;
    fleet[i].cap_up_mw = 2.0 + 0.5 * double(i % 7);
    fleet[i].cap_dn_mw = 3.0 + 0.25 * double(i % 5);
    fleet[i].ramp_lo_mw = -0.5;
    fleet[i].ramp_hi_mw = 0.5;
  }
  std::vector<double> trace(900);
  for (int k = 0; k < 900; ++k) {
    trace[k] = 60.0 + 0.05 * std::sin(2.0 * M_PI * double(k) / 150.0);
  }
  dispatch::EpisodeConfig cfg;  // built-in 900 x 4 s, pure droop at 800 MW/Hz

  const auto start = Clock::now();
  const dispatch::EpisodeLog log = dispatch::run_episode(cfg, fleet, trace);
  const double elapsed = seconds_since(start);

  ASSERT_EQ(log.steps.size(), 900u);
  EXPECT_LT(elapsed, 1.0);
}
