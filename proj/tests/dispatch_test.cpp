#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flexreg/dispatch.hpp"
#include "flexreg/errors.hpp"

namespace dispatch = flexreg::dispatch;
using dispatch::EntityLimits;
using dispatch::EpisodeConfig;
using dispatch::Policy;
using flexreg::ContractViolation;
using flexreg::ValidationError;

namespace {

EntityLimits entity(std::string id, double cap_up, double cap_dn, double ramp_lo,
                    double ramp_hi) {
  return EntityLimits{std::move(id), cap_up, cap_dn, ramp_lo, ramp_hi};
}

EpisodeConfig config(int steps, double beta = 800.0, double f_lo = 59.98, double f_hi = 60.02) {
  EpisodeConfig cfg;
  cfg.steps = steps;
  cfg.beta_mw_per_hz = beta;
  cfg.f_lo_hz = f_lo;
  cfg.f_hi_hz = f_hi;
  return cfg;
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::path(::testing::TempDir()) / name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST(RequiredDelta, ZeroInsideBandProportionalOutside) {
  const auto cfg = config(1);
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(60.00, cfg), 0);
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(60.01, cfg), 0);
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(59.98, cfg), 0);
  // Expected values spell out the same subtraction the droop law performs,
  // so the comparison is exact despite 0.01 not being representable.
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(60.03, cfg), 800 * (60.03 - 60.02));
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(59.95, cfg), 800 * (59.95 - 59.98));
  EXPECT_THROW(dispatch::required_delta_mw(std::numeric_limits<double>::infinity(), cfg),
               ValidationError);
}

TEST(RequiredDelta, DegenerateBandIsPureDroop) {
  const auto cfg = config(1, 800, 60.0, 60.0);
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(60.01, cfg), 800 * (60.01 - 60.0));
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(59.99, cfg), 800 * (59.99 - 60.0));
  EXPECT_DOUBLE_EQ(dispatch::required_delta_mw(60.0, cfg), 0);
}

TEST(IncrementalBounds, TighterOfRampAndHeadroom) {
  auto state = dispatch::initial_state({entity("a", 3, 4, -5, 5)});
  state.dispatch_mw[0] = -1;
  const auto b = dispatch::incremental_bounds(state);
  EXPECT_DOUBLE_EQ(b.lo_mw[0], -2);  // headroom binds: -3 - (-1)
  EXPECT_DOUBLE_EQ(b.hi_mw[0], 5);   // ramp and headroom coincide at 5
}

TEST(IncrementalBounds, AlwaysBracketZero) {
  auto state = dispatch::initial_state({entity("a", 3, 4, -5, 5), entity("b", 0, 0, 0, 0)});
  state.dispatch_mw[0] = 4;  // pinned at cap_dn
  const auto b = dispatch::incremental_bounds(state);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(b.lo_mw[i], 0.0);
    EXPECT_GE(b.hi_mw[i], 0.0);
  }
  EXPECT_DOUBLE_EQ(b.hi_mw[0], 0);  // no headroom left upward
}

TEST(EquitableDispatch, SplitsProportionallyToBound) {
  const auto x = dispatch::equitable_dispatch(6, {0, 0}, {3, 6});
  ASSERT_EQ(x.size(), 2u);
  EXPECT_DOUBLE_EQ(x[0], 2);
  EXPECT_DOUBLE_EQ(x[1], 4);

  const auto neg = dispatch::equitable_dispatch(-6, {-3, -6}, {0, 0});
  EXPECT_DOUBLE_EQ(neg[0], -2);
  EXPECT_DOUBLE_EQ(neg[1], -4);
}

TEST(EquitableDispatch, LastNonzeroBoundAbsorbsResidue) {
  // Thirds are inexact in binary; the sum must still hit delta exactly.
  const auto x = dispatch::equitable_dispatch(1, {0, 0, 0}, {1, 1, 1});
  EXPECT_EQ(x[0] + x[1] + x[2], 1.0);
  const auto y = dispatch::equitable_dispatch(2, {0, 0, 0}, {1, 1, 0});
  EXPECT_EQ(y[0] + y[1] + y[2], 2.0);
  EXPECT_DOUBLE_EQ(y[2], 0);
}

TEST(SparseDispatch, FillsLargestBoundsFirst) {
  const auto x = dispatch::sparse_dispatch(5, {0, 0, 0}, {3, 2, 4});
  ASSERT_EQ(x.size(), 3u);
  EXPECT_DOUBLE_EQ(x[0], 1);
  EXPECT_DOUBLE_EQ(x[1], 0);
  EXPECT_DOUBLE_EQ(x[2], 4);

  const auto neg = dispatch::sparse_dispatch(-5, {-3, -2, -4}, {0, 0, 0});
  EXPECT_DOUBLE_EQ(neg[0], -1);
  EXPECT_DOUBLE_EQ(neg[1], 0);
  EXPECT_DOUBLE_EQ(neg[2], -4);
}

TEST(SparseDispatch, BreaksTiesByEarlierIndex) {
  const auto x = dispatch::sparse_dispatch(3, {0, 0, 0}, {2, 2, 2});
  EXPECT_DOUBLE_EQ(x[0], 2);
  EXPECT_DOUBLE_EQ(x[1], 1);
  EXPECT_DOUBLE_EQ(x[2], 0);
}

TEST(Dispatch, SaturationIsPolicyIndependent) {
  const std::vector<double> lo = {-2, -1}, hi = {1.5, 2.5};
  const auto eq_hi = dispatch::equitable_dispatch(10, lo, hi);
  const auto sp_hi = dispatch::sparse_dispatch(10, lo, hi);
  EXPECT_EQ(eq_hi, hi);
  EXPECT_EQ(sp_hi, hi);
  const auto eq_lo = dispatch::equitable_dispatch(-10, lo, hi);
  const auto sp_lo = dispatch::sparse_dispatch(-10, lo, hi);
  EXPECT_EQ(eq_lo, lo);
  EXPECT_EQ(sp_lo, lo);
}

TEST(Dispatch, RejectsBoundsNotBracketingZero) {
  EXPECT_THROW(dispatch::equitable_dispatch(1, {0.5}, {1.0}), ContractViolation);
  EXPECT_THROW(dispatch::sparse_dispatch(1, {0.0}, {-1.0}), ContractViolation);
  EXPECT_THROW(dispatch::equitable_dispatch(1, {0.0, 0.0}, {1.0}), ContractViolation);
}

TEST(ApplyStep, RejectsMixedSignMovesNamingEntities) {
  const auto state = dispatch::initial_state({entity("up", 5, 5, -5, 5), entity("dn", 5, 5, -5, 5)});
  try {
    dispatch::apply_step(state, {1, -1});
    FAIL();
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'up'"), std::string::npos);
    EXPECT_NE(msg.find("'dn'"), std::string::npos);
  }
}

TEST(ApplyStep, RejectsMovesOutsideBounds) {
  const auto state = dispatch::initial_state({entity("a", 5, 5, -1, 1)});
  try {
    dispatch::apply_step(state, {2});
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
  EXPECT_THROW(dispatch::apply_step(state, {1, 1}), ContractViolation);
}

TEST(ApplyStep, AdvancesOperatingPoint) {
  auto state = dispatch::initial_state({entity("a", 5, 5, -2, 2)});
  state = dispatch::apply_step(state, {2});
  EXPECT_EQ(state.t, 1);
  EXPECT_DOUBLE_EQ(state.dispatch_mw[0], 2);
  state = dispatch::apply_step(state, {-1.5});
  EXPECT_DOUBLE_EQ(state.dispatch_mw[0], 0.5);
}

TEST(RunEpisode, SaturatedFleetWalksToItsLimit) {
  // Constant 59.93 Hz asks for -40 MW every step; the fleet can only ramp
  // 3 MW per step toward a combined 5 MW of upward capacity.
  const auto cfg = config(5);
  const std::vector<EntityLimits> fleet = {entity("a", 3, 5, -2, 2), entity("b", 2, 4, -1, 3)};
  const auto log = dispatch::run_episode(cfg, fleet, std::vector<double>(5, 59.93));

  ASSERT_EQ(log.steps.size(), 5u);
  const std::vector<std::vector<double>> want_x = {
      {-2, -1}, {-1, -1}, {0, 0}, {0, 0}, {0, 0}};
  const std::vector<double> want_shortfall = {37, 38, 40, 40, 40};
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_NEAR(log.steps[t].delta_mw, -40, 1e-9) << t;
    ASSERT_EQ(log.steps[t].x_mw.size(), 2u);
    EXPECT_NEAR(log.steps[t].x_mw[0], want_x[t][0], 1e-9) << t;
    EXPECT_NEAR(log.steps[t].x_mw[1], want_x[t][1], 1e-9) << t;
    EXPECT_NEAR(log.steps[t].shortfall_mw, want_shortfall[t], 1e-9) << t;
  }
  EXPECT_NEAR(log.steps.back().dispatch_mw[0], -3, 1e-9);
  EXPECT_NEAR(log.steps.back().dispatch_mw[1], -2, 1e-9);
}

TEST(RunEpisode, TraceMustMatchStepCountExactly) {
  const auto cfg = config(5);
  const std::vector<EntityLimits> fleet = {entity("a", 3, 5, -2, 2)};
  try {
    dispatch::run_episode(cfg, fleet, std::vector<double>(3, 60.0));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "frequency trace has 3 samples, episode needs exactly 5");
  }
  EXPECT_THROW(dispatch::run_episode(cfg, fleet, std::vector<double>(6, 60.0)), ValidationError);
}

TEST(RunEpisode, RejectsEmptyFleetAndDuplicateIds) {
  const auto cfg = config(1);
  EXPECT_THROW(dispatch::run_episode(cfg, {}, std::vector<double>{60.0}), ValidationError);
  EXPECT_THROW(dispatch::run_episode(cfg, {entity("a", 1, 1, -1, 1), entity("a", 1, 1, -1, 1)},
                                     std::vector<double>{60.0}),
               ValidationError);
}

namespace {

// Records every closed-loop callback so the call protocol can be asserted.
class RecordingSource final : public dispatch::FrequencySource {
 public:
  double frequency_hz(int step) override { return 60.03 + 0.01 * step; }
  void on_dispatch(int step, double total_x, double step_seconds) override {
    steps.push_back(step);
    totals.push_back(total_x);
    dt = step_seconds;
  }
  std::vector<int> steps;
  std::vector<double> totals;
  double dt = 0.0;
};

}  // namespace

TEST(RunEpisode, NotifiesSourceAfterEachAllocation) {
  const auto cfg = config(3);
  RecordingSource source;
  const auto log =
      dispatch::run_episode(cfg, {entity("a", 50, 50, -50, 50)}, source);
  ASSERT_EQ(source.steps.size(), 3u);
  EXPECT_EQ(source.steps, (std::vector<int>{0, 1, 2}));
  EXPECT_DOUBLE_EQ(source.dt, 4.0);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_DOUBLE_EQ(source.totals[t],
                     std::accumulate(log.steps[t].x_mw.begin(), log.steps[t].x_mw.end(), 0.0));
  }
}

TEST(RunEpisode, PoliciesSeeTheSameDeltaOnSharedTrace) {
  std::vector<double> trace;
  for (int t = 0; t < 40; ++t) trace.push_back(60.0 + 0.05 * std::sin(0.3 * t));
  const std::vector<EntityLimits> fleet = {entity("a", 6, 6, -1, 1), entity("b", 3, 3, -2, 2),
                                           entity("c", 9, 9, -0.5, 0.5)};
  auto cfg = config(40);
  cfg.policy = Policy::Equitable;
  const auto eq = dispatch::run_episode(cfg, fleet, trace);
  cfg.policy = Policy::Sparse;
  const auto sp = dispatch::run_episode(cfg, fleet, trace);
  for (int t = 0; t < 40; ++t) {
    EXPECT_DOUBLE_EQ(eq.steps[t].delta_mw, sp.steps[t].delta_mw) << t;
  }
}

TEST(RunEpisode, InvariantsHoldOnRandomEpisodes) {
  std::mt19937_64 rng(4242);
  const auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
  };
  for (int iter = 0; iter < 60; ++iter) {
    const int n = 1 + int(rng() % 5);
    std::vector<EntityLimits> fleet;
    for (int i = 0; i < n; ++i) {
      fleet.push_back(entity("e" + std::to_string(i), uniform(0, 8), uniform(0, 8),
                             -uniform(0, 3), uniform(0, 3)));
    }
    auto cfg = config(30);
    cfg.policy = (iter % 2 == 0) ? Policy::Equitable : Policy::Sparse;
    std::vector<double> trace;
    for (int t = 0; t < cfg.steps; ++t) trace.push_back(uniform(59.9, 60.1));

    const auto log = dispatch::run_episode(cfg, fleet, trace);
    ASSERT_EQ(log.steps.size(), 30u);
    for (const auto& step : log.steps) {
      double total_x = 0.0;
      bool any_pos = false, any_neg = false;
      for (std::size_t i = 0; i < fleet.size(); ++i) {
        total_x += step.x_mw[i];
        any_pos |= step.x_mw[i] > 0;
        any_neg |= step.x_mw[i] < 0;
        EXPECT_GE(step.dispatch_mw[i], -fleet[i].cap_up_mw - 1e-9);
        EXPECT_LE(step.dispatch_mw[i], fleet[i].cap_dn_mw + 1e-9);
        EXPECT_GE(step.x_mw[i], fleet[i].ramp_lo_mw - 1e-9);
        EXPECT_LE(step.x_mw[i], fleet[i].ramp_hi_mw + 1e-9);
      }
      EXPECT_FALSE(any_pos && any_neg);
      EXPECT_NEAR(step.shortfall_mw, std::abs(step.delta_mw - total_x), 1e-12);
      EXPECT_GE(step.shortfall_mw, 0.0);
    }
  }
}

TEST(EpisodeCsv, LayoutMatchesFleetOrder) {
  const auto cfg = config(2);
  const auto log = dispatch::run_episode(cfg, {entity("a", 3, 5, -2, 2), entity("b", 2, 4, -1, 3)},
                                         std::vector<double>(2, 59.93));
  std::ostringstream out;
  dispatch::write_episode_csv(log, out);
  std::istringstream in(out.str());
  std::string header, row0;
  std::getline(in, header);
  std::getline(in, row0);
  EXPECT_EQ(header, "t,freq_hz,delta_mw,shortfall_mw,x_a,x_b,d_a,d_b");
  EXPECT_EQ(row0.substr(0, 2), "0,");
  int lines = 2;
  std::string rest;
  while (std::getline(in, rest)) ++lines;
  EXPECT_EQ(lines, 3);  // header + one row per step
}

TEST(ParsePolicy, AcceptsKnownNamesOnly) {
  EXPECT_EQ(dispatch::parse_policy("equitable"), Policy::Equitable);
  EXPECT_EQ(dispatch::parse_policy("sparse"), Policy::Sparse);
  EXPECT_THROW(dispatch::parse_policy("greedy"), ValidationError);
}

TEST(LimitsCsv, LoadsAndValidatesRows) {
  const auto ok = temp_file("limits_ok.csv",
                            "entity_id,cap_up_mw,cap_dn_mw,ramp_lo_mw,ramp_hi_mw\n"
                            "a,3,5,-2,2\n"
                            "b,2,4,-1,3\n");
  const auto fleet = dispatch::load_limits_csv(ok);
  ASSERT_EQ(fleet.size(), 2u);
  EXPECT_EQ(fleet[1].entity_id, "b");
  EXPECT_DOUBLE_EQ(fleet[1].ramp_hi_mw, 3);

  const auto bad_num = temp_file("limits_badnum.csv",
                                 "entity_id,cap_up_mw,cap_dn_mw,ramp_lo_mw,ramp_hi_mw\n"
                                 "a,3,five,-2,2\n");
  try {
    dispatch::load_limits_csv(bad_num);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos);
    EXPECT_NE(msg.find("cap_dn_mw"), std::string::npos);
  }

  const auto bad_sign = temp_file("limits_badsign.csv",
                                  "entity_id,cap_up_mw,cap_dn_mw,ramp_lo_mw,ramp_hi_mw\n"
                                  "a,3,5,2,2\n");
  try {
    dispatch::load_limits_csv(bad_sign);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(FrequencyTraceFile, ReadsBareColumnWithOptionalHeader) {
  const auto with_header = temp_file("trace1.csv", "freq_hz\n60.01\n59.99\n");
  EXPECT_EQ(dispatch::load_frequency_trace(with_header), (std::vector<double>{60.01, 59.99}));
  const auto bare = temp_file("trace2.csv", "60.01\n\n59.99\n");
  EXPECT_EQ(dispatch::load_frequency_trace(bare), (std::vector<double>{60.01, 59.99}));
  EXPECT_THROW(dispatch::load_frequency_trace(
                   std::filesystem::path(::testing::TempDir()) / "missing_trace.csv"),
               ValidationError);
}

TEST(EpisodeConfig, ValidatesFields) {
  EXPECT_THROW(config(0).validate(), ValidationError);
  EXPECT_THROW(config(1, -1).validate(), ValidationError);
  auto inverted = config(1);
  inverted.f_lo_hz = 60.03;
  inverted.f_hi_hz = 59.97;
  EXPECT_THROW(inverted.validate(), ValidationError);
  EXPECT_NO_THROW(config(1, 800, 60.0, 60.0).validate());
}
