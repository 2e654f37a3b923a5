#pragma once

// Aggregate single-bus frequency dynamics: M * d(df)/dt = imbalance - D * df,
// advanced by explicit Euler. A generation-loss contingency couples this
// model to the dispatch engine through one aggregate regulation entity whose
// ramp and capacity limits are the quantities under study; the regulation
// signal integrates a pure droop on the frequency deviation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flexreg/config.hpp"
#include "flexreg/dispatch.hpp"
#include "flexreg/errors.hpp"
#include "flexreg/io.hpp"

namespace flexreg::grid {

struct GridParams {
  double inertia_mws_per_hz = 0.0;  // M > 0
  double damping_mw_per_hz = 0.0;   // D >= 0
  double nominal_hz = 60.0;

  void validate() const {
    if (!std::isfinite(inertia_mws_per_hz) || inertia_mws_per_hz <= 0.0) {
      throw ValidationError("inertia must be finite and > 0");
    }
    if (!std::isfinite(damping_mw_per_hz) || damping_mw_per_hz < 0.0) {
      throw ValidationError("damping must be finite and >= 0");
    }
    if (!std::isfinite(nominal_hz) || nominal_hz <= 0.0) {
      throw ValidationError("nominal_hz must be finite and > 0");
    }
  }
};

/// Persistent generation-minus-load steps: each event adds its power change
/// to the standing imbalance from its start time onward.
struct DisturbanceEvent {
  double time_s = 0.0;
  double power_change_mw = 0.0;
};

struct Disturbance {
  std::vector<DisturbanceEvent> schedule;

  void validate() const {
    double prev = -1.0;
    for (const auto& ev : schedule) {
      if (!std::isfinite(ev.time_s) || ev.time_s < 0.0 || !std::isfinite(ev.power_change_mw)) {
        throw ValidationError("disturbance events need finite power and time >= 0");
      }
      if (ev.time_s <= prev) throw ValidationError("disturbance times must be strictly increasing");
      prev = ev.time_s;
    }
  }
};

struct GridState {
  double time_s = 0.0;
  double freq_hz = 60.0;
  double net_imbalance_mw = 0.0;  // generation minus load, regulation included
};

/// Explicit Euler needs dt well under the system time constant M/D to track
/// the continuous solution; past a tenth of it the caller should be told.
inline std::optional<std::string> dt_stability_warning(const GridParams& params, double dt_s) {
  if (params.damping_mw_per_hz <= 0.0) return std::nullopt;
  const double tau = params.inertia_mws_per_hz / params.damping_mw_per_hz;
  if (dt_s <= 0.1 * tau) return std::nullopt;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "dt_s=%g exceeds 0.1*M/D=%g; Euler integration may be inaccurate", dt_s,
                0.1 * tau);
  return std::string(buf);
}

/// One Euler step. The injection change lands on the imbalance before the
/// frequency update, so a step applied at time t shapes f(t + dt).
inline GridState step_frequency(const GridState& state, const GridParams& params,
                                double injection_change_mw, double dt_s) {
  params.validate();
  if (!std::isfinite(dt_s) || dt_s <= 0.0) throw ValidationError("dt_s must be finite and > 0");
  if (!std::isfinite(injection_change_mw)) {
    throw ValidationError("injection_change_mw must be finite");
  }
  GridState next = state;
  next.net_imbalance_mw += injection_change_mw;
  const double df = state.freq_hz - params.nominal_hz;
  next.freq_hz = params.nominal_hz +
                 df +
                 dt_s * (next.net_imbalance_mw - params.damping_mw_per_hz * df) /
                     params.inertia_mws_per_hz;
  next.time_s = state.time_s + dt_s;
  return next;
}

struct ContingencyScenario {
  std::string name = "scenario";
  GridParams params;
  Disturbance disturbance;
  double regulation_ramp_mw_per_s = 0.0;
  double regulation_cap_mw = 0.0;
  double sim_seconds = 0.0;
  double dt_s = 0.0;
  double beta_mw_per_hz = 800.0;

  void validate() const {
    params.validate();
    disturbance.validate();
    if (!std::isfinite(dt_s) || dt_s <= 0.0) throw ValidationError("dt_s must be finite and > 0");
    if (!std::isfinite(sim_seconds) || sim_seconds < dt_s) {
      throw ValidationError("sim_s must be finite and >= dt_s");
    }
    if (!std::isfinite(regulation_ramp_mw_per_s) || regulation_ramp_mw_per_s < 0.0) {
      throw ValidationError("ramp_mw_per_s must be finite and >= 0");
    }
    if (!std::isfinite(regulation_cap_mw) || regulation_cap_mw < 0.0) {
      throw ValidationError("cap_mw must be finite and >= 0");
    }
    if (!std::isfinite(beta_mw_per_hz) || beta_mw_per_hz <= 0.0) {
      throw ValidationError("beta_mw_per_hz must be finite and > 0");
    }
  }
};

struct TracePoint {
  double time_s = 0.0;
  double freq_hz = 0.0;
  double regulation_mw = 0.0;  // positive = net injection (consumption foregone)
};

using FrequencyTrace = std::vector<TracePoint>;

/// Closed-loop frequency source: reports the current model frequency to the
/// dispatcher, then folds the dispatched consumption change plus any due
/// disturbance events into one Euler step.
class GridSource final : public dispatch::FrequencySource {
 public:
  GridSource(const GridParams& params, Disturbance disturbance)
      : params_(params), disturbance_(std::move(disturbance)) {
    params_.validate();
    disturbance_.validate();
    state_.freq_hz = params_.nominal_hz;
  }

  double frequency_hz(int /*step*/) override { return state_.freq_hz; }

  void on_dispatch(int /*step*/, double total_x_mw, double step_seconds) override {
    double injection = -total_x_mw;  // consuming more pulls net generation down
    while (next_event_ < disturbance_.schedule.size() &&
           disturbance_.schedule[next_event_].time_s <= state_.time_s + 1e-12) {
      injection += disturbance_.schedule[next_event_].power_change_mw;
      ++next_event_;
    }
    state_ = step_frequency(state_, params_, injection, step_seconds);
  }

  const GridState& state() const { return state_; }

 private:
  GridParams params_;
  Disturbance disturbance_;
  GridState state_;
  std::size_t next_event_ = 0;
};

struct ContingencyResult {
  std::string name;
  FrequencyTrace trace;
  std::vector<std::string> warnings;
};

/// Runs the scenario with a single aggregate regulation entity (symmetric
/// capacity, ramp·dt per step) under the equitable policy, which for one
/// entity is droop clamped by ramp and capacity. Trace covers [0, sim_s]
/// inclusive at dt resolution.
inline ContingencyResult simulate_contingency(const ContingencyScenario& scenario) {
  scenario.validate();
  const int steps = static_cast<int>(std::llround(scenario.sim_seconds / scenario.dt_s));
  if (steps < 1) throw ValidationError("sim_s must cover at least one dt_s step");

  dispatch::EpisodeConfig cfg;
  cfg.steps = steps;
  cfg.step_seconds = scenario.dt_s;
  cfg.beta_mw_per_hz = scenario.beta_mw_per_hz;
  cfg.f_lo_hz = scenario.params.nominal_hz;
  cfg.f_hi_hz = scenario.params.nominal_hz;
  cfg.policy = dispatch::Policy::Equitable;

  dispatch::EntityLimits aggregate;
  aggregate.entity_id = "regulation";
  aggregate.cap_up_mw = scenario.regulation_cap_mw;
  aggregate.cap_dn_mw = scenario.regulation_cap_mw;
  aggregate.ramp_lo_mw = -scenario.regulation_ramp_mw_per_s * scenario.dt_s;
  aggregate.ramp_hi_mw = scenario.regulation_ramp_mw_per_s * scenario.dt_s;

  GridSource source(scenario.params, scenario.disturbance);
  const dispatch::EpisodeLog log = dispatch::run_episode(cfg, {aggregate}, source);

  ContingencyResult result;
  result.name = scenario.name;
  result.trace.reserve(static_cast<std::size_t>(steps) + 1);
  for (int t = 0; t < steps; ++t) {
    const auto& row = log.steps[static_cast<std::size_t>(t)];
    const double reg =
        t == 0 ? 0.0 : -log.steps[static_cast<std::size_t>(t) - 1].dispatch_mw[0];
    result.trace.push_back({t * scenario.dt_s, row.freq_hz, reg});
  }
  result.trace.push_back({steps * scenario.dt_s, source.state().freq_hz,
                          -log.steps.back().dispatch_mw[0]});

  if (auto warning = dt_stability_warning(scenario.params, scenario.dt_s)) {
    result.warnings.push_back(scenario.name + ": " + *warning);
  }
  return result;
}

/// First time, after the first band exit, at which the frequency re-enters
/// [band_lo_hz, band_hi_hz] and stays inside through trace end. A trace that
/// never leaves the band recovers at 0 by convention; one that ends outside
/// never recovers.
inline std::optional<double> recovery_time(const FrequencyTrace& trace, double band_lo_hz,
                                           double band_hi_hz) {
  if (trace.empty()) throw ValidationError("recovery_time needs a nonempty trace");
  if (!(band_lo_hz <= band_hi_hz)) throw ValidationError("need band_lo_hz <= band_hi_hz");
  const auto inside = [&](const TracePoint& p) {
    return p.freq_hz >= band_lo_hz && p.freq_hz <= band_hi_hz;
  };
  std::size_t last_outside = trace.size();
  for (std::size_t i = trace.size(); i-- > 0;) {
    if (!inside(trace[i])) {
      last_outside = i;
      break;
    }
  }
  if (last_outside == trace.size()) return 0.0;
  if (last_outside == trace.size() - 1) return std::nullopt;
  return trace[last_outside + 1].time_s;
}

inline void write_trace_csv(const FrequencyTrace& trace, std::ostream& out) {
  io::write_csv_row(out, {"time_s", "freq_hz", "regulation_mw"});
  for (const auto& p : trace) {
    io::write_csv_row(out, {io::format_double(p.time_s), io::format_double(p.freq_hz),
                            io::format_double(p.regulation_mw)});
  }
}

/// Scenario files are flat key = value configs. Required keys: inertia,
/// damping, loss_mw, loss_time_s, ramp_mw_per_s, cap_mw, dt_s, sim_s.
/// Optional beta_mw_per_hz overrides the caller's default droop gain.
inline ContingencyScenario load_scenario(const std::filesystem::path& path,
                                         double default_beta_mw_per_hz) {
  const Config cfg = Config::from_file(path);
  ContingencyScenario s;
  s.name = path.stem().string();
  s.params.inertia_mws_per_hz = cfg.require_double("inertia");
  s.params.damping_mw_per_hz = cfg.require_double("damping");
  const double loss_mw = cfg.require_double("loss_mw");
  const double loss_time_s = cfg.require_double("loss_time_s");
  if (loss_mw != 0.0) s.disturbance.schedule.push_back({loss_time_s, -loss_mw});
  s.regulation_ramp_mw_per_s = cfg.require_double("ramp_mw_per_s");
  s.regulation_cap_mw = cfg.require_double("cap_mw");
  s.dt_s = cfg.require_double("dt_s");
  s.sim_seconds = cfg.require_double("sim_s");
  s.beta_mw_per_hz = cfg.get_double_or("beta_mw_per_hz", default_beta_mw_per_hz);
  s.validate();
  return s;
}

}  // namespace flexreg::grid
