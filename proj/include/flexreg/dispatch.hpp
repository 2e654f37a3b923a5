#pragma once

// Real-time regulation dispatch. Each 4-second step converts the frequency
// deviation into a fleet-wide consumption change (positive = consume more,
// the Reg-Down direction) and splits it across entities under per-step ramp
// limits and awarded-capacity headroom. Two split policies: equitable
// (proportional to headroom) and sparse (fewest entities moved, largest
// headroom first). Unmet signal is logged as shortfall, never an error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "flexreg/errors.hpp"
#include "flexreg/io.hpp"

namespace flexreg::dispatch {

enum class Policy { Equitable, Sparse };

inline Policy parse_policy(const std::string& name) {
  if (name == "equitable") return Policy::Equitable;
  if (name == "sparse") return Policy::Sparse;
  throw ValidationError("unknown policy '" + name + "' (expected equitable or sparse)");
}

struct EpisodeConfig {
  int steps = 900;
  double step_seconds = 4.0;
  double beta_mw_per_hz = 800.0;
  double f_lo_hz = 60.0;  // deadband edges; lo == hi gives pure proportional droop
  double f_hi_hz = 60.0;
  Policy policy = Policy::Equitable;

  void validate() const {
    if (steps < 1) throw ValidationError("steps must be >= 1");
    if (!std::isfinite(step_seconds) || step_seconds <= 0.0) {
      throw ValidationError("step_seconds must be finite and > 0");
    }
    if (!std::isfinite(beta_mw_per_hz) || beta_mw_per_hz <= 0.0) {
      throw ValidationError("beta_mw_per_hz must be finite and > 0");
    }
    if (!std::isfinite(f_lo_hz) || !std::isfinite(f_hi_hz) || f_lo_hz > f_hi_hz) {
      throw ValidationError("need f_lo_hz <= f_hi_hz, both finite");
    }
  }
};

struct EntityLimits {
  std::string entity_id;
  double cap_up_mw = 0.0;   // awarded Reg-Up capacity (consumption decrease), >= 0
  double cap_dn_mw = 0.0;   // awarded Reg-Down capacity (consumption increase), >= 0
  double ramp_lo_mw = 0.0;  // largest per-step consumption decrease, <= 0
  double ramp_hi_mw = 0.0;  // largest per-step consumption increase, >= 0
};

inline void validate_limits(const EntityLimits& e) {
  if (e.entity_id.empty()) throw ValidationError("entity has empty entity_id");
  const bool finite = std::isfinite(e.cap_up_mw) && std::isfinite(e.cap_dn_mw) &&
                      std::isfinite(e.ramp_lo_mw) && std::isfinite(e.ramp_hi_mw);
  if (!finite) throw ValidationError("entity '" + e.entity_id + "': non-finite field");
  if (e.cap_up_mw < 0.0 || e.cap_dn_mw < 0.0) {
    throw ValidationError("entity '" + e.entity_id + "': capacities must be >= 0");
  }
  if (e.ramp_lo_mw > 0.0 || e.ramp_hi_mw < 0.0) {
    throw ValidationError("entity '" + e.entity_id + "': need ramp_lo_mw <= 0 <= ramp_hi_mw");
  }
}

/// Fleet operating point at one step. dispatch_mw[i] is entity i's net
/// consumption change vs baseline, held within [-cap_up_mw, cap_dn_mw].
struct EpisodeState {
  int t = 0;
  std::vector<double> dispatch_mw;
  std::vector<EntityLimits> limits;

  void check() const {
    if (dispatch_mw.size() != limits.size()) {
      throw ContractViolation("state: dispatch/limits size mismatch");
    }
    for (std::size_t i = 0; i < limits.size(); ++i) {
      validate_limits(limits[i]);
      if (!std::isfinite(dispatch_mw[i]) || dispatch_mw[i] < -limits[i].cap_up_mw ||
          dispatch_mw[i] > limits[i].cap_dn_mw) {
        throw ContractViolation("entity '" + limits[i].entity_id +
                                "': dispatch outside [-cap_up_mw, cap_dn_mw]");
      }
    }
  }
};

inline EpisodeState initial_state(std::vector<EntityLimits> limits) {
  std::vector<std::string> ids;
  ids.reserve(limits.size());
  for (const auto& e : limits) {
    validate_limits(e);
    ids.push_back(e.entity_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("duplicate entity_id in fleet");
  }
  EpisodeState s;
  s.dispatch_mw.assign(limits.size(), 0.0);
  s.limits = std::move(limits);
  return s;
}

/// Fleet consumption change requested at frequency `f_hz`: zero inside the
/// band, proportional to the excursion past the nearer edge outside it.
/// Positive above the band (consume the surplus), negative below it.
inline double required_delta_mw(double f_hz, const EpisodeConfig& cfg) {
  if (!std::isfinite(f_hz)) throw ValidationError("frequency must be finite");
  return cfg.beta_mw_per_hz *
         (std::max(0.0, f_hz - cfg.f_hi_hz) + std::min(0.0, f_hz - cfg.f_lo_hz));
}

struct BoundVectors {
  std::vector<double> lo_mw;  // <= 0 entry-wise
  std::vector<double> hi_mw;  // >= 0 entry-wise
};

/// Per-step move limits: the tighter of ramp rate and headroom left in the
/// awarded range. lo <= 0 <= hi holds entry-wise for any valid state, so an
/// entity can always stand still.
inline BoundVectors incremental_bounds(const EpisodeState& state) {
  state.check();
  BoundVectors b;
  b.lo_mw.reserve(state.limits.size());
  b.hi_mw.reserve(state.limits.size());
  for (std::size_t i = 0; i < state.limits.size(); ++i) {
    const auto& e = state.limits[i];
    const double d = state.dispatch_mw[i];
    b.lo_mw.push_back(std::max(e.ramp_lo_mw, -e.cap_up_mw - d));
    b.hi_mw.push_back(std::min(e.ramp_hi_mw, e.cap_dn_mw - d));
  }
  return b;
}

namespace detail {

inline void check_bound_vectors(const std::vector<double>& x_lo, const std::vector<double>& x_hi) {
  if (x_lo.size() != x_hi.size()) {
    throw ContractViolation("bound vectors of mismatched length");
  }
  for (std::size_t i = 0; i < x_lo.size(); ++i) {
    if (!(x_lo[i] <= 0.0) || !(x_hi[i] >= 0.0)) {
      throw ContractViolation("bounds must satisfy lo <= 0 <= hi at entry " + std::to_string(i));
    }
  }
}

// Saturation applies to both policies: past the total bound every entity
// sits at its own bound and the remainder becomes shortfall. Returns true
// when the caller is done.
inline bool saturate(double delta, const std::vector<double>& x_lo,
                     const std::vector<double>& x_hi, std::vector<double>& x) {
  const double total_lo = std::accumulate(x_lo.begin(), x_lo.end(), 0.0);
  const double total_hi = std::accumulate(x_hi.begin(), x_hi.end(), 0.0);
  if (delta >= total_hi) {
    x = x_hi;
    return true;
  }
  if (delta <= total_lo) {
    x = x_lo;
    return true;
  }
  return false;
}

}  // namespace detail

/// Proportional split: each entity moves delta * (own bound / total bound)
/// on the side delta points to. The last entity with a nonzero bound absorbs
/// rounding residue so the total matches delta exactly under sufficiency.
inline std::vector<double> equitable_dispatch(double delta_mw, const std::vector<double>& x_lo,
                                              const std::vector<double>& x_hi) {
  detail::check_bound_vectors(x_lo, x_hi);
  std::vector<double> x(x_lo.size(), 0.0);
  if (delta_mw == 0.0) return x;
  if (detail::saturate(delta_mw, x_lo, x_hi, x)) return x;

  const auto& bound = delta_mw > 0.0 ? x_hi : x_lo;
  const double total = std::accumulate(bound.begin(), bound.end(), 0.0);
  std::size_t last = bound.size();
  for (std::size_t i = 0; i < bound.size(); ++i) {
    if (bound[i] != 0.0) last = i;
  }
  double assigned = 0.0;
  for (std::size_t i = 0; i < bound.size(); ++i) {
    if (i == last) continue;
    x[i] = delta_mw * (bound[i] / total);
    assigned += x[i];
  }
  x[last] = delta_mw > 0.0 ? std::clamp(delta_mw - assigned, 0.0, bound[last])
                           : std::clamp(delta_mw - assigned, bound[last], 0.0);
  return x;
}

/// Fewest-entities split: entities sorted by usable bound magnitude
/// descending (ties by ascending index) are filled to their bound until the
/// residue fits, so at most one entry lands strictly between 0 and its bound.
inline std::vector<double> sparse_dispatch(double delta_mw, const std::vector<double>& x_lo,
                                           const std::vector<double>& x_hi) {
  detail::check_bound_vectors(x_lo, x_hi);
  std::vector<double> x(x_lo.size(), 0.0);
  if (delta_mw == 0.0) return x;
  if (detail::saturate(delta_mw, x_lo, x_hi, x)) return x;

  const auto& bound = delta_mw > 0.0 ? x_hi : x_lo;
  std::vector<std::size_t> order(bound.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(bound[a]) > std::abs(bound[b]);
  });
  double remaining = delta_mw;
  for (const std::size_t i : order) {
    if (remaining == 0.0) break;
    x[i] = delta_mw > 0.0 ? std::min(remaining, bound[i]) : std::max(remaining, bound[i]);
    remaining -= x[i];
  }
  return x;
}

inline std::vector<double> allocate(double delta_mw, const BoundVectors& bounds, Policy policy) {
  return policy == Policy::Equitable ? equitable_dispatch(delta_mw, bounds.lo_mw, bounds.hi_mw)
                                     : sparse_dispatch(delta_mw, bounds.lo_mw, bounds.hi_mw);
}

/// Advances the operating point by one dispatched step. Rejects moves that
/// mix signs across entities or leave the per-step bounds; the tolerance
/// covers allocation rounding only.
inline EpisodeState apply_step(const EpisodeState& state, const std::vector<double>& x_mw) {
  state.check();
  if (x_mw.size() != state.limits.size()) {
    throw ContractViolation("apply_step: x length does not match fleet size");
  }
  constexpr double kSlack = 1e-9;

  std::size_t pos = x_mw.size(), neg = x_mw.size();
  for (std::size_t i = 0; i < x_mw.size(); ++i) {
    if (x_mw[i] > 0.0 && pos == x_mw.size()) pos = i;
    if (x_mw[i] < 0.0 && neg == x_mw.size()) neg = i;
  }
  if (pos != x_mw.size() && neg != x_mw.size()) {
    throw ContractViolation("apply_step: mixed-sign move (entities '" +
                            state.limits[pos].entity_id + "' and '" +
                            state.limits[neg].entity_id + "')");
  }

  const BoundVectors b = incremental_bounds(state);
  EpisodeState next = state;
  next.t = state.t + 1;
  for (std::size_t i = 0; i < x_mw.size(); ++i) {
    if (x_mw[i] < b.lo_mw[i] - kSlack || x_mw[i] > b.hi_mw[i] + kSlack) {
      throw ContractViolation("apply_step: move outside bounds for entity '" +
                              state.limits[i].entity_id + "'");
    }
    const auto& e = state.limits[i];
    next.dispatch_mw[i] =
        std::clamp(state.dispatch_mw[i] + x_mw[i], -e.cap_up_mw, e.cap_dn_mw);
  }
  return next;
}

struct EpisodeStep {
  int t = 0;
  double freq_hz = 0.0;
  double delta_mw = 0.0;
  double shortfall_mw = 0.0;        // |delta - delivered|, nonzero only at saturation
  std::vector<double> x_mw;         // fleet order
  std::vector<double> dispatch_mw;  // after this step, fleet order
};

struct EpisodeLog {
  std::vector<std::string> entity_ids;
  std::vector<EpisodeStep> steps;
};

/// Where per-step frequency comes from. `on_dispatch` is called after each
/// allocation with the fleet's total consumption change, letting a
/// closed-loop source (a grid model) react before the next step is read.
class FrequencySource {
 public:
  virtual ~FrequencySource() = default;
  virtual double frequency_hz(int step) = 0;
  virtual void on_dispatch(int /*step*/, double /*total_x_mw*/, double /*step_seconds*/) {}
};

/// Replays a recorded frequency trace, one sample per step.
class TraceSource final : public FrequencySource {
 public:
  explicit TraceSource(std::vector<double> trace) : trace_(std::move(trace)) {}

  double frequency_hz(int step) override {
    if (step < 0 || static_cast<std::size_t>(step) >= trace_.size()) {
      throw ContractViolation("trace has no sample for step " + std::to_string(step));
    }
    return trace_[static_cast<std::size_t>(step)];
  }

  std::size_t size() const { return trace_.size(); }

 private:
  std::vector<double> trace_;
};

/// Runs cfg.steps dispatch intervals against `source`, starting from a zero
/// operating point. One log record per step.
inline EpisodeLog run_episode(const EpisodeConfig& cfg, const std::vector<EntityLimits>& limits,
                              FrequencySource& source) {
  cfg.validate();
  if (limits.empty()) throw ValidationError("fleet must contain at least one entity");
  EpisodeState state = initial_state(limits);

  EpisodeLog log;
  log.entity_ids.reserve(limits.size());
  for (const auto& e : limits) log.entity_ids.push_back(e.entity_id);
  log.steps.reserve(static_cast<std::size_t>(cfg.steps));

  for (int t = 0; t < cfg.steps; ++t) {
    const double f = source.frequency_hz(t);
    const double delta = required_delta_mw(f, cfg);
    const BoundVectors bounds = incremental_bounds(state);
    std::vector<double> x = allocate(delta, bounds, cfg.policy);
    state = apply_step(state, x);

    EpisodeStep row;
    row.t = t;
    row.freq_hz = f;
    row.delta_mw = delta;
    const double total_x = std::accumulate(x.begin(), x.end(), 0.0);
    row.shortfall_mw = std::abs(delta - total_x);
    row.x_mw = std::move(x);
    row.dispatch_mw = state.dispatch_mw;
    source.on_dispatch(t, total_x, cfg.step_seconds);
    log.steps.push_back(std::move(row));
  }
  return log;
}

/// Trace-driven overload; the trace must cover the episode exactly.
inline EpisodeLog run_episode(const EpisodeConfig& cfg, const std::vector<EntityLimits>& limits,
                              const std::vector<double>& freq_trace) {
  cfg.validate();
  if (freq_trace.size() != static_cast<std::size_t>(cfg.steps)) {
    throw ValidationError("frequency trace has " + std::to_string(freq_trace.size()) +
                          " samples, episode needs exactly " + std::to_string(cfg.steps));
  }
  TraceSource source(freq_trace);
  return run_episode(cfg, limits, source);
}

/// Columns: t,freq_hz,delta_mw,shortfall_mw, then x_<id> per entity, then
/// d_<id> per entity, both in fleet order.
inline void write_episode_csv(const EpisodeLog& log, std::ostream& out) {
  std::vector<std::string> header = {"t", "freq_hz", "delta_mw", "shortfall_mw"};
  for (const auto& id : log.entity_ids) header.push_back("x_" + id);
  for (const auto& id : log.entity_ids) header.push_back("d_" + id);
  io::write_csv_row(out, header);

  std::vector<std::string> fields;
  for (const auto& s : log.steps) {
    fields.clear();
    fields.push_back(std::to_string(s.t));
    fields.push_back(io::format_double(s.freq_hz));
    fields.push_back(io::format_double(s.delta_mw));
    fields.push_back(io::format_double(s.shortfall_mw));
    for (const double x : s.x_mw) fields.push_back(io::format_double(x));
    for (const double d : s.dispatch_mw) fields.push_back(io::format_double(d));
    io::write_csv_row(out, fields);
  }
}

/// Entity limits CSV: `entity_id,cap_up_mw,cap_dn_mw,ramp_lo_mw,ramp_hi_mw`.
inline std::vector<EntityLimits> load_limits_csv(const std::filesystem::path& path) {
  const auto csv = io::read_csv_file(path);
  const auto c_id = csv.require_column("entity_id");
  const auto c_up = csv.require_column("cap_up_mw");
  const auto c_dn = csv.require_column("cap_dn_mw");
  const auto c_rlo = csv.require_column("ramp_lo_mw");
  const auto c_rhi = csv.require_column("ramp_hi_mw");

  std::vector<EntityLimits> out;
  out.reserve(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& fields = csv.rows[r];
    const std::string where = csv.source + " line " + std::to_string(csv.line_numbers[r]);
    EntityLimits e;
    e.entity_id = fields[c_id];
    e.cap_up_mw = io::parse_double(fields[c_up], where + " column 'cap_up_mw'");
    e.cap_dn_mw = io::parse_double(fields[c_dn], where + " column 'cap_dn_mw'");
    e.ramp_lo_mw = io::parse_double(fields[c_rlo], where + " column 'ramp_lo_mw'");
    e.ramp_hi_mw = io::parse_double(fields[c_rhi], where + " column 'ramp_hi_mw'");
    try {
      validate_limits(e);
    } catch (const ValidationError& err) {
      throw ValidationError(where + ": " + err.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Fixed frequency traces are a single column of Hz values; a `freq_hz`
/// header row is accepted and skipped.
inline std::vector<double> load_frequency_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<double> trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "freq_hz") continue;
    trace.push_back(
        io::parse_double(line, path.string() + " line " + std::to_string(line_no)));
  }
  return trace;
}

}  // namespace flexreg::dispatch
