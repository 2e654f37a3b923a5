#pragma once

// Hourly economics of holding regulation capacity with a flexible mining
// load: expected energy per coin, the mining rate of return, the three
// reward streams (day-ahead capacity payment, baseline mining net of the
// held range, deployment-driven mining swing), their per-MW collapse into
// worthwhileness values, and the closed-form optimal capacity split.
//
// Capacity-hour prices ($/MW) and energy prices ($/MWh) are distinct wrapper
// types; passing one where the other is expected does not compile.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "flexreg/errors.hpp"
#include "flexreg/io.hpp"

namespace flexreg::econ {

class UsdPerMw {
 public:
  constexpr UsdPerMw() = default;
  constexpr explicit UsdPerMw(double v) : v_(v) {}
  constexpr double value() const { return v_; }

 private:
  double v_ = 0.0;
};

class UsdPerMwh {
 public:
  constexpr UsdPerMwh() = default;
  constexpr explicit UsdPerMwh(double v) : v_(v) {}
  constexpr double value() const { return v_; }

 private:
  double v_ = 0.0;
};

struct MinerSpec {
  double efficiency_j_per_th = 0.0;  // >= 0; zero models a lossless machine
  double network_difficulty = 0.0;   // > 0
  double block_reward_btc = 0.0;     // > 0

  void validate() const {
    if (!std::isfinite(efficiency_j_per_th) || efficiency_j_per_th < 0.0) {
      throw ValidationError("efficiency_j_per_th must be finite and >= 0");
    }
    if (!std::isfinite(network_difficulty) || network_difficulty <= 0.0) {
      throw ValidationError("network_difficulty must be finite and > 0");
    }
    if (!std::isfinite(block_reward_btc) || block_reward_btc <= 0.0) {
      throw ValidationError("block_reward_btc must be finite and > 0");
    }
  }
};

/// Expected MWh burned per coin mined: difficulty/2^8 terahashes per block
/// at `efficiency` joules per terahash, spread over the block reward.
inline double energy_per_bitcoin(const MinerSpec& spec) {
  spec.validate();
  constexpr double kJoulesPerMwh = 3.6e9;
  const double joules_per_block = (spec.network_difficulty / 256.0) * spec.efficiency_j_per_th;
  return joules_per_block / spec.block_reward_btc / kJoulesPerMwh;
}

/// Dollar value of a MWh spent mining, net of the electricity price. May be
/// negative when electricity is dearer than the coin yield.
inline UsdPerMwh mining_rate_of_return(double btc_usd, double energy_per_btc_mwh,
                                       UsdPerMwh elec_price) {
  if (!std::isfinite(btc_usd) || btc_usd < 0.0) {
    throw ValidationError("btc_usd must be finite and >= 0");
  }
  if (!std::isfinite(energy_per_btc_mwh) || energy_per_btc_mwh <= 0.0) {
    throw ValidationError("energy_per_btc_mwh must be finite and > 0");
  }
  if (!std::isfinite(elec_price.value())) throw ValidationError("elec_price must be finite");
  return UsdPerMwh(btc_usd / energy_per_btc_mwh - elec_price.value());
}

namespace detail {

inline void require_nonneg(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ValidationError(std::string(what) + " must be finite and >= 0");
  }
}

inline void require_feasible(double c_up, double c_dn, double capacity_limit) {
  require_nonneg(c_up, "c_up_mw");
  require_nonneg(c_dn, "c_dn_mw");
  require_nonneg(capacity_limit, "capacity_limit_mw");
  // Slack covers rounding in callers that split the limit arithmetically.
  if (c_up + c_dn > capacity_limit + 1e-9 * std::max(1.0, capacity_limit)) {
    throw ValidationError("c_up_mw + c_dn_mw exceeds capacity_limit_mw");
  }
}

inline void require_eps_signs(double eps_up, double eps_dn) {
  if (!std::isfinite(eps_up) || eps_up > 0.0 || !std::isfinite(eps_dn) || eps_dn < 0.0) {
    throw ValidationError("deployment rates need eps_up <= 0 <= eps_dn");
  }
}

}  // namespace detail

/// Day-ahead capacity payment for the cleared pair.
inline double dam_reward(UsdPerMw price_up, double c_up_mw, UsdPerMw price_dn, double c_dn_mw) {
  detail::require_nonneg(price_up.value(), "price_up");
  detail::require_nonneg(price_dn.value(), "price_dn");
  detail::require_nonneg(c_up_mw, "c_up_mw");
  detail::require_nonneg(c_dn_mw, "c_dn_mw");
  return price_up.value() * c_up_mw + price_dn.value() * c_dn_mw;
}

/// Mining value of the hour before any deployment. Profitable mining runs
/// everything except the range held back for Reg-Down; unprofitable mining
/// runs only the Reg-Up commitment it must be able to shed.
inline double base_reward(UsdPerMwh rho, double capacity_limit_mw, double c_up_mw,
                          double c_dn_mw) {
  if (!std::isfinite(rho.value())) throw ValidationError("rho must be finite");
  detail::require_feasible(c_up_mw, c_dn_mw, capacity_limit_mw);
  return rho.value() >= 0.0 ? rho.value() * (capacity_limit_mw - c_dn_mw)
                            : rho.value() * c_up_mw;
}

/// Mining value swing caused by realized deployment of the held capacities.
inline double deployment_reward(UsdPerMwh rho, double eps_up, double c_up_mw, double eps_dn,
                                double c_dn_mw) {
  if (!std::isfinite(rho.value())) throw ValidationError("rho must be finite");
  detail::require_eps_signs(eps_up, eps_dn);
  detail::require_nonneg(c_up_mw, "c_up_mw");
  detail::require_nonneg(c_dn_mw, "c_dn_mw");
  return rho.value() * (eps_up * c_up_mw + eps_dn * c_dn_mw);
}

struct Worthwhileness {
  UsdPerMw up;
  UsdPerMw dn;
};

/// Per-MW value of holding each product for the hour, folding the capacity
/// payment, foregone or gained mining, and expected deployment together.
/// The rho >= 0 indicator lands in the Reg-Down term; rho < 0 in Reg-Up.
inline Worthwhileness worthwhileness(UsdPerMw price_up, UsdPerMw price_dn, UsdPerMwh rho,
                                     double eps_up, double eps_dn) {
  detail::require_nonneg(price_up.value(), "price_up");
  detail::require_nonneg(price_dn.value(), "price_dn");
  detail::require_eps_signs(eps_up, eps_dn);
  if (!std::isfinite(rho.value())) throw ValidationError("rho must be finite");
  const double r = rho.value();
  return Worthwhileness{
      UsdPerMw(price_up.value() + r * (eps_up + (r < 0.0 ? 1.0 : 0.0))),
      UsdPerMw(price_dn.value() + r * (eps_dn - (r >= 0.0 ? 1.0 : 0.0))),
  };
}

struct HourEconomics {
  int hour = 0;  // local hour of day, 0-23
  UsdPerMw price_up;
  UsdPerMw price_dn;
  UsdPerMwh rho;
  double eps_up = 0.0;
  double eps_dn = 0.0;
  double capacity_limit_mw = 0.0;
  double btc_usd = 0.0;
  double energy_per_btc_mwh = 0.0;
  UsdPerMwh elec_price;

  void validate() const {
    if (hour < 0 || hour > 23) throw ValidationError("hour must be in 0..23");
    detail::require_nonneg(price_up.value(), "price_up");
    detail::require_nonneg(price_dn.value(), "price_dn");
    if (eps_up < -1.0 || eps_up > 0.0 || !std::isfinite(eps_up)) {
      throw ValidationError("eps_up must lie in [-1, 0]");
    }
    if (eps_dn < 0.0 || eps_dn > 1.0 || !std::isfinite(eps_dn)) {
      throw ValidationError("eps_dn must lie in [0, 1]");
    }
    detail::require_nonneg(capacity_limit_mw, "capacity_limit_mw");
    detail::require_nonneg(btc_usd, "btc_usd");
    if (!std::isfinite(energy_per_btc_mwh) || energy_per_btc_mwh <= 0.0) {
      throw ValidationError("energy_per_btc_mwh must be finite and > 0");
    }
    if (!std::isfinite(elec_price.value())) throw ValidationError("elec_price must be finite");
    const double expect = btc_usd / energy_per_btc_mwh - elec_price.value();
    if (std::abs(rho.value() - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
      throw ValidationError("rho is inconsistent with btc_usd, energy_per_btc_mwh, elec_price");
    }
  }
};

inline HourEconomics make_hour_economics(int hour, UsdPerMw price_up, UsdPerMw price_dn,
                                         double eps_up, double eps_dn, double capacity_limit_mw,
                                         double btc_usd, double energy_per_btc_mwh,
                                         UsdPerMwh elec_price) {
  HourEconomics e;
  e.hour = hour;
  e.price_up = price_up;
  e.price_dn = price_dn;
  e.rho = mining_rate_of_return(btc_usd, energy_per_btc_mwh, elec_price);
  e.eps_up = eps_up;
  e.eps_dn = eps_dn;
  e.capacity_limit_mw = capacity_limit_mw;
  e.btc_usd = btc_usd;
  e.energy_per_btc_mwh = energy_per_btc_mwh;
  e.elec_price = elec_price;
  e.validate();
  return e;
}

struct CapacityDecision {
  double c_up_mw = 0.0;
  double c_dn_mw = 0.0;
};

/// Net reward of the hour for a feasible decision. Decomposes exactly into
/// dam_reward + base_reward + deployment_reward.
inline double net_reward(const HourEconomics& econ, const CapacityDecision& decision) {
  econ.validate();
  detail::require_feasible(decision.c_up_mw, decision.c_dn_mw, econ.capacity_limit_mw);
  const Worthwhileness w =
      worthwhileness(econ.price_up, econ.price_dn, econ.rho, econ.eps_up, econ.eps_dn);
  return w.up.value() * decision.c_up_mw + w.dn.value() * decision.c_dn_mw +
         econ.capacity_limit_mw * std::max(econ.rho.value(), 0.0);
}

/// The linear objective makes the optimum a corner of the simplex: all
/// capacity on the better product when its expected value is positive,
/// nothing otherwise. Never both products at once.
inline CapacityDecision optimal_capacity_split(UsdPerMw expected_w_up, UsdPerMw expected_w_dn,
                                               double capacity_limit_mw) {
  detail::require_nonneg(capacity_limit_mw, "capacity_limit_mw");
  const double wu = expected_w_up.value();
  const double wd = expected_w_dn.value();
  if (!std::isfinite(wu) || !std::isfinite(wd)) {
    throw ValidationError("expected worthwhileness must be finite");
  }
  if (wu >= wd && wu > 0.0) return CapacityDecision{capacity_limit_mw, 0.0};
  if (wd > wu && wd > 0.0) return CapacityDecision{0.0, capacity_limit_mw};
  return CapacityDecision{0.0, 0.0};
}

/// Optimal profit relative to the no-participation baseline.
inline double optimal_participation_profit(UsdPerMw expected_w_up, UsdPerMw expected_w_dn,
                                           double capacity_limit_mw) {
  detail::require_nonneg(capacity_limit_mw, "capacity_limit_mw");
  return capacity_limit_mw *
         std::max({expected_w_up.value(), expected_w_dn.value(), 0.0});
}

// ---------------------------------------------------------------------------
// External interfaces: hour-economics batch CSV in, decisions CSV out.
// ---------------------------------------------------------------------------

struct HourRecord {
  long long ts_epoch = 0;
  HourEconomics econ;
};

/// Reads `ts,price_up,price_dn,eps_up,eps_dn,btc_usd,elec_usd_per_mwh,
/// capacity_limit_mw`. The caller supplies the miner's energy-per-coin; the
/// local hour of day comes from ts shifted by tz_offset_hours.
inline std::vector<HourRecord> load_hour_economics_csv(const std::filesystem::path& path,
                                                       double energy_per_btc_mwh,
                                                       double tz_offset_hours) {
  const auto csv = io::read_csv_file(path);
  const auto c_ts = csv.require_column("ts");
  const auto c_pu = csv.require_column("price_up");
  const auto c_pd = csv.require_column("price_dn");
  const auto c_eu = csv.require_column("eps_up");
  const auto c_ed = csv.require_column("eps_dn");
  const auto c_btc = csv.require_column("btc_usd");
  const auto c_elec = csv.require_column("elec_usd_per_mwh");
  const auto c_cap = csv.require_column("capacity_limit_mw");

  std::vector<HourRecord> out;
  out.reserve(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& fields = csv.rows[r];
    const std::string where = csv.source + " line " + std::to_string(csv.line_numbers[r]);
    HourRecord rec;
    rec.ts_epoch = io::parse_timestamp_utc(fields[c_ts], where + " column 'ts'");
    try {
      rec.econ = make_hour_economics(
          io::local_hour_of_day(rec.ts_epoch, tz_offset_hours),
          UsdPerMw(io::parse_double(fields[c_pu], where + " column 'price_up'")),
          UsdPerMw(io::parse_double(fields[c_pd], where + " column 'price_dn'")),
          io::parse_double(fields[c_eu], where + " column 'eps_up'"),
          io::parse_double(fields[c_ed], where + " column 'eps_dn'"),
          io::parse_double(fields[c_cap], where + " column 'capacity_limit_mw'"),
          io::parse_double(fields[c_btc], where + " column 'btc_usd'"), energy_per_btc_mwh,
          UsdPerMwh(io::parse_double(fields[c_elec], where + " column 'elec_usd_per_mwh'")));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    out.push_back(rec);
  }
  return out;
}

struct DecisionRow {
  long long ts_epoch = 0;
  CapacityDecision decision;
  double profit_usd = 0.0;
};

/// Per-hour optimal decision and baseline-relative profit, one row per input
/// record, using each row's own worthwhileness as the expectation.
inline std::vector<DecisionRow> decide_hours(const std::vector<HourRecord>& records) {
  std::vector<DecisionRow> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    const Worthwhileness w = worthwhileness(rec.econ.price_up, rec.econ.price_dn, rec.econ.rho,
                                            rec.econ.eps_up, rec.econ.eps_dn);
    DecisionRow row;
    row.ts_epoch = rec.ts_epoch;
    row.decision = optimal_capacity_split(w.up, w.dn, rec.econ.capacity_limit_mw);
    row.profit_usd = optimal_participation_profit(w.up, w.dn, rec.econ.capacity_limit_mw);
    out.push_back(row);
  }
  return out;
}

/// Columns: ts,c_up_mw,c_dn_mw,profit_usd.
inline void write_decisions_csv(const std::vector<DecisionRow>& rows, std::ostream& out) {
  io::write_csv_row(out, {"ts", "c_up_mw", "c_dn_mw", "profit_usd"});
  for (const auto& row : rows) {
    io::write_csv_row(out, {io::format_timestamp_utc(row.ts_epoch),
                            io::format_double(row.decision.c_up_mw),
                            io::format_double(row.decision.c_dn_mw),
                            io::format_double(row.profit_usd)});
  }
}

}  // namespace flexreg::econ
