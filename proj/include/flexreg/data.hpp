#pragma once

// Historical market-record pipeline: strict CSV ingest, hour-of-day
// deployment rates, month-hour participation choices, profit sweeps over
// coin-price/efficiency/electricity grids, and droop-gain calibration from
// synchronized frequency and deployment traces.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flexreg/economics.hpp"
#include "flexreg/errors.hpp"
#include "flexreg/io.hpp"

namespace flexreg::data {

/// One ingested hour (or 4 s trace sample). Deployment uses the consumption
/// sign convention: deployed_up_mw <= 0 (consuming less), deployed_dn_mw >= 0.
struct MarketRecord {
  std::int64_t ts_epoch = 0;  // UTC
  double price_up = 0.0;      // $/MW
  double price_dn = 0.0;      // $/MW
  double procured_up_mw = 0.0;
  double procured_dn_mw = 0.0;
  double deployed_up_mw = 0.0;
  double deployed_dn_mw = 0.0;
  std::optional<double> freq_hz;
  std::optional<double> btc_usd;

  bool operator==(const MarketRecord&) const = default;
};

inline void validate_record(const MarketRecord& r, const std::string& where) {
  const auto bad = [&](const std::string& msg) { throw ValidationError(where + ": " + msg); };
  const bool finite = std::isfinite(r.price_up) && std::isfinite(r.price_dn) &&
                      std::isfinite(r.procured_up_mw) && std::isfinite(r.procured_dn_mw) &&
                      std::isfinite(r.deployed_up_mw) && std::isfinite(r.deployed_dn_mw);
  if (!finite) bad("non-finite field");
  if (r.price_up < 0.0 || r.price_dn < 0.0) bad("prices must be >= 0");
  if (r.procured_up_mw < 0.0 || r.procured_dn_mw < 0.0) bad("procured capacity must be >= 0");
  if (r.deployed_up_mw > 0.0) bad("deployed_up_mw must be <= 0 (consumption decrease)");
  if (r.deployed_dn_mw < 0.0) bad("deployed_dn_mw must be >= 0 (consumption increase)");
  if (-r.deployed_up_mw > r.procured_up_mw) bad("deployed_up_mw exceeds procured_up_mw");
  if (r.deployed_dn_mw > r.procured_dn_mw) bad("deployed_dn_mw exceeds procured_dn_mw");
  if (r.freq_hz && !std::isfinite(*r.freq_hz)) bad("freq_hz must be finite");
  if (r.btc_usd && (!std::isfinite(*r.btc_usd) || *r.btc_usd < 0.0)) {
    bad("btc_usd must be finite and >= 0");
  }
}

/// Required columns: ts,price_up,price_dn,procured_up_mw,procured_dn_mw,
/// deployed_up_mw,deployed_dn_mw. Optional: freq_hz, btc_usd (column may be
/// absent; a present column may hold empty cells). Errors name line and
/// column.
inline std::vector<MarketRecord> load_market_csv(const std::filesystem::path& path) {
  const auto csv = io::read_csv_file(path);
  const auto c_ts = csv.require_column("ts");
  const auto c_pu = csv.require_column("price_up");
  const auto c_pd = csv.require_column("price_dn");
  const auto c_cu = csv.require_column("procured_up_mw");
  const auto c_cd = csv.require_column("procured_dn_mw");
  const auto c_du = csv.require_column("deployed_up_mw");
  const auto c_dd = csv.require_column("deployed_dn_mw");
  const auto c_f = csv.find_column("freq_hz");
  const auto c_b = csv.find_column("btc_usd");

  std::vector<MarketRecord> out;
  out.reserve(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& fields = csv.rows[r];
    const std::string where = csv.source + " line " + std::to_string(csv.line_numbers[r]);
    MarketRecord rec;
    rec.ts_epoch = io::parse_timestamp_utc(fields[c_ts], where + " column 'ts'");
    rec.price_up = io::parse_double(fields[c_pu], where + " column 'price_up'");
    rec.price_dn = io::parse_double(fields[c_pd], where + " column 'price_dn'");
    rec.procured_up_mw = io::parse_double(fields[c_cu], where + " column 'procured_up_mw'");
    rec.procured_dn_mw = io::parse_double(fields[c_cd], where + " column 'procured_dn_mw'");
    rec.deployed_up_mw = io::parse_double(fields[c_du], where + " column 'deployed_up_mw'");
    rec.deployed_dn_mw = io::parse_double(fields[c_dd], where + " column 'deployed_dn_mw'");
    if (c_f != io::CsvTable::npos && !fields[c_f].empty()) {
      rec.freq_hz = io::parse_double(fields[c_f], where + " column 'freq_hz'");
    }
    if (c_b != io::CsvTable::npos && !fields[c_b].empty()) {
      rec.btc_usd = io::parse_double(fields[c_b], where + " column 'btc_usd'");
    }
    validate_record(rec, where);
    out.push_back(rec);
  }
  return out;
}

/// Writes the schema above. An optional column appears when any record
/// carries the value; records without it get an empty cell.
inline void save_market_csv(const std::vector<MarketRecord>& records, std::ostream& out) {
  const bool any_freq = std::any_of(records.begin(), records.end(),
                                    [](const MarketRecord& r) { return r.freq_hz.has_value(); });
  const bool any_btc = std::any_of(records.begin(), records.end(),
                                   [](const MarketRecord& r) { return r.btc_usd.has_value(); });
  std::vector<std::string> header = {"ts",
                                     "price_up",
                                     "price_dn",
                                     "procured_up_mw",
                                     "procured_dn_mw",
                                     "deployed_up_mw",
                                     "deployed_dn_mw"};
  if (any_freq) header.push_back("freq_hz");
  if (any_btc) header.push_back("btc_usd");
  io::write_csv_row(out, header);

  std::vector<std::string> fields;
  for (const auto& r : records) {
    fields.clear();
    fields.push_back(io::format_timestamp_utc(r.ts_epoch));
    fields.push_back(io::format_double(r.price_up));
    fields.push_back(io::format_double(r.price_dn));
    fields.push_back(io::format_double(r.procured_up_mw));
    fields.push_back(io::format_double(r.procured_dn_mw));
    fields.push_back(io::format_double(r.deployed_up_mw));
    fields.push_back(io::format_double(r.deployed_dn_mw));
    if (any_freq) fields.push_back(r.freq_hz ? io::format_double(*r.freq_hz) : "");
    if (any_btc) fields.push_back(r.btc_usd ? io::format_double(*r.btc_usd) : "");
    io::write_csv_row(out, fields);
  }
}

// ---------------------------------------------------------------------------
// Deployment rates.
// ---------------------------------------------------------------------------

/// Ratio-of-means deployment rates per local hour of day. An hour with zero
/// mean procurement has no defined rate and stays empty rather than zero.
struct DeploymentRates {
  std::array<std::optional<double>, 24> eps_up{};
  std::array<std::optional<double>, 24> eps_dn{};
};

inline DeploymentRates compute_deployment_rates(const std::vector<MarketRecord>& records,
                                                double tz_offset_hours) {
  if (records.empty()) throw ValidationError("deployment rates need at least one record");
  std::array<double, 24> sum_pu{}, sum_pd{}, sum_du{}, sum_dd{};
  for (const auto& r : records) {
    const int h = io::local_hour_of_day(r.ts_epoch, tz_offset_hours);
    sum_pu[h] += r.procured_up_mw;
    sum_pd[h] += r.procured_dn_mw;
    sum_du[h] += r.deployed_up_mw;
    sum_dd[h] += r.deployed_dn_mw;
  }
  DeploymentRates rates;
  for (int h = 0; h < 24; ++h) {
    if (sum_pu[h] > 0.0) rates.eps_up[h] = sum_du[h] / sum_pu[h];
    if (sum_pd[h] > 0.0) rates.eps_dn[h] = sum_dd[h] / sum_pd[h];
  }
  return rates;
}

/// Dataset-wide ratio of means, the figure a summary table quotes.
inline std::pair<double, double> overall_deployment_rates(
    const std::vector<MarketRecord>& records) {
  double sum_pu = 0.0, sum_pd = 0.0, sum_du = 0.0, sum_dd = 0.0;
  for (const auto& r : records) {
    sum_pu += r.procured_up_mw;
    sum_pd += r.procured_dn_mw;
    sum_du += r.deployed_up_mw;
    sum_dd += r.deployed_dn_mw;
  }
  if (sum_pu <= 0.0 || sum_pd <= 0.0) {
    throw ValidationError("overall deployment rates need nonzero procurement on both products");
  }
  return {sum_du / sum_pu, sum_dd / sum_pd};
}

// ---------------------------------------------------------------------------
// Month-hour participation choices.
// ---------------------------------------------------------------------------

enum class Choice { RegUp, RegDown, Neither };

inline const char* choice_name(Choice c) {
  switch (c) {
    case Choice::RegUp: return "RegUp";
    case Choice::RegDown: return "RegDown";
    default: return "Neither";
  }
}

struct MonthHourKey {
  int year = 0;
  int month = 0;  // 1-12
  int hour = 0;   // 0-23, local

  auto operator<=>(const MonthHourKey&) const = default;
};

/// Coin valuation for converting records into returns: a fixed $/BTC figure,
/// or each record's own btc_usd column.
struct Valuation {
  std::optional<double> constant_usd;

  static Valuation constant(double usd) { return Valuation{usd}; }
  static Valuation historical() { return Valuation{std::nullopt}; }
};

/// Realized per-row deployment fractions; zero when nothing was procured.
inline std::pair<double, double> realized_eps(const MarketRecord& r) {
  return {r.procured_up_mw > 0.0 ? r.deployed_up_mw / r.procured_up_mw : 0.0,
          r.procured_dn_mw > 0.0 ? r.deployed_dn_mw / r.procured_dn_mw : 0.0};
}

inline econ::Worthwhileness record_worthwhileness(const MarketRecord& r,
                                                  double energy_per_btc_mwh,
                                                  const Valuation& valuation,
                                                  econ::UsdPerMwh elec_price) {
  double btc = 0.0;
  if (valuation.constant_usd) {
    btc = *valuation.constant_usd;
  } else if (r.btc_usd) {
    btc = *r.btc_usd;
  } else {
    throw ValidationError("record at " + io::format_timestamp_utc(r.ts_epoch) +
                          " has no btc_usd; historical valuation needs that column");
  }
  const econ::UsdPerMwh rho = econ::mining_rate_of_return(btc, energy_per_btc_mwh, elec_price);
  const auto [eps_up, eps_dn] = realized_eps(r);
  return econ::worthwhileness(econ::UsdPerMw(r.price_up), econ::UsdPerMw(r.price_dn), rho,
                              eps_up, eps_dn);
}

/// Classifies each month-hour group by the sign structure of its mean
/// worthwhileness pair: all capacity on the better product when its mean is
/// positive, otherwise stay out. Keys exist only for nonempty groups.
inline std::map<MonthHourKey, Choice> month_hour_choice_map(
    const std::vector<MarketRecord>& records, const econ::MinerSpec& miner,
    const Valuation& valuation, econ::UsdPerMwh elec_price, double tz_offset_hours) {
  if (records.empty()) throw ValidationError("choice map needs at least one record");
  std::int64_t min_ts = records.front().ts_epoch, max_ts = records.front().ts_epoch;
  for (const auto& r : records) {
    min_ts = std::min(min_ts, r.ts_epoch);
    max_ts = std::max(max_ts, r.ts_epoch);
  }
  if (max_ts - min_ts < 27ll * 86400ll) {
    throw ValidationError("choice map needs records spanning at least one full month");
  }

  const double energy = econ::energy_per_bitcoin(miner);
  struct Sums {
    double w_up = 0.0;
    double w_dn = 0.0;
    std::size_t n = 0;
  };
  std::map<MonthHourKey, Sums> groups;
  for (const auto& r : records) {
    const io::CivilTime local = io::civil_local(r.ts_epoch, tz_offset_hours);
    const econ::Worthwhileness w = record_worthwhileness(r, energy, valuation, elec_price);
    Sums& g = groups[MonthHourKey{local.year, local.month, local.hour}];
    g.w_up += w.up.value();
    g.w_dn += w.dn.value();
    g.n += 1;
  }

  std::map<MonthHourKey, Choice> out;
  for (const auto& [key, g] : groups) {
    const double wu = g.w_up / static_cast<double>(g.n);
    const double wd = g.w_dn / static_cast<double>(g.n);
    Choice c = Choice::Neither;
    if (wu >= wd && wu > 0.0) {
      c = Choice::RegUp;
    } else if (wd > wu && wd > 0.0) {
      c = Choice::RegDown;
    }
    out[key] = c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profit sweep.
// ---------------------------------------------------------------------------

struct SweepSpec {
  std::vector<double> btc_price_grid;       // $/BTC
  std::vector<double> energy_per_btc_grid;  // MWh/BTC
  std::vector<double> elec_price_grid;      // $/MWh

  void validate() const {
    const auto check = [](const std::vector<double>& grid, const char* name) {
      if (grid.empty()) throw ValidationError(std::string(name) + " grid must be nonempty");
      for (const double v : grid) {
        if (!std::isfinite(v) || v <= 0.0) {
          throw ValidationError(std::string(name) + " grid entries must be finite and > 0");
        }
      }
    };
    check(btc_price_grid, "btc_price");
    check(energy_per_btc_grid, "energy_per_btc");
    check(elec_price_grid, "elec_price");
  }
};

struct SweepRow {
  double btc_usd = 0.0;
  double energy_per_btc_mwh = 0.0;
  double elec_usd_per_mwh = 0.0;
  double avg_profit_usd = 0.0;  // mean optimal hourly profit over all records
  std::size_t participating_hours = 0;
  std::size_t neither_hours = 0;
};

/// Evaluates every grid point against the full record list: per record, the
/// realized worthwhileness pair decides participation and the optimal profit
/// relative to not participating. Row order: btc outer, energy, elec inner.
inline std::vector<SweepRow> profit_sweep(const std::vector<MarketRecord>& records,
                                          const SweepSpec& sweep, double capacity_limit_mw) {
  sweep.validate();
  if (!std::isfinite(capacity_limit_mw) || capacity_limit_mw < 0.0) {
    throw ValidationError("capacity_limit_mw must be finite and >= 0");
  }
  if (records.empty()) throw ValidationError("profit sweep needs at least one record");

  std::vector<SweepRow> out;
  out.reserve(sweep.btc_price_grid.size() * sweep.energy_per_btc_grid.size() *
              sweep.elec_price_grid.size());
  for (const double btc : sweep.btc_price_grid) {
    for (const double energy : sweep.energy_per_btc_grid) {
      for (const double elec : sweep.elec_price_grid) {
        SweepRow row;
        row.btc_usd = btc;
        row.energy_per_btc_mwh = energy;
        row.elec_usd_per_mwh = elec;
        double total = 0.0;
        for (const auto& r : records) {
          const econ::Worthwhileness w = record_worthwhileness(
              r, energy, Valuation::constant(btc), econ::UsdPerMwh(elec));
          const double best = std::max(w.up.value(), w.dn.value());
          if (best > 0.0) {
            row.participating_hours += 1;
            total += capacity_limit_mw * best;
          } else {
            row.neither_hours += 1;
          }
        }
        row.avg_profit_usd = total / static_cast<double>(records.size());
        out.push_back(row);
      }
    }
  }
  return out;
}

/// Columns: btc_usd,energy_per_btc_mwh,elec_usd_per_mwh,avg_profit_usd,
/// participating_hours,neither_hours.
inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  io::write_csv_row(out, {"btc_usd", "energy_per_btc_mwh", "elec_usd_per_mwh", "avg_profit_usd",
                          "participating_hours", "neither_hours"});
  for (const auto& r : rows) {
    io::write_csv_row(out, {io::format_double(r.btc_usd),
                            io::format_double(r.energy_per_btc_mwh),
                            io::format_double(r.elec_usd_per_mwh),
                            io::format_double(r.avg_profit_usd),
                            std::to_string(r.participating_hours),
                            std::to_string(r.neither_hours)});
  }
}

// ---------------------------------------------------------------------------
// Droop-gain calibration.
// ---------------------------------------------------------------------------

struct BetaFit {
  double beta_mw_per_hz = 0.0;  // slope of deployment change vs frequency deviation
  double intercept_mw = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;
};

/// Ordinary least squares of per-step deployment change against frequency
/// deviation: pairs (f[t] - nominal, d[t+1] - d[t]). A trace without
/// frequency variation has no identifiable slope and is an error.
inline BetaFit calibrate_beta(const std::vector<double>& freq_hz,
                              const std::vector<double>& deployed_mw,
                              double nominal_hz = 60.0) {
  if (freq_hz.size() != deployed_mw.size()) {
    throw ValidationError("frequency and deployment traces must have equal length");
  }
  if (freq_hz.size() < 3) throw ValidationError("calibration needs at least 3 samples");
  const std::size_t n = freq_hz.size() - 1;

  double sum_x = 0.0, sum_y = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    sum_x += freq_hz[t] - nominal_hz;
    sum_y += deployed_mw[t + 1] - deployed_mw[t];
  }
  const double mean_x = sum_x / static_cast<double>(n);
  const double mean_y = sum_y / static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double dx = (freq_hz[t] - nominal_hz) - mean_x;
    const double dy = (deployed_mw[t + 1] - deployed_mw[t]) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) {
    throw ValidationError("constant frequency trace; droop gain is not identifiable");
  }

  BetaFit fit;
  fit.beta_mw_per_hz = sxy / sxx;
  fit.intercept_mw = mean_y - fit.beta_mw_per_hz * mean_x;
  const double ss_res = std::max(0.0, syy - fit.beta_mw_per_hz * sxy);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.slope_stderr =
      n > 2 ? std::sqrt(ss_res / (static_cast<double>(n) - 2.0) / sxx) : 0.0;
  return fit;
}

}  // namespace flexreg::data
