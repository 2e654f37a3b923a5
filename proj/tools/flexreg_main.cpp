// flexreg: simulator and decision toolkit for flexible loads selling
// frequency regulation. Subcommands cover day-ahead clearing, real-time
// dispatch episodes, contingency studies on an aggregate grid model,
// per-hour participation economics, parameter sweeps, and synthetic dataset
// generation.
//
// Exit codes: 0 success, 2 input/validation problem, 1 internal error.
// Errors go to stderr as single-line JSON. Primary payloads (CSV or JSON)
// go to stdout, or into --out DIR with a one-line JSON summary on stdout.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexreg/config.hpp"
#include "flexreg/data.hpp"
#include "flexreg/defaults.hpp"
#include "flexreg/dispatch.hpp"
#include "flexreg/economics.hpp"
#include "flexreg/errors.hpp"
#include "flexreg/fixture.hpp"
#include "flexreg/grid.hpp"
#include "flexreg/io.hpp"
#include "flexreg/market.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace flexreg;

struct Globals {
  std::string out_dir;
  std::string config_path;
  std::uint64_t seed = 1;
  int verbosity = 0;  // <0 quiet, 0 normal, >0 verbose
  Config cfg;

  // Flag beats config file beats built-in default.
  double num(const CLI::Option* opt, double flag_value, const std::string& key,
             double built_in) const {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if (const auto v = cfg.get_double(key)) return *v;
    return built_in;
  }

  void info(const std::string& msg) const {
    if (verbosity > 0) std::cerr << "info: " << msg << "\n";
  }
  void warn(const std::string& msg) const {
    if (verbosity >= 0) std::cerr << "warning: " << msg << "\n";
  }
};

fs::path write_file(const fs::path& dir, const std::string& name,
                    const std::function<void(std::ostream&)>& writer) {
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  writer(out);
  out.flush();
  if (!out) throw ValidationError("write failed for " + path.string());
  return path;
}

// Payload to stdout, or payload to <out>/<filename> plus the summary line.
void emit(const Globals& g, const std::string& filename,
          const std::function<void(std::ostream&)>& writer, json summary) {
  if (g.out_dir.empty()) {
    writer(std::cout);
    return;
  }
  const fs::path path = write_file(g.out_dir, filename, writer);
  summary["written"] = json::array({path.string()});
  std::cout << summary.dump() << "\n";
}

// Grid syntax: "a,b,c" explicit values, or "lo:hi:step" inclusive range.
std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
      const auto colon = text.find(':', pos);
      parts.push_back(text.substr(pos, colon - pos));
      if (colon == std::string::npos) break;
      pos = colon + 1;
    }
    if (parts.size() != 3) throw ValidationError(what + ": range syntax is lo:hi:step");
    const double lo = io::parse_double(parts[0], what + " lo");
    const double hi = io::parse_double(parts[1], what + " hi");
    const double step = io::parse_double(parts[2], what + " step");
    if (step <= 0.0) throw ValidationError(what + ": step must be > 0");
    if (hi < lo) throw ValidationError(what + ": hi must be >= lo");
    const auto count = static_cast<std::size_t>((hi - lo) / step + 1e-9) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(lo + double(i) * step);
    return out;
  }
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    out.push_back(io::parse_double(text.substr(pos, comma - pos), what));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// --------------------------------------------------------------------------
// clear
// --------------------------------------------------------------------------

struct ClearArgs {
  std::string offers_path;
  double demand_up = 0.0;
  double demand_dn = 0.0;
  int hour = -1;
  const CLI::Option* hour_opt = nullptr;
};

void run_clear(const Globals& g, const ClearArgs& a) {
  const auto rows = market::load_offers_csv(a.offers_path);
  g.info("loaded " + std::to_string(rows.size()) + " offers from " + a.offers_path);

  std::set<int> hours;
  for (const auto& r : rows) hours.insert(r.hour);

  int hour = a.hour;
  if (a.hour_opt->count() == 0) {
    if (hours.empty()) {
      throw ValidationError("offers file has no offer rows; pass --hour to clear an empty book");
    }
    if (hours.size() > 1) {
      throw ValidationError("offers file covers " + std::to_string(hours.size()) +
                            " distinct hours; pass --hour to pick one");
    }
    hour = *hours.begin();
  }

  std::vector<market::Offer> offers;
  for (const auto& r : rows) {
    if (r.hour == hour) offers.push_back(r.offer);
  }

  market::DemandSchedule demand;
  demand.hour = hour;
  demand.demand_up_mw = a.demand_up;
  demand.demand_dn_mw = a.demand_dn;
  const market::ClearingResult result = market::clear_market(offers, demand);
  const json payload = market::to_json(result);

  if (g.out_dir.empty()) {
    std::cout << payload.dump(2) << "\n";
    return;
  }
  const fs::path path =
      write_file(g.out_dir, "clearing.json", [&](std::ostream& o) { o << payload.dump(2) << "\n"; });
  json summary = payload;
  summary["written"] = json::array({path.string()});
  std::cout << summary.dump() << "\n";
}

// --------------------------------------------------------------------------
// dispatch
// --------------------------------------------------------------------------

struct DispatchArgs {
  std::string limits_path;
  std::string freq_path;
  std::string policy = "equitable";
  int steps = 0;
  double step_seconds = 0.0;
  double beta = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  const CLI::Option *steps_opt = nullptr, *step_seconds_opt = nullptr, *beta_opt = nullptr,
                    *band_lo_opt = nullptr, *band_hi_opt = nullptr;
};

void run_dispatch(const Globals& g, const DispatchArgs& a) {
  dispatch::EpisodeConfig cfg;
  cfg.steps = static_cast<int>(
      g.num(a.steps_opt, double(a.steps), "episode_steps", double(defaults::kEpisodeSteps)));
  cfg.step_seconds =
      g.num(a.step_seconds_opt, a.step_seconds, "step_seconds", defaults::kStepSeconds);
  cfg.beta_mw_per_hz = g.num(a.beta_opt, a.beta, "beta_mw_per_hz", defaults::kBetaMwPerHz);
  cfg.f_lo_hz = g.num(a.band_lo_opt, a.band_lo, "band_lo_hz", defaults::kBandLoHz);
  cfg.f_hi_hz = g.num(a.band_hi_opt, a.band_hi, "band_hi_hz", defaults::kBandHiHz);
  cfg.policy = dispatch::parse_policy(a.policy);

  const auto limits = dispatch::load_limits_csv(a.limits_path);
  const auto trace = dispatch::load_frequency_trace(a.freq_path);
  g.info("episode: " + std::to_string(limits.size()) + " entities, " +
         std::to_string(trace.size()) + " frequency samples");

  const dispatch::EpisodeLog log = dispatch::run_episode(cfg, limits, trace);

  double total_shortfall = 0.0;
  for (const auto& s : log.steps) total_shortfall += s.shortfall_mw;
  json summary = {{"steps", cfg.steps},
                  {"entities", limits.size()},
                  {"policy", a.policy},
                  {"total_shortfall_mw", total_shortfall}};
  emit(g, "episode.csv", [&](std::ostream& o) { dispatch::write_episode_csv(log, o); },
       std::move(summary));
}

// --------------------------------------------------------------------------
// contingency
// --------------------------------------------------------------------------

struct ContingencyArgs {
  std::vector<std::string> scenario_paths;
  double beta = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  const CLI::Option *beta_opt = nullptr, *band_lo_opt = nullptr, *band_hi_opt = nullptr;
};

void run_contingency(const Globals& g, const ContingencyArgs& a) {
  const double default_beta = g.num(a.beta_opt, a.beta, "beta_mw_per_hz", defaults::kBetaMwPerHz);
  const double band_lo =
      g.num(a.band_lo_opt, a.band_lo, "recovery_band_lo_hz", defaults::kRecoveryBandLoHz);
  const double band_hi =
      g.num(a.band_hi_opt, a.band_hi, "recovery_band_hi_hz", defaults::kRecoveryBandHiHz);
  if (band_lo >= band_hi) throw ValidationError("recovery band must satisfy lo < hz < hi");

  json scenarios = json::array();
  for (const auto& path : a.scenario_paths) {
    const grid::ContingencyScenario scenario = grid::load_scenario(path, default_beta);
    const grid::ContingencyResult result = grid::simulate_contingency(scenario);
    for (const auto& w : result.warnings) g.warn(scenario.name + ": " + w);

    double min_freq = result.trace.front().freq_hz;
    for (const auto& p : result.trace) min_freq = std::min(min_freq, p.freq_hz);
    const auto recovery = grid::recovery_time(result.trace, band_lo, band_hi);

    json entry = {{"name", result.name},
                  {"recovery_time_s", recovery ? json(*recovery) : json(nullptr)},
                  {"min_freq_hz", min_freq},
                  {"final_freq_hz", result.trace.back().freq_hz},
                  {"warnings", result.warnings}};
    if (!g.out_dir.empty()) {
      const fs::path out_path =
          write_file(g.out_dir, result.name + "_trace.csv",
                     [&](std::ostream& o) { grid::write_trace_csv(result.trace, o); });
      entry["trace_csv"] = out_path.string();
    }
    scenarios.push_back(std::move(entry));
  }
  std::cout << json{{"scenarios", scenarios}}.dump() << "\n";
}

// --------------------------------------------------------------------------
// profit
// --------------------------------------------------------------------------

struct MinerArgs {
  std::string miner = "s19xp";
  double efficiency = 0.0;
  double difficulty = 0.0;
  double block_reward = 0.0;
  const CLI::Option *efficiency_opt = nullptr, *difficulty_opt = nullptr,
                    *block_reward_opt = nullptr;
};

econ::MinerSpec resolve_miner(const Globals& g, const MinerArgs& a) {
  econ::MinerSpec spec;
  spec.network_difficulty =
      g.num(a.difficulty_opt, a.difficulty, "network_difficulty", defaults::kNetworkDifficulty);
  spec.block_reward_btc =
      g.num(a.block_reward_opt, a.block_reward, "block_reward_btc", defaults::kBlockRewardBtc);
  if (a.miner == "custom") {
    if (a.efficiency_opt->count() == 0) {
      throw ValidationError("--miner custom requires --efficiency J/TH");
    }
    spec.efficiency_j_per_th = a.efficiency;
  } else {
    if (a.efficiency_opt->count() > 0) {
      throw ValidationError("--efficiency applies only with --miner custom");
    }
    spec.efficiency_j_per_th =
        a.miner == "s19xp"
            ? g.num(nullptr, 0.0, "efficiency_s19xp_j_per_th", defaults::kEfficiencyS19XpJPerTh)
            : g.num(nullptr, 0.0, "efficiency_s19jpro_j_per_th",
                    defaults::kEfficiencyS19JProJPerTh);
  }
  spec.validate();
  return spec;
}

struct ProfitArgs {
  std::string market_path;
  MinerArgs miner;
  std::string btc = "historical";
  double elec = 0.0;
  double capacity = 0.0;
  double tz_offset = 0.0;
  const CLI::Option *elec_opt = nullptr, *capacity_opt = nullptr, *tz_opt = nullptr;
};

void run_profit(const Globals& g, const ProfitArgs& a) {
  const econ::MinerSpec miner = resolve_miner(g, a.miner);
  const double energy = econ::energy_per_bitcoin(miner);
  const double elec = g.num(a.elec_opt, a.elec, "elec_usd_per_mwh", defaults::kElecUsdPerMwh);
  const double tz = g.num(a.tz_opt, a.tz_offset, "tz_offset_hours", defaults::kTzOffsetHours);

  // The input may be raw market history (realized deployments) or
  // already-aggregated hourly economics; the header decides.
  const io::CsvTable probe = io::read_csv_file(a.market_path);
  const bool market_schema = probe.find_column("procured_up_mw") != io::CsvTable::npos;
  const bool econ_schema = probe.find_column("eps_up") != io::CsvTable::npos;
  if (!market_schema && !econ_schema) {
    throw ValidationError(a.market_path +
                          ": expected either market history columns (procured_up_mw, ...) or "
                          "hour-economics columns (eps_up, ...)");
  }

  std::vector<econ::DecisionRow> decisions;
  std::size_t participating = 0;
  double profit_sum = 0.0;

  if (market_schema) {
    const double capacity =
        g.num(a.capacity_opt, a.capacity, "capacity_limit_mw", defaults::kCapacityLimitMw);
    const data::Valuation valuation =
        a.btc == "historical" ? data::Valuation::historical()
                              : data::Valuation::constant(io::parse_double(a.btc, "--btc"));
    const auto records = data::load_market_csv(a.market_path);
    g.info("loaded " + std::to_string(records.size()) + " market records");
    decisions.reserve(records.size());
    for (const auto& r : records) {
      const econ::Worthwhileness w =
          data::record_worthwhileness(r, energy, valuation, econ::UsdPerMwh(elec));
      econ::DecisionRow row;
      row.ts_epoch = r.ts_epoch;
      row.decision = econ::optimal_capacity_split(w.up, w.dn, capacity);
      row.profit_usd = econ::optimal_participation_profit(w.up, w.dn, capacity);
      if (std::max(w.up.value(), w.dn.value()) > 0.0) ++participating;
      profit_sum += row.profit_usd;
      decisions.push_back(row);
    }
  } else {
    const auto records = econ::load_hour_economics_csv(a.market_path, energy, tz);
    g.info("loaded " + std::to_string(records.size()) + " hour-economics rows");
    decisions = econ::decide_hours(records);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& e = records[i].econ;
      const econ::Worthwhileness w =
          econ::worthwhileness(e.price_up, e.price_dn, e.rho, e.eps_up, e.eps_dn);
      if (std::max(w.up.value(), w.dn.value()) > 0.0) ++participating;
      profit_sum += decisions[i].profit_usd;
    }
  }

  const std::size_t n = decisions.size();
  json summary = {{"hours", n},
                  {"participating_hours", participating},
                  {"neither_hours", n - participating},
                  {"mean_profit_usd", n > 0 ? profit_sum / double(n) : 0.0},
                  {"energy_per_btc_mwh", energy}};
  emit(g, "decisions.csv", [&](std::ostream& o) { econ::write_decisions_csv(decisions, o); },
       std::move(summary));
}

// --------------------------------------------------------------------------
// sweep
// --------------------------------------------------------------------------

struct SweepArgs {
  std::string market_path;
  MinerArgs miner;
  std::string btc_grid;
  std::string energy_grid;
  std::string elec_grid;
  double capacity = 0.0;
  const CLI::Option *btc_grid_opt = nullptr, *energy_grid_opt = nullptr,
                    *elec_grid_opt = nullptr, *capacity_opt = nullptr;
};

void run_sweep(const Globals& g, const SweepArgs& a) {
  data::SweepSpec spec;
  spec.btc_price_grid = a.btc_grid_opt->count() > 0 ? parse_grid(a.btc_grid, "--btc-grid")
                                                    : parse_grid("20000:100000:10000", "--btc-grid");
  if (a.energy_grid_opt->count() > 0) {
    spec.energy_per_btc_grid = parse_grid(a.energy_grid, "--energy-grid");
  } else {
    spec.energy_per_btc_grid = {econ::energy_per_bitcoin(resolve_miner(g, a.miner))};
  }
  spec.elec_price_grid =
      a.elec_grid_opt->count() > 0
          ? parse_grid(a.elec_grid, "--elec-grid")
          : std::vector<double>{g.num(nullptr, 0.0, "elec_usd_per_mwh", defaults::kElecUsdPerMwh)};
  const double capacity =
      g.num(a.capacity_opt, a.capacity, "capacity_limit_mw", defaults::kCapacityLimitMw);

  const auto records = data::load_market_csv(a.market_path);
  g.info("loaded " + std::to_string(records.size()) + " market records");
  const auto rows = data::profit_sweep(records, spec, capacity);

  json summary = {{"rows", rows.size()},
                  {"btc_points", spec.btc_price_grid.size()},
                  {"energy_points", spec.energy_per_btc_grid.size()},
                  {"elec_points", spec.elec_price_grid.size()},
                  {"capacity_mw", capacity}};
  emit(g, "sweep.csv", [&](std::ostream& o) { data::write_sweep_csv(rows, o); },
       std::move(summary));
}

// --------------------------------------------------------------------------
// fixture
// --------------------------------------------------------------------------

struct FixtureArgs {
  int months = 3;
  bool match_table1 = false;
  std::string start = "2022-01";
};

void run_fixture(const Globals& g, const FixtureArgs& a) {
  data::FixtureSpec spec;
  spec.months = a.months;
  spec.seed = g.seed;
  spec.match_summary = a.match_table1;
  spec.btc_usd_center = g.num(nullptr, 0.0, "btc_usd", defaults::kBtcUsd);
  spec.elec_usd_per_mwh = g.num(nullptr, 0.0, "elec_usd_per_mwh", defaults::kElecUsdPerMwh);

  const auto dash = a.start.find('-');
  if (dash == std::string::npos) throw ValidationError("--start must be YYYY-MM");
  spec.start_year = static_cast<int>(io::parse_int(a.start.substr(0, dash), "--start year"));
  spec.start_month = static_cast<int>(io::parse_int(a.start.substr(dash + 1), "--start month"));

  const auto records = data::generate_fixture(spec);
  json summary = {{"rows", records.size()},
                  {"months", spec.months},
                  {"seed", spec.seed},
                  {"match_table1", spec.match_summary}};
  emit(g, "fixture.csv", [&](std::ostream& o) { data::save_market_csv(records, o); },
       std::move(summary));
}

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flexible-load frequency-regulation simulator and decision toolkit"};
  app.require_subcommand(1);

  Globals g;
  app.add_option("--out", g.out_dir, "directory for output files (payload goes to stdout without it)");
  app.add_option("--config", g.config_path, "config file with default overrides (key = value)");
  app.add_option("--seed", g.seed, "random seed for fixture generation");
  app.add_flag_function("-v,--verbose", [&](std::int64_t n) { g.verbosity = int(n); },
                        "informational notes on stderr");
  app.add_flag_function("-q,--quiet", [&](std::int64_t n) { g.verbosity = -int(n); },
                        "suppress warnings");

  auto* clear = app.add_subcommand("clear", "clear one day-ahead regulation market hour");
  ClearArgs clear_args;
  clear->add_option("--offers", clear_args.offers_path, "offers CSV (hour,entity_id,product,capacity_mw,price_per_mw)")
      ->required();
  clear->add_option("--demand-up", clear_args.demand_up, "Reg-Up demand, MW")->required();
  clear->add_option("--demand-dn", clear_args.demand_dn, "Reg-Down demand, MW")->required();
  clear_args.hour_opt =
      clear->add_option("--hour", clear_args.hour, "hour to clear (required for multi-hour files)");

  auto* dispatch_cmd = app.add_subcommand("dispatch", "run one real-time dispatch episode");
  DispatchArgs dispatch_args;
  dispatch_cmd->add_option("--limits", dispatch_args.limits_path, "entity limits CSV")->required();
  dispatch_cmd->add_option("--freq", dispatch_args.freq_path, "frequency trace CSV, one Hz sample per step")
      ->required();
  dispatch_cmd->add_option("--policy", dispatch_args.policy, "equitable or sparse");
  dispatch_args.steps_opt = dispatch_cmd->add_option("--steps", dispatch_args.steps, "episode steps");
  dispatch_args.step_seconds_opt =
      dispatch_cmd->add_option("--step-seconds", dispatch_args.step_seconds, "seconds per step");
  dispatch_args.beta_opt =
      dispatch_cmd->add_option("--beta", dispatch_args.beta, "droop gain, MW per Hz");
  dispatch_args.band_lo_opt =
      dispatch_cmd->add_option("--band-lo", dispatch_args.band_lo, "deadband lower edge, Hz");
  dispatch_args.band_hi_opt =
      dispatch_cmd->add_option("--band-hi", dispatch_args.band_hi, "deadband upper edge, Hz");

  auto* contingency = app.add_subcommand("contingency", "simulate generation-loss scenarios");
  ContingencyArgs contingency_args;
  contingency->add_option("--scenario", contingency_args.scenario_paths, "scenario file(s)")
      ->required();
  contingency_args.beta_opt =
      contingency->add_option("--beta", contingency_args.beta, "default droop gain, MW per Hz");
  contingency_args.band_lo_opt = contingency->add_option(
      "--band-lo", contingency_args.band_lo, "recovery band lower edge, Hz");
  contingency_args.band_hi_opt = contingency->add_option(
      "--band-hi", contingency_args.band_hi, "recovery band upper edge, Hz");

  const auto add_miner_flags = [](CLI::App* cmd, MinerArgs& m) {
    cmd->add_option("--miner", m.miner, "s19xp, s19jpro, or custom")
        ->check(CLI::IsMember({"s19xp", "s19jpro", "custom"}));
    m.efficiency_opt = cmd->add_option("--efficiency", m.efficiency, "J/TH for --miner custom");
    m.difficulty_opt = cmd->add_option("--difficulty", m.difficulty, "network difficulty");
    m.block_reward_opt = cmd->add_option("--block-reward", m.block_reward, "BTC per block");
  };

  auto* profit = app.add_subcommand("profit", "per-hour participation decisions and profit");
  ProfitArgs profit_args;
  profit->add_option("--market", profit_args.market_path, "market history or hour-economics CSV")
      ->required();
  add_miner_flags(profit, profit_args.miner);
  profit->add_option("--btc", profit_args.btc, "coin valuation in USD, or 'historical'");
  profit_args.elec_opt = profit->add_option("--elec", profit_args.elec, "electricity price, $/MWh");
  profit_args.capacity_opt =
      profit->add_option("--capacity", profit_args.capacity, "capacity limit, MW");
  profit_args.tz_opt = profit->add_option(
      "--tz-offset", profit_args.tz_offset, "hours added to UTC for local hour-of-day");

  auto* sweep = app.add_subcommand("sweep", "profit over a valuation/energy/price grid");
  SweepArgs sweep_args;
  sweep->add_option("--market", sweep_args.market_path, "market history CSV")->required();
  add_miner_flags(sweep, sweep_args.miner);
  sweep_args.btc_grid_opt =
      sweep->add_option("--btc-grid", sweep_args.btc_grid, "$/BTC grid: a,b,c or lo:hi:step");
  sweep_args.energy_grid_opt = sweep->add_option("--energy-grid", sweep_args.energy_grid,
                                                 "MWh/BTC grid: a,b,c or lo:hi:step");
  sweep_args.elec_grid_opt =
      sweep->add_option("--elec-grid", sweep_args.elec_grid, "$/MWh grid: a,b,c or lo:hi:step");
  sweep_args.capacity_opt = sweep->add_option("--capacity", sweep_args.capacity, "capacity limit, MW");

  auto* fixture = app.add_subcommand("fixture", "generate a synthetic market dataset");
  FixtureArgs fixture_args;
  fixture->add_option("--months", fixture_args.months, "number of whole months");
  fixture->add_flag("--match-table1", fixture_args.match_table1,
                    "pin dataset-wide price and deployment averages to their reference values");
  fixture->add_option("--start", fixture_args.start, "first month, YYYY-MM");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
    if (!g.config_path.empty()) g.cfg = Config::from_file(g.config_path);

    if (*clear) run_clear(g, clear_args);
    if (*dispatch_cmd) run_dispatch(g, dispatch_args);
    if (*contingency) run_contingency(g, contingency_args);
    if (*profit) run_profit(g, profit_args);
    if (*sweep) run_sweep(g, sweep_args);
    if (*fixture) run_fixture(g, fixture_args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("validation", e.what(), 2);
  } catch (const ValidationError& e) {
    return fail("validation", e.what(), 2);
  } catch (const ContractViolation& e) {
    return fail("contract", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
