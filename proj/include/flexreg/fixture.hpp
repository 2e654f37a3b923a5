#pragma once

// Synthetic multi-month market datasets. Real regulation-market history is
// not redistributable, so pipeline tests and demos run on generated hourly
// records. With summary matching enabled, the rows reproduce target
// dataset-wide aggregates to rounding error: mean capacity prices, mean
// procured capacities, and ratio-of-means deployment rates. A small
// participating subset of hours is additionally shaped so its mean Reg-Up
// worthwhileness equals a target per-MW profit, while every other hour stays
// unprofitable on both products at returns near the generation-time rate.
// Identical spec (including seed) reproduces the dataset byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "flexreg/data.hpp"
#include "flexreg/defaults.hpp"
#include "flexreg/economics.hpp"
#include "flexreg/errors.hpp"
#include "flexreg/io.hpp"

namespace flexreg::data {

struct FixtureSpec {
  int months = 3;
  std::uint64_t seed = 1;
  bool match_summary = true;
  int start_year = 2022;
  int start_month = 1;

  // Dataset-wide targets, honored when match_summary is set.
  double mean_price_up = 21.67;  // $/MW
  double mean_price_dn = 8.46;
  double mean_procured_up_mw = 359.0;
  double mean_procured_dn_mw = 348.0;
  double rate_up = 0.16;  // deployment-rate magnitudes
  double rate_dn = 0.25;
  double participating_w_up = 165.0;  // mean $/MW over participating hours
  double btc_usd_center = defaults::kBtcUsd;
  double energy_per_btc_mwh = econ::energy_per_bitcoin(econ::MinerSpec{
      defaults::kEfficiencyS19XpJPerTh, defaults::kNetworkDifficulty,
      defaults::kBlockRewardBtc});
  double elec_usd_per_mwh = defaults::kElecUsdPerMwh;

  void validate() const {
    if (months < 1 || months > 240) throw ValidationError("months must be in 1..240");
    if (start_year < 1970 || start_year > 9999 || start_month < 1 || start_month > 12) {
      throw ValidationError("fixture start must be a valid year/month");
    }
    const bool targets_ok =
        mean_price_up > 0.0 && mean_price_dn > 0.0 && mean_procured_up_mw > 0.0 &&
        mean_procured_dn_mw > 0.0 && rate_up > 0.0 && rate_up < 0.5 && rate_dn > 0.0 &&
        rate_dn < 0.5 && participating_w_up > 0.0 && btc_usd_center > 0.0 &&
        energy_per_btc_mwh > 0.0 && elec_usd_per_mwh >= 0.0;
    if (!targets_ok) throw ValidationError("fixture targets out of range");
  }
};

namespace detail {

// mt19937_64 output mapped to [0, 1) by hand; std distributions differ
// across standard libraries and would break byte-identical reproduction.
class Uniform01 {
 public:
  explicit Uniform01(std::uint64_t seed) : rng_(seed) {}

  double next() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * next(); }
  std::uint64_t raw() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

inline void fixture_guard(bool ok, const char* what) {
  if (!ok) {
    throw ContractViolation(std::string("fixture construction failed: ") + what +
                            "; adjust targets or seed");
  }
}

}  // namespace detail

inline std::vector<MarketRecord> generate_fixture(const FixtureSpec& spec) {
  spec.validate();

  std::size_t n = 0;
  {
    int y = spec.start_year, m = spec.start_month;
    for (int i = 0; i < spec.months; ++i) {
      n += static_cast<std::size_t>(io::days_in_month(y, m)) * 24u;
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }
  const std::int64_t start_epoch =
      io::to_epoch_seconds(io::CivilTime{spec.start_year, spec.start_month, 1, 0, 0, 0});

  detail::Uniform01 rng(spec.seed);

  // Base shape draws, one block per row so the stream layout is stable.
  std::vector<double> a_up(n), a_dn(n), v(n), h(n);
  for (std::size_t i = 0; i < n; ++i) {
    a_up[i] = rng.range(0.8, 1.2);
    a_dn[i] = rng.range(0.8, 1.2);
    v[i] = rng.range(-1.0, 1.0);
    h[i] = rng.range(0.5, 1.5);
  }

  std::vector<double> procured_up(n), procured_dn(n), phi_up(n), phi_dn(n);
  std::vector<double> btc(n), price_up(n), price_dn(n);
  std::vector<char> in_s(n, 0);

  if (!spec.match_summary) {
    for (std::size_t i = 0; i < n; ++i) {
      procured_up[i] = spec.mean_procured_up_mw * a_up[i];
      procured_dn[i] = spec.mean_procured_dn_mw * a_dn[i];
      phi_up[i] = spec.rate_up + 0.15 * rng.range(-1.0, 1.0);
      phi_dn[i] = spec.rate_dn + 0.15 * rng.range(-1.0, 1.0);
      phi_up[i] = std::clamp(phi_up[i], 0.0, 1.0);
      phi_dn[i] = std::clamp(phi_dn[i], 0.0, 1.0);
      btc[i] = spec.btc_usd_center * (1.0 + 0.02 * v[i]);
      price_up[i] = spec.mean_price_up * rng.range(0.5, 1.5);
      price_dn[i] = spec.mean_price_dn * h[i];
    }
  } else {
    // Participating subset: a fixed 8% of rows, chosen by seeded shuffle.
    // The first three get a large deployment fraction and a below-center
    // worthwhileness so rising coin valuations demonstrably push hours out
    // of participation.
    const std::size_t k =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.08 * double(n))));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.raw() % (i + 1));
      std::swap(idx[i], idx[j]);
    }
    std::vector<char> forced(n, 0);
    for (std::size_t s = 0; s < k; ++s) in_s[idx[s]] = 1;
    for (std::size_t s = 0; s < std::min<std::size_t>(3, k); ++s) forced[idx[s]] = 1;

    for (std::size_t i = 0; i < n; ++i) {
      const double z_up = rng.range(-1.0, 1.0);
      const double z_dn = rng.range(-1.0, 1.0);
      phi_up[i] = forced[i] ? 0.30 : spec.rate_up + 0.15 * z_up;
      phi_dn[i] = spec.rate_dn + 0.15 * z_dn;
      detail::fixture_guard(phi_up[i] > 0.0 && phi_dn[i] > 0.0, "deployment fraction <= 0");
    }

    // Procured capacities scaled to the target means.
    double sum_pu = 0.0, sum_pd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      procured_up[i] = spec.mean_procured_up_mw * a_up[i];
      procured_dn[i] = spec.mean_procured_dn_mw * a_dn[i];
      sum_pu += procured_up[i];
      sum_pd += procured_dn[i];
    }
    const double s_up = spec.mean_procured_up_mw * double(n) / sum_pu;
    const double s_dn = spec.mean_procured_dn_mw * double(n) / sum_pd;
    sum_pu = sum_pd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      procured_up[i] *= s_up;
      procured_dn[i] *= s_dn;
      sum_pu += procured_up[i];
      sum_pd += procured_dn[i];
    }

    // Deployment fractions rescaled so the ratio of means lands on target.
    double wsum_up = 0.0, wsum_dn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wsum_up += phi_up[i] * procured_up[i];
      wsum_dn += phi_dn[i] * procured_dn[i];
    }
    const double t_up = spec.rate_up * sum_pu / wsum_up;
    const double t_dn = spec.rate_dn * sum_pd / wsum_dn;
    for (std::size_t i = 0; i < n; ++i) {
      phi_up[i] *= t_up;
      phi_dn[i] *= t_dn;
      detail::fixture_guard(phi_up[i] < 1.0 && phi_dn[i] < 1.0, "deployment fraction >= 1");
    }

    for (std::size_t i = 0; i < n; ++i) btc[i] = spec.btc_usd_center * (1.0 + 0.02 * v[i]);

    // Returns at generation-time valuation; the price construction below
    // needs mining to be profitable so non-participating prices stay small.
    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i) {
      rho[i] = btc[i] / spec.energy_per_btc_mwh - spec.elec_usd_per_mwh;
      detail::fixture_guard(rho[i] > 0.0, "nonpositive mining return");
    }

    // Reg-Down prices: target mean, and low enough that holding Reg-Down
    // never beats mining through the hour.
    double sum_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum_h += h[i];
    for (std::size_t i = 0; i < n; ++i) {
      price_dn[i] = spec.mean_price_dn * h[i] * (double(n) / sum_h);
      detail::fixture_guard(price_dn[i] + rho[i] * (phi_dn[i] - 1.0) < 0.0,
                            "Reg-Down worthwhileness not negative");
    }

    // Reg-Up prices. Participating rows: price set so that w_up lands at the
    // target plus a centered spread (spread sums to zero, so the subset mean
    // is exact). Other rows: price is a fraction of the foregone mining
    // value, scaled by g so the dataset-wide mean price is exact while w_up
    // stays strictly negative.
    std::vector<double> delta(n, 0.0), q(n, 0.0);
    double delta_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.next();
      if (in_s[i]) {
        delta[i] = forced[i] ? -30.0 : 80.0 * (u - 0.5);
        delta_sum += delta[i];
      } else {
        q[i] = 0.2 + 0.5 * u;
      }
    }
    const double delta_mean = delta_sum / double(k);

    double sum_s_price = 0.0, sum_base = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_s[i]) {
        price_up[i] = spec.participating_w_up + (delta[i] - delta_mean) + rho[i] * phi_up[i];
        detail::fixture_guard(price_up[i] > 0.0, "participating Reg-Up price <= 0");
        sum_s_price += price_up[i];
      } else {
        sum_base += rho[i] * phi_up[i] * q[i];
      }
    }
    const double g = (spec.mean_price_up * double(n) - sum_s_price) / sum_base;
    detail::fixture_guard(g > 0.0, "participating prices exceed the mean-price budget");
    for (std::size_t i = 0; i < n; ++i) {
      if (in_s[i]) continue;
      detail::fixture_guard(q[i] * g < 0.95, "non-participating price too close to break-even");
      price_up[i] = rho[i] * phi_up[i] * q[i] * g;
    }
  }

  std::vector<MarketRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    MarketRecord r;
    r.ts_epoch = start_epoch + 3600 * static_cast<std::int64_t>(i);
    r.price_up = price_up[i];
    r.price_dn = price_dn[i];
    r.procured_up_mw = procured_up[i];
    r.procured_dn_mw = procured_dn[i];
    r.deployed_up_mw = -phi_up[i] * procured_up[i];
    r.deployed_dn_mw = phi_dn[i] * procured_dn[i];
    r.btc_usd = btc[i];
    validate_record(r, "fixture row " + std::to_string(i));
    records.push_back(r);
  }
  return records;
}

}  // namespace flexreg::data
