#pragma once

// Day-ahead Reg-Up/Reg-Down capacity market. Both products clear
// independently against inelastic hourly demand under a single uniform price:
// offers are accepted in merit order (ascending price) and every cleared
// seller is paid the price of the marginal offer. Ties at the marginal price
// split pro-rata by offered capacity. When demand exceeds the offered total,
// everything clears at the highest offered price and the unmet remainder is
// recorded as a shortfall (the operator escalates to reserve products; it is
// not an error here).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flexreg/errors.hpp"
#include "flexreg/io.hpp"

namespace flexreg::market {

enum class Product { RegUp, RegDown };

inline const char* product_name(Product p) { return p == Product::RegUp ? "UP" : "DN"; }

struct Offer {
  std::string entity_id;
  Product product = Product::RegUp;
  double capacity_mw = 0.0;
  double price_per_mw = 0.0;
};

inline void validate_offer(const Offer& o) {
  if (o.entity_id.empty()) throw ValidationError("offer has empty entity_id");
  if (o.entity_id.find_first_of(",\"\n\r") != std::string::npos) {
    throw ValidationError("offer '" + o.entity_id + "': entity_id contains CSV metacharacters");
  }
  if (!std::isfinite(o.capacity_mw) || o.capacity_mw < 0.0) {
    throw ValidationError("offer '" + o.entity_id + "': capacity_mw must be finite and >= 0");
  }
  if (!std::isfinite(o.price_per_mw) || o.price_per_mw < 0.0) {
    throw ValidationError("offer '" + o.entity_id + "': price_per_mw must be finite and >= 0");
  }
}

struct DemandSchedule {
  int hour = 0;  // 0-23
  double demand_up_mw = 0.0;
  double demand_dn_mw = 0.0;

  void validate() const {
    if (hour < 0 || hour > 23) throw ValidationError("demand hour must be in 0..23");
    if (!std::isfinite(demand_up_mw) || demand_up_mw < 0.0 || !std::isfinite(demand_dn_mw) ||
        demand_dn_mw < 0.0) {
      throw ValidationError("demand values must be finite and >= 0");
    }
  }
};

struct Award {
  std::string entity_id;
  double cleared_up_mw = 0.0;
  double cleared_dn_mw = 0.0;
};

struct ClearingResult {
  int hour = 0;
  double price_up = 0.0;
  double price_dn = 0.0;
  std::vector<Award> awards;  // ascending entity_id; entities with a nonzero award only
  double shortfall_up_mw = 0.0;
  double shortfall_dn_mw = 0.0;
};

/// Splits `residual_mw` across offers tied at one price, proportional to each
/// offer's capacity. The last entity in ascending entity_id order absorbs the
/// floating-point residue so the allocations sum to the residual exactly.
/// Returns (entity_id, MW) pairs in ascending entity_id order.
inline std::vector<std::pair<std::string, double>> pro_rata_tie_split(
    const std::vector<Offer>& tied_offers, double residual_mw) {
  if (tied_offers.empty()) throw ContractViolation("pro_rata_tie_split: no offers");
  for (const auto& o : tied_offers) validate_offer(o);
  for (const auto& o : tied_offers) {
    if (o.price_per_mw != tied_offers.front().price_per_mw) {
      throw ContractViolation("pro_rata_tie_split: offers are not tied at one price");
    }
  }
  double total = 0.0;
  for (const auto& o : tied_offers) total += o.capacity_mw;
  if (!std::isfinite(residual_mw) || residual_mw < 0.0) {
    throw ContractViolation("pro_rata_tie_split: residual must be finite and >= 0");
  }
  if (residual_mw > total) {
    if (residual_mw - total <= 1e-9) {
      residual_mw = total;
    } else {
      throw ContractViolation("pro_rata_tie_split: residual exceeds tied capacity");
    }
  }

  std::vector<const Offer*> order;
  order.reserve(tied_offers.size());
  for (const auto& o : tied_offers) order.push_back(&o);
  std::sort(order.begin(), order.end(),
            [](const Offer* a, const Offer* b) { return a->entity_id < b->entity_id; });

  std::vector<std::pair<std::string, double>> out(order.size());
  if (total <= 0.0) {
    for (std::size_t i = 0; i < order.size(); ++i) out[i] = {order[i]->entity_id, 0.0};
    return out;
  }
  double assigned = 0.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const double share = residual_mw * (order[i]->capacity_mw / total);
    out[i] = {order[i]->entity_id, share};
    assigned += share;
  }
  const Offer* last = order.back();
  double tail = residual_mw - assigned;
  if (tail < 0.0 || tail > last->capacity_mw) {
    if (tail > -1e-9 && tail < last->capacity_mw + 1e-9) {
      tail = std::clamp(tail, 0.0, last->capacity_mw);
    } else {
      throw ContractViolation("pro_rata_tie_split: residue outside last entity's capacity");
    }
  }
  out.back() = {last->entity_id, tail};
  return out;
}

namespace detail {

struct ProductClearing {
  double price = 0.0;
  double shortfall = 0.0;
  std::map<std::string, double> cleared;  // entity -> MW
};

inline ProductClearing clear_product(std::vector<Offer> offers, double demand) {
  ProductClearing result;
  if (demand <= 0.0) return result;

  double total = 0.0;
  double max_price = 0.0;
  for (const auto& o : offers) {
    total += o.capacity_mw;
    max_price = std::max(max_price, o.price_per_mw);
  }
  if (demand >= total) {
    for (const auto& o : offers) result.cleared[o.entity_id] += o.capacity_mw;
    result.shortfall = demand - total;
    result.price = offers.empty() ? 0.0 : max_price;
    return result;
  }

  std::sort(offers.begin(), offers.end(), [](const Offer& a, const Offer& b) {
    if (a.price_per_mw != b.price_per_mw) return a.price_per_mw < b.price_per_mw;
    return a.entity_id < b.entity_id;
  });

  // Accept whole price levels until the marginal one, then split the residual
  // pro-rata within it.
  std::size_t i = 0;
  double accepted = 0.0;
  while (i < offers.size()) {
    const double level_price = offers[i].price_per_mw;
    std::vector<Offer> level;
    double level_cap = 0.0;
    while (i < offers.size() && offers[i].price_per_mw == level_price) {
      level.push_back(offers[i]);
      level_cap += offers[i].capacity_mw;
      ++i;
    }
    result.price = level_price;
    if (accepted + level_cap < demand) {
      for (const auto& o : level) result.cleared[o.entity_id] += o.capacity_mw;
      accepted += level_cap;
      continue;
    }
    for (auto& [entity, mw] : pro_rata_tie_split(level, demand - accepted)) {
      result.cleared[entity] += mw;
    }
    break;
  }
  return result;
}

}  // namespace detail

/// Clears both products for one hour. Awards keep only entities with a
/// nonzero cleared amount, in ascending entity_id order; with zero demand the
/// award list is empty and prices are zero.
inline ClearingResult clear_market(const std::vector<Offer>& offers,
                                   const DemandSchedule& demand) {
  demand.validate();
  std::set<std::pair<std::string, int>> seen;
  for (const auto& o : offers) {
    validate_offer(o);
    if (!seen.insert({o.entity_id, static_cast<int>(o.product)}).second) {
      throw ValidationError("duplicate offer for entity '" + o.entity_id + "' product " +
                            product_name(o.product));
    }
  }

  std::vector<Offer> ups, downs;
  for (const auto& o : offers) (o.product == Product::RegUp ? ups : downs).push_back(o);

  const auto up = detail::clear_product(std::move(ups), demand.demand_up_mw);
  const auto dn = detail::clear_product(std::move(downs), demand.demand_dn_mw);

  ClearingResult result;
  result.hour = demand.hour;
  result.price_up = up.price;
  result.price_dn = dn.price;
  result.shortfall_up_mw = up.shortfall;
  result.shortfall_dn_mw = dn.shortfall;

  std::map<std::string, Award> merged;
  for (const auto& [entity, mw] : up.cleared) {
    if (mw > 0.0) merged[entity].cleared_up_mw = mw;
  }
  for (const auto& [entity, mw] : dn.cleared) {
    if (mw > 0.0) merged[entity].cleared_dn_mw = mw;
  }
  for (auto& [entity, award] : merged) {
    award.entity_id = entity;
    result.awards.push_back(std::move(award));
  }
  return result;
}

// ---------------------------------------------------------------------------
// External interfaces: offers CSV and clearing-result JSON.
// ---------------------------------------------------------------------------

struct OfferRow {
  int hour = 0;
  Offer offer;
};

/// Reads `hour,entity_id,product,capacity_mw,price_per_mw` with product
/// literals UP/DN. Errors name the offending line and column.
inline std::vector<OfferRow> load_offers_csv(const std::filesystem::path& path) {
  const auto csv = io::read_csv_file(path);
  const auto c_hour = csv.require_column("hour");
  const auto c_entity = csv.require_column("entity_id");
  const auto c_product = csv.require_column("product");
  const auto c_cap = csv.require_column("capacity_mw");
  const auto c_price = csv.require_column("price_per_mw");

  std::vector<OfferRow> rows;
  rows.reserve(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& fields = csv.rows[r];
    const std::string where = csv.source + " line " + std::to_string(csv.line_numbers[r]);
    OfferRow row;
    const long long hour = io::parse_int(fields[c_hour], where + " column 'hour'");
    if (hour < 0 || hour > 23) throw ValidationError(where + ": hour must be in 0..23");
    row.hour = static_cast<int>(hour);
    row.offer.entity_id = fields[c_entity];
    if (fields[c_product] == "UP") {
      row.offer.product = Product::RegUp;
    } else if (fields[c_product] == "DN") {
      row.offer.product = Product::RegDown;
    } else {
      throw ValidationError(where + " column 'product': expected UP or DN, got '" +
                            fields[c_product] + "'");
    }
    row.offer.capacity_mw = io::parse_double(fields[c_cap], where + " column 'capacity_mw'");
    row.offer.price_per_mw = io::parse_double(fields[c_price], where + " column 'price_per_mw'");
    try {
      validate_offer(row.offer);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const ClearingResult& r) {
  nlohmann::json awards = nlohmann::json::array();
  for (const auto& a : r.awards) {
    awards.push_back({{"entity_id", a.entity_id},
                      {"cleared_up_mw", a.cleared_up_mw},
                      {"cleared_dn_mw", a.cleared_dn_mw}});
  }
  return nlohmann::json{{"hour", r.hour},
                        {"price_up", r.price_up},
                        {"price_dn", r.price_dn},
                        {"awards", awards},
                        {"shortfall_up_mw", r.shortfall_up_mw},
                        {"shortfall_dn_mw", r.shortfall_dn_mw}};
}

}  // namespace flexreg::market
