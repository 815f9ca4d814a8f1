// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "vat/gateway.hpp"

namespace vat {

/// Exact currency amount in units of 1e-12.
class Money {
 public:
  static constexpr std::int64_t kUnitsPerWhole = 1'000'000'000'000;

  constexpr Money() = default;
  static constexpr Money from_units(std::int64_t units) { return Money(units); }
  /// Parses a plain decimal such as "0.3" or "12.000001" (at most 12 decimals).
  static Money parse(std::string_view text);

  constexpr std::int64_t units() const noexcept { return units_; }
  /// Shortest exact decimal rendering, e.g. "0.001", "12", "0.0000024".
  std::string to_string() const;
  double to_double() const noexcept { return static_cast<double>(units_) / kUnitsPerWhole; }

  Money& operator+=(Money o);
  friend Money operator+(Money a, Money b) { return a += b; }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t units) : units_(units) {}
  std::int64_t units_ = 0;
};

/// Per-model token prices, stored as currency per one million tokens with
/// six decimal places.
struct ModelPrice {
  std::int64_t input_micros_per_1m = 0;
  std::int64_t output_micros_per_1m = 0;
};

class PriceTable {
 public:
  /// Reads `{model: {input_per_1m: <decimal>, output_per_1m: <decimal>}}` from
  /// YAML or JSON. Prices keep their decimal text exactly.
  static PriceTable load(const std::filesystem::path& path);
  static PriceTable parse(std::string_view text);

  void set(std::string model, std::string_view input_per_1m, std::string_view output_per_1m);
  bool contains(const std::string& model) const { return prices_.contains(model); }
  /// Throws UnknownModel.
  const ModelPrice& at(const std::string& model) const;
  const std::map<std::string, ModelPrice>& entries() const noexcept { return prices_; }

 private:
  std::map<std::string, ModelPrice> prices_;
};

/// input_tokens * p_in + output_tokens * p_out, exactly. Throws UnknownModel.
Money compute_cost(const TokenUsage& usage, const PriceTable& prices, const std::string& model);

}  // namespace vat
