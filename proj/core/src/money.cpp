// SPDX-License-Identifier: Apache-2.0

#include "vat/money.hpp"

#include <cctype>
#include <limits>

#include <yaml-cpp/yaml.h>

#include "vat/error.hpp"

namespace vat {

namespace {

__extension__ typedef __int128 i128;
__extension__ typedef unsigned __int128 u128;

constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();

// Parses an unsigned decimal into an integer scaled by 10^decimals.
std::int64_t parse_scaled(std::string_view text, int decimals, const char* what) {
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) throw ConfigError(std::string(what) + ": empty amount");
  const auto dot = s.find('.');
  const std::string_view whole = s.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() && frac.empty()) throw ConfigError(std::string(what) + ": malformed amount");
  if (static_cast<int>(frac.size()) > decimals) {
    throw ConfigError(std::string(what) + ": more than " + std::to_string(decimals) +
                      " decimal places in '" + std::string(text) + "'");
  }
  i128 value = 0;
  for (char c : whole) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw ConfigError(std::string(what) + ": malformed amount '" + std::string(text) + "'");
    }
    value = value * 10 + (c - '0');
    if (value > kMax) throw ConfigError(std::string(what) + ": amount too large");
  }
  for (int i = 0; i < decimals; ++i) {
    value *= 10;
    if (i < static_cast<int>(frac.size())) {
      const char c = frac[i];
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw ConfigError(std::string(what) + ": malformed amount '" + std::string(text) + "'");
      }
      value += c - '0';
    }
    if (value > kMax) throw ConfigError(std::string(what) + ": amount too large");
  }
  return static_cast<std::int64_t>(value);
}

}  // namespace

Money Money::parse(std::string_view text) {
  return Money(parse_scaled(text, 12, "money"));
}

std::string Money::to_string() const {
  const bool negative = units_ < 0;
  const u128 mag =
      negative ? static_cast<u128>(-static_cast<i128>(units_)) : units_;
  const auto whole = static_cast<std::uint64_t>(mag / kUnitsPerWhole);
  auto frac = static_cast<std::uint64_t>(mag % kUnitsPerWhole);
  std::string out = (negative ? "-" : "") + std::to_string(whole);
  if (frac != 0) {
    std::string digits = std::to_string(frac);
    digits.insert(0, 12 - digits.size(), '0');
    while (!digits.empty() && digits.back() == '0') digits.pop_back();
    out += "." + digits;
  }
  return out;
}

Money& Money::operator+=(Money o) {
  const i128 sum = static_cast<i128>(units_) + o.units_;
  if (sum > kMax || sum < std::numeric_limits<std::int64_t>::min()) {
    throw std::overflow_error("Money overflow");
  }
  units_ = static_cast<std::int64_t>(sum);
  return *this;
}

void PriceTable::set(std::string model, std::string_view input_per_1m,
                     std::string_view output_per_1m) {
  prices_[std::move(model)] = ModelPrice{parse_scaled(input_per_1m, 6, "input_per_1m"),
                                         parse_scaled(output_per_1m, 6, "output_per_1m")};
}

const ModelPrice& PriceTable::at(const std::string& model) const {
  auto it = prices_.find(model);
  if (it == prices_.end()) throw UnknownModel("no price configured for model '" + model + "'");
  return it->second;
}

PriceTable PriceTable::parse(std::string_view text) {
  PriceTable table;
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("price table: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("price table must map model names to prices");
  for (const auto& kv : root) {
    const auto model = kv.first.as<std::string>();
    const auto& entry = kv.second;
    if (!entry.IsMap() || !entry["input_per_1m"] || !entry["output_per_1m"]) {
      throw ConfigError("price table entry '" + model + "' needs input_per_1m and output_per_1m");
    }
    table.set(model, entry["input_per_1m"].Scalar(), entry["output_per_1m"].Scalar());
  }
  return table;
}

PriceTable PriceTable::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

Money compute_cost(const TokenUsage& usage, const PriceTable& prices, const std::string& model) {
  const ModelPrice& p = prices.at(model);
  if (usage.input_tokens < 0 || usage.output_tokens < 0) {
    throw std::invalid_argument("token counts must be non-negative");
  }
  const i128 units = static_cast<i128>(usage.input_tokens) * p.input_micros_per_1m +
                         static_cast<i128>(usage.output_tokens) * p.output_micros_per_1m;
  if (units > kMax) throw std::overflow_error("cost overflow");
  return Money::from_units(static_cast<std::int64_t>(units));
}

}  // namespace vat
