#include "tsr/series.hpp"

#include <cmath>

#include "tsr/error.hpp"

namespace tsr {

void validate_series(const Series& s) {
  if (s.values.size() < 2) {
    throw ParameterError("series '" + s.id + "' has fewer than 2 values");
  }
  for (double v : s.values) {
    if (!std::isfinite(v)) throw ParameterError("series '" + s.id + "' has a non-finite value");
    if (s.normalized && (v < 0.0 || v > 1.0)) {
      throw ParameterError("normalized series '" + s.id + "' has a value outside [0,1]");
    }
  }
}

RegimeLabels make_labels(TrendRegime t, VolRegime v, ShockRegime s) {
  return RegimeLabels{t, v, s, liquidity_for(v)};
}

std::size_t regime_count(Feature f) noexcept {
  switch (f) {
    case Feature::trend:
    case Feature::volatility:
      return 3;
    case Feature::shock:
    case Feature::liquidity:
      return 2;
  }
  return 0;
}

int regime_of(const RegimeLabels& labels, Feature f) noexcept {
  switch (f) {
    case Feature::trend:
      return static_cast<int>(labels.trend);
    case Feature::volatility:
      return static_cast<int>(labels.vol);
    case Feature::shock:
      return static_cast<int>(labels.shock);
    case Feature::liquidity:
      return static_cast<int>(labels.liquidity);
  }
  return -1;
}

std::string_view feature_name(Feature f) noexcept {
  switch (f) {
    case Feature::trend:
      return "trend";
    case Feature::volatility:
      return "volatility";
    case Feature::shock:
      return "shock";
    case Feature::liquidity:
      return "liquidity";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 3> kTrendNames = {"down", "flat", "up"};
constexpr std::array<std::string_view, 3> kVolNames = {"low", "medium", "high"};
constexpr std::array<std::string_view, 2> kShockNames = {"unshocked", "shocked"};
constexpr std::array<std::string_view, 2> kLiquidityNames = {"low", "high"};

template <std::size_t N>
int find_name(const std::array<std::string_view, N>& names, std::string_view name, Feature f) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("unknown " + std::string(feature_name(f)) + " regime '" + std::string(name) +
                    "'");
}

}  // namespace

std::string_view regime_name(Feature f, int regime) {
  if (regime < 0 || static_cast<std::size_t>(regime) >= regime_count(f)) {
    throw ParameterError("regime index out of range for " + std::string(feature_name(f)));
  }
  const auto i = static_cast<std::size_t>(regime);
  switch (f) {
    case Feature::trend:
      return kTrendNames[i];
    case Feature::volatility:
      return kVolNames[i];
    case Feature::shock:
      return kShockNames[i];
    case Feature::liquidity:
      return kLiquidityNames[i];
  }
  return "?";
}

Feature parse_feature(std::string_view name) {
  for (Feature f : kCaptionFeatureOrder) {
    if (feature_name(f) == name) return f;
  }
  throw ConfigError("unknown feature '" + std::string(name) + "'");
}

int parse_regime(Feature f, std::string_view name) {
  switch (f) {
    case Feature::trend:
      return find_name(kTrendNames, name, f);
    case Feature::volatility:
      return find_name(kVolNames, name, f);
    case Feature::shock:
      return find_name(kShockNames, name, f);
    case Feature::liquidity:
      return find_name(kLiquidityNames, name, f);
  }
  throw ConfigError("unknown feature");
}

}  // namespace tsr
