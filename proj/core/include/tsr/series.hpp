#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsr {

/// A fixed-length univariate price trace. When `normalized` is set the values
/// lie in [0,1] and `scale_min`/`scale_max` hold the original range.
struct Series {
  std::string id;
  std::vector<double> values;
  bool normalized = false;
  std::optional<double> scale_min;
  std::optional<double> scale_max;

  std::size_t size() const noexcept { return values.size(); }
};

/// Throws ParameterError unless the series has >= 2 finite values and, when
/// flagged normalized, every value is in [0,1].
void validate_series(const Series& s);

enum class Feature { trend, volatility, shock, liquidity };
enum class TrendRegime { down, flat, up };
enum class VolRegime { low, medium, high };
enum class ShockRegime { unshocked, shocked };
enum class LiquidityRegime { low, high };

inline constexpr std::array<Feature, 4> kCaptionFeatureOrder = {
    Feature::trend, Feature::volatility, Feature::shock, Feature::liquidity};

/// Per-feature categorical regimes of one series.
struct RegimeLabels {
  TrendRegime trend = TrendRegime::flat;
  VolRegime vol = VolRegime::low;
  ShockRegime shock = ShockRegime::unshocked;
  LiquidityRegime liquidity = LiquidityRegime::high;

  friend bool operator==(const RegimeLabels&, const RegimeLabels&) = default;
};

/// High volatility means low liquidity and low volatility means high
/// liquidity; medium volatility is assigned low liquidity.
constexpr LiquidityRegime liquidity_for(VolRegime v) noexcept {
  return v == VolRegime::low ? LiquidityRegime::high : LiquidityRegime::low;
}

/// Builds labels with the liquidity regime derived from the volatility regime.
RegimeLabels make_labels(TrendRegime t, VolRegime v, ShockRegime s);

/// Number of regimes a feature can take.
std::size_t regime_count(Feature f) noexcept;

/// Regime of `f` in `labels` as a small integer (enum underlying value).
int regime_of(const RegimeLabels& labels, Feature f) noexcept;

std::string_view feature_name(Feature f) noexcept;
std::string_view regime_name(Feature f, int regime);
Feature parse_feature(std::string_view name);
int parse_regime(Feature f, std::string_view name);

}  // namespace tsr
