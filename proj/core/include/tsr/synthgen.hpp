#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsr/dataset.hpp"
#include "tsr/phrase_bank.hpp"
#include "tsr/series.hpp"

namespace tsr {

/// Parameters of the mean-reverting price simulator.
struct GenParams {
  double mean_level = 100.0;   // long-run level, > 0
  double kappa = 0.5;          // mean-reversion rate in [0,1]
  double sigma = 1.0;          // per-step noise std
  double trend = 0.0;          // per-step drift
  double shock_prob = 0.0;     // per-step megashock probability
  double sigma_shock = 0.0;    // megashock std, must exceed sigma when shocks are on
  std::size_t length = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Simulates r_0 = mean_level and, for t >= 1,
///   r_t = max(0, kappa*mean_level + (1-kappa)*r_{t-1} + u_t + trend + s_t)
/// with u_t ~ N(0, sigma^2) and s_t ~ N(0, sigma_shock^2) with probability
/// shock_prob, else 0. Per step the draws are: noise, shock coin, shock size.
Series generate(const GenParams& params);

/// Regime filter thresholds, all on [0,1]-normalized series.
struct FilterThresholds {
  double trend_slope_coeff = 0.2;  // trend threshold = coeff / length
  double shock_step = 0.25;
  double vol_low_cut = 0.02;
  double vol_high_cut = 0.06;

  double trend_threshold(std::size_t length) const {
    return trend_slope_coeff / static_cast<double>(length);
  }
  void validate() const;
};

/// Least-squares slope of values against their index.
double fitted_slope(std::span<const double> values);

/// up if slope > threshold, down if slope < -threshold, else flat.
TrendRegime label_trend(const Series& s, double threshold);

/// shocked iff some |x_{t+1} - x_t| exceeds the threshold.
ShockRegime label_shock(const Series& s, double threshold);

/// Mean over t >= 1 of |x_t - mean(x_0..x_{t-1})|.
double volatility_score(std::span<const double> values);

/// low if score < low_cut, high if score >= high_cut, else medium.
VolRegime label_volatility(const Series& s, double low_cut, double high_cut);

/// Per-regime simulator settings used to draw labelled samples.
struct ParameterGrid {
  double mean_level = 100.0;
  double kappa = 0.01;
  std::array<double, 3> trend_drift{-0.6, 0.0, 0.6};  // down, flat, up
  std::array<double, 3> noise_sigma{0.3, 1.0, 2.5};   // low, medium, high
  std::array<double, 2> shock_prob{0.0, 0.1};         // unshocked, shocked
  double shock_sigma = 12.0;
  double jitter = 0.0;  // relative uniform jitter on drift and sigma, in [0,1)
  std::size_t length = 30;

  void validate() const;
};

nlohmann::json grid_to_json(const ParameterGrid& g);
ParameterGrid grid_from_json(const nlohmann::json& j);
nlohmann::json thresholds_to_json(const FilterThresholds& t);
FilterThresholds thresholds_from_json(const nlohmann::json& j);

enum class FilterMode { unfiltered, filtered };

struct DatasetConfig {
  std::size_t n = 1000;
  ParameterGrid grid;
  FilterMode mode = FilterMode::filtered;
  FilterThresholds thresholds;
  bool relabel_volatility = false;
  std::uint64_t seed = 0;
  std::string id_prefix = "syn";
};

/// Labels implied by the generating regime, re-derived from the series
/// itself for trend and shock (and volatility when asked). The series is
/// min-max normalized internally before the filters run.
RegimeLabels filter_labels(const Series& raw, const RegimeLabels& generated,
                           const FilterThresholds& thresholds, bool relabel_volatility);

/// Draws `n` samples with uniformly chosen trend, volatility and shock
/// regimes. Unfiltered mode keeps the generating regimes as labels; filtered
/// mode re-labels via filter_labels. Captions are drawn from the final labels.
/// Stored series are raw (price units).
std::vector<Sample> make_dataset(const DatasetConfig& config, const PhraseBank& bank);

/// Re-applies the filters to labelled samples in place, regenerating the
/// caption of every sample whose labels changed. Returns the number of
/// samples whose labels changed.
std::size_t refilter(std::vector<Sample>& samples, const FilterThresholds& thresholds,
                     bool relabel_volatility, const PhraseBank& bank, std::uint64_t seed);

/// Builds a named synthetic Dataset (manifest form) from a config.
Dataset make_synthetic_dataset(const DatasetConfig& config, const PhraseBank& bank,
                               std::string name);

}  // namespace tsr
