#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsr/series.hpp"

namespace tsr {

/// Half-width of the sliding volatility window.
struct VolConfig {
  std::size_t half_window = 4;

  /// Throws ParameterError unless 1 <= half_window < length / 2.
  void validate(std::size_t length) const;
};

/// Sliding-window standard deviation of a normalized series; same length as
/// its source, every value >= 0.
struct VolatilitySeries {
  std::string source_id;
  std::vector<double> values;
};

/// (x - min) / (max - min) elementwise; constant input maps to 0.5. Records
/// the original range on the output.
Series minmax_normalize(const Series& s);

/// Inverse of minmax_normalize using the recorded range.
Series denormalize(const Series& s);

/// v_i = population std of x over [max(0, i - m), min(L, i + m)).
VolatilitySeries volatility_series(const Series& s, const VolConfig& cfg = {});
std::vector<double> volatility_values(std::span<const double> x, std::size_t half_window);

/// x_i + n_i with n_i ~ N(0, sigma^2), clamped to [0,1].
Series add_gaussian_noise(const Series& s, double sigma, std::uint64_t seed);

/// output[i] = input[(i - steps) mod L].
Series circular_shift_right(const Series& s, std::size_t steps);

/// Piecewise-linear resampling of (x-ordered) sketch points onto `count`
/// evenly spaced samples spanning the sketch.
std::vector<double> resample_linear(std::span<const double> points, std::size_t count);

}  // namespace tsr
