#include "tsr/features.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tsr/error.hpp"
#include "tsr/random.hpp"

namespace tsr {

void VolConfig::validate(std::size_t length) const {
  if (half_window < 1 || 2 * half_window >= length) {
    throw ParameterError("volatility half window must satisfy 1 <= m < L/2 (m=" +
                         std::to_string(half_window) + ", L=" + std::to_string(length) + ")");
  }
}

Series minmax_normalize(const Series& s) {
  if (s.values.empty()) throw ParameterError("cannot normalize an empty series");
  for (double v : s.values) {
    if (!std::isfinite(v)) throw ParameterError("cannot normalize a non-finite series");
  }
  const auto [lo_it, hi_it] = std::minmax_element(s.values.begin(), s.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  Series out;
  out.id = s.id;
  out.normalized = true;
  out.values.resize(s.values.size());
  if (hi == lo) {
    std::fill(out.values.begin(), out.values.end(), 0.5);
  } else {
    const double span = hi - lo;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      out.values[i] = std::clamp((s.values[i] - lo) / span, 0.0, 1.0);
    }
  }
  // Compose with an earlier normalization so denormalize recovers the source.
  if (s.normalized && s.scale_min && s.scale_max) {
    const double base = *s.scale_min;
    const double range = *s.scale_max - *s.scale_min;
    out.scale_min = base + lo * range;
    out.scale_max = base + hi * range;
  } else {
    out.scale_min = lo;
    out.scale_max = hi;
  }
  return out;
}

Series denormalize(const Series& s) {
  if (!s.normalized || !s.scale_min || !s.scale_max) {
    throw ParameterError("series '" + s.id + "' carries no normalization range");
  }
  Series out;
  out.id = s.id;
  const double range = *s.scale_max - *s.scale_min;
  out.values.reserve(s.values.size());
  for (double v : s.values) out.values.push_back(*s.scale_min + v * range);
  return out;
}

std::vector<double> volatility_values(std::span<const double> x, std::size_t half_window) {
  const std::size_t n = x.size();
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half_window ? i - half_window : 0;
    const std::size_t hi = std::min(n, i + half_window);
    const double count = static_cast<double>(hi - lo);
    double mean = 0.0;
    for (std::size_t j = lo; j < hi; ++j) mean += x[j];
    mean /= count;
    double ss = 0.0;
    for (std::size_t j = lo; j < hi; ++j) ss += (x[j] - mean) * (x[j] - mean);
    v[i] = std::sqrt(ss / count);
  }
  return v;
}

VolatilitySeries volatility_series(const Series& s, const VolConfig& cfg) {
  cfg.validate(s.values.size());
  return VolatilitySeries{s.id, volatility_values(s.values, cfg.half_window)};
}

Series add_gaussian_noise(const Series& s, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("noise sigma must be >= 0");
  Series out = s;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out.values) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return out;
}

Series circular_shift_right(const Series& s, std::size_t steps) {
  Series out = s;
  const std::size_t n = s.values.size();
  if (n == 0) return out;
  const std::size_t k = steps % n;
  for (std::size_t i = 0; i < n; ++i) out.values[(i + k) % n] = s.values[i];
  return out;
}

std::vector<double> resample_linear(std::span<const double> points, std::size_t count) {
  if (points.size() < 2) throw ParameterError("resampling needs at least 2 points");
  if (count < 2) throw ParameterError("resampling target must be >= 2 samples");
  std::vector<double> out(count);
  const double last = static_cast<double>(points.size() - 1);
  for (std::size_t j = 0; j < count; ++j) {
    const double pos = last * static_cast<double>(j) / static_cast<double>(count - 1);
    const auto left = std::min(static_cast<std::size_t>(pos), points.size() - 2);
    const double frac = pos - static_cast<double>(left);
    out[j] = points[left] + frac * (points[left + 1] - points[left]);
  }
  return out;
}

}  // namespace tsr
