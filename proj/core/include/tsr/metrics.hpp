#pragma once

#include <span>
#include <string>
#include <vector>

namespace tsr {

inline constexpr double kMapeEpsilon = 1e-8;

struct MapeResult {
  double value = 0.0;
  bool defined = false;   // false when every query point is below epsilon
  std::size_t points = 0; // points that entered the mean
};

/// Mean of |retrieved_i - query_i| / |query_i| over points with
/// |query_i| >= kMapeEpsilon. The query is the reference value.
MapeResult mape(std::span<const double> retrieved, std::span<const double> query);

struct CorrResult {
  double value = 0.0;
  bool degenerate = false;  // zero variance in an argument; value is 0
};

/// Pearson product-moment correlation; needs equal lengths >= 2.
CorrResult pearson_corr(std::span<const double> a, std::span<const double> b);

/// Mean over queries of the fraction of the k retrieved regimes equal to the
/// query regime. Every list must hold exactly k entries.
double precision_at_k(std::span<const std::vector<int>> retrieved, std::span<const int> query,
                      std::size_t k);

/// Fraction of queries with at least one match among their k results.
double hit_rate_at_k(std::span<const std::vector<int>> retrieved, std::span<const int> query,
                     std::size_t k);

/// Distinct ids over total ids returned across all queries.
double diversity(std::span<const std::vector<std::string>> retrieved);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};
MeanStd mean_std(std::span<const double> values);

}  // namespace tsr
