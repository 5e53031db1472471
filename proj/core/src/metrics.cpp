#include "tsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tsr/error.hpp"

namespace tsr {

MapeResult mape(std::span<const double> retrieved, std::span<const double> query) {
  if (retrieved.size() != query.size()) throw ShapeError("mape over different lengths");
  MapeResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const double q = std::abs(query[i]);
    if (q < kMapeEpsilon) continue;
    sum += std::abs(retrieved[i] - query[i]) / q;
    ++r.points;
  }
  r.defined = r.points > 0;
  r.value = r.defined ? sum / static_cast<double>(r.points) : 0.0;
  return r;
}

CorrResult pearson_corr(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("correlation over different lengths");
  if (a.size() < 2) throw ShapeError("correlation needs at least 2 points");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  CorrResult r;
  if (saa <= 0.0 || sbb <= 0.0) {
    r.degenerate = true;
    return r;
  }
  r.value = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return r;
}

namespace {

void check_lists(std::span<const std::vector<int>> retrieved, std::span<const int> query,
                 std::size_t k) {
  if (k < 1) throw ParameterError("k must be >= 1");
  if (retrieved.size() != query.size()) throw ShapeError("one result list per query expected");
  if (retrieved.empty()) throw ParameterError("at least one query is required");
  for (const auto& list : retrieved) {
    if (list.size() != k) {
      throw ShapeError("result list has " + std::to_string(list.size()) + " entries, expected " +
                       std::to_string(k));
    }
  }
}

}  // namespace

double precision_at_k(std::span<const std::vector<int>> retrieved, std::span<const int> query,
                      std::size_t k) {
  check_lists(retrieved, query, k);
  double total = 0.0;
  for (std::size_t q = 0; q < query.size(); ++q) {
    std::size_t matches = 0;
    for (int r : retrieved[q]) matches += r == query[q] ? 1 : 0;
    total += static_cast<double>(matches) / static_cast<double>(k);
  }
  return total / static_cast<double>(query.size());
}

double hit_rate_at_k(std::span<const std::vector<int>> retrieved, std::span<const int> query,
                     std::size_t k) {
  check_lists(retrieved, query, k);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < query.size(); ++q) {
    for (int r : retrieved[q]) {
      if (r == query[q]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(query.size());
}

double diversity(std::span<const std::vector<std::string>> retrieved) {
  if (retrieved.empty()) throw ParameterError("diversity needs at least one query");
  std::unordered_set<std::string> distinct;
  std::size_t total = 0;
  for (const auto& list : retrieved) {
    total += list.size();
    distinct.insert(list.begin(), list.end());
  }
  if (total == 0) throw ParameterError("no results were returned");
  return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return r;
}

}  // namespace tsr
