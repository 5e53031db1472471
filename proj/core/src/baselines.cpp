#include "tsr/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "tsr/error.hpp"

namespace tsr {

using nn::Matrix;
using nn::Vector;

RawDatabase::RawDatabase(std::size_t length, VolConfig vol) : length_(length), vol_(vol) {
  if (length_ < 2) throw ParameterError("database series length must be >= 2");
  vol_.validate(length_);
}

void RawDatabase::add(const Series& normalized) {
  add(normalized, volatility_series(normalized, vol_));
}

void RawDatabase::add(const Series& normalized, const VolatilitySeries& vol) {
  if (normalized.size() != length_ || vol.values.size() != length_) {
    throw ShapeError("database expects length " + std::to_string(length_) + ", got " +
                     std::to_string(normalized.size()) + " for '" + normalized.id + "'");
  }
  if (positions_.count(normalized.id) != 0) {
    throw IndexError("duplicate id '" + normalized.id + "'");
  }
  positions_.emplace(normalized.id, ids_.size());
  ids_.push_back(normalized.id);
  trend_.insert(trend_.end(), normalized.values.begin(), normalized.values.end());
  vol_rows_.insert(vol_rows_.end(), vol.values.begin(), vol.values.end());
}

RawDatabase RawDatabase::from_series(std::span<const Series> normalized, std::size_t length,
                                     VolConfig vol) {
  RawDatabase db(length, vol);
  for (const auto& s : normalized) db.add(s);
  return db;
}

std::span<const double> RawDatabase::trend(std::size_t i) const {
  if (i >= ids_.size()) throw IndexError("row out of range");
  return {trend_.data() + i * length_, length_};
}

std::span<const double> RawDatabase::vol(std::size_t i) const {
  if (i >= ids_.size()) throw IndexError("row out of range");
  return {vol_rows_.data() + i * length_, length_};
}

std::optional<std::size_t> RawDatabase::find(const std::string& id) const {
  auto it = positions_.find(id);
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance between different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

bool closer(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score < b.score;
  return a.id < b.id;
}

/// Keeps the k closest hits produced by `distance(i)`.
template <typename Distance>
QueryResult top_k_closest(const RawDatabase& db, std::size_t k, Distance distance) {
  if (k < 1) throw ParameterError("k must be >= 1");
  QueryResult result;
  result.k_requested = k;
  result.order = ScoreOrder::distance_ascending;
  const std::size_t keep = std::min(k, db.size());
  std::vector<Hit> best;
  best.reserve(keep + 1);
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double d = distance(i);
    if (best.size() == keep) {
      const Hit& worst = best.back();
      if (d > worst.score || (d == worst.score && db.id(i) > worst.id)) continue;
    }
    Hit h{db.id(i), d};
    best.insert(std::upper_bound(best.begin(), best.end(), h, closer), std::move(h));
    if (best.size() > keep) best.pop_back();
  }
  result.hits = std::move(best);
  return result;
}

}  // namespace

QueryResult bf_search(const RawDatabase& db, std::span<const double> query, std::size_t k) {
  if (query.size() != db.length()) {
    throw ShapeError("query length " + std::to_string(query.size()) +
                     " does not match database length " + std::to_string(db.length()));
  }
  return top_k_closest(db, k, [&](std::size_t i) { return l2_distance(query, db.trend(i)); });
}

QueryResult bf_search(const RawDatabase& db, const Series& query, std::size_t k) {
  return bf_search(db, std::span<const double>(query.values), k);
}

QueryResult bf_avg_search(const RawDatabase& db, std::span<const double> query,
                          std::span<const double> query_vol, std::size_t k) {
  if (query.size() != db.length() || query_vol.size() != db.length()) {
    throw ShapeError("query length does not match database length " +
                     std::to_string(db.length()));
  }
  return top_k_closest(db, k, [&](std::size_t i) {
    return (l2_distance(query, db.trend(i)) + l2_distance(query_vol, db.vol(i))) / 2.0;
  });
}

QueryResult bf_avg_search(const RawDatabase& db, const Series& query,
                          const VolatilitySeries& query_vol, std::size_t k) {
  return bf_avg_search(db, std::span<const double>(query.values),
                       std::span<const double>(query_vol.values), k);
}

Vector ChannelPca::project(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != mean.size()) {
    throw ShapeError("projection input has the wrong length");
  }
  const Vector centered =
      Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())) - mean;
  return axes * centered;
}

Vector ChannelPca::reconstruct(const Vector& coords) const {
  return mean + axes.transpose() * coords;
}

void canonicalize_signs(Matrix& axes) {
  for (Eigen::Index r = 0; r < axes.rows(); ++r) {
    Eigen::Index arg = 0;
    for (Eigen::Index c = 1; c < axes.cols(); ++c) {
      if (std::abs(axes(r, c)) > std::abs(axes(r, arg))) arg = c;
    }
    if (axes(r, arg) < 0.0) axes.row(r) *= -1.0;
  }
}

ChannelPca fit_channel_pca(const Matrix& samples, std::size_t components) {
  const auto n = static_cast<std::size_t>(samples.cols());
  const auto dim = static_cast<std::size_t>(samples.rows());
  if (components == 0 || components > dim) {
    throw ParameterError("component count must be in [1, " + std::to_string(dim) + "]");
  }
  if (n <= components) {
    throw DataError("PCA with " + std::to_string(components) + " components needs at least " +
                    std::to_string(components + 1) + " samples, got " + std::to_string(n));
  }
  ChannelPca pca;
  pca.mean = samples.rowwise().mean();
  const Matrix centered = samples.colwise() - pca.mean;
  const Matrix cov = centered * centered.transpose() / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  pca.eigenvalues = solver.eigenvalues().reverse();
  const Matrix vectors = solver.eigenvectors().rowwise().reverse();
  pca.axes = vectors.leftCols(static_cast<Eigen::Index>(components)).transpose();
  canonicalize_signs(pca.axes);
  return pca;
}

PcaModel fit_pca(const RawDatabase& db, std::size_t components) {
  const auto n = static_cast<Eigen::Index>(db.size());
  const auto len = static_cast<Eigen::Index>(db.length());
  Matrix t(len, n);
  Matrix v(len, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    t.col(c) = Eigen::Map<const Vector>(db.trend(static_cast<std::size_t>(c)).data(), len);
    v.col(c) = Eigen::Map<const Vector>(db.vol(static_cast<std::size_t>(c)).data(), len);
  }
  return PcaModel{fit_channel_pca(t, components), fit_channel_pca(v, components)};
}

namespace {

Vector unit_or_e1(Vector v) {
  const double n = v.norm();
  if (n > 0.0) return v / n;
  Vector e = Vector::Zero(v.size());
  e(0) = 1.0;
  return e;
}

}  // namespace

Vector pca_embed(const PcaModel& model, std::span<const double> trend,
                 std::span<const double> vol) {
  const Vector a = unit_or_e1(model.trend.project(trend));
  const Vector b = unit_or_e1(model.vol.project(vol));
  Vector e(a.size() + b.size());
  e << a, b;
  return e / std::sqrt(2.0);
}

Vector pca_embed(const PcaModel& model, const Series& normalized, const VolatilitySeries& vol) {
  return pca_embed(model, std::span<const double>(normalized.values),
                   std::span<const double>(vol.values));
}

VectorIndex build_pca_index(const PcaModel& model, const RawDatabase& db) {
  VectorIndex index(model.trend.components() + model.vol.components());
  index.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    const Vector e = pca_embed(model, db.trend(i), db.vol(i));
    index.add(db.id(i), std::span<const double>(e.data(), static_cast<std::size_t>(e.size())));
  }
  return index;
}

}  // namespace tsr
