#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsr/features.hpp"
#include "tsr/index.hpp"
#include "tsr/nn.hpp"
#include "tsr/series.hpp"

namespace tsr {

/// Normalized series and their volatility series, stored as contiguous rows.
class RawDatabase {
 public:
  explicit RawDatabase(std::size_t length = 30, VolConfig vol = {});

  /// Computes the volatility series with the database VolConfig.
  void add(const Series& normalized);
  void add(const Series& normalized, const VolatilitySeries& vol);
  static RawDatabase from_series(std::span<const Series> normalized, std::size_t length,
                                 VolConfig vol = {});

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t length() const noexcept { return length_; }
  const VolConfig& vol_config() const noexcept { return vol_; }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::span<const double> trend(std::size_t i) const;
  std::span<const double> vol(std::size_t i) const;
  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::size_t length_;
  VolConfig vol_;
  std::vector<std::string> ids_;
  std::vector<double> trend_;
  std::vector<double> vol_rows_;
  std::unordered_map<std::string, std::size_t> positions_;
};

/// Euclidean distance between equal-length vectors.
double l2_distance(std::span<const double> a, std::span<const double> b);

/// Exact top-k by L2 distance on the trend channel; scores are distances.
QueryResult bf_search(const RawDatabase& db, std::span<const double> query, std::size_t k);
QueryResult bf_search(const RawDatabase& db, const Series& query, std::size_t k);

/// Exact top-k by (L2(trend) + L2(vol)) / 2.
QueryResult bf_avg_search(const RawDatabase& db, std::span<const double> query,
                          std::span<const double> query_vol, std::size_t k);
QueryResult bf_avg_search(const RawDatabase& db, const Series& query,
                          const VolatilitySeries& query_vol, std::size_t k);

/// Principal axes of one channel. `axes` rows are unit vectors ordered by
/// descending eigenvalue; the largest-magnitude entry of each is positive.
struct ChannelPca {
  nn::Vector mean;
  nn::Matrix axes;               // components x length
  nn::Vector eigenvalues;        // full spectrum, descending
  std::size_t components() const noexcept { return static_cast<std::size_t>(axes.rows()); }
  nn::Vector project(std::span<const double> x) const;
  nn::Vector reconstruct(const nn::Vector& coords) const;
};

/// Fits `components` axes to samples stored as columns. Needs more samples
/// than components.
ChannelPca fit_channel_pca(const nn::Matrix& samples, std::size_t components);

/// Flips each axis so that its largest-magnitude entry is positive (first one
/// on exact ties).
void canonicalize_signs(nn::Matrix& axes);

struct PcaModel {
  ChannelPca trend;
  ChannelPca vol;
};

PcaModel fit_pca(const RawDatabase& db, std::size_t components = 16);

/// [unit(P_t x), unit(P_v v)] / sqrt(2); a zero projection becomes e_1.
nn::Vector pca_embed(const PcaModel& model, std::span<const double> trend,
                     std::span<const double> vol);
nn::Vector pca_embed(const PcaModel& model, const Series& normalized,
                     const VolatilitySeries& vol);

/// Embeds every database entry into a fresh index.
VectorIndex build_pca_index(const PcaModel& model, const RawDatabase& db);

}  // namespace tsr
