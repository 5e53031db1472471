#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsr/nn.hpp"

namespace tsr {

/// Whether result scores are similarities (higher is better) or distances
/// (lower is better).
enum class ScoreOrder { similarity_descending, distance_ascending };

struct Hit {
  std::string id;
  double score = 0.0;
};

struct QueryResult {
  std::vector<Hit> hits;
  std::size_t k_requested = 0;
  ScoreOrder order = ScoreOrder::similarity_descending;

  std::size_t k_returned() const noexcept { return hits.size(); }
};

struct IndexItem {
  std::string id;
  nn::Vector embedding;
};

/// Exact flat cosine index over unit vectors stored as contiguous float32
/// rows. Immutable once built; safe for concurrent readers.
class VectorIndex {
 public:
  static constexpr double kUnitTolerance = 1e-6;
  static constexpr std::uint32_t kFormatVersion = 1;

  VectorIndex() = default;
  explicit VectorIndex(std::size_t dim) : dim_(dim) {}

  /// Throws IndexError on a duplicate id or a vector that is not unit norm,
  /// ShapeError on a dimension mismatch.
  void add(const std::string& id, std::span<const double> embedding);
  void reserve(std::size_t n);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t i) const;
  std::optional<std::size_t> find(const std::string& id) const;

  /// Exact top-k by dot product; ties go to the smaller id.
  QueryResult query(std::span<const double> q, std::size_t k) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> rows_;
  std::unordered_map<std::string, std::size_t> positions_;
};

/// Builds an index from items of uniform dimension. `dim` is required when
/// `items` is empty and otherwise inferred.
VectorIndex build_index(std::span<const IndexItem> items, std::size_t dim = 0);

/// TSLX file: magic, u32 version, u32 dim, u64 count, little-endian float32
/// rows, u32-length-prefixed UTF-8 ids, u64 FNV-1a checksum.
void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);

/// Checksum of the saved file contents, for diagnostics.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace tsr
