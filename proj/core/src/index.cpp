#include "tsr/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <queue>

#include "binary_io.hpp"
#include "tsr/error.hpp"

namespace tsr {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'L', 'X'};
constexpr std::uint32_t kMaxIdLength = 1u << 16;

/// Strict weak order where "less" means ranked earlier.
bool ranks_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

}  // namespace

void VectorIndex::add(const std::string& id, std::span<const double> embedding) {
  if (embedding.size() != dim_) {
    throw ShapeError("index dim is " + std::to_string(dim_) + ", vector for '" + id + "' has " +
                     std::to_string(embedding.size()));
  }
  if (positions_.count(id) != 0) throw IndexError("duplicate id '" + id + "'");
  double norm2 = 0.0;
  for (double v : embedding) {
    if (!std::isfinite(v)) throw IndexError("non-finite component in vector '" + id + "'");
    norm2 += v * v;
  }
  if (std::abs(std::sqrt(norm2) - 1.0) > kUnitTolerance) {
    throw IndexError("vector '" + id + "' is not unit norm (norm " +
                     std::to_string(std::sqrt(norm2)) + ")");
  }
  positions_.emplace(id, ids_.size());
  ids_.push_back(id);
  for (double v : embedding) rows_.push_back(static_cast<float>(v));
}

void VectorIndex::reserve(std::size_t n) {
  ids_.reserve(n);
  rows_.reserve(n * dim_);
  positions_.reserve(n);
}

std::span<const float> VectorIndex::row(std::size_t i) const {
  if (i >= ids_.size()) throw IndexError("row out of range");
  return {rows_.data() + i * dim_, dim_};
}

std::optional<std::size_t> VectorIndex::find(const std::string& id) const {
  auto it = positions_.find(id);
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

QueryResult VectorIndex::query(std::span<const double> q, std::size_t k) const {
  if (k < 1) throw ParameterError("k must be >= 1");
  if (q.size() != dim_) {
    throw ShapeError("query dim " + std::to_string(q.size()) + " does not match index dim " +
                     std::to_string(dim_));
  }
  for (double v : q) {
    if (!std::isfinite(v)) throw ParameterError("query vector has non-finite components");
  }
  QueryResult result;
  result.k_requested = k;
  result.order = ScoreOrder::similarity_descending;
  const std::size_t keep = std::min(k, ids_.size());
  if (keep == 0) return result;

  // Float pass over all rows, then exact double rescoring of every row that
  // could still reach the top k given the float rounding bound.
  Eigen::VectorXf qf(static_cast<Eigen::Index>(dim_));
  double q_norm = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    qf(static_cast<Eigen::Index>(d)) = static_cast<float>(q[d]);
    q_norm += q[d] * q[d];
  }
  q_norm = std::sqrt(q_norm);
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> rows(rows_.data(), static_cast<Eigen::Index>(ids_.size()),
                                        static_cast<Eigen::Index>(dim_));
  const Eigen::VectorXf approx = rows * qf;

  std::priority_queue<float, std::vector<float>, std::greater<>> top;
  for (Eigen::Index i = 0; i < approx.size(); ++i) {
    if (top.size() < keep) {
      top.push(approx(i));
    } else if (approx(i) > top.top()) {
      top.pop();
      top.push(approx(i));
    }
  }
  const double margin =
      4.0 * static_cast<double>(dim_ + 2) * std::numeric_limits<float>::epsilon() * (q_norm + 1.0);
  const double threshold = static_cast<double>(top.top()) - margin;

  std::vector<Hit> candidates;
  for (Eigen::Index i = 0; i < approx.size(); ++i) {
    if (static_cast<double>(approx(i)) < threshold) continue;
    const float* row = rows_.data() + static_cast<std::size_t>(i) * dim_;
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) s += static_cast<double>(row[d]) * q[d];
    candidates.push_back(Hit{ids_[static_cast<std::size_t>(i)], s});
  }
  std::partial_sort(candidates.begin(),
                    candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                    ranks_before);
  candidates.resize(keep);
  result.hits = std::move(candidates);
  return result;
}

VectorIndex build_index(std::span<const IndexItem> items, std::size_t dim) {
  if (!items.empty()) {
    const auto d = static_cast<std::size_t>(items.front().embedding.size());
    if (dim != 0 && dim != d) throw ShapeError("items do not match the requested dim");
    dim = d;
  }
  VectorIndex index(dim);
  index.reserve(items.size());
  for (const auto& item : items) {
    index.add(item.id, std::span<const double>(item.embedding.data(),
                                               static_cast<std::size_t>(item.embedding.size())));
  }
  return index;
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index " + path.string());
  detail::Writer w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.value(VectorIndex::kFormatVersion);
  w.value(static_cast<std::uint32_t>(index.dim()));
  w.value(static_cast<std::uint64_t>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto r = index.row(i);
    w.bytes(r.data(), r.size() * sizeof(float));
  }
  for (const auto& id : index.ids()) w.string(id);
  w.checksum();
  out.flush();
  if (!out) throw IoError("cannot write index " + path.string());
}

VectorIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read index " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  detail::Reader r(in);
  char magic[4];
  r.bytes(magic, sizeof magic);
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw FormatError("not an index file (bad magic): " + path.string());
  }
  const auto version = r.value<std::uint32_t>();
  if (version != VectorIndex::kFormatVersion) {
    throw FormatError("unsupported index version " + std::to_string(version));
  }
  const auto dim = r.value<std::uint32_t>();
  const auto count = r.value<std::uint64_t>();
  if (dim == 0 && count > 0) throw FormatError("index has zero dimension");
  if (dim != 0 && count > file_size / (static_cast<std::uint64_t>(dim) * sizeof(float))) {
    throw FormatError("truncated file: checksum mismatch (count exceeds file size)");
  }
  std::vector<float> rows(static_cast<std::size_t>(count) * dim);
  r.bytes(rows.data(), rows.size() * sizeof(float));
  std::vector<std::string> ids(static_cast<std::size_t>(count));
  for (auto& id : ids) id = r.string(kMaxIdLength);
  r.verify_checksum();

  VectorIndex index(dim);
  index.reserve(ids.size());
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) v[d] = rows[i * dim + d];
    index.add(ids[i], v);
  }
  return index;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  detail::Fnv1a h;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

}  // namespace tsr
