#include "tsr/pipeline.hpp"

#include <cmath>

#include "tsr/error.hpp"
#include "tsr/features.hpp"

namespace tsr {

AeTarget parse_ae_target(std::string_view name) {
  if (name == "trend") return AeTarget::trend;
  if (name == "vol" || name == "volatility") return AeTarget::vol;
  throw ParameterError("unknown autoencoder target '" + std::string(name) + "'");
}

Series ensure_normalized(const Series& s) { return s.normalized ? s : minmax_normalize(s); }

std::vector<Series> normalized_series(const Dataset& d) {
  std::vector<Series> out;
  out.reserve(d.samples.size());
  for (const auto& sample : d.samples) out.push_back(ensure_normalized(sample.series));
  return out;
}

std::vector<std::vector<double>> ae_training_rows(std::span<const Series> normalized,
                                                  AeTarget target, const VolConfig& vol) {
  std::vector<std::vector<double>> rows;
  rows.reserve(normalized.size());
  for (const auto& s : normalized) {
    if (!s.normalized) throw ParameterError("series '" + s.id + "' must be normalized");
    rows.push_back(target == AeTarget::trend ? s.values
                                             : volatility_values(s.values, vol.half_window));
  }
  return rows;
}

SketchModels load_sketch_models(const std::filesystem::path& trend,
                                const std::filesystem::path& vol) {
  SketchModels m;
  m.trend = load_autoencoder(trend);
  nlohmann::json meta;
  m.vol = load_autoencoder(vol, &meta);
  if (meta.is_object() && meta.contains("vol_half_window")) {
    m.vol_config.half_window = meta["vol_half_window"].get<std::size_t>();
  }
  if (m.trend.input_size() != m.vol.input_size()) {
    throw FormatError("trend and volatility models disagree on the input length");
  }
  m.vol_config.validate(m.input_size());
  return m;
}

namespace {

VectorIndex index_from_columns(const nn::Matrix& emb, std::span<const Series> normalized) {
  VectorIndex index(static_cast<std::size_t>(emb.rows()));
  index.reserve(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    index.add(normalized[i].id,
              std::span<const double>(emb.col(c).data(), static_cast<std::size_t>(emb.rows())));
  }
  return index;
}

}  // namespace

VectorIndex build_sketch_index(const SketchModels& models, std::span<const Series> normalized) {
  if (normalized.empty()) return VectorIndex(models.embedding_dim());
  return index_from_columns(combined_embeddings(models, normalized), normalized);
}

VectorIndex build_text_index(const Aligner& aligner, const SketchModels& models,
                             std::span<const Series> normalized) {
  if (normalized.empty()) return VectorIndex(aligner.embedding_dim());
  return index_from_columns(embed_series_batch(aligner, combined_embeddings(models, normalized)),
                            normalized);
}

Series sketch_to_query(std::span<const double> points, std::size_t length, std::string id) {
  if (points.size() < 2 || points.size() > kMaxSketchPoints) {
    throw ParameterError("sketch needs between 2 and " + std::to_string(kMaxSketchPoints) +
                         " points, got " + std::to_string(points.size()));
  }
  for (double p : points) {
    if (!std::isfinite(p)) throw ParameterError("sketch points must be finite");
  }
  Series s;
  s.id = std::move(id);
  s.values = resample_linear(points, length);
  return minmax_normalize(s);
}

}  // namespace tsr
