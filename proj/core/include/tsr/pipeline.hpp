#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsr/aligner.hpp"
#include "tsr/dataset.hpp"
#include "tsr/encoders.hpp"
#include "tsr/index.hpp"

namespace tsr {

/// Which autoencoder a training set feeds.
enum class AeTarget { trend, vol };

AeTarget parse_ae_target(std::string_view name);

/// Min-max normalizes a series unless it already is normalized.
Series ensure_normalized(const Series& s);

/// Normalized copies of every sample series, in dataset order.
std::vector<Series> normalized_series(const Dataset& d);

/// AE training rows: the normalized series themselves for the trend model,
/// their volatility series for the volatility model.
std::vector<std::vector<double>> ae_training_rows(std::span<const Series> normalized,
                                                  AeTarget target, const VolConfig& vol = {});

/// Loads both autoencoders. The volatility half-window is read from the
/// volatility checkpoint sidecar when recorded there.
SketchModels load_sketch_models(const std::filesystem::path& trend,
                                const std::filesystem::path& vol);

/// 32-d combined-embedding index over normalized series.
VectorIndex build_sketch_index(const SketchModels& models, std::span<const Series> normalized);

/// Text-space index: combined embeddings mapped through the aligner series head.
VectorIndex build_text_index(const Aligner& aligner, const SketchModels& models,
                             std::span<const Series> normalized);

inline constexpr std::size_t kMaxSketchPoints = 4096;

/// Resamples y-values of an x-ordered sketch to `length` points and min-max
/// normalizes them. Needs 2..kMaxSketchPoints finite values.
Series sketch_to_query(std::span<const double> points, std::size_t length,
                       std::string id = "sketch");

}  // namespace tsr
