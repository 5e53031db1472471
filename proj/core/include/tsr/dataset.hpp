#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsr/series.hpp"

namespace tsr {

/// One stored record: a series plus its ground-truth labels and caption when
/// known.
struct Sample {
  Series series;
  std::optional<RegimeLabels> labels;
  std::optional<std::string> caption;
};

/// In-memory form of the dataset manifest shared by the generator, the CSV
/// ingester, the index payload store and the service.
struct Dataset {
  std::string name;
  std::string kind;            // "synthetic" or "historical"
  nlohmann::json generator;    // generator parameters; null for historical data
  std::vector<Sample> samples;

  /// id -> position; throws DataError on duplicate ids.
  std::unordered_map<std::string, std::size_t> id_map() const;
};

nlohmann::json labels_to_json(const RegimeLabels& labels);
RegimeLabels labels_from_json(const nlohmann::json& j);

nlohmann::json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

nlohmann::json dataset_to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);

/// Writes the manifest as pretty-printed JSON. Doubles are emitted in their
/// shortest round-trip form, so a load/save cycle is lossless and two saves of
/// the same dataset are byte-identical.
void save_manifest(const Dataset& d, const std::filesystem::path& path);
Dataset load_manifest(const std::filesystem::path& path);

}  // namespace tsr
