#include "tsr/dataset.hpp"

#include <fstream>

#include "tsr/error.hpp"

namespace tsr {

using nlohmann::json;

std::unordered_map<std::string, std::size_t> Dataset::id_map() const {
  std::unordered_map<std::string, std::size_t> map;
  map.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!map.emplace(samples[i].series.id, i).second) {
      throw DataError("duplicate sample id '" + samples[i].series.id + "'");
    }
  }
  return map;
}

json labels_to_json(const RegimeLabels& labels) {
  return json{{"trend", regime_name(Feature::trend, static_cast<int>(labels.trend))},
              {"volatility", regime_name(Feature::volatility, static_cast<int>(labels.vol))},
              {"shock", regime_name(Feature::shock, static_cast<int>(labels.shock))},
              {"liquidity",
               regime_name(Feature::liquidity, static_cast<int>(labels.liquidity))}};
}

RegimeLabels labels_from_json(const json& j) {
  RegimeLabels l;
  l.trend = static_cast<TrendRegime>(
      parse_regime(Feature::trend, j.at("trend").get<std::string>()));
  l.vol = static_cast<VolRegime>(
      parse_regime(Feature::volatility, j.at("volatility").get<std::string>()));
  l.shock = static_cast<ShockRegime>(
      parse_regime(Feature::shock, j.at("shock").get<std::string>()));
  l.liquidity = j.contains("liquidity")
                    ? static_cast<LiquidityRegime>(
                          parse_regime(Feature::liquidity, j.at("liquidity").get<std::string>()))
                    : liquidity_for(l.vol);
  return l;
}

json sample_to_json(const Sample& s) {
  json j;
  j["id"] = s.series.id;
  if (s.labels) j["labels"] = labels_to_json(*s.labels);
  if (s.caption) j["caption"] = *s.caption;
  j["normalized"] = s.series.normalized;
  if (s.series.scale_min && s.series.scale_max) {
    j["scale"] = json::array({*s.series.scale_min, *s.series.scale_max});
  }
  j["values"] = s.series.values;
  return j;
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.series.id = j.at("id").get<std::string>();
  s.series.values = j.at("values").get<std::vector<double>>();
  s.series.normalized = j.value("normalized", false);
  if (j.contains("scale")) {
    s.series.scale_min = j["scale"].at(0).get<double>();
    s.series.scale_max = j["scale"].at(1).get<double>();
  }
  if (j.contains("labels")) s.labels = labels_from_json(j["labels"]);
  if (j.contains("caption")) s.caption = j["caption"].get<std::string>();
  return s;
}

json dataset_to_json(const Dataset& d) {
  json j;
  j["format"] = "tsr-dataset";
  j["version"] = 1;
  j["name"] = d.name;
  j["kind"] = d.kind;
  if (!d.generator.is_null()) j["generator"] = d.generator;
  json samples = json::array();
  for (const auto& s : d.samples) samples.push_back(sample_to_json(s));
  j["samples"] = std::move(samples);
  return j;
}

Dataset dataset_from_json(const json& j) {
  if (j.value("format", "") != "tsr-dataset") throw FormatError("not a tsr dataset manifest");
  if (j.value("version", 0) != 1) throw FormatError("unsupported manifest version");
  Dataset d;
  d.name = j.value("name", "");
  d.kind = j.value("kind", "");
  if (j.contains("generator")) d.generator = j["generator"];
  for (const auto& s : j.at("samples")) d.samples.push_back(sample_from_json(s));
  d.id_map();
  return d;
}

void save_manifest(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << dataset_to_json(d).dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    return dataset_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace tsr
