#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsr/aligner.hpp"
#include "tsr/baselines.hpp"
#include "tsr/encoders.hpp"
#include "tsr/index.hpp"
#include "tsr/phrase_bank.hpp"
#include "tsr/series.hpp"

namespace tsr {

enum class Method { bf, bf_avg, pca16, ae };

std::string_view method_name(Method m) noexcept;
Method parse_method(std::string_view name);

/// One (noise, shift, k) setting of the sketch benchmark.
struct ExperimentRow {
  double noise_sigma = 0.05;
  std::size_t shift = 0;
  std::size_t k = 1;
  friend bool operator==(const ExperimentRow&, const ExperimentRow&) = default;
};

/// (0.05,0,1), (0.05,5,1), (0.05,0,3), (0.05,5,3).
std::vector<ExperimentRow> standard_rows();

struct ExperimentConfig {
  std::vector<ExperimentRow> rows = standard_rows();
  std::size_t query_count = 302;
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::bf, Method::bf_avg, Method::pca16, Method::ae};
  bool text_eval = false;
  std::size_t pca_components = 16;
  /// Artifact locations and extra settings used by the command line driver.
  nlohmann::json artifacts = nlohmann::json::object();

  void validate() const;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Gaussian noise (clamped to [0,1]), circular right shift, re-normalization,
/// applied to the first `count` test series. Query i uses a seed derived from
/// (seed, i); ids are kept.
std::vector<Series> make_query_set(std::span<const Series> test, double sigma, std::size_t shift,
                                   std::size_t count, std::uint64_t seed);

/// Measures between a query and one retrieved item.
struct PairMeasures {
  std::string id;
  double score = 0.0;
  double trend_mape = 0.0;
  bool trend_mape_defined = false;
  double trend_corr = 0.0;
  bool trend_corr_degenerate = false;
  double vol_mape = 0.0;
  bool vol_mape_defined = false;
  double vol_corr = 0.0;
  bool vol_corr_degenerate = false;
  double trend_l2 = 0.0;
};

struct QueryRecord {
  std::size_t row = 0;  // position in ExperimentConfig::rows
  Method method = Method::bf;
  std::string query_id;
  double seconds = 0.0;
  std::vector<PairMeasures> retrieved;
};

nlohmann::json query_record_to_json(const QueryRecord& r, const ExperimentRow& row);

struct MethodSummary {
  ExperimentRow row;
  Method method = Method::bf;
  double trend_mape = 0.0;
  double trend_corr = 0.0;
  double vol_mape = 0.0;
  double vol_corr = 0.0;
  double latency_mean = 0.0;
  double latency_std = 0.0;
  double trend_l2 = 0.0;
  std::size_t queries = 0;
  std::size_t pairs = 0;
  std::size_t undefined_mape = 0;
  std::size_t degenerate_corr = 0;
  friend bool operator==(const MethodSummary&, const MethodSummary&) = default;
};

struct TextSummary {
  std::string model;
  double precision_in = 0.0;
  double precision_out = 0.0;
  double hit_rate_in = 0.0;
  double hit_rate_out = 0.0;
  double diversity = 0.0;
  double random_precision = 0.0;
  std::size_t queries_in = 0;
  std::size_t queries_out = 0;
  std::size_t unmatchable_in = 0;
  std::size_t unmatchable_out = 0;
  friend bool operator==(const TextSummary&, const TextSummary&) = default;
};

struct EvalReport {
  std::size_t database_size = 0;
  std::vector<MethodSummary> methods;
  std::vector<TextSummary> text;
  std::vector<QueryRecord> records;  // raw per-query audit trail
};

/// Everything the sketch benchmark reads. Index and model pointers may be
/// null when the corresponding method is not requested.
struct EvalInputs {
  std::span<const Series> test;  // normalized, disjoint from AE training data
  const RawDatabase* db = nullptr;
  const SketchModels* models = nullptr;
  const VectorIndex* ae_index = nullptr;
  const PcaModel* pca = nullptr;
  const VectorIndex* pca_index = nullptr;
};

/// Monotonic seconds source; replaceable for tests.
using Clock = std::function<double()>;
double monotonic_seconds();

/// Runs every (row, method) pair over the perturbed query set. One untimed
/// warm-up query precedes each timed pass.
EvalReport run_experiment(const ExperimentConfig& config, const EvalInputs& inputs,
                          const Clock& clock = monotonic_seconds);

/// Aggregates raw records into one summary per (row, method).
std::vector<MethodSummary> summarize(std::span<const QueryRecord> records,
                                     std::span<const ExperimentRow> rows,
                                     std::span<const Method> methods);

/// A single-feature text query with its ground-truth regime.
struct TextQuery {
  std::string text;
  Feature feature = Feature::trend;
  int regime = 0;
};

/// One query per phrase of the bank.
std::vector<TextQuery> text_queries(const PhraseBank& bank);

struct TextEvalResult {
  double precision = 0.0;
  double hit_rate = 0.0;
  double diversity = 0.0;         // over matchable queries; 0 when none
  double random_precision = 0.0;  // expected precision of uniform retrieval
  std::size_t queries = 0;
  std::size_t unmatchable = 0;
  std::vector<std::vector<std::string>> retrieved;
};

/// precision@k of text retrieval. Unmatchable queries count as zero matches.
TextEvalResult evaluate_text(const Aligner& aligner, const VectorIndex& text_index,
                             const std::unordered_map<std::string, RegimeLabels>& labels,
                             std::span<const TextQuery> queries, std::size_t k = 9);

enum class ReportFormat { json, csv, markdown };

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const EvalReport& r);
std::string report_to_markdown(const EvalReport& r);
void emit_report(const EvalReport& r, ReportFormat format, const std::filesystem::path& path);
/// One JSON object per line.
void write_records(const EvalReport& r, std::span<const ExperimentRow> rows,
                   const std::filesystem::path& path);

}  // namespace tsr
