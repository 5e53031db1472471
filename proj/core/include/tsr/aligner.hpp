#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tsr/encoders.hpp"
#include "tsr/nn.hpp"

namespace tsr {

/// Lowercases and splits on anything that is not an ASCII letter or digit.
std::vector<std::string> tokenize(std::string_view text);

/// Sorted caption vocabulary.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary build(std::span<const std::string> corpus);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  /// Position of `token`, or -1.
  long find(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TextFeatures {
  nn::Vector vector;  // L2-normalized token counts; zero when unmatchable
  bool matchable = false;
  std::vector<std::string> unknown_tokens;
};

/// Bag-of-words featurization; out-of-vocabulary tokens are ignored and
/// reported.
TextFeatures featurize_text(const Vocabulary& vocab, std::string_view text);

/// How the target similarity is scaled. `averaged` uses (S_tt + S_vv) / 2
/// where both terms already carry 1/tau; `literal` additionally divides by
/// tau once more.
enum class TargetScaling { averaged, literal };

struct ContrastiveResult {
  double loss = 0.0;
  nn::Matrix grad_text;    // n x d
  nn::Matrix grad_series;  // n x d
};

/// Symmetric soft-target contrastive loss over row-unit-normalized batches
/// (rows are samples):
///   S = T V^T / tau,  Y = rowsoftmax((T T^T / tau + V V^T / tau) / 2),
///   loss = (CE(S, Y) + CE(S^T, Y^T)) / 2,
/// with CE(A, B) the mean over rows of -sum_j B_ij log softmax(A_i)_j.
/// Gradients are exact, including the dependence of Y on the embeddings.
ContrastiveResult contrastive_loss(const nn::Matrix& text, const nn::Matrix& series, double tau,
                                   TargetScaling scaling = TargetScaling::averaged);

/// Projection heads mapping bag-of-words text features and combined sketch
/// embeddings into a shared unit-norm space.
struct Aligner {
  Vocabulary vocab;
  nn::DenseNet text_head;    // [V, d], final linear
  nn::DenseNet series_head;  // [32, d], final linear
  double tau = 0.1;
  TargetScaling scaling = TargetScaling::averaged;

  std::size_t embedding_dim() const noexcept { return text_head.output_size(); }
};

struct AlignerConfig {
  nn::TrainConfig train;
  std::vector<double> tau_grid{0.05, 0.1, 0.5, 1.0};
  std::size_t embedding_dim = 64;
  TargetScaling scaling = TargetScaling::averaged;
};

struct AlignerMetrics {
  std::vector<double> tau_grid;
  std::vector<double> validation_loss;  // one entry per grid tau
  double chosen_tau = 0.0;
  std::vector<double> train_loss;       // per epoch for the chosen tau
  double mean_diagonal_similarity = 0.0;
  double mean_off_diagonal_similarity = 0.0;
  bool degenerate_corpus = false;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

struct AlignerTrainResult {
  Aligner aligner;
  AlignerMetrics metrics;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

/// Trains both heads with the contrastive loss for every tau in the grid and
/// keeps the one with the lowest validation loss. `series_embeddings` holds
/// one frozen combined embedding per caption (columns).
AlignerTrainResult train_aligner(std::span<const std::string> captions,
                                 const nn::Matrix& series_embeddings, const AlignerConfig& config);

/// Convenience overload computing the frozen embeddings from normalized series.
AlignerTrainResult train_aligner(std::span<const std::string> captions,
                                 std::span<const Series> normalized, const SketchModels& models,
                                 const AlignerConfig& config);

/// Head forward plus L2 normalization. Throws UnmatchableQueryError when the
/// text has no in-vocabulary token.
nn::Vector embed_text_query(const Aligner& aligner, std::string_view text);
nn::Vector embed_series_for_text(const Aligner& aligner, const SketchModels& models,
                                 const Series& normalized);
/// Batched text-space embeddings of frozen combined embeddings (columns).
nn::Matrix embed_series_batch(const Aligner& aligner, const nn::Matrix& combined);

/// Checkpoint at `path` (two TSNN records: text head, series head), JSON
/// sidecar with tau and scaling, vocabulary at `<path>.vocab`.
void save_aligner(const std::filesystem::path& path, const Aligner& aligner,
                  const nlohmann::json& meta = nlohmann::json::object());
Aligner load_aligner(const std::filesystem::path& path);

}  // namespace tsr
