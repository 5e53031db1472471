#include "tsr/aligner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "tsr/error.hpp"
#include "tsr/random.hpp"

namespace tsr {

using nn::Matrix;
using nn::Vector;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 && c < 0x80) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  std::sort(tokens_.begin(), tokens_.end());
  tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
  std::set<std::string> all;
  for (const auto& text : corpus) {
    for (auto& t : tokenize(text)) all.insert(std::move(t));
  }
  return Vocabulary(std::vector<std::string>(all.begin(), all.end()));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  if (!std::is_sorted(tokens.begin(), tokens.end())) {
    throw FormatError("vocabulary file is not sorted: " + path.string());
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

long Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

TextFeatures featurize_text(const Vocabulary& vocab, std::string_view text) {
  TextFeatures f;
  f.vector = Vector::Zero(static_cast<Eigen::Index>(vocab.size()));
  for (const auto& token : tokenize(text)) {
    const long i = vocab.find(token);
    if (i < 0) {
      if (std::find(f.unknown_tokens.begin(), f.unknown_tokens.end(), token) ==
          f.unknown_tokens.end()) {
        f.unknown_tokens.push_back(token);
      }
    } else {
      f.vector(i) += 1.0;
    }
  }
  const double norm = f.vector.norm();
  f.matchable = norm > 0.0;
  if (f.matchable) f.vector /= norm;
  return f;
}

namespace {

Matrix row_log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace

ContrastiveResult contrastive_loss(const Matrix& text, const Matrix& series, double tau,
                                   TargetScaling scaling) {
  if (!(tau > 0.0)) throw ParameterError("temperature must be > 0");
  if (text.rows() != series.rows() || text.cols() != series.cols()) {
    throw ShapeError("text and series batches differ in shape");
  }
  if (text.rows() < 1) throw ShapeError("contrastive loss needs a non-empty batch");
  const double n = static_cast<double>(text.rows());
  const double target_scale = 2.0 * tau * (scaling == TargetScaling::literal ? tau : 1.0);

  const Matrix logits = text * series.transpose() / tau;
  const Matrix target_logits =
      (text * text.transpose() + series * series.transpose()) / target_scale;
  const Matrix log_y = row_log_softmax(target_logits);
  const Matrix y = log_y.array().exp();
  const Matrix log_p = row_log_softmax(logits);
  const Matrix log_q = row_log_softmax(logits.transpose());
  const Matrix yt = y.transpose();

  ContrastiveResult r;
  const double l1 = -(y.array() * log_p.array()).sum() / n;
  const double l2 = -(yt.array() * log_q.array()).sum() / n;
  r.loss = 0.5 * (l1 + l2);

  // d/dlogits of each soft-target cross-entropy: softmax * target_row_sum - target.
  const Vector y_rows = y.rowwise().sum();
  const Vector yt_rows = yt.rowwise().sum();
  const Matrix p = log_p.array().exp();
  const Matrix q = log_q.array().exp();
  Matrix d_logits = (p.array().colwise() * y_rows.array()).matrix() - y;
  d_logits += ((q.array().colwise() * yt_rows.array()).matrix() - yt).transpose();
  d_logits *= 0.5 / n;

  // Gradient through the targets.
  const Matrix d_y = -0.5 / n * (log_p + log_q.transpose());
  const Vector inner = (y.array() * d_y.array()).rowwise().sum();
  const Matrix d_target = y.array() * (d_y.array().colwise() - inner.array());
  const Matrix d_target_sym = (d_target + d_target.transpose()) / target_scale;

  r.grad_text = d_logits * series / tau + d_target_sym * text;
  r.grad_series = d_logits.transpose() * text / tau + d_target_sym * series;
  return r;
}

namespace {

constexpr std::uint64_t kSplitSalt = 0xa11900001ULL;

Matrix gather(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(idx[j]));
  }
  return out;
}

/// Backpropagates d(loss)/d(normalized columns) through column normalization.
Matrix normalize_backward(const Matrix& unit, const Vector& norms, const Matrix& d_unit) {
  Matrix d_raw = Matrix::Zero(unit.rows(), unit.cols());
  for (Eigen::Index c = 0; c < unit.cols(); ++c) {
    if (norms(c) > 0.0) {
      d_raw.col(c) = (d_unit.col(c) - unit.col(c).dot(d_unit.col(c)) * unit.col(c)) / norms(c);
    }
  }
  return d_raw;
}

struct HeadPair {
  nn::DenseNet text;
  nn::DenseNet series;
};

double batch_loss(const HeadPair& heads, const Matrix& text_x, const Matrix& series_x, double tau,
                  TargetScaling scaling) {
  Matrix t = nn::forward(heads.text, text_x).output();
  Matrix v = nn::forward(heads.series, series_x).output();
  normalize_columns(t);
  normalize_columns(v);
  return contrastive_loss(t.transpose(), v.transpose(), tau, scaling).loss;
}

double split_loss(const HeadPair& heads, const Matrix& text_features, const Matrix& series_emb,
                  std::span<const std::size_t> idx, std::size_t batch_size, double tau,
                  TargetScaling scaling) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const auto chunk = idx.subspan(start, std::min(batch_size, idx.size() - start));
    if (chunk.size() < 2 && idx.size() >= 2) continue;
    total += batch_loss(heads, gather(text_features, chunk), gather(series_emb, chunk), tau,
                        scaling) *
             static_cast<double>(chunk.size());
    counted += chunk.size();
  }
  return total / static_cast<double>(counted);
}

}  // namespace

AlignerTrainResult train_aligner(std::span<const std::string> captions,
                                 const Matrix& series_embeddings, const AlignerConfig& config) {
  const nn::TrainConfig& tc = config.train;
  tc.validate();
  if (captions.size() < 2) throw DataError("aligner training needs at least 2 pairs");
  if (static_cast<std::size_t>(series_embeddings.cols()) != captions.size()) {
    throw ShapeError("one series embedding per caption is required");
  }
  if (config.tau_grid.empty()) throw ParameterError("temperature grid is empty");
  for (double tau : config.tau_grid) {
    if (!(tau > 0.0)) throw ParameterError("temperature grid values must be > 0");
  }

  AlignerTrainResult result;
  result.aligner.vocab = Vocabulary::build(captions);
  const Vocabulary& vocab = result.aligner.vocab;
  if (vocab.size() == 0) throw DataError("caption corpus has no tokens");
  result.metrics.degenerate_corpus =
      std::all_of(captions.begin(), captions.end(),
                  [&](const std::string& c) { return c == captions.front(); });

  Matrix text_features(static_cast<Eigen::Index>(vocab.size()),
                       static_cast<Eigen::Index>(captions.size()));
  for (std::size_t i = 0; i < captions.size(); ++i) {
    text_features.col(static_cast<Eigen::Index>(i)) = featurize_text(vocab, captions[i]).vector;
  }

  Rng split_rng(derive_seed(tc.seed, kSplitSalt));
  std::vector<std::size_t> order(captions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_val = static_cast<std::size_t>(
      std::floor(tc.validation_fraction * static_cast<double>(captions.size())));
  if (n_val == captions.size()) n_val = captions.size() - 1;
  result.validation_indices.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  result.train_indices.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  result.metrics.train_size = result.train_indices.size();
  result.metrics.validation_size = result.validation_indices.size();
  const auto& val = result.validation_indices;

  const std::size_t series_dim = static_cast<std::size_t>(series_embeddings.rows());
  double best_loss = std::numeric_limits<double>::infinity();
  HeadPair best;
  for (std::size_t g = 0; g < config.tau_grid.size(); ++g) {
    const double tau = config.tau_grid[g];
    HeadPair heads{nn::DenseNet::glorot({vocab.size(), config.embedding_dim}, true,
                                        derive_seed(tc.seed, 11)),
                   nn::DenseNet::glorot({series_dim, config.embedding_dim}, true,
                                        derive_seed(tc.seed, 12))};
    nn::Optimizer text_opt(heads.text, tc);
    nn::Optimizer series_opt(heads.series, tc);
    Rng rng(derive_seed(tc.seed, 13));
    std::vector<std::size_t> train = result.train_indices;
    std::vector<double> history;

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
      std::shuffle(train.begin(), train.end(), rng);
      double epoch_loss = 0.0;
      std::size_t epoch_count = 0;
      for (std::size_t start = 0; start < train.size(); start += tc.batch_size) {
        const std::span<const std::size_t> idx(train.data() + start,
                                               std::min(tc.batch_size, train.size() - start));
        if (idx.size() < 2 && train.size() >= 2) continue;
        const auto text_cache = nn::forward(heads.text, gather(text_features, idx));
        const auto series_cache = nn::forward(heads.series, gather(series_embeddings, idx));
        Matrix t = text_cache.output();
        Matrix v = series_cache.output();
        const Vector t_norms = normalize_columns(t);
        const Vector v_norms = normalize_columns(v);
        const auto loss = contrastive_loss(t.transpose(), v.transpose(), tau, config.scaling);
        const Matrix dt = normalize_backward(t, t_norms, loss.grad_text.transpose());
        const Matrix dv = normalize_backward(v, v_norms, loss.grad_series.transpose());
        text_opt.step(heads.text, nn::backward(heads.text, text_cache, dt));
        series_opt.step(heads.series, nn::backward(heads.series, series_cache, dv));
        epoch_loss += loss.loss * static_cast<double>(idx.size());
        epoch_count += idx.size();
      }
      history.push_back(epoch_count > 0 ? epoch_loss / static_cast<double>(epoch_count) : 0.0);
    }

    const std::span<const std::size_t> eval_idx =
        val.empty() ? std::span<const std::size_t>(result.train_indices)
                    : std::span<const std::size_t>(val);
    const double v_loss = split_loss(heads, text_features, series_embeddings, eval_idx,
                                     tc.batch_size, tau, config.scaling);
    result.metrics.tau_grid.push_back(tau);
    result.metrics.validation_loss.push_back(v_loss);
    if (v_loss < best_loss) {
      best_loss = v_loss;
      best = std::move(heads);
      result.metrics.chosen_tau = tau;
      result.metrics.train_loss = std::move(history);
    }
  }

  Aligner& a = result.aligner;
  a.text_head = std::move(best.text);
  a.series_head = std::move(best.series);
  a.tau = result.metrics.chosen_tau;
  a.scaling = config.scaling;

  // In-batch similarity structure on the held-out pairs (train pairs if none).
  const std::vector<std::size_t>& probe = val.size() >= 2 ? val : result.train_indices;
  double diag = 0.0;
  double off = 0.0;
  std::size_t n_diag = 0;
  std::size_t n_off = 0;
  for (std::size_t start = 0; start < probe.size(); start += tc.batch_size) {
    const std::span<const std::size_t> idx(probe.data() + start,
                                           std::min(tc.batch_size, probe.size() - start));
    Matrix t = nn::forward(a.text_head, gather(text_features, idx)).output();
    Matrix v = nn::forward(a.series_head, gather(series_embeddings, idx)).output();
    normalize_columns(t);
    normalize_columns(v);
    const Matrix sim = t.transpose() * v;
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      for (Eigen::Index j = 0; j < sim.cols(); ++j) {
        if (i == j) {
          diag += sim(i, j);
          ++n_diag;
        } else {
          off += sim(i, j);
          ++n_off;
        }
      }
    }
  }
  result.metrics.mean_diagonal_similarity = n_diag ? diag / static_cast<double>(n_diag) : 0.0;
  result.metrics.mean_off_diagonal_similarity = n_off ? off / static_cast<double>(n_off) : 0.0;
  return result;
}

AlignerTrainResult train_aligner(std::span<const std::string> captions,
                                 std::span<const Series> normalized, const SketchModels& models,
                                 const AlignerConfig& config) {
  if (captions.size() != normalized.size()) {
    throw ShapeError("captions and series counts differ");
  }
  return train_aligner(captions, combined_embeddings(models, normalized), config);
}

Vector embed_text_query(const Aligner& aligner, std::string_view text) {
  const TextFeatures f = featurize_text(aligner.vocab, text);
  if (!f.matchable) throw UnmatchableQueryError(f.unknown_tokens);
  Matrix t = nn::forward(aligner.text_head, f.vector);
  normalize_columns(t);
  return t.col(0);
}

Matrix embed_series_batch(const Aligner& aligner, const Matrix& combined) {
  Matrix v = nn::forward(aligner.series_head, combined).output();
  normalize_columns(v);
  return v;
}

Vector embed_series_for_text(const Aligner& aligner, const SketchModels& models,
                             const Series& normalized) {
  const Matrix e = combined_embedding(models, normalized);
  return embed_series_batch(aligner, e).col(0);
}

void save_aligner(const std::filesystem::path& path, const Aligner& aligner,
                  const nlohmann::json& meta) {
  nlohmann::json m = meta;
  m["kind"] = "aligner";
  m["tau"] = aligner.tau;
  m["target_scaling"] = aligner.scaling == TargetScaling::literal ? "literal" : "averaged";
  m["embedding_dim"] = aligner.embedding_dim();
  m["vocabulary_size"] = aligner.vocab.size();
  nn::save_checkpoint(path, {&aligner.text_head, &aligner.series_head}, m);
  aligner.vocab.save(path.string() + ".vocab");
}

Aligner load_aligner(const std::filesystem::path& path) {
  nlohmann::json meta;
  auto nets = nn::load_checkpoint(path, &meta);
  if (nets.size() != 2) throw FormatError("aligner checkpoint must hold 2 networks");
  Aligner a;
  a.text_head = std::move(nets[0]);
  a.series_head = std::move(nets[1]);
  a.vocab = Vocabulary::load(path.string() + ".vocab");
  if (a.vocab.size() != a.text_head.input_size()) {
    throw FormatError("vocabulary size does not match the text head input");
  }
  if (a.text_head.output_size() != a.series_head.output_size()) {
    throw FormatError("text and series heads disagree on the shared dimension");
  }
  a.tau = meta.value("tau", 0.1);
  a.scaling = meta.value("target_scaling", std::string("averaged")) == "literal"
                  ? TargetScaling::literal
                  : TargetScaling::averaged;
  return a;
}

}  // namespace tsr
