#include "tsr/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tsr/error.hpp"
#include "tsr/random.hpp"

namespace tsr {

using nn::Matrix;
using nn::Vector;

std::vector<std::size_t> AeArchitecture::encoder_sizes() const {
  std::vector<std::size_t> sizes{input_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  return sizes;
}

std::vector<std::size_t> AeArchitecture::decoder_sizes() const {
  auto sizes = encoder_sizes();
  std::reverse(sizes.begin(), sizes.end());
  return sizes;
}

AutoencoderModel make_autoencoder(const AeArchitecture& arch, std::uint64_t seed) {
  if (arch.hidden.empty()) throw ParameterError("autoencoder needs at least a latent layer");
  return AutoencoderModel{nn::DenseNet::glorot(arch.encoder_sizes(), false, derive_seed(seed, 0)),
                          nn::DenseNet::glorot(arch.decoder_sizes(), true, derive_seed(seed, 1))};
}

Vector normalize_columns(Matrix& m) {
  Vector norms = m.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (norms(c) > 0.0) {
      m.col(c) /= norms(c);
    } else {
      m.col(c).setZero();
      m(0, c) = 1.0;
    }
  }
  return norms;
}

Matrix encode_batch(const AutoencoderModel& model, const Matrix& inputs) {
  Matrix z = nn::forward(model.encoder, inputs).output();
  normalize_columns(z);
  return z;
}

Vector encode(const AutoencoderModel& model, std::span<const double> input) {
  if (input.size() != model.input_size()) {
    throw ShapeError("encoder expects " + std::to_string(model.input_size()) +
                     " values, got " + std::to_string(input.size()));
  }
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  return encode_batch(model, x).col(0);
}

Matrix reconstruct(const AutoencoderModel& model, const Matrix& inputs) {
  return nn::forward(model.decoder, encode_batch(model, inputs)).output();
}

AeGradients autoencoder_gradients(const AutoencoderModel& model, const Matrix& batch) {
  const auto enc = nn::forward(model.encoder, batch);
  Matrix latent = enc.output();
  const Vector norms = normalize_columns(latent);
  const auto dec = nn::forward(model.decoder, latent);
  const auto loss = nn::mse_loss(dec.output(), batch);

  AeGradients out;
  out.loss = loss.value;
  Matrix d_latent;
  out.decoder = nn::backward(model.decoder, dec, loss.grad, &d_latent);

  // d(z/|z|) = (I - u u^T) / |z|; columns that collapsed to e_1 pass no gradient.
  Matrix d_raw = Matrix::Zero(d_latent.rows(), d_latent.cols());
  for (Eigen::Index c = 0; c < latent.cols(); ++c) {
    if (norms(c) > 0.0) {
      const double proj = latent.col(c).dot(d_latent.col(c));
      d_raw.col(c) = (d_latent.col(c) - proj * latent.col(c)) / norms(c);
    }
  }
  out.encoder = nn::backward(model.encoder, enc, d_raw);
  return out;
}

namespace {

Matrix gather_columns(std::span<const std::vector<double>> data,
                      std::span<const std::size_t> indices, std::size_t rows) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto& row = data[indices[j]];
    m.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(rows));
  }
  return m;
}

double mse_over(const AutoencoderModel& model, std::span<const std::vector<double>> data,
                std::span<const std::size_t> indices) {
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  constexpr std::size_t kChunk = 1024;
  double total = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const auto chunk = indices.subspan(start, std::min(kChunk, indices.size() - start));
    const Matrix x = gather_columns(data, chunk, model.input_size());
    total += (reconstruct(model, x) - x).squaredNorm();
  }
  return total / static_cast<double>(indices.size() * model.input_size());
}

}  // namespace

double reconstruction_mse(const AutoencoderModel& model, std::span<const std::vector<double>> data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return mse_over(model, data, all);
}

AeTrainResult train_autoencoder(std::span<const std::vector<double>> data,
                                const nn::TrainConfig& config, const AeArchitecture& arch) {
  config.validate();
  if (data.empty()) throw DataError("autoencoder training set is empty");
  for (const auto& row : data) {
    if (row.size() != arch.input_size) {
      throw ShapeError("training row has " + std::to_string(row.size()) + " values, expected " +
                       std::to_string(arch.input_size));
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::floor(config.validation_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  if (train.empty()) throw DataError("no training rows left after the validation split");

  AeTrainResult result;
  result.model = make_autoencoder(arch, config.seed);
  result.validation_indices = val;
  TrainHistory& h = result.history;
  h.train_size = train.size();
  h.validation_size = val.size();
  h.initial_train_loss = mse_over(result.model, data, train);
  h.initial_validation_loss = mse_over(result.model, data, val);

  nn::Optimizer enc_opt(result.model.encoder, config);
  nn::Optimizer dec_opt(result.model.decoder, config);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const std::span<const std::size_t> idx(
          train.data() + start, std::min(config.batch_size, train.size() - start));
      const Matrix batch = gather_columns(data, idx, arch.input_size);
      const AeGradients g = autoencoder_gradients(result.model, batch);
      enc_opt.step(result.model.encoder, g.encoder);
      dec_opt.step(result.model.decoder, g.decoder);
    }
    h.train_loss.push_back(mse_over(result.model, data, train));
    if (!val.empty()) h.validation_loss.push_back(mse_over(result.model, data, val));
  }
  return result;
}

void save_autoencoder(const std::filesystem::path& path, const AutoencoderModel& model,
                      const nlohmann::json& meta) {
  nlohmann::json m = meta;
  m["kind"] = "autoencoder";
  m["latent_dim"] = model.latent_dim();
  m["input_size"] = model.input_size();
  nn::save_checkpoint(path, {&model.encoder, &model.decoder}, m);
}

AutoencoderModel load_autoencoder(const std::filesystem::path& path, nlohmann::json* meta) {
  auto nets = nn::load_checkpoint(path, meta);
  if (nets.size() != 2) throw FormatError("autoencoder checkpoint must hold 2 networks");
  AutoencoderModel model{std::move(nets[0]), std::move(nets[1])};
  if (model.encoder.output_size() != model.decoder.input_size() ||
      model.encoder.input_size() != model.decoder.output_size()) {
    throw FormatError("encoder and decoder shapes do not mirror each other");
  }
  return model;
}

namespace {

void check_sketch_input(const SketchModels& models, const Series& s) {
  if (s.values.size() != models.input_size()) {
    throw ShapeError("sketch models expect length " + std::to_string(models.input_size()) +
                     ", got " + std::to_string(s.values.size()));
  }
  if (!s.normalized) throw ParameterError("series '" + s.id + "' must be normalized");
}

}  // namespace

Vector combined_embedding(const SketchModels& models, const Series& normalized) {
  check_sketch_input(models, normalized);
  return combined_embedding(models, normalized, volatility_series(normalized, models.vol_config));
}

Vector combined_embedding(const SketchModels& models, const Series& normalized,
                          const VolatilitySeries& vol) {
  check_sketch_input(models, normalized);
  const Vector t = encode(models.trend, normalized.values);
  const Vector v = encode(models.vol, vol.values);
  Vector e(t.size() + v.size());
  e << t, v;
  return e / std::sqrt(2.0);
}

Matrix combined_embeddings(const SketchModels& models, std::span<const Series> normalized) {
  const auto n = static_cast<Eigen::Index>(normalized.size());
  const auto len = static_cast<Eigen::Index>(models.input_size());
  Matrix x(len, n);
  Matrix v(len, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Series& s = normalized[static_cast<std::size_t>(c)];
    check_sketch_input(models, s);
    x.col(c) = Eigen::Map<const Vector>(s.values.data(), len);
    const auto vol = volatility_values(s.values, models.vol_config.half_window);
    v.col(c) = Eigen::Map<const Vector>(vol.data(), len);
  }
  models.vol_config.validate(models.input_size());
  Matrix out(static_cast<Eigen::Index>(models.embedding_dim()), n);
  constexpr Eigen::Index kChunk = 4096;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index cols = std::min(kChunk, n - start);
    const Matrix t = encode_batch(models.trend, x.middleCols(start, cols));
    const Matrix w = encode_batch(models.vol, v.middleCols(start, cols));
    out.block(0, start, t.rows(), cols) = t / std::sqrt(2.0);
    out.block(t.rows(), start, w.rows(), cols) = w / std::sqrt(2.0);
  }
  return out;
}

}  // namespace tsr
