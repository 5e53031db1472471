#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsr/features.hpp"
#include "tsr/nn.hpp"
#include "tsr/series.hpp"

namespace tsr {

/// Layer widths of the sketch autoencoders. The last hidden width is the
/// latent size; the decoder mirrors the encoder.
struct AeArchitecture {
  std::size_t input_size = 30;
  std::vector<std::size_t> hidden{512, 256, 16};

  std::size_t latent_dim() const { return hidden.back(); }
  std::vector<std::size_t> encoder_sizes() const;
  std::vector<std::size_t> decoder_sizes() const;
};

/// Encoder (ReLU throughout) and decoder (final layer linear). The latent is
/// L2-normalized before decoding and before indexing.
struct AutoencoderModel {
  nn::DenseNet encoder;
  nn::DenseNet decoder;

  std::size_t input_size() const noexcept { return encoder.input_size(); }
  std::size_t latent_dim() const noexcept { return encoder.output_size(); }
};

AutoencoderModel make_autoencoder(const AeArchitecture& arch, std::uint64_t seed);

/// Unit-normalizes each column in place; an all-zero column becomes e_1.
/// Returns the pre-normalization column norms.
nn::Vector normalize_columns(nn::Matrix& m);

/// Encoder forward then L2 normalization (columns are samples).
nn::Matrix encode_batch(const AutoencoderModel& model, const nn::Matrix& inputs);
nn::Vector encode(const AutoencoderModel& model, std::span<const double> input);

/// Full reconstruction decode(normalize(encode(x))).
nn::Matrix reconstruct(const AutoencoderModel& model, const nn::Matrix& inputs);

/// Reconstruction MSE and parameter gradients for a batch (columns).
struct AeGradients {
  double loss = 0.0;
  nn::Gradients encoder;
  nn::Gradients decoder;
};
AeGradients autoencoder_gradients(const AutoencoderModel& model, const nn::Matrix& batch);

struct TrainHistory {
  double initial_train_loss = 0.0;
  double initial_validation_loss = 0.0;
  std::vector<double> train_loss;        // per epoch, full-pass MSE on the train split
  std::vector<double> validation_loss;   // per epoch; empty when no holdout
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

struct AeTrainResult {
  AutoencoderModel model;
  TrainHistory history;
  std::vector<std::size_t> validation_indices;
};

/// Minimizes reconstruction MSE with a seeded holdout of
/// `config.validation_fraction` of the data. Every row of `data` must have
/// arch.input_size values in [0,1].
AeTrainResult train_autoencoder(std::span<const std::vector<double>> data,
                                const nn::TrainConfig& config, const AeArchitecture& arch = {});

/// Mean reconstruction MSE over the given rows.
double reconstruction_mse(const AutoencoderModel& model, std::span<const std::vector<double>> data);

void save_autoencoder(const std::filesystem::path& path, const AutoencoderModel& model,
                      const nlohmann::json& meta = nlohmann::json::object());
AutoencoderModel load_autoencoder(const std::filesystem::path& path,
                                  nlohmann::json* meta = nullptr);

/// The trend and volatility autoencoders that define the sketch embedding.
struct SketchModels {
  AutoencoderModel trend;
  AutoencoderModel vol;
  VolConfig vol_config;

  std::size_t input_size() const noexcept { return trend.input_size(); }
  std::size_t embedding_dim() const noexcept { return trend.latent_dim() + vol.latent_dim(); }
};

/// [encode_trend(x), encode_vol(v)] / sqrt(2) with v the volatility series
/// of x. Input must be normalized with the model input length.
nn::Vector combined_embedding(const SketchModels& models, const Series& normalized);
nn::Vector combined_embedding(const SketchModels& models, const Series& normalized,
                              const VolatilitySeries& vol);

/// Batched form; returns one column per series.
nn::Matrix combined_embeddings(const SketchModels& models, std::span<const Series> normalized);

}  // namespace tsr
