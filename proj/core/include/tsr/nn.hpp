#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace tsr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One affine layer: out = weights * in + bias, weights is (out x in).
struct Layer {
  Matrix weights;
  Vector bias;
};

/// Fully connected network with ReLU after every layer, except the last one
/// when `final_linear` is set.
class DenseNet {
 public:
  DenseNet() = default;

  /// Zero-initialized network with the given layer sizes (input first).
  DenseNet(std::vector<std::size_t> sizes, bool final_linear);

  /// Glorot-uniform weights, zero biases.
  static DenseNet glorot(std::vector<std::size_t> sizes, bool final_linear, std::uint64_t seed);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  bool final_linear() const noexcept { return final_linear_; }
  std::size_t input_size() const noexcept { return sizes_.empty() ? 0 : sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.empty() ? 0 : sizes_.back(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept;

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Flat parameter view: layer by layer, weights (column-major) then bias.
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  /// Throws ShapeError if layer shapes disagree with sizes, ParameterError on
  /// non-finite parameters.
  void validate() const;

  friend bool operator==(const DenseNet& a, const DenseNet& b);

 private:
  std::vector<std::size_t> sizes_;
  bool final_linear_ = false;
  std::vector<Layer> layers_;
};

/// Post-activation outputs of every layer; activations[0] is the input and
/// activations.back() the network output. Columns are samples.
struct ForwardCache {
  std::vector<Matrix> activations;

  const Matrix& output() const { return activations.back(); }
};

ForwardCache forward(const DenseNet& net, const Matrix& input);
Vector forward(const DenseNet& net, const Vector& input);

/// Parameter-shaped gradient container.
struct Gradients {
  std::vector<Layer> layers;

  static Gradients zeros_like(const DenseNet& net);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double scale);
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
  double max_abs() const;
};

/// Backpropagates `output_grad` (dLoss/dOutput, same shape as the cached
/// output) through the net. Gradients are summed over batch columns. When
/// `input_grad` is given it receives dLoss/dInput.
Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& output_grad,
                   Matrix* input_grad = nullptr);

struct LossResult {
  double value = 0.0;
  Matrix grad;
};

/// Mean of squared differences over all elements; gradient 2 (pred - target) / n.
LossResult mse_loss(const Matrix& prediction, const Matrix& target);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double validation_fraction = 0.10;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Plain SGD or Adam with bias correction.
class Optimizer {
 public:
  Optimizer(const DenseNet& net, const TrainConfig& config);

  void step(DenseNet& net, const Gradients& grads);
  std::size_t steps_taken() const noexcept { return step_; }

 private:
  TrainConfig config_;
  Gradients first_moment_;
  Gradients second_moment_;
  std::size_t step_ = 0;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t probes = 20;
  double tolerance = 1e-4;
  /// Relative errors use max(|analytic|, |numeric|, denominator_floor).
  double denominator_floor = 1e-7;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t probes = 0;
  bool passed = false;
};

using LossAndGrad = std::function<std::pair<double, Gradients>(const DenseNet&)>;

/// Compares analytic gradients against central differences on randomly
/// sampled parameters (all of them when the net has fewer than `probes`).
GradCheckReport gradient_check(const DenseNet& net, const LossAndGrad& loss_fn,
                               const GradCheckOptions& options = {});

/// Single-net TSNN record (magic, version, layer count, dims, final-linear
/// flag, row-major float64 parameters, FNV-1a checksum).
void write_net(std::ostream& out, const DenseNet& net);
DenseNet read_net(std::istream& in);

/// Checkpoint = consecutive TSNN records in one file plus a JSON sidecar at
/// `<path>.json` describing the architecture and training setup.
void save_checkpoint(const std::filesystem::path& path, const std::vector<const DenseNet*>& nets,
                     const nlohmann::json& meta);
std::vector<DenseNet> load_checkpoint(const std::filesystem::path& path,
                                      nlohmann::json* meta = nullptr);

nlohmann::json describe(const DenseNet& net);

}  // namespace tsr::nn
