#include "tsr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "tsr/error.hpp"
#include "tsr/random.hpp"

namespace tsr::nn {

namespace {

constexpr char kNetMagic[4] = {'T', 'S', 'N', 'N'};
constexpr std::uint32_t kNetVersion = 1;
constexpr std::uint32_t kMaxLayerWidth = 1u << 24;

bool layer_has_relu(const DenseNet& net, std::size_t layer) {
  return !(net.final_linear() && layer + 1 == net.layer_count());
}

template <typename LayerVec>
auto& flat_ref(LayerVec& layers, std::size_t index) {
  for (auto& layer : layers) {
    const auto w = static_cast<std::size_t>(layer.weights.size());
    if (index < w) return layer.weights.data()[index];
    index -= w;
    const auto b = static_cast<std::size_t>(layer.bias.size());
    if (index < b) return layer.bias.data()[index];
    index -= b;
  }
  throw ParameterError("parameter index out of range");
}

}  // namespace

DenseNet::DenseNet(std::vector<std::size_t> sizes, bool final_linear)
    : sizes_(std::move(sizes)), final_linear_(final_linear) {
  if (sizes_.size() < 2) throw ShapeError("a network needs at least an input and output size");
  for (std::size_t s : sizes_) {
    if (s == 0 || s > kMaxLayerWidth) throw ShapeError("layer sizes must be positive");
  }
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    layers_.push_back(Layer{Matrix::Zero(out, in), Vector::Zero(out)});
  }
}

DenseNet DenseNet::glorot(std::vector<std::size_t> sizes, bool final_linear, std::uint64_t seed) {
  DenseNet net(std::move(sizes), final_linear);
  Rng rng(seed);
  for (auto& layer : net.layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    }
  }
  return net;
}

std::size_t DenseNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

double& DenseNet::parameter(std::size_t index) { return flat_ref(layers_, index); }
double DenseNet::parameter(std::size_t index) const { return flat_ref(layers_, index); }

void DenseNet::validate() const {
  if (layers_.size() + 1 != sizes_.size()) throw ShapeError("layer count disagrees with sizes");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (static_cast<std::size_t>(layer.weights.rows()) != sizes_[l + 1] ||
        static_cast<std::size_t>(layer.weights.cols()) != sizes_[l] ||
        static_cast<std::size_t>(layer.bias.size()) != sizes_[l + 1]) {
      throw ShapeError("layer " + std::to_string(l) + " shape disagrees with sizes");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw ParameterError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.sizes_ != b.sizes_ || a.final_linear_ != b.final_linear_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weights != b.layers_[l].weights || a.layers_[l].bias != b.layers_[l].bias) {
      return false;
    }
  }
  return true;
}

ForwardCache forward(const DenseNet& net, const Matrix& input) {
  if (static_cast<std::size_t>(input.rows()) != net.input_size()) {
    throw ShapeError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                     std::to_string(net.input_size()));
  }
  ForwardCache cache;
  cache.activations.reserve(net.layer_count() + 1);
  cache.activations.push_back(input);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layers()[l];
    Matrix z = layer.weights * cache.activations.back();
    z.colwise() += layer.bias;
    if (layer_has_relu(net, l)) z = z.cwiseMax(0.0);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

Vector forward(const DenseNet& net, const Vector& input) {
  if (static_cast<std::size_t>(input.size()) != net.input_size()) {
    throw ShapeError("input has length " + std::to_string(input.size()) + ", network expects " +
                     std::to_string(net.input_size()));
  }
  Vector a = input;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layers()[l];
    Vector z = layer.weights * a + layer.bias;
    if (layer_has_relu(net, l)) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  g.layers.reserve(net.layer_count());
  for (const auto& layer : net.layers()) {
    g.layers.push_back(Layer{Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                             Vector::Zero(layer.bias.size())});
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights += other.layers[l].weights;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

Gradients& Gradients::operator*=(double scale) {
  for (auto& layer : layers) {
    layer.weights *= scale;
    layer.bias *= scale;
  }
  return *this;
}

double& Gradients::at(std::size_t flat_index) { return flat_ref(layers, flat_index); }
double Gradients::at(std::size_t flat_index) const { return flat_ref(layers, flat_index); }

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& layer : layers) {
    if (layer.weights.size() > 0) m = std::max(m, layer.weights.cwiseAbs().maxCoeff());
    if (layer.bias.size() > 0) m = std::max(m, layer.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& output_grad,
                   Matrix* input_grad) {
  if (cache.activations.size() != net.layer_count() + 1) {
    throw ShapeError("forward cache does not match the network depth");
  }
  for (std::size_t l = 0; l < cache.activations.size(); ++l) {
    if (static_cast<std::size_t>(cache.activations[l].rows()) != net.sizes()[l] ||
        cache.activations[l].cols() != cache.activations.front().cols()) {
      throw ShapeError("forward cache activation " + std::to_string(l) + " has the wrong shape");
    }
  }
  if (output_grad.rows() != cache.output().rows() || output_grad.cols() != cache.output().cols()) {
    throw ShapeError("output gradient shape does not match the cached output");
  }

  Gradients grads = Gradients::zeros_like(net);
  Matrix delta = output_grad;
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    if (layer_has_relu(net, l)) {
      delta = delta.cwiseProduct(
          (cache.activations[l + 1].array() > 0.0).cast<double>().matrix());
    }
    grads.layers[l].weights.noalias() = delta * cache.activations[l].transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l > 0 || input_grad != nullptr) {
      Matrix next = net.layers()[l].weights.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
  return grads;
}

LossResult mse_loss(const Matrix& prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
    throw ShapeError("mse_loss operands differ in shape");
  }
  const double n = static_cast<double>(prediction.size());
  if (n == 0.0) throw ShapeError("mse_loss of empty operands");
  Matrix diff = prediction - target;
  LossResult r;
  r.value = diff.squaredNorm() / n;
  r.grad = (2.0 / n) * diff;
  return r;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (batch_size == 0) throw ParameterError("batch_size must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ParameterError("validation_fraction must be in [0,1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("adam betas must be in [0,1)");
  }
  if (!(epsilon > 0.0)) throw ParameterError("adam epsilon must be > 0");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"seed", c.seed},
          {"validation_fraction", c.validation_fraction}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  const std::string opt = j.value("optimizer", std::string("adam"));
  if (opt == "adam") {
    c.optimizer = OptimizerKind::adam;
  } else if (opt == "sgd") {
    c.optimizer = OptimizerKind::sgd;
  } else {
    throw ConfigError("unknown optimizer '" + opt + "'");
  }
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.seed = j.value("seed", c.seed);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.validate();
  return c;
}

Optimizer::Optimizer(const DenseNet& net, const TrainConfig& config) : config_(config) {
  config_.validate();
  if (config_.optimizer == OptimizerKind::adam) {
    first_moment_ = Gradients::zeros_like(net);
    second_moment_ = Gradients::zeros_like(net);
  }
}

void Optimizer::step(DenseNet& net, const Gradients& grads) {
  if (grads.layers.size() != net.layer_count()) throw ShapeError("gradient/net layer mismatch");
  ++step_;
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      net.layers()[l].weights -= lr * grads.layers[l].weights;
      net.layers()[l].bias -= lr * grads.layers[l].bias;
    }
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double eps = config_.epsilon;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    update(net.layers()[l].weights, grads.layers[l].weights, first_moment_.layers[l].weights,
           second_moment_.layers[l].weights);
    update(net.layers()[l].bias, grads.layers[l].bias, first_moment_.layers[l].bias,
           second_moment_.layers[l].bias);
  }
}

GradCheckReport gradient_check(const DenseNet& net, const LossAndGrad& loss_fn,
                               const GradCheckOptions& options) {
  DenseNet probe = net;
  const auto analytic = loss_fn(probe).second;
  const std::size_t total = probe.parameter_count();

  std::vector<std::size_t> indices;
  if (total <= options.probes) {
    indices.resize(total);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  } else {
    Rng rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t i = 0; i < options.probes; ++i) indices.push_back(pick(rng));
  }

  GradCheckReport report;
  for (std::size_t idx : indices) {
    double& p = probe.parameter(idx);
    const double saved = p;
    p = saved + options.epsilon;
    const double up = loss_fn(probe).first;
    p = saved - options.epsilon;
    const double down = loss_fn(probe).first;
    p = saved;
    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double a = analytic.at(idx);
    const double abs_err = std::abs(a - numeric);
    const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
    report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
    report.max_relative_error = std::max(report.max_relative_error, abs_err / denom);
    ++report.probes;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

void write_net(std::ostream& out, const DenseNet& net) {
  net.validate();
  detail::Writer w(out);
  w.bytes(kNetMagic, 4);
  w.value(kNetVersion);
  w.value(static_cast<std::uint32_t>(net.layer_count()));
  for (std::size_t s : net.sizes()) w.value(static_cast<std::uint32_t>(s));
  w.value(static_cast<std::uint8_t>(net.final_linear() ? 1 : 0));
  for (const auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.value(layer.weights(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.value(layer.bias(r));
  }
  w.checksum();
}

DenseNet read_net(std::istream& in) {
  detail::Reader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kNetMagic, 4) != 0) throw FormatError("bad magic: not a TSNN record");
  const auto version = r.value<std::uint32_t>();
  if (version != kNetVersion) {
    throw FormatError("unsupported TSNN version " + std::to_string(version));
  }
  const auto layers = r.value<std::uint32_t>();
  if (layers == 0 || layers > 64) throw FormatError("implausible layer count");
  std::vector<std::size_t> sizes;
  for (std::uint32_t i = 0; i <= layers; ++i) {
    const auto s = r.value<std::uint32_t>();
    if (s == 0 || s > kMaxLayerWidth) throw FormatError("implausible layer size");
    sizes.push_back(s);
  }
  const auto final_linear = r.value<std::uint8_t>();
  if (final_linear > 1) throw FormatError("bad final-linear flag");
  DenseNet net(std::move(sizes), final_linear == 1);
  for (auto& layer : net.layers()) {
    for (Eigen::Index row = 0; row < layer.weights.rows(); ++row) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(row, c) = r.value<double>();
      }
    }
    for (Eigen::Index row = 0; row < layer.bias.size(); ++row) layer.bias(row) = r.value<double>();
  }
  r.verify_checksum();
  net.validate();
  return net;
}

nlohmann::json describe(const DenseNet& net) {
  return {{"sizes", net.sizes()},
          {"final_linear", net.final_linear()},
          {"activation", "relu"},
          {"parameters", net.parameter_count()}};
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<const DenseNet*>& nets,
                     const nlohmann::json& meta) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const DenseNet* net : nets) write_net(out, *net);
  }
  nlohmann::json sidecar = meta;
  sidecar["format"] = "TSNN";
  sidecar["version"] = kNetVersion;
  sidecar["nets"] = nlohmann::json::array();
  for (const DenseNet* net : nets) sidecar["nets"].push_back(describe(*net));
  std::ofstream side(path.string() + ".json");
  if (!side) throw IoError("cannot write " + path.string() + ".json");
  side << sidecar.dump(2) << '\n';
}

std::vector<DenseNet> load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<DenseNet> nets;
  while (in.peek() != std::char_traits<char>::eof()) nets.push_back(read_net(in));
  if (nets.empty()) throw FormatError("empty checkpoint " + path.string());
  if (meta != nullptr) {
    std::ifstream side(path.string() + ".json");
    if (side) {
      try {
        side >> *meta;
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad checkpoint sidecar: " + std::string(e.what()));
      }
    } else {
      *meta = nlohmann::json::object();
    }
  }
  return nets;
}

}  // namespace tsr::nn
