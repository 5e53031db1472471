#include "tsr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "tsr/error.hpp"
#include "tsr/features.hpp"
#include "tsr/random.hpp"

namespace tsr {

namespace {
constexpr std::uint64_t kParamSalt = 0x5ea7c0de0001ULL;
constexpr std::uint64_t kCaptionSalt = 0x5ea7c0de0002ULL;
}  // namespace

void GenParams::validate() const {
  if (!(mean_level > 0.0) || !std::isfinite(mean_level)) {
    throw ParameterError("mean_level must be > 0");
  }
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ParameterError("kappa must be in [0,1]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be >= 0");
  if (!std::isfinite(trend)) throw ParameterError("trend must be finite");
  if (!(shock_prob >= 0.0 && shock_prob <= 1.0)) {
    throw ParameterError("shock_prob must be in [0,1]");
  }
  if (!(sigma_shock >= 0.0) || !std::isfinite(sigma_shock)) {
    throw ParameterError("sigma_shock must be >= 0");
  }
  if (shock_prob > 0.0 && !(sigma_shock > sigma)) {
    throw ParameterError("sigma_shock must exceed sigma when shock_prob > 0");
  }
  if (length < 2) throw ParameterError("length must be >= 2");
}

Series generate(const GenParams& p) {
  p.validate();
  Rng rng(p.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(p.shock_prob);

  Series s;
  s.values.resize(p.length);
  s.values[0] = p.mean_level;
  for (std::size_t t = 1; t < p.length; ++t) {
    const double noise = p.sigma * unit(rng);
    double shock = 0.0;
    if (coin(rng)) shock = p.sigma_shock * unit(rng);
    const double next =
        p.kappa * p.mean_level + (1.0 - p.kappa) * s.values[t - 1] + noise + p.trend + shock;
    s.values[t] = std::max(0.0, next);
  }
  return s;
}

void FilterThresholds::validate() const {
  if (!(trend_slope_coeff >= 0.0)) throw ParameterError("trend threshold must be >= 0");
  if (!(shock_step > 0.0)) throw ParameterError("shock threshold must be > 0");
  if (!(vol_low_cut > 0.0 && vol_low_cut < vol_high_cut)) {
    throw ParameterError("volatility cuts must satisfy 0 < low < high");
  }
}

double fitted_slope(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double mean_t = static_cast<double>(n - 1) / 2.0;
  double mean_x = 0.0;
  for (double v : values) mean_x += v;
  mean_x /= static_cast<double>(n);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double dt = static_cast<double>(t) - mean_t;
    num += dt * (values[t] - mean_x);
    den += dt * dt;
  }
  return num / den;
}

TrendRegime label_trend(const Series& s, double threshold) {
  const double g = fitted_slope(s.values);
  if (g > threshold) return TrendRegime::up;
  if (g < -threshold) return TrendRegime::down;
  return TrendRegime::flat;
}

ShockRegime label_shock(const Series& s, double threshold) {
  for (std::size_t t = 0; t + 1 < s.values.size(); ++t) {
    if (std::abs(s.values[t + 1] - s.values[t]) > threshold) return ShockRegime::shocked;
  }
  return ShockRegime::unshocked;
}

double volatility_score(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double running_sum = values[0];
  double total = 0.0;
  for (std::size_t t = 1; t < values.size(); ++t) {
    const double mean = running_sum / static_cast<double>(t);
    total += std::abs(values[t] - mean);
    running_sum += values[t];
  }
  return total / static_cast<double>(values.size() - 1);
}

VolRegime label_volatility(const Series& s, double low_cut, double high_cut) {
  const double score = volatility_score(s.values);
  if (score < low_cut) return VolRegime::low;
  if (score >= high_cut) return VolRegime::high;
  return VolRegime::medium;
}

void ParameterGrid::validate() const {
  if (!(jitter >= 0.0 && jitter < 1.0)) throw ParameterError("jitter must be in [0,1)");
  const double max_sigma = *std::max_element(noise_sigma.begin(), noise_sigma.end());
  for (double sigma : noise_sigma) {
    if (!(sigma >= 0.0)) throw ParameterError("grid sigma must be >= 0");
  }
  GenParams probe;
  probe.mean_level = mean_level;
  probe.kappa = kappa;
  probe.sigma = max_sigma * (1.0 + jitter);
  probe.shock_prob = *std::max_element(shock_prob.begin(), shock_prob.end());
  probe.sigma_shock = shock_sigma;
  probe.length = length;
  probe.validate();
  for (double p : shock_prob) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("grid shock_prob must be in [0,1]");
  }
}

nlohmann::json grid_to_json(const ParameterGrid& g) {
  return {{"mean_level", g.mean_level},   {"kappa", g.kappa},
          {"trend_drift", g.trend_drift}, {"noise_sigma", g.noise_sigma},
          {"shock_prob", g.shock_prob},   {"shock_sigma", g.shock_sigma},
          {"jitter", g.jitter},           {"length", g.length}};
}

ParameterGrid grid_from_json(const nlohmann::json& j) {
  ParameterGrid g;
  g.mean_level = j.value("mean_level", g.mean_level);
  g.kappa = j.value("kappa", g.kappa);
  g.trend_drift = j.value("trend_drift", g.trend_drift);
  g.noise_sigma = j.value("noise_sigma", g.noise_sigma);
  g.shock_prob = j.value("shock_prob", g.shock_prob);
  g.shock_sigma = j.value("shock_sigma", g.shock_sigma);
  g.jitter = j.value("jitter", g.jitter);
  g.length = j.value("length", g.length);
  g.validate();
  return g;
}

nlohmann::json thresholds_to_json(const FilterThresholds& t) {
  return {{"trend_slope_coeff", t.trend_slope_coeff},
          {"shock_step", t.shock_step},
          {"vol_low_cut", t.vol_low_cut},
          {"vol_high_cut", t.vol_high_cut}};
}

FilterThresholds thresholds_from_json(const nlohmann::json& j) {
  FilterThresholds t;
  t.trend_slope_coeff = j.value("trend_slope_coeff", t.trend_slope_coeff);
  t.shock_step = j.value("shock_step", t.shock_step);
  t.vol_low_cut = j.value("vol_low_cut", t.vol_low_cut);
  t.vol_high_cut = j.value("vol_high_cut", t.vol_high_cut);
  t.validate();
  return t;
}

RegimeLabels filter_labels(const Series& raw, const RegimeLabels& generated,
                           const FilterThresholds& thresholds, bool relabel_volatility) {
  const Series norm = raw.normalized ? raw : minmax_normalize(raw);
  const TrendRegime trend = label_trend(norm, thresholds.trend_threshold(norm.size()));
  const ShockRegime shock = label_shock(norm, thresholds.shock_step);
  const VolRegime vol = relabel_volatility
                            ? label_volatility(norm, thresholds.vol_low_cut, thresholds.vol_high_cut)
                            : generated.vol;
  return make_labels(trend, vol, shock);
}

std::vector<Sample> make_dataset(const DatasetConfig& config, const PhraseBank& bank) {
  if (config.n == 0) throw ParameterError("dataset size must be >= 1");
  config.grid.validate();
  config.thresholds.validate();
  bank.require_complete();

  const ParameterGrid& g = config.grid;
  std::vector<Sample> out;
  out.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    Rng param_rng(derive_seed(config.seed ^ kParamSalt, i));
    std::uniform_int_distribution<int> pick3(0, 2);
    std::uniform_int_distribution<int> pick2(0, 1);
    std::uniform_real_distribution<double> jitter(1.0 - g.jitter, 1.0 + g.jitter);
    const int trend_idx = pick3(param_rng);
    const int vol_idx = pick3(param_rng);
    const int shock_idx = pick2(param_rng);

    GenParams p;
    p.mean_level = g.mean_level;
    p.kappa = g.kappa;
    p.trend = g.trend_drift[trend_idx] * jitter(param_rng);
    p.sigma = g.noise_sigma[vol_idx] * jitter(param_rng);
    p.shock_prob = g.shock_prob[shock_idx];
    p.sigma_shock = g.shock_sigma;
    p.length = g.length;
    p.seed = derive_seed(config.seed, i);

    Sample sample;
    sample.series = generate(p);
    char id[64];
    std::snprintf(id, sizeof id, "%s-%06zu", config.id_prefix.c_str(), i);
    sample.series.id = id;

    RegimeLabels labels = make_labels(static_cast<TrendRegime>(trend_idx),
                                      static_cast<VolRegime>(vol_idx),
                                      static_cast<ShockRegime>(shock_idx));
    if (config.mode == FilterMode::filtered) {
      labels = filter_labels(sample.series, labels, config.thresholds, config.relabel_volatility);
    }
    sample.labels = labels;
    sample.caption = generate_caption(labels, bank, derive_seed(config.seed ^ kCaptionSalt, i));
    out.push_back(std::move(sample));
  }
  return out;
}

std::size_t refilter(std::vector<Sample>& samples, const FilterThresholds& thresholds,
                     bool relabel_volatility, const PhraseBank& bank, std::uint64_t seed) {
  std::size_t changed = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Sample& s = samples[i];
    if (!s.labels) throw DataError("sample '" + s.series.id + "' has no labels to filter");
    const RegimeLabels next = filter_labels(s.series, *s.labels, thresholds, relabel_volatility);
    if (next != *s.labels) {
      ++changed;
      s.labels = next;
      s.caption = generate_caption(next, bank, derive_seed(seed ^ kCaptionSalt, i));
    }
  }
  return changed;
}

Dataset make_synthetic_dataset(const DatasetConfig& config, const PhraseBank& bank,
                               std::string name) {
  Dataset d;
  d.name = std::move(name);
  d.kind = "synthetic";
  d.generator = {{"n", config.n},
                 {"seed", config.seed},
                 {"filter", config.mode == FilterMode::filtered ? "filtered" : "unfiltered"},
                 {"relabel_volatility", config.relabel_volatility},
                 {"grid", grid_to_json(config.grid)},
                 {"thresholds", thresholds_to_json(config.thresholds)}};
  d.samples = make_dataset(config, bank);
  return d;
}

}  // namespace tsr
