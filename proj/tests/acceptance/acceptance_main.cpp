// Acceptance suite: one PASS/FAIL line per primary criterion.
//
// Usage: tsr_acceptance [--phrases <augmented bank dir>] [criterion ...]
// With no criterion names every check runs. Exit status is 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tsr/aligner.hpp"
#include "tsr/baselines.hpp"
#include "tsr/encoders.hpp"
#include "tsr/error.hpp"
#include "tsr/evalharness.hpp"
#include "tsr/features.hpp"
#include "tsr/index.hpp"
#include "tsr/ingest.hpp"
#include "tsr/metrics.hpp"
#include "tsr/nn.hpp"
#include "tsr/phrase_bank.hpp"
#include "tsr/pipeline.hpp"
#include "tsr/random.hpp"
#include "tsr/synthgen.hpp"

using namespace tsr;
using nn::Matrix;
using nn::Vector;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failed;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failed.push_back(what);
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

struct Context {
  std::filesystem::path phrase_dir;
  std::filesystem::path work;
  // Models trained by the sketch benchmark check and reused by the latency check.
  std::optional<SketchModels> benchmark_models;
};

// ---------------------------------------------------------------------------

void generator_closed_forms(Context&, Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checked = 0;
  bool constant_ok = true;
  for (double kappa : {0.0, 0.01, 0.5, 1.0}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      GenParams p;
      p.mean_level = 100.0;
      p.kappa = kappa;
      p.sigma = 0.0;
      p.seed = seed;
      p.length = 30;
      for (double v : generate(p).values) constant_ok = constant_ok && v == 100.0;
      ++checked;
    }
  }
  out.require(constant_ok, "sigma=0,p=0,T=0 must stay at the mean level");

  GenParams clamp;
  clamp.mean_level = 1.0;
  clamp.kappa = 0.0;
  clamp.sigma = 0.0;
  clamp.trend = -5.0;
  clamp.length = 3;
  out.require(generate(clamp).values == std::vector<double>{1.0, 0.0, 0.0}, "clamp unroll");

  GenParams drift;
  drift.mean_level = 10.0;
  drift.kappa = 0.5;
  drift.sigma = 0.0;
  drift.trend = 1.0;
  drift.length = 4;
  out.require(generate(drift).values == std::vector<double>{10.0, 11.0, 11.5, 11.75},
              "drift unroll");

  GenParams reset;
  reset.kappa = 1.0;
  reset.sigma = 0.0;
  reset.trend = 2.0;
  reset.length = 4;
  out.require(generate(reset).values == std::vector<double>{100.0, 102.0, 102.0, 102.0},
              "full reversion unroll");

  const double t = seconds_since(t0);
  out.require(t < 1.0, "runtime < 1 s");
  out.detail << checked << " constant paths exact, clamp/drift unrolls exact, " << fmt(t, 3)
             << " s";
}

// ---------------------------------------------------------------------------

std::vector<Series> synthetic_normalized(std::size_t n, std::uint64_t seed,
                                         FilterMode mode = FilterMode::filtered) {
  DatasetConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.mode = mode;
  const auto samples = make_dataset(cfg, PhraseBank::builtin());
  std::vector<Series> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(minmax_normalize(s.series));
  return out;
}

Matrix rows_to_columns(const std::vector<std::vector<double>>& rows, std::size_t count) {
  Matrix m(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(count));
  for (std::size_t c = 0; c < count; ++c) {
    for (std::size_t r = 0; r < rows[c].size(); ++r) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
    }
  }
  return m;
}

void gradient_fidelity(Context&, Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto series = synthetic_normalized(8, 17);
  nn::GradCheckOptions opt;
  opt.probes = 40;
  double worst = 0.0;

  for (AeTarget target : {AeTarget::trend, AeTarget::vol}) {
    const auto rows = ae_training_rows(series, target);
    const Matrix batch = rows_to_columns(rows, rows.size());
    AutoencoderModel model = make_autoencoder({}, target == AeTarget::trend ? 101 : 202);
    for (auto* net : {&model.encoder, &model.decoder})
      for (auto& l : net->layers()) l.bias.setConstant(0.01);
    opt.seed = target == AeTarget::trend ? 1 : 2;
    const auto enc = nn::gradient_check(model.encoder, [&](const nn::DenseNet& e) {
      const auto g = autoencoder_gradients(AutoencoderModel{e, model.decoder}, batch);
      return std::make_pair(g.loss, g.encoder);
    }, opt);
    const auto dec = nn::gradient_check(model.decoder, [&](const nn::DenseNet& d) {
      const auto g = autoencoder_gradients(AutoencoderModel{model.encoder, d}, batch);
      return std::make_pair(g.loss, g.decoder);
    }, opt);
    const char* name = target == AeTarget::trend ? "trend" : "vol";
    out.require(enc.passed && enc.probes >= 20, std::string(name) + " encoder");
    out.require(dec.passed && dec.probes >= 20, std::string(name) + " decoder");
    worst = std::max({worst, enc.max_relative_error, dec.max_relative_error});
  }

  // Contrastive loss: central differences on random input coordinates.
  std::mt19937_64 rng(5);
  std::size_t contrastive_probes = 0;
  double worst_contrastive = 0.0;
  for (auto scaling : {TargetScaling::averaged, TargetScaling::literal}) {
    for (double tau : {0.05, 0.1, 1.0}) {
      Matrix t(8, 16), v(8, 16);
      for (Eigen::Index i = 0; i < 8; ++i) {
        const auto a = oracle::random_unit(16, rng);
        const auto b = oracle::random_unit(16, rng);
        for (Eigen::Index j = 0; j < 16; ++j) {
          t(i, j) = a[static_cast<std::size_t>(j)];
          v(i, j) = b[static_cast<std::size_t>(j)];
        }
      }
      const auto r = contrastive_loss(t, v, tau, scaling);
      std::uniform_int_distribution<Eigen::Index> row(0, 7), col(0, 15);
      for (int probe = 0; probe < 20; ++probe) {
        const bool text_side = probe % 2 == 0;
        const Eigen::Index i = row(rng), j = col(rng);
        const double h = 1e-6;
        Matrix tp = t, tm = t, vp = v, vm = v;
        (text_side ? tp : vp)(i, j) += h;
        (text_side ? tm : vm)(i, j) -= h;
        const double num = (contrastive_loss(tp, vp, tau, scaling).loss -
                            contrastive_loss(tm, vm, tau, scaling).loss) / (2.0 * h);
        const double ana = text_side ? r.grad_text(i, j) : r.grad_series(i, j);
        const double rel =
            std::fabs(num - ana) / std::max({std::fabs(num), std::fabs(ana), 1e-7});
        worst_contrastive = std::max(worst_contrastive, rel);
        ++contrastive_probes;
      }
    }
  }
  out.require(worst_contrastive < 1e-4, "contrastive gradient");
  const double t = seconds_since(t0);
  out.require(t < 30.0, "runtime < 30 s");
  out.detail << "AE max rel err " << fmt(worst) << " (4 nets x 40 probes), contrastive max rel err "
             << fmt(worst_contrastive) << " (" << contrastive_probes << " probes), " << fmt(t, 3)
             << " s";
}

// ---------------------------------------------------------------------------

void ae_training(Context&, Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto series = synthetic_normalized(500, 23);
  nn::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 3;
  for (AeTarget target : {AeTarget::trend, AeTarget::vol}) {
    const auto rows = ae_training_rows(series, target);
    const auto r = train_autoencoder(rows, cfg);
    const auto& h = r.history;
    const double final_train = h.train_loss.back();
    const double held_out = h.validation_loss.back();
    const char* name = target == AeTarget::trend ? "trend" : "vol";
    out.require(final_train < 0.25 * h.initial_train_loss, std::string(name) + " train ratio");
    out.require(held_out < 4.0 * final_train, std::string(name) + " held-out bound");
    out.detail << name << ": initial " << fmt(h.initial_train_loss) << " -> final "
               << fmt(final_train) << " (ratio " << fmt(final_train / h.initial_train_loss)
               << "), held-out " << fmt(held_out) << " (" << fmt(held_out / final_train)
               << "x train); ";
  }
  const double t = seconds_since(t0);
  out.require(t < 300.0, "runtime < 5 min");
  out.detail << fmt(t, 3) << " s";
}

// ---------------------------------------------------------------------------

SketchModels quick_models(std::span<const Series> train, std::size_t epochs, std::uint64_t seed) {
  nn::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = seed;
  SketchModels m;
  m.trend = train_autoencoder(ae_training_rows(train, AeTarget::trend), cfg).model;
  cfg.seed = seed + 1;
  m.vol = train_autoencoder(ae_training_rows(train, AeTarget::vol), cfg).model;
  return m;
}

void membership(Context&, Outcome& out) {
  const auto series = synthetic_normalized(1000, 31);
  const SketchModels models = quick_models(std::span(series).first(300), 20, 7);
  const auto db = RawDatabase::from_series(series, 30);
  const auto index = build_sketch_index(models, series);
  std::size_t bf_ok = 0, ae_ok = 0;
  double worst_cos = 1.0;
  for (std::size_t i = 0; i < 1000; i += 20) {
    const Series& q = series[i];
    const auto bf = bf_search(db, q, 1);
    if (bf.hits[0].id == q.id && bf.hits[0].score == 0.0) ++bf_ok;
    const Vector e = combined_embedding(models, q);
    const auto r = index.query(std::span<const double>(e.data(), 32), 1);
    worst_cos = std::min(worst_cos, r.hits[0].score);
    if (r.hits[0].id == q.id && r.hits[0].score >= 1.0 - 1e-6) ++ae_ok;
  }
  out.require(bf_ok == 50, "bf distance 0");
  out.require(ae_ok == 50, "ae top-1 cosine");
  out.detail << "bf " << bf_ok << "/50 at distance 0, ae " << ae_ok
             << "/50 top-1, min cosine 1-" << fmt(1.0 - worst_cos);
}

// ---------------------------------------------------------------------------

double naive_l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<std::string> ids_of(const QueryResult& r) {
  std::vector<std::string> ids;
  for (const auto& h : r.hits) ids.push_back(h.id);
  return ids;
}

std::vector<std::string> ids_of(const std::vector<std::pair<std::string, double>>& r) {
  std::vector<std::string> ids;
  for (const auto& h : r) ids.push_back(h.first);
  return ids;
}

void oracle_exactness(Context&, Outcome& out) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_series = [&](const std::string& id) {
    Series s;
    s.id = id;
    s.values.resize(30);
    for (auto& v : s.values) v = u(rng);
    return minmax_normalize(s);
  };
  std::vector<Series> db_series;
  for (int i = 0; i < 200; ++i) db_series.push_back(random_series("db" + std::to_string(i)));
  const auto db = RawDatabase::from_series(db_series, 30);
  std::vector<std::vector<double>> vols;
  for (const auto& s : db_series) vols.push_back(oracle::window_std(s.values, 4));

  VectorIndex index(32);
  std::vector<std::vector<float>> stored;
  for (int i = 0; i < 200; ++i) {
    const auto e = oracle::random_unit(32, rng);
    index.add("v" + std::to_string(i), e);
    stored.emplace_back(e.begin(), e.end());
  }

  std::size_t bf_ok = 0, avg_ok = 0, index_ok = 0;
  for (int q = 0; q < 100; ++q) {
    const Series query = random_series("q");
    const auto qvol = oracle::window_std(query.values, 4);
    const std::size_t k = 1 + static_cast<std::size_t>(q % 10);
    std::vector<std::pair<std::string, double>> trend, avg, cos;
    for (std::size_t i = 0; i < 200; ++i) {
      const double d = naive_l2(query.values, db_series[i].values);
      trend.emplace_back(db_series[i].id, d);
      avg.emplace_back(db_series[i].id, (d + naive_l2(qvol, vols[i])) / 2.0);
    }
    const auto qe = oracle::random_unit(32, rng);
    for (std::size_t i = 0; i < 200; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < 32; ++d) s += static_cast<double>(stored[i][d]) * qe[d];
      cos.emplace_back("v" + std::to_string(i), s);
    }
    if (ids_of(bf_search(db, query, k)) == ids_of(oracle::full_sort(trend, false, k))) ++bf_ok;
    if (ids_of(bf_avg_search(db, query, volatility_series(query), k)) ==
        ids_of(oracle::full_sort(avg, false, k)))
      ++avg_ok;
    if (ids_of(index.query(qe, k)) == ids_of(oracle::full_sort(cos, true, k))) ++index_ok;
  }
  out.require(bf_ok == 100, "bf ranks");
  out.require(avg_ok == 100, "bf_avg ranks");
  out.require(index_ok == 100, "index ranks");
  out.detail << "exact rank equality over 100 queries, N=200: bf " << bf_ok << ", bf_avg "
             << avg_ok << ", index " << index_ok;
}

// ---------------------------------------------------------------------------

// Three simulated daily price histories windowed at 30 / 5: 505 + 505 + 506 = 1516 traces.
std::vector<Series> benchmark_traces() {
  const std::array<std::size_t, 3> lengths{2550, 2550, 2555};
  const std::array<double, 3> sigma{1.0, 2.0, 0.6};
  const std::array<double, 3> drift{0.01, -0.005, 0.02};
  std::vector<Series> traces;
  for (std::size_t t = 0; t < 3; ++t) {
    GenParams p;
    p.mean_level = 100.0;
    p.kappa = 0.005;
    p.sigma = sigma[t];
    p.trend = drift[t];
    p.shock_prob = 0.01;
    p.sigma_shock = 6.0 * sigma[t];
    p.length = lengths[t];
    p.seed = 1000 + t;
    const Series path = generate(p);
    PriceTable table;
    table.ticker = "SIM" + std::to_string(t);
    table.closes = path.values;
    for (auto& w : window_series(table, WindowSpec{30, 5})) traces.push_back(minmax_normalize(w));
  }
  return traces;
}

void sketch_benchmark(Context& ctx, Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto traces = benchmark_traces();
  out.require(traces.size() == 1516, "1516 traces");

  std::vector<std::size_t> order(traces.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(77);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Series> test, train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < 302 ? test : train).push_back(traces[order[i]]);
  }

  const SketchModels models = quick_models(train, 150, 11);
  const auto db = RawDatabase::from_series(traces, 30);
  const auto ae_index = build_sketch_index(models, traces);
  const auto pca = fit_pca(db, 16);
  const auto pca_index = build_pca_index(pca, db);

  ExperimentConfig cfg;
  cfg.seed = 2024;
  const EvalInputs inputs{test, &db, &models, &ae_index, &pca, &pca_index};
  const auto report = run_experiment(cfg, inputs);

  auto find = [&](std::size_t row, Method m) -> const MethodSummary& {
    for (const auto& s : report.methods) {
      if (s.row == cfg.rows[row] && s.method == m) return s;
    }
    throw std::runtime_error("missing summary");
  };
  bool a = true, b = true;
  for (std::size_t r = 0; r < cfg.rows.size(); ++r) {
    const auto& bf = find(r, Method::bf);
    for (Method m : {Method::bf_avg, Method::pca16, Method::ae}) {
      a = a && bf.trend_l2 <= find(r, m).trend_l2;
    }
    b = b && find(r, Method::bf_avg).vol_mape <= bf.vol_mape;
  }
  const auto& ae = find(0, Method::ae);
  out.require(a, "(a) bf trend-L2 minimal");
  out.require(b, "(b) bf_avg Vol-MAPE <= bf");
  out.require(ae.trend_corr >= 0.90, "(c) AE TS-CORR >= 0.90");
  out.require(ae.vol_corr >= 0.70, "(c) AE Vol-CORR >= 0.70");
  const double t = seconds_since(t0);
  out.require(t < 600.0, "runtime < 10 min");

  out.detail << "db " << db.size() << ", queries " << test.size() << "; AE row 1 TS-CORR "
             << fmt(ae.trend_corr) << " Vol-CORR " << fmt(ae.vol_corr) << "; per row bf/bf_avg "
             << "Vol-MAPE:";
  for (std::size_t r = 0; r < cfg.rows.size(); ++r) {
    out.detail << " " << fmt(find(r, Method::bf).vol_mape, 3) << "/"
               << fmt(find(r, Method::bf_avg).vol_mape, 3);
  }
  out.detail << "; " << fmt(t, 3) << " s";
  std::cout << report_to_markdown(report);
  ctx.benchmark_models = models;
}

// ---------------------------------------------------------------------------

void latency(Context& ctx, Outcome& out) {
  constexpr std::size_t kN = 100000;
  if (!ctx.benchmark_models) {
    const auto train = synthetic_normalized(1000, 51);
    ctx.benchmark_models = quick_models(train, 30, 13);
  }
  const SketchModels& models = *ctx.benchmark_models;
  std::vector<Series> series;
  series.reserve(kN);
  for (std::size_t i = 0; i < kN; ++i) {
    GenParams p;
    p.kappa = 0.01;
    p.sigma = 0.3 + static_cast<double>(i % 7) * 0.4;
    p.trend = static_cast<double>(i % 5) * 0.3 - 0.6;
    p.shock_prob = i % 3 == 0 ? 0.05 : 0.0;
    p.sigma_shock = 12.0;
    p.seed = derive_seed(61, i);
    Series s = minmax_normalize(generate(p));
    char id[32];
    std::snprintf(id, sizeof id, "n%06zu", i);
    s.id = id;
    series.push_back(std::move(s));
  }
  const auto db = RawDatabase::from_series(series, 30);
  const auto index = build_sketch_index(models, series);

  ExperimentConfig cfg;
  cfg.rows = {{0.05, 0, 1}};
  cfg.query_count = 200;
  cfg.methods = {Method::bf, Method::ae};
  const EvalInputs inputs{std::span(series).first(200), &db, &models, &index, nullptr, nullptr};
  const auto report = run_experiment(cfg, inputs);
  const double bf = report.methods[0].latency_mean;
  const double ae = report.methods[1].latency_mean;
  out.require(ae < bf, "AE mean latency < bf mean latency");
  out.detail << "N=" << kN << ": ae " << fmt(ae) << " s (std " << fmt(report.methods[1].latency_std)
             << "), bf " << fmt(bf) << " s (std " << fmt(report.methods[0].latency_std)
             << "), ratio ae/bf " << fmt(ae / bf, 3);
}

// ---------------------------------------------------------------------------

struct TextRun {
  double in = 0.0;
  double out = 0.0;
  double diversity = 0.0;
  double random = 0.0;
};

std::unordered_map<std::string, RegimeLabels> label_map(const std::vector<Sample>& samples) {
  std::unordered_map<std::string, RegimeLabels> m;
  for (const auto& s : samples) m.emplace(s.series.id, *s.labels);
  return m;
}

TextRun run_text(const std::vector<Sample>& train, const std::vector<Sample>& eval_set,
                 const SketchModels& models, std::span<const TextQuery> in_queries,
                 std::span<const TextQuery> out_queries, std::uint64_t seed) {
  std::vector<std::string> captions;
  std::vector<Series> normalized;
  for (const auto& s : train) {
    captions.push_back(*s.caption);
    normalized.push_back(minmax_normalize(s.series));
  }
  AlignerConfig cfg;
  cfg.train.epochs = 40;
  cfg.train.batch_size = 64;
  cfg.train.learning_rate = 1e-3;
  cfg.train.seed = seed;
  const auto trained = train_aligner(captions, normalized, models, cfg);

  std::vector<Series> eval_series;
  for (const auto& s : eval_set) eval_series.push_back(minmax_normalize(s.series));
  const auto index = build_text_index(trained.aligner, models, eval_series);
  const auto labels = label_map(eval_set);
  const auto in = evaluate_text(trained.aligner, index, labels, in_queries, 9);
  const auto oos = evaluate_text(trained.aligner, index, labels, out_queries, 9);
  return {in.precision, oos.precision, in.diversity, in.random_precision};
}

void text_retrieval(Context& ctx, Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t kSamples = 5000;
  constexpr double kRegimes = 10.0;  // 3 trend + 3 volatility + 2 shock + 2 liquidity
  const PhraseBank bank = PhraseBank::load_dir(ctx.phrase_dir);
  const auto [in_bank, held_bank] = bank.split_holdout(3);
  const auto in_queries = text_queries(in_bank);
  const auto out_queries = text_queries(held_bank);

  // Frozen sketch encoders shared by every aligner run.
  DatasetConfig base;
  base.n = kSamples;
  base.seed = 900;
  std::vector<Series> ae_train;
  for (const auto& s : make_dataset(base, in_bank)) ae_train.push_back(minmax_normalize(s.series));
  const SketchModels models = quick_models(ae_train, 30, 19);

  std::vector<TextRun> filtered, unfiltered;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    DatasetConfig cfg;
    cfg.n = kSamples;
    cfg.seed = seed;
    cfg.mode = FilterMode::filtered;
    const auto f = make_dataset(cfg, in_bank);
    cfg.mode = FilterMode::unfiltered;
    const auto u = make_dataset(cfg, in_bank);
    // Both models are scored against the filtered labels of the same series.
    filtered.push_back(run_text(f, f, models, in_queries, out_queries, seed));
    unfiltered.push_back(run_text(u, f, models, in_queries, out_queries, seed));
  }

  auto mean = [](const std::vector<TextRun>& runs, double TextRun::*field) {
    double s = 0.0;
    for (const auto& r : runs) s += r.*field;
    return s / static_cast<double>(runs.size());
  };
  const double in = mean(filtered, &TextRun::in);
  const double oos = mean(filtered, &TextRun::out);
  const double chance = 1.0 / kRegimes;
  bool ordered = true;
  for (std::size_t i = 0; i < filtered.size(); ++i) ordered = ordered && filtered[i].in >= unfiltered[i].in;

  out.require(in >= 0.80, "in-sample precision@9 >= 0.80");
  out.require(oos >= 0.60, "out-of-sample precision@9 >= 0.60");
  out.require(in >= 3.0 * chance && oos >= 3.0 * chance, ">= 3x 1/R");
  out.require(ordered, "filtered >= unfiltered on every seed");
  const double t = seconds_since(t0);
  out.require(t < 900.0, "runtime < 15 min");

  out.detail << "filtered in " << fmt(in, 3) << " out " << fmt(oos, 3) << " (1/R = " << chance
             << ", empirical chance " << fmt(mean(filtered, &TextRun::random), 3)
             << ", diversity " << fmt(mean(filtered, &TextRun::diversity), 3)
             << "); per seed filtered/unfiltered in-sample:";
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    out.detail << " " << fmt(filtered[i].in, 3) << "/" << fmt(unfiltered[i].in, 3);
  }
  out.detail << "; " << fmt(t, 3) << " s";
}

// ---------------------------------------------------------------------------

void metric_examples(Context&, Outcome& out) {
  const std::vector<double> r{1.1, 1.8}, q{1.0, 2.0};
  out.require(std::fabs(mape(r, q).value - 0.1) < 1e-15, "mape hand example");
  out.require(mape(q, q).value == 0.0, "mape identical");

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  bool mask_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      b[i] = u(rng) < 0.25 ? 0.0 : u(rng);
      a[i] = u(rng);
    }
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      if (std::fabs(b[i]) >= 1e-8) {
        sum += std::fabs(a[i] - b[i]) / std::fabs(b[i]);
        ++cnt;
      }
    }
    mask_ok = mask_ok && cnt > 0 && std::fabs(mape(a, b).value - sum / static_cast<double>(cnt)) < 1e-12;
  }
  out.require(mask_ok, "mape mask oracle");

  const std::vector<double> x{0.1, 0.5, 0.2, 0.9}, neg{-0.1, -0.5, -0.2, -0.9};
  out.require(std::fabs(pearson_corr(x, x).value - 1.0) < 1e-15, "corr a=b");
  out.require(std::fabs(pearson_corr(x, neg).value + 1.0) < 1e-15, "corr a=-b");
  bool corr_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      a[i] = n(rng);
      b[i] = a[i] * 0.3 + n(rng);
    }
    const double ma = oracle::mean(a), mb = oracle::mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    corr_ok = corr_ok && std::fabs(pearson_corr(a, b).value - sab / std::sqrt(saa * sbb)) < 1e-12;
  }
  out.require(corr_ok, "corr textbook oracle");

  const std::vector<std::vector<int>> all{{1, 1, 1}}, none{{0, 0, 0}};
  const std::vector<int> q1{1};
  out.require(precision_at_k(all, q1, 3) == 1.0, "precision all match");
  out.require(precision_at_k(none, q1, 3) == 0.0, "precision none match");
  const int R = 4;
  std::uniform_int_distribution<int> pick(0, R - 1);
  std::vector<std::vector<int>> lists(1000, std::vector<int>(9));
  std::vector<int> truth(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    truth[i] = pick(rng);
    for (auto& v : lists[i]) v = pick(rng);
  }
  const double random_p = precision_at_k(lists, truth, 9);
  out.require(std::fabs(random_p - 1.0 / R) <= 0.05, "precision random ~ 1/R");

  const std::vector<std::vector<std::string>> same{{"a"}, {"a"}, {"a"}, {"a"}},
      distinct{{"a", "b"}, {"c", "d"}}, overlap{{"a", "b", "c"}, {"b", "c", "d"}};
  out.require(std::fabs(diversity(same) - 0.25) < 1e-15, "diversity 1/Q");
  out.require(diversity(distinct) == 1.0, "diversity distinct");
  out.require(std::fabs(diversity(overlap) - 4.0 / 6.0) < 1e-15, "diversity overlap");
  out.detail << "mape, pearson, precision (random " << fmt(random_p, 3) << " vs 1/" << R
             << "), diversity examples";
}

// ---------------------------------------------------------------------------

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << b;
}

template <class Load>
bool rejects_corruption(const std::filesystem::path& path, Load load) {
  const std::string good = read_bytes(path);
  bool ok = true;
  auto expect_reject = [&](const std::string& bytes) {
    write_bytes(path, bytes);
    try {
      load();
      ok = false;
    } catch (const FormatError&) {
    }
  };
  std::string flipped = good;
  flipped[good.size() / 2] = static_cast<char>(flipped[good.size() / 2] ^ 0x20);
  expect_reject(flipped);
  expect_reject(good.substr(0, good.size() - 9));
  std::string magic = good;
  magic[0] = static_cast<char>(magic[0] ^ 0x7f);
  expect_reject(magic);
  write_bytes(path, good);
  return ok;
}

void persistence(Context& ctx, Outcome& out) {
  const auto dir = ctx.work / "persistence";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto series = synthetic_normalized(400, 71);
  const SketchModels models = quick_models(std::span(series).first(200), 5, 5);
  const auto index = build_sketch_index(models, series);

  save_autoencoder(dir / "trend.tsnn", models.trend);
  save_autoencoder(dir / "vol.tsnn", models.vol, {{"vol_half_window", 4}});
  save_index(index, dir / "sketch.tslx");
  const SketchModels models2 = load_sketch_models(dir / "trend.tsnn", dir / "vol.tsnn");
  const VectorIndex index2 = load_index(dir / "sketch.tslx");

  std::size_t identical = 0;
  Rng rng(9);
  for (std::size_t i = 0; i < 100; ++i) {
    const Series q = add_gaussian_noise(series[i * 3], 0.05, derive_seed(9, i));
    const Series qn = minmax_normalize(q);
    const Vector e1 = combined_embedding(models, qn);
    const Vector e2 = combined_embedding(models2, qn);
    const auto a = index.query(std::span<const double>(e1.data(), 32), 10);
    const auto b = index2.query(std::span<const double>(e2.data(), 32), 10);
    bool same = e1 == e2 && a.hits.size() == b.hits.size();
    for (std::size_t h = 0; same && h < a.hits.size(); ++h) {
      same = a.hits[h].id == b.hits[h].id && a.hits[h].score == b.hits[h].score;
    }
    identical += same ? 1 : 0;
  }
  out.require(identical == 100, "ranking-identical after reload");

  std::vector<std::string> captions;
  for (std::size_t i = 0; i < series.size(); ++i) {
    captions.push_back(i % 2 ? "rising prices calm" : "falling prices wild swings");
  }
  AlignerConfig acfg;
  acfg.train.epochs = 2;
  acfg.tau_grid = {0.1};
  const auto aligner = train_aligner(captions, series, models, acfg).aligner;
  save_aligner(dir / "aligner.tsnn", aligner);
  const Aligner aligner2 = load_aligner(dir / "aligner.tsnn");
  out.require(embed_text_query(aligner, "rising calm") == embed_text_query(aligner2, "rising calm"),
              "aligner round-trip");

  bool rejected = rejects_corruption(dir / "sketch.tslx", [&] { load_index(dir / "sketch.tslx"); });
  rejected = rejects_corruption(dir / "trend.tsnn", [&] { load_autoencoder(dir / "trend.tsnn"); }) &&
             rejected;
  rejected = rejects_corruption(dir / "aligner.tsnn", [&] { load_aligner(dir / "aligner.tsnn"); }) &&
             rejected;
  out.require(rejected, "corrupted files rejected");
  out.detail << identical << "/100 queries ranking-identical after reload; bit flip, truncation "
             << "and bad magic rejected for index, AE and aligner files";
}

struct Criterion {
  const char* name;
  std::function<void(Context&, Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.phrase_dir = std::filesystem::path(TSR_ACCEPTANCE_PHRASES);
  ctx.work = std::filesystem::temp_directory_path() / "tsr_acceptance";
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--phrases" && i + 1 < argc) {
      ctx.phrase_dir = argv[++i];
    } else {
      only.insert(arg);
    }
  }

  const std::vector<Criterion> criteria{
      {"generator_closed_forms", generator_closed_forms},
      {"gradient_fidelity", gradient_fidelity},
      {"ae_training", ae_training},
      {"membership_round_trip", membership},
      {"oracle_exactness", oracle_exactness},
      {"sketch_benchmark_structure", sketch_benchmark},
      {"latency_scaling", latency},
      {"text_retrieval", text_retrieval},
      {"metric_examples", metric_examples},
      {"persistence", persistence},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only.count(c.name) == 0) continue;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(ctx, out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    failures += out.pass ? 0 : 1;
    std::cout << (out.pass ? "PASS " : "FAIL ") << c.name << " (" << fmt(seconds_since(t0), 3)
              << " s): " << out.detail.str();
    for (const auto& f : out.failed) std::cout << " [failed: " << f << "]";
    std::cout << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
