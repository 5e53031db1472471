#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsr/aligner.hpp"
#include "tsr/baselines.hpp"
#include "tsr/dataset.hpp"
#include "tsr/encoders.hpp"
#include "tsr/error.hpp"
#include "tsr/evalharness.hpp"
#include "tsr/features.hpp"
#include "tsr/index.hpp"
#include "tsr/ingest.hpp"
#include "tsr/phrase_bank.hpp"
#include "tsr/pipeline.hpp"
#include "tsr/service.hpp"
#include "tsr/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tsr::cli {

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + ": not valid JSON");
  return j;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

PhraseBank bank_from(const std::string& dir) {
  if (dir.empty()) return PhraseBank::builtin();
  PhraseBank bank = PhraseBank::load_dir(dir);
  bank.require_complete();
  return bank;
}

// ---- gen ----

struct GenOptions {
  std::size_t n = 0;
  std::string filter = "filtered";
  std::string phrase_dir;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  std::string name = "synthetic";
  bool relabel_vol = false;
};

void run_gen(const GenOptions& o) {
  DatasetConfig cfg;
  if (!o.config.empty()) {
    const json j = read_json_file(o.config);
    try {
      if (j.contains("grid")) cfg.grid = grid_from_json(j.at("grid"));
      if (j.contains("thresholds")) cfg.thresholds = thresholds_from_json(j.at("thresholds"));
      cfg.relabel_volatility = j.value("relabel_volatility", cfg.relabel_volatility);
    } catch (const json::exception& e) {
      throw ConfigError(o.config + ": " + e.what());
    }
  }
  cfg.n = o.n;
  cfg.seed = o.seed;
  cfg.mode = o.filter == "filtered" ? FilterMode::filtered : FilterMode::unfiltered;
  if (o.relabel_vol) cfg.relabel_volatility = true;
  const PhraseBank bank = bank_from(o.phrase_dir);
  const Dataset d = make_synthetic_dataset(cfg, bank, o.name);
  ensure_parent(o.out);
  save_manifest(d, o.out);
  std::cout << "wrote " << d.samples.size() << " samples to " << o.out << '\n';
}

// ---- ingest ----

struct IngestOptions {
  std::vector<std::string> csv;
  std::size_t window = 30;
  std::size_t stride = 5;
  std::string out;
  std::string date_column = "date";
  std::string close_column = "close";
  std::string name = "historical";
};

void run_ingest(const IngestOptions& o) {
  WindowSpec spec{o.window, o.stride};
  spec.validate();
  Dataset d;
  d.name = o.name;
  d.kind = "historical";
  d.generator = nullptr;
  for (const auto& path : o.csv) {
    CsvColumns cols;
    cols.date = o.date_column;
    cols.close = o.close_column;
    const PriceTable table = load_csv(path, cols);
    for (auto& s : window_series(table, spec)) d.samples.push_back(Sample{std::move(s), {}, {}});
  }
  (void)d.id_map();
  ensure_parent(o.out);
  save_manifest(d, o.out);
  std::cout << "wrote " << d.samples.size() << " windows to " << o.out << '\n';
}

// ---- train-ae ----

struct TrainAeOptions {
  std::string dataset;
  std::string target;
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  std::size_t half_window = 4;
  std::string out;
};

void run_train_ae(const TrainAeOptions& o) {
  const AeTarget target = parse_ae_target(o.target);
  nn::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  tc.validation_fraction = o.validation_fraction;
  tc.validate();
  const VolConfig vol{o.half_window};
  const Dataset d = load_manifest(o.dataset);
  const auto normalized = normalized_series(d);
  if (normalized.empty()) throw DataError("dataset is empty");
  vol.validate(normalized.front().size());
  const auto rows = ae_training_rows(normalized, target, vol);
  AeArchitecture arch;
  arch.input_size = rows.front().size();
  const AeTrainResult r = train_autoencoder(rows, tc, arch);
  json meta{{"target", o.target},
            {"dataset", d.name},
            {"train", nn::train_config_to_json(tc)},
            {"vol_half_window", vol.half_window},
            {"initial_train_loss", r.history.initial_train_loss},
            {"final_train_loss", r.history.train_loss.empty() ? r.history.initial_train_loss
                                                               : r.history.train_loss.back()},
            {"final_validation_loss",
             r.history.validation_loss.empty() ? json(nullptr) : json(r.history.validation_loss.back())}};
  ensure_parent(o.out);
  save_autoencoder(o.out, r.model, meta);
  std::cout << "trained " << o.target << " autoencoder on " << r.history.train_size
            << " rows: train mse " << r.history.initial_train_loss << " -> "
            << meta["final_train_loss"].get<double>() << "; wrote " << o.out << '\n';
}

// ---- train-align ----

struct TrainAlignOptions {
  std::string dataset;
  std::string ae_trend;
  std::string ae_vol;
  std::string out;
  std::size_t epochs = 60;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  std::vector<double> tau{0.05, 0.1, 0.5, 1.0};
  std::size_t dim = 64;
  bool literal = false;
};

void run_train_align(const TrainAlignOptions& o) {
  const Dataset d = load_manifest(o.dataset);
  const SketchModels models = load_sketch_models(o.ae_trend, o.ae_vol);
  std::vector<std::string> captions;
  for (const auto& s : d.samples) {
    if (!s.caption) throw DataError("sample '" + s.series.id + "' has no caption");
    captions.push_back(*s.caption);
  }
  const auto normalized = normalized_series(d);
  AlignerConfig cfg;
  cfg.train.epochs = o.epochs;
  cfg.train.learning_rate = o.lr;
  cfg.train.batch_size = o.batch;
  cfg.train.seed = o.seed;
  cfg.tau_grid = o.tau;
  cfg.embedding_dim = o.dim;
  cfg.scaling = o.literal ? TargetScaling::literal : TargetScaling::averaged;
  const auto r = train_aligner(captions, normalized, models, cfg);
  if (r.metrics.degenerate_corpus) {
    std::cerr << "warning: every caption is identical; the aligner cannot separate regimes\n";
  }
  json meta{{"dataset", d.name},
            {"train", nn::train_config_to_json(cfg.train)},
            {"tau_grid", r.metrics.tau_grid},
            {"validation_loss", r.metrics.validation_loss},
            {"mean_diagonal_similarity", r.metrics.mean_diagonal_similarity},
            {"mean_off_diagonal_similarity", r.metrics.mean_off_diagonal_similarity}};
  ensure_parent(o.out);
  save_aligner(o.out, r.aligner, meta);
  std::cout << "trained aligner (tau " << r.aligner.tau << ", vocabulary "
            << r.aligner.vocab.size() << "); wrote " << o.out << '\n';
}

// ---- build-index ----

struct BuildIndexOptions {
  std::string dataset;
  std::vector<std::string> models;
  std::string mode = "sketch";
  std::string out;
};

void run_build_index(const BuildIndexOptions& o) {
  const bool text = o.mode == "text";
  if (o.models.size() != (text ? 3u : 2u)) {
    throw CLI::ValidationError("--models", text ? "text mode needs: ae_trend ae_vol aligner"
                                                : "sketch mode needs: ae_trend ae_vol");
  }
  const Dataset d = load_manifest(o.dataset);
  (void)d.id_map();
  const SketchModels models = load_sketch_models(o.models[0], o.models[1]);
  const auto normalized = normalized_series(d);
  const VectorIndex index = text ? build_text_index(load_aligner(o.models[2]), models, normalized)
                                 : build_sketch_index(models, normalized);
  ensure_parent(o.out);
  save_index(index, o.out);
  std::cout << "indexed " << index.size() << " series (dim " << index.dim() << ") to " << o.out
            << '\n';
}

// ---- query ----

struct QueryOptions {
  std::string index;
  std::vector<std::string> models;
  std::string dataset;
  std::string sketch_file;
  std::string text;
  std::size_t k = 10;
  bool json_output = false;
};

std::vector<double> read_sketch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string content = buf.str();
  const auto first = content.find_first_not_of(" \t\r\n");
  std::vector<double> points;
  if (first != std::string::npos && content[first] == '[') {
    const json j = json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw FormatError(path + ": expected a JSON array");
    for (const auto& v : j) {
      if (!v.is_number()) throw FormatError(path + ": sketch values must be numbers");
      points.push_back(v.get<double>());
    }
    return points;
  }
  for (char& c : content) {
    if (c == ',' || c == ';') c = ' ';
  }
  std::istringstream tokens(content);
  std::string tok;
  while (tokens >> tok) {
    try {
      std::size_t used = 0;
      points.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw FormatError(path + ": '" + tok + "' is not a number");
    }
  }
  return points;
}

void run_query(const QueryOptions& o) {
  const bool text = !o.text.empty();
  if (o.models.size() != (text ? 3u : 2u)) {
    throw CLI::ValidationError("--models", text ? "text queries need: ae_trend ae_vol aligner"
                                                : "sketch queries need: ae_trend ae_vol");
  }
  const VectorIndex index = load_index(o.index);
  const SketchModels models = load_sketch_models(o.models[0], o.models[1]);
  nn::Vector e;
  json query_echo;
  if (text) {
    const Aligner aligner = load_aligner(o.models[2]);
    e = embed_text_query(aligner, o.text);
    query_echo = o.text;
  } else {
    const Series q = sketch_to_query(read_sketch_file(o.sketch_file), models.input_size());
    e = combined_embedding(models, q);
    query_echo = q.values;
  }
  const QueryResult r =
      index.query(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), o.k);

  std::optional<Dataset> d;
  std::unordered_map<std::string, std::size_t> pos;
  if (!o.dataset.empty()) {
    d = load_manifest(o.dataset);
    pos = d->id_map();
  }
  json results = json::array();
  for (const auto& h : r.hits) {
    json item{{"id", h.id}, {"score", h.score}};
    if (d && pos.count(h.id)) {
      const Sample& s = d->samples[pos.at(h.id)];
      item["series"] = s.series.values;
      if (s.labels) item["labels"] = labels_to_json(*s.labels);
      if (s.caption) item["caption"] = *s.caption;
    }
    results.push_back(item);
  }
  if (o.json_output) {
    std::cout << json{{"query", query_echo}, {"k", o.k}, {"results", results}}.dump() << '\n';
    return;
  }
  std::printf("%-4s %-24s %10s  %s\n", "rank", "id", "score", "caption");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& item = results[i];
    std::printf("%-4zu %-24s %10.6f  %s\n", i + 1, item["id"].get<std::string>().c_str(),
                item["score"].get<double>(), item.value("caption", std::string()).c_str());
  }
}

// ---- eval ----

std::string artifact(const ExperimentConfig& c, const char* key, bool required) {
  if (c.artifacts.contains(key) && c.artifacts.at(key).is_string()) {
    return c.artifacts.at(key).get<std::string>();
  }
  if (required) throw ConfigError(std::string("experiment artifacts need '") + key + "'");
  return {};
}

bool wants(const ExperimentConfig& c, Method m) {
  return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end();
}

void run_eval(const std::string& config_path) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const std::string out_dir = cfg.artifacts.value("output_dir", std::string("eval_out"));
  const bool need_models = wants(cfg, Method::ae) || cfg.text_eval;

  std::optional<SketchModels> models;
  if (need_models) {
    models = load_sketch_models(artifact(cfg, "ae_trend", true), artifact(cfg, "ae_vol", true));
  }
  VolConfig vol = models ? models->vol_config : VolConfig{};
  if (cfg.artifacts.contains("vol_half_window")) {
    vol.half_window = cfg.artifacts.at("vol_half_window").get<std::size_t>();
  }

  EvalReport report;
  std::vector<ExperimentRow> rows = cfg.rows;
  if (!cfg.methods.empty()) {
    const Dataset db_set = load_manifest(artifact(cfg, "database", true));
    const Dataset test_set = load_manifest(artifact(cfg, "test_set", true));
    const auto db_series = normalized_series(db_set);
    const auto test_series = normalized_series(test_set);
    if (db_series.empty()) throw DataError("database is empty");
    const RawDatabase db = RawDatabase::from_series(db_series, db_series.front().size(), vol);

    EvalInputs in;
    in.test = test_series;
    in.db = &db;
    VectorIndex ae_index;
    if (wants(cfg, Method::ae)) {
      ae_index = build_sketch_index(*models, db_series);
      in.models = &*models;
      in.ae_index = &ae_index;
    }
    PcaModel pca;
    VectorIndex pca_index;
    if (wants(cfg, Method::pca16)) {
      pca = fit_pca(db, cfg.pca_components);
      pca_index = build_pca_index(pca, db);
      in.pca = &pca;
      in.pca_index = &pca_index;
    }
    report = run_experiment(cfg, in);
  }

  if (cfg.text_eval) {
    const Dataset text_set = load_manifest(artifact(cfg, "text_dataset", true));
    std::unordered_map<std::string, RegimeLabels> labels;
    for (const auto& s : text_set.samples) {
      if (!s.labels) throw DataError("text dataset sample '" + s.series.id + "' has no labels");
      labels.emplace(s.series.id, *s.labels);
    }
    const auto in_queries = text_queries(bank_from(artifact(cfg, "phrase_dir", false)));
    const std::string holdout_dir = artifact(cfg, "holdout_phrase_dir", true);
    const auto out_queries = text_queries(PhraseBank::load_dir(holdout_dir));
    const auto normalized = normalized_series(text_set);
    if (!cfg.artifacts.contains("text_models") || !cfg.artifacts.at("text_models").is_array()) {
      throw ConfigError("text evaluation needs artifacts.text_models: [{name, aligner}]");
    }
    for (const auto& m : cfg.artifacts.at("text_models")) {
      const Aligner aligner = load_aligner(m.at("aligner").get<std::string>());
      const VectorIndex index = build_text_index(aligner, *models, normalized);
      const auto a = evaluate_text(aligner, index, labels, in_queries);
      const auto b = evaluate_text(aligner, index, labels, out_queries);
      TextSummary t;
      t.model = m.value("name", std::string("aligner"));
      t.precision_in = a.precision;
      t.precision_out = b.precision;
      t.hit_rate_in = a.hit_rate;
      t.hit_rate_out = b.hit_rate;
      t.diversity = a.diversity;
      t.random_precision = a.random_precision;
      t.queries_in = a.queries;
      t.queries_out = b.queries;
      t.unmatchable_in = a.unmatchable;
      t.unmatchable_out = b.unmatchable;
      report.text.push_back(t);
    }
  }

  fs::create_directories(out_dir);
  emit_report(report, ReportFormat::json, fs::path(out_dir) / "report.json");
  emit_report(report, ReportFormat::csv, fs::path(out_dir) / "report.csv");
  emit_report(report, ReportFormat::markdown, fs::path(out_dir) / "report.md");
  write_records(report, rows, fs::path(out_dir) / "records.jsonl");
  std::cout << report_to_markdown(report);
}

// ---- serve ----

void run_serve(const std::string& config_path, int port_override) {
  ServiceConfig cfg = load_service_config(config_path);
  if (port_override >= 0) cfg.port = port_override;
  QueryService service(cfg);
  service.publish(load_snapshot(cfg.artifacts));
  HttpServer server(service, cfg.bind, cfg.port, cfg.threads);
  std::cout << "serving on " << cfg.bind << ':' << cfg.port << '\n' << std::flush;
  server.run();
}

}  // namespace

void register_commands(CLI::App& app) {
  {
    auto o = std::make_shared<GenOptions>();
    auto* c = app.add_subcommand("gen", "Generate a labelled synthetic dataset");
    c->add_option("--n", o->n, "Number of samples")->required()->check(CLI::PositiveNumber);
    c->add_option("--filter", o->filter, "Labelling mode")
        ->check(CLI::IsMember({"unfiltered", "filtered"}));
    c->add_option("--phrase-dir", o->phrase_dir, "Phrase bank directory (default: built-in)")
        ->check(CLI::ExistingDirectory);
    c->add_option("--seed", o->seed, "Random seed");
    c->add_option("--out", o->out, "Output manifest path")->required();
    c->add_option("--config", o->config, "JSON with grid, thresholds, relabel_volatility")
        ->check(CLI::ExistingFile);
    c->add_option("--name", o->name, "Dataset name");
    c->add_flag("--relabel-vol", o->relabel_vol, "Re-derive volatility labels from the series");
    c->callback([o] { run_gen(*o); });
  }
  {
    auto o = std::make_shared<IngestOptions>();
    auto* c = app.add_subcommand("ingest", "Window historical closing prices");
    c->add_option("--csv", o->csv, "CSV files")->required()->check(CLI::ExistingFile);
    c->add_option("--window", o->window, "Window length")->check(CLI::PositiveNumber);
    c->add_option("--stride", o->stride, "Window stride")->check(CLI::PositiveNumber);
    c->add_option("--out", o->out, "Output manifest path")->required();
    c->add_option("--date-column", o->date_column, "Timestamp column name");
    c->add_option("--close-column", o->close_column, "Close price column name");
    c->add_option("--name", o->name, "Dataset name");
    c->callback([o] { run_ingest(*o); });
  }
  {
    auto o = std::make_shared<TrainAeOptions>();
    auto* c = app.add_subcommand("train-ae", "Train the trend or volatility autoencoder");
    c->add_option("--dataset", o->dataset, "Dataset manifest")->required()->check(CLI::ExistingFile);
    c->add_option("--target", o->target, "Series channel")
        ->required()
        ->check(CLI::IsMember({"trend", "vol"}));
    c->add_option("--epochs", o->epochs, "Epochs")->check(CLI::PositiveNumber);
    c->add_option("--lr", o->lr, "Learning rate")->check(CLI::PositiveNumber);
    c->add_option("--batch", o->batch, "Batch size")->check(CLI::PositiveNumber);
    c->add_option("--seed", o->seed, "Random seed");
    c->add_option("--validation-fraction", o->validation_fraction, "Holdout fraction")
        ->check(CLI::Range(0.0, 0.9));
    c->add_option("--vol-half-window", o->half_window, "Volatility window half-width")
        ->check(CLI::PositiveNumber);
    c->add_option("--out", o->out, "Checkpoint path")->required();
    c->callback([o] { run_train_ae(*o); });
  }
  {
    auto o = std::make_shared<TrainAlignOptions>();
    auto* c = app.add_subcommand("train-align", "Train the text/series alignment heads");
    c->add_option("--dataset", o->dataset, "Captioned dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--ae-trend", o->ae_trend, "Trend autoencoder")->required()->check(CLI::ExistingFile);
    c->add_option("--ae-vol", o->ae_vol, "Volatility autoencoder")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Aligner checkpoint path")->required();
    c->add_option("--epochs", o->epochs, "Epochs per temperature")->check(CLI::PositiveNumber);
    c->add_option("--lr", o->lr, "Learning rate")->check(CLI::PositiveNumber);
    c->add_option("--batch", o->batch, "Batch size")->check(CLI::Range(2, 1 << 20));
    c->add_option("--seed", o->seed, "Random seed");
    c->add_option("--tau", o->tau, "Temperature grid")->check(CLI::PositiveNumber);
    c->add_option("--dim", o->dim, "Shared embedding size")->check(CLI::PositiveNumber);
    c->add_flag("--literal-target", o->literal, "Divide the target logits by tau once more");
    c->callback([o] { run_train_align(*o); });
  }
  {
    auto o = std::make_shared<BuildIndexOptions>();
    auto* c = app.add_subcommand("build-index", "Embed a dataset into an index file");
    c->add_option("--dataset", o->dataset, "Dataset manifest")->required()->check(CLI::ExistingFile);
    c->add_option("--models", o->models, "ae_trend ae_vol [aligner]")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--mode", o->mode, "Index kind")->check(CLI::IsMember({"sketch", "text"}));
    c->add_option("--out", o->out, "Index path")->required();
    c->callback([o] { run_build_index(*o); });
  }
  {
    auto o = std::make_shared<QueryOptions>();
    auto* c = app.add_subcommand("query", "Query an index with a sketch or text");
    c->add_option("--index", o->index, "Index file")->required()->check(CLI::ExistingFile);
    c->add_option("--models", o->models, "ae_trend ae_vol [aligner]")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--dataset", o->dataset, "Manifest for result payloads")
        ->check(CLI::ExistingFile);
    auto* sketch = c->add_option("--sketch-file", o->sketch_file, "Sketch values (JSON array or text)")
                       ->check(CLI::ExistingFile);
    auto* text = c->add_option("--text", o->text, "Text query");
    sketch->excludes(text);
    c->add_option("--k", o->k, "Results")->check(CLI::PositiveNumber);
    c->add_flag("--json", o->json_output, "Print JSON instead of a table");
    c->callback([o, sketch, text] {
      if (sketch->count() == 0 && text->count() == 0) {
        throw CLI::RequiredError("--sketch-file or --text");
      }
      run_query(*o);
    });
  }
  {
    auto path = std::make_shared<std::string>();
    auto* c = app.add_subcommand("eval", "Run an experiment config and write reports");
    c->add_option("--config", *path, "Experiment JSON")->required()->check(CLI::ExistingFile);
    c->callback([path] { run_eval(*path); });
  }
  {
    auto path = std::make_shared<std::string>();
    auto port = std::make_shared<int>(-1);
    auto* c = app.add_subcommand("serve", "Run the HTTP query service");
    c->add_option("--config", *path, "Service JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--port", *port, "Port override")->check(CLI::Range(0, 65535));
    c->callback([path, port] { run_serve(*path, *port); });
  }
}

}  // namespace tsr::cli
