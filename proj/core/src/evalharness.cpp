#include "tsr/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "tsr/error.hpp"
#include "tsr/features.hpp"
#include "tsr/metrics.hpp"
#include "tsr/random.hpp"

namespace tsr {

using nlohmann::json;

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::bf: return "bf";
    case Method::bf_avg: return "bf_avg";
    case Method::pca16: return "pca16";
    case Method::ae: return "ae";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "bf") return Method::bf;
  if (name == "bf_avg") return Method::bf_avg;
  if (name == "pca16") return Method::pca16;
  if (name == "ae") return Method::ae;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::vector<ExperimentRow> standard_rows() {
  return {{0.05, 0, 1}, {0.05, 5, 1}, {0.05, 0, 3}, {0.05, 5, 3}};
}

void ExperimentConfig::validate() const {
  if (rows.empty()) throw ConfigError("experiment has no rows");
  for (const auto& r : rows) {
    if (r.k < 1) throw ConfigError("k must be >= 1");
    if (!(r.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  }
  if (query_count < 1) throw ConfigError("query count must be >= 1");
  if (methods.empty() && !text_eval) throw ConfigError("experiment has no methods");
  if (pca_components < 1) throw ConfigError("pca components must be >= 1");
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json rows = json::array();
  for (const auto& r : c.rows) rows.push_back({{"noise", r.noise_sigma}, {"shift", r.shift}, {"k", r.k}});
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  return {{"rows", rows},           {"query_count", c.query_count},
          {"seed", c.seed},         {"methods", methods},
          {"text_eval", c.text_eval}, {"pca_components", c.pca_components},
          {"artifacts", c.artifacts}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    if (j.contains("rows")) {
      c.rows.clear();
      for (const auto& r : j.at("rows")) {
        c.rows.push_back({r.at("noise").get<double>(), r.at("shift").get<std::size_t>(),
                          r.at("k").get<std::size_t>()});
      }
    }
    c.query_count = j.value("query_count", c.query_count);
    c.seed = j.value("seed", c.seed);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    c.text_eval = j.value("text_eval", c.text_eval);
    c.pca_components = j.value("pca_components", c.pca_components);
    if (j.contains("artifacts")) c.artifacts = j.at("artifacts");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::vector<Series> make_query_set(std::span<const Series> test, double sigma, std::size_t shift,
                                   std::size_t count, std::uint64_t seed) {
  if (count > test.size()) {
    throw ParameterError("query count " + std::to_string(count) + " exceeds the " +
                         std::to_string(test.size()) + " test series");
  }
  std::vector<Series> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!test[i].normalized) throw ParameterError("test series must be normalized");
    Series q = add_gaussian_noise(test[i], sigma, derive_seed(seed, i));
    q = circular_shift_right(q, shift);
    out.push_back(minmax_normalize(q));
    out.back().id = test[i].id;
  }
  return out;
}

json query_record_to_json(const QueryRecord& r, const ExperimentRow& row) {
  json items = json::array();
  for (const auto& p : r.retrieved) {
    items.push_back({{"id", p.id},
                     {"score", p.score},
                     {"trend_mape", p.trend_mape_defined ? json(p.trend_mape) : json(nullptr)},
                     {"trend_corr", p.trend_corr},
                     {"vol_mape", p.vol_mape_defined ? json(p.vol_mape) : json(nullptr)},
                     {"vol_corr", p.vol_corr},
                     {"trend_l2", p.trend_l2}});
  }
  return {{"noise", row.noise_sigma}, {"shift", row.shift},       {"k", row.k},
          {"method", method_name(r.method)}, {"query", r.query_id}, {"seconds", r.seconds},
          {"retrieved", items}};
}

double monotonic_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

namespace {

void require_inputs(Method m, const EvalInputs& in) {
  switch (m) {
    case Method::bf:
    case Method::bf_avg:
      break;
    case Method::pca16:
      if (in.pca == nullptr || in.pca_index == nullptr) {
        throw ConfigError("pca16 requested without a fitted PCA model and index");
      }
      break;
    case Method::ae:
      if (in.models == nullptr || in.ae_index == nullptr) {
        throw ConfigError("ae requested without sketch models and an index");
      }
      break;
  }
}

QueryResult retrieve(Method m, const EvalInputs& in, const Series& q, std::size_t k) {
  switch (m) {
    case Method::bf:
      return bf_search(*in.db, std::span<const double>(q.values), k);
    case Method::bf_avg: {
      const auto vol = volatility_values(q.values, in.db->vol_config().half_window);
      return bf_avg_search(*in.db, q.values, vol, k);
    }
    case Method::pca16: {
      const auto vol = volatility_values(q.values, in.db->vol_config().half_window);
      const nn::Vector e = pca_embed(*in.pca, q.values, vol);
      return in.pca_index->query(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), k);
    }
    case Method::ae: {
      const nn::Vector e = combined_embedding(*in.models, q);
      return in.ae_index->query(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), k);
    }
  }
  throw ConfigError("unknown method");
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& config, const EvalInputs& inputs,
                          const Clock& clock) {
  config.validate();
  if (inputs.db == nullptr) throw ConfigError("experiment needs a raw database");
  for (Method m : config.methods) require_inputs(m, inputs);
  const RawDatabase& db = *inputs.db;
  const std::size_t half_window = db.vol_config().half_window;

  EvalReport report;
  report.database_size = db.size();
  for (std::size_t r = 0; r < config.rows.size(); ++r) {
    const ExperimentRow& row = config.rows[r];
    // Every row perturbs with the same noise draws so rows differ only in shift and k.
    const auto queries = make_query_set(inputs.test, row.noise_sigma, row.shift,
                                        config.query_count, derive_seed(config.seed, 0));
    std::vector<std::vector<double>> query_vols;
    query_vols.reserve(queries.size());
    for (const auto& q : queries) query_vols.push_back(volatility_values(q.values, half_window));

    for (Method m : config.methods) {
      if (!queries.empty()) (void)retrieve(m, inputs, queries.front(), row.k);
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const Series& q = queries[qi];
        const double t0 = clock();
        const QueryResult res = retrieve(m, inputs, q, row.k);
        const double t1 = clock();

        QueryRecord rec;
        rec.row = r;
        rec.method = m;
        rec.query_id = q.id;
        rec.seconds = t1 - t0;
        for (const Hit& h : res.hits) {
          const auto pos = db.find(h.id);
          if (!pos) throw DataError("retrieved id '" + h.id + "' is not in the database");
          const auto trend = db.trend(*pos);
          const auto vol = db.vol(*pos);
          PairMeasures p;
          p.id = h.id;
          p.score = h.score;
          const auto tm = mape(trend, q.values);
          p.trend_mape = tm.value;
          p.trend_mape_defined = tm.defined;
          const auto tc = pearson_corr(trend, q.values);
          p.trend_corr = tc.value;
          p.trend_corr_degenerate = tc.degenerate;
          const auto vm = mape(vol, query_vols[qi]);
          p.vol_mape = vm.value;
          p.vol_mape_defined = vm.defined;
          const auto vc = pearson_corr(vol, query_vols[qi]);
          p.vol_corr = vc.value;
          p.vol_corr_degenerate = vc.degenerate;
          p.trend_l2 = l2_distance(trend, q.values);
          rec.retrieved.push_back(std::move(p));
        }
        report.records.push_back(std::move(rec));
      }
    }
  }
  report.methods = summarize(report.records, config.rows, config.methods);
  return report;
}

std::vector<MethodSummary> summarize(std::span<const QueryRecord> records,
                                     std::span<const ExperimentRow> rows,
                                     std::span<const Method> methods) {
  std::vector<MethodSummary> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Method m : methods) {
      MethodSummary s;
      s.row = rows[r];
      s.method = m;
      std::vector<double> seconds;
      double trend_mape = 0.0;
      double vol_mape = 0.0;
      std::size_t trend_defined = 0;
      std::size_t vol_defined = 0;
      for (const auto& rec : records) {
        if (rec.row != r || rec.method != m) continue;
        seconds.push_back(rec.seconds);
        for (const auto& p : rec.retrieved) {
          ++s.pairs;
          if (p.trend_mape_defined) {
            trend_mape += p.trend_mape;
            ++trend_defined;
          } else {
            ++s.undefined_mape;
          }
          if (p.vol_mape_defined) {
            vol_mape += p.vol_mape;
            ++vol_defined;
          } else {
            ++s.undefined_mape;
          }
          s.trend_corr += p.trend_corr;
          s.vol_corr += p.vol_corr;
          s.trend_l2 += p.trend_l2;
          if (p.trend_corr_degenerate) ++s.degenerate_corr;
          if (p.vol_corr_degenerate) ++s.degenerate_corr;
        }
      }
      s.queries = seconds.size();
      if (s.pairs > 0) {
        const auto n = static_cast<double>(s.pairs);
        s.trend_corr /= n;
        s.vol_corr /= n;
        s.trend_l2 /= n;
      }
      s.trend_mape = trend_defined ? trend_mape / static_cast<double>(trend_defined) : 0.0;
      s.vol_mape = vol_defined ? vol_mape / static_cast<double>(vol_defined) : 0.0;
      const auto ms = mean_std(seconds);
      s.latency_mean = ms.mean;
      s.latency_std = ms.stddev;
      out.push_back(s);
    }
  }
  return out;
}

std::vector<TextQuery> text_queries(const PhraseBank& bank) {
  std::vector<TextQuery> out;
  for (const auto& [key, phrases] : bank.entries()) {
    for (const auto& p : phrases) out.push_back({p, key.first, key.second});
  }
  return out;
}

TextEvalResult evaluate_text(const Aligner& aligner, const VectorIndex& text_index,
                             const std::unordered_map<std::string, RegimeLabels>& labels,
                             std::span<const TextQuery> queries, std::size_t k) {
  if (queries.empty()) throw ParameterError("no text queries");
  if (text_index.size() < k) {
    throw DataError("text index holds " + std::to_string(text_index.size()) +
                    " entries, fewer than k = " + std::to_string(k));
  }
  // Regime frequencies of the indexed items, for the uniform-retrieval baseline.
  std::map<std::pair<Feature, int>, std::size_t> counts;
  for (const auto& id : text_index.ids()) {
    auto it = labels.find(id);
    if (it == labels.end()) throw DataError("indexed id '" + id + "' has no labels");
    for (Feature f : kCaptionFeatureOrder) ++counts[{f, regime_of(it->second, f)}];
  }

  TextEvalResult res;
  res.queries = queries.size();
  std::vector<std::vector<int>> retrieved_regimes;
  std::vector<int> query_regimes;
  double random_total = 0.0;
  for (const auto& q : queries) {
    query_regimes.push_back(q.regime);
    random_total += static_cast<double>(counts[{q.feature, q.regime}]) /
                    static_cast<double>(text_index.size());
    nn::Vector e;
    try {
      e = embed_text_query(aligner, q.text);
    } catch (const UnmatchableQueryError&) {
      ++res.unmatchable;
      retrieved_regimes.emplace_back(k, -1);
      continue;
    }
    const auto hits =
        text_index.query(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), k);
    std::vector<int> regimes;
    std::vector<std::string> ids;
    for (const auto& h : hits.hits) {
      regimes.push_back(regime_of(labels.at(h.id), q.feature));
      ids.push_back(h.id);
    }
    retrieved_regimes.push_back(std::move(regimes));
    res.retrieved.push_back(std::move(ids));
  }
  res.precision = precision_at_k(retrieved_regimes, query_regimes, k);
  res.hit_rate = hit_rate_at_k(retrieved_regimes, query_regimes, k);
  res.diversity = res.retrieved.empty() ? 0.0 : diversity(res.retrieved);
  res.random_precision = random_total / static_cast<double>(queries.size());
  return res;
}

namespace {

json summary_to_json(const MethodSummary& s) {
  return {{"noise", s.row.noise_sigma},   {"shift", s.row.shift},
          {"k", s.row.k},                 {"method", method_name(s.method)},
          {"trend_mape", s.trend_mape},   {"trend_corr", s.trend_corr},
          {"vol_mape", s.vol_mape},       {"vol_corr", s.vol_corr},
          {"latency_mean", s.latency_mean}, {"latency_std", s.latency_std},
          {"trend_l2", s.trend_l2},       {"queries", s.queries},
          {"pairs", s.pairs},             {"undefined_mape", s.undefined_mape},
          {"degenerate_corr", s.degenerate_corr}};
}

json text_to_json(const TextSummary& t) {
  return {{"model", t.model},
          {"precision_in", t.precision_in},
          {"precision_out", t.precision_out},
          {"hit_rate_in", t.hit_rate_in},
          {"hit_rate_out", t.hit_rate_out},
          {"diversity", t.diversity},
          {"random_precision", t.random_precision},
          {"queries_in", t.queries_in},
          {"queries_out", t.queries_out},
          {"unmatchable_in", t.unmatchable_in},
          {"unmatchable_out", t.unmatchable_out}};
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2E", v);
  return buf;
}

}  // namespace

json report_to_json(const EvalReport& r) {
  json methods = json::array();
  for (const auto& s : r.methods) methods.push_back(summary_to_json(s));
  json text = json::array();
  for (const auto& t : r.text) text.push_back(text_to_json(t));
  return {{"database_size", r.database_size}, {"methods", methods}, {"text", text}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  try {
    r.database_size = j.at("database_size").get<std::size_t>();
    for (const auto& m : j.at("methods")) {
      MethodSummary s;
      s.row = {m.at("noise").get<double>(), m.at("shift").get<std::size_t>(),
               m.at("k").get<std::size_t>()};
      s.method = parse_method(m.at("method").get<std::string>());
      s.trend_mape = m.at("trend_mape").get<double>();
      s.trend_corr = m.at("trend_corr").get<double>();
      s.vol_mape = m.at("vol_mape").get<double>();
      s.vol_corr = m.at("vol_corr").get<double>();
      s.latency_mean = m.at("latency_mean").get<double>();
      s.latency_std = m.at("latency_std").get<double>();
      s.trend_l2 = m.at("trend_l2").get<double>();
      s.queries = m.at("queries").get<std::size_t>();
      s.pairs = m.at("pairs").get<std::size_t>();
      s.undefined_mape = m.at("undefined_mape").get<std::size_t>();
      s.degenerate_corr = m.at("degenerate_corr").get<std::size_t>();
      r.methods.push_back(s);
    }
    for (const auto& t : j.at("text")) {
      TextSummary s;
      s.model = t.at("model").get<std::string>();
      s.precision_in = t.at("precision_in").get<double>();
      s.precision_out = t.at("precision_out").get<double>();
      s.hit_rate_in = t.at("hit_rate_in").get<double>();
      s.hit_rate_out = t.at("hit_rate_out").get<double>();
      s.diversity = t.at("diversity").get<double>();
      s.random_precision = t.at("random_precision").get<double>();
      s.queries_in = t.at("queries_in").get<std::size_t>();
      s.queries_out = t.at("queries_out").get<std::size_t>();
      s.unmatchable_in = t.at("unmatchable_in").get<std::size_t>();
      s.unmatchable_out = t.at("unmatchable_out").get<std::size_t>();
      r.text.push_back(s);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "noise,shift,k,method,trend_mape,trend_corr,vol_mape,vol_corr,latency_mean,"
         "latency_std,trend_l2,queries,pairs,undefined_mape,degenerate_corr\n";
  for (const auto& s : r.methods) {
    out << num(s.row.noise_sigma) << ',' << s.row.shift << ',' << s.row.k << ','
        << method_name(s.method) << ',' << num(s.trend_mape) << ',' << num(s.trend_corr) << ','
        << num(s.vol_mape) << ',' << num(s.vol_corr) << ',' << num(s.latency_mean) << ','
        << num(s.latency_std) << ',' << num(s.trend_l2) << ',' << s.queries << ',' << s.pairs
        << ',' << s.undefined_mape << ',' << s.degenerate_corr << '\n';
  }
  return out.str();
}

std::string report_to_markdown(const EvalReport& r) {
  std::ostringstream out;
  out << "| Noise, Shift, K | Method | TS-MAPE | TS-CORR | Vol-MAPE | Vol-CORR | Time mean (s) "
         "| Time std (s) |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : r.methods) {
    out << "| " << s.row.noise_sigma << ", " << s.row.shift << ", " << s.row.k << " | "
        << method_name(s.method) << " | " << sci(s.trend_mape) << " | " << sci(s.trend_corr)
        << " | " << sci(s.vol_mape) << " | " << sci(s.vol_corr) << " | " << sci(s.latency_mean)
        << " | " << sci(s.latency_std) << " |\n";
  }
  if (!r.text.empty()) {
    out << "\n| Model | Precision@9 in-sample | Precision@9 out-of-sample | Diversity |\n";
    out << "|---|---|---|---|\n";
    for (const auto& t : r.text) {
      out << "| " << t.model << " | " << sci(t.precision_in) << " | " << sci(t.precision_out)
          << " | " << sci(t.diversity) << " |\n";
    }
  }
  return out.str();
}

void emit_report(const EvalReport& r, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  switch (format) {
    case ReportFormat::json: out << report_to_json(r).dump(2) << '\n'; break;
    case ReportFormat::csv: out << report_to_csv(r); break;
    case ReportFormat::markdown: out << report_to_markdown(r); break;
  }
  if (!out) throw IoError("cannot write report " + path.string());
}

void write_records(const EvalReport& r, std::span<const ExperimentRow> rows,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write records " + path.string());
  for (const auto& rec : r.records) {
    if (rec.row >= rows.size()) throw ParameterError("record row out of range");
    out << query_record_to_json(rec, rows[rec.row]).dump() << '\n';
  }
}

}  // namespace tsr
