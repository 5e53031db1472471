#include "tsr/service.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "tsr/error.hpp"
#include "tsr/features.hpp"
#include "tsr/pipeline.hpp"

namespace tsr {

using nlohmann::json;

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port must be in [0, 65535]");
  if (k_ceiling < 1) throw ConfigError("k ceiling must be >= 1");
  if (threads < 1) throw ConfigError("thread count must be >= 1");
}

ServiceConfig service_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("service config must be a JSON object");
  ServiceConfig c;
  try {
    c.bind = j.value("bind", c.bind);
    c.port = j.value("port", c.port);
    c.admin_token = j.value("admin_token", c.admin_token);
    c.k_ceiling = j.value("k_ceiling", c.k_ceiling);
    c.threads = j.value("threads", c.threads);
    if (j.contains("artifacts")) {
      const json& a = j.at("artifacts");
      c.artifacts.dataset = a.value("dataset", "");
      c.artifacts.ae_trend = a.value("ae_trend", "");
      c.artifacts.ae_vol = a.value("ae_vol", "");
      c.artifacts.aligner = a.value("aligner", "");
      c.artifacts.sketch_index = a.value("sketch_index", "");
      c.artifacts.text_index = a.value("text_index", "");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("service config: ") + e.what());
  }
  c.validate();
  return c;
}

json service_config_to_json(const ServiceConfig& c) {
  return {{"bind", c.bind},
          {"port", c.port},
          {"admin_token", c.admin_token},
          {"k_ceiling", c.k_ceiling},
          {"threads", c.threads},
          {"artifacts",
           {{"dataset", c.artifacts.dataset},
            {"ae_trend", c.artifacts.ae_trend},
            {"ae_vol", c.artifacts.ae_vol},
            {"aligner", c.artifacts.aligner},
            {"sketch_index", c.artifacts.sketch_index},
            {"text_index", c.artifacts.text_index}}}};
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

namespace {

std::size_t parse_count(const std::string& name, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(name + " must be a non-negative integer, got '" + value + "'");
  }
}

}  // namespace

void apply_env_overrides(ServiceConfig& c, const EnvLookup& env) {
  auto str = [&](const char* name, std::string& field) {
    if (auto v = env(name)) field = *v;
  };
  str("TSR_BIND", c.bind);
  if (auto v = env("TSR_PORT")) c.port = static_cast<int>(parse_count("TSR_PORT", *v));
  str("TSR_DATASET", c.artifacts.dataset);
  str("TSR_AE_TREND", c.artifacts.ae_trend);
  str("TSR_AE_VOL", c.artifacts.ae_vol);
  str("TSR_ALIGNER", c.artifacts.aligner);
  str("TSR_SKETCH_INDEX", c.artifacts.sketch_index);
  str("TSR_TEXT_INDEX", c.artifacts.text_index);
  str("TSR_ADMIN_TOKEN", c.admin_token);
  if (auto v = env("TSR_K_CEILING")) c.k_ceiling = parse_count("TSR_K_CEILING", *v);
  c.validate();
}

ServiceConfig load_service_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ServiceConfig c = service_config_from_json(j);
  apply_env_overrides(c, env);
  return c;
}

namespace {

bool usable(const std::string& path) { return !path.empty() && std::filesystem::exists(path); }

void require_resolvable(const VectorIndex& index, const Snapshot& s, const char* what) {
  for (const auto& id : index.ids()) {
    if (s.positions.count(id) == 0) {
      throw DataError(std::string(what) + " index id '" + id + "' is not in the dataset");
    }
  }
}

}  // namespace

std::shared_ptr<const Snapshot> load_snapshot(const ArtifactPaths& paths,
                                              std::uint64_t generation) {
  if (paths.dataset.empty() || paths.ae_trend.empty() || paths.ae_vol.empty()) {
    throw ConfigError("dataset, ae_trend and ae_vol paths are required");
  }
  auto s = std::make_shared<Snapshot>();
  s->generation = generation;
  s->dataset = load_manifest(paths.dataset);
  s->positions = s->dataset.id_map();
  s->models = load_sketch_models(paths.ae_trend, paths.ae_vol);
  s->checksums["ae_trend"] = file_checksum(paths.ae_trend);
  s->checksums["ae_vol"] = file_checksum(paths.ae_vol);

  std::vector<Series> normalized;
  auto need_normalized = [&]() -> const std::vector<Series>& {
    if (normalized.empty()) normalized = normalized_series(s->dataset);
    return normalized;
  };
  if (usable(paths.sketch_index)) {
    s->sketch_index = load_index(paths.sketch_index);
    s->checksums["sketch_index"] = file_checksum(paths.sketch_index);
  } else {
    s->sketch_index = build_sketch_index(s->models, need_normalized());
  }
  if (s->sketch_index.dim() != s->models.embedding_dim()) {
    throw FormatError("sketch index dim does not match the models");
  }
  require_resolvable(s->sketch_index, *s, "sketch");

  if (!paths.aligner.empty()) {
    s->aligner = load_aligner(paths.aligner);
    s->checksums["aligner"] = file_checksum(paths.aligner);
    if (usable(paths.text_index)) {
      s->text_index = load_index(paths.text_index);
      s->checksums["text_index"] = file_checksum(paths.text_index);
    } else {
      s->text_index = build_text_index(*s->aligner, s->models, need_normalized());
    }
    if (s->text_index->dim() != s->aligner->embedding_dim()) {
      throw FormatError("text index dim does not match the aligner");
    }
    require_resolvable(*s->text_index, *s, "text");
  }
  return s;
}

QueryService::QueryService(ServiceConfig config)
    : config_(std::move(config)), artifacts_(config_.artifacts) {
  config_.validate();
}

void QueryService::publish(std::shared_ptr<const Snapshot> snapshot) {
  std::lock_guard lock(mutex_);
  current_ = std::move(snapshot);
}

std::shared_ptr<const Snapshot> QueryService::snapshot() const {
  std::lock_guard lock(mutex_);
  return current_;
}

namespace {

ApiResponse error_response(int status, const std::string& kind, const std::string& message) {
  return {status, {{"error", kind}, {"message", message}}};
}

ApiResponse not_loaded() { return error_response(503, "unavailable", "indexes are not loaded"); }

std::optional<json> parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

/// Reads k: a positive integer, defaulting to 10, clamped to the ceiling.
std::optional<std::size_t> read_k(const json& j, std::size_t ceiling) {
  if (!j.contains("k")) return std::min<std::size_t>(10, ceiling);
  const json& k = j.at("k");
  if (!k.is_number_integer()) return std::nullopt;
  const auto v = k.get<long long>();
  if (v < 1) return std::nullopt;
  return std::min(static_cast<std::size_t>(v), ceiling);
}

json record_json(const Snapshot& s, const std::string& id) {
  const Sample& sample = s.dataset.samples.at(s.positions.at(id));
  const Series norm = ensure_normalized(sample.series);
  json out{{"id", id},
           {"series", sample.series.values},
           {"normalized", norm.values},
           {"vol_series", volatility_values(norm.values, s.models.vol_config.half_window)}};
  if (sample.labels) out["labels"] = labels_to_json(*sample.labels);
  if (sample.caption) out["caption"] = *sample.caption;
  return out;
}

json results_json(const Snapshot& s, const QueryResult& r) {
  json results = json::array();
  for (const auto& h : r.hits) {
    json item = record_json(s, h.id);
    item["score"] = h.score;
    results.push_back(std::move(item));
  }
  return results;
}

}  // namespace

ApiResponse QueryService::query_sketch(const std::string& body) const {
  const auto s = snapshot();
  if (!s) return not_loaded();
  const auto j = parse_body(body);
  if (!j) return error_response(400, "bad_request", "body must be a JSON object");
  if (!j->contains("points") || !j->at("points").is_array()) {
    return error_response(400, "bad_request", "'points' must be an array of numbers");
  }
  std::vector<double> points;
  for (const auto& p : j->at("points")) {
    if (!p.is_number()) return error_response(400, "bad_request", "'points' must be numbers");
    points.push_back(p.get<double>());
  }
  const auto k = read_k(*j, config_.k_ceiling);
  if (!k) return error_response(400, "bad_request", "'k' must be an integer >= 1");
  Series q;
  try {
    q = sketch_to_query(points, s->models.input_size());
  } catch (const ParameterError& e) {
    return error_response(400, "bad_request", e.what());
  }
  const nn::Vector e = combined_embedding(s->models, q);
  const auto r = s->sketch_index.query(
      std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), *k);
  return {200,
          {{"generation", s->generation},
           {"k", *k},
           {"query", q.values},
           {"results", results_json(*s, r)}}};
}

ApiResponse QueryService::query_text(const std::string& body) const {
  const auto s = snapshot();
  if (!s || !s->aligner || !s->text_index) return not_loaded();
  const auto j = parse_body(body);
  if (!j) return error_response(400, "bad_request", "body must be a JSON object");
  if (!j->contains("text") || !j->at("text").is_string()) {
    return error_response(400, "bad_request", "'text' must be a string");
  }
  const auto text = j->at("text").get<std::string>();
  if (tokenize(text).empty()) return error_response(400, "bad_request", "'text' is empty");
  const auto k = read_k(*j, config_.k_ceiling);
  if (!k) return error_response(400, "bad_request", "'k' must be an integer >= 1");
  nn::Vector e;
  try {
    e = embed_text_query(*s->aligner, text);
  } catch (const UnmatchableQueryError& err) {
    ApiResponse r = error_response(422, "unmatchable", err.what());
    r.body["unknown_tokens"] = err.unknown_tokens();
    return r;
  }
  const auto r = s->text_index->query(
      std::span<const double>(e.data(), static_cast<std::size_t>(e.size())), *k);
  const auto features = featurize_text(s->aligner->vocab, text);
  return {200,
          {{"generation", s->generation},
           {"k", *k},
           {"unknown_tokens", features.unknown_tokens},
           {"results", results_json(*s, r)}}};
}

ApiResponse QueryService::series(const std::string& id) const {
  const auto s = snapshot();
  if (!s) return not_loaded();
  if (s->positions.count(id) == 0) return error_response(404, "not_found", "unknown id '" + id + "'");
  return {200, record_json(*s, id)};
}

ApiResponse QueryService::health() const {
  const auto s = snapshot();
  return {200, {{"status", s ? "ok" : "loading"}, {"rebuilding", rebuilding_.load()}}};
}

ApiResponse QueryService::info() const {
  const auto s = snapshot();
  if (!s) return not_loaded();
  json text = nullptr;
  if (s->text_index) text = {{"size", s->text_index->size()}, {"dim", s->text_index->dim()}};
  return {200,
          {{"generation", s->generation},
           {"dataset", {{"name", s->dataset.name}, {"kind", s->dataset.kind}, {"size", s->dataset.samples.size()}}},
           {"sketch_index", {{"size", s->sketch_index.size()}, {"dim", s->sketch_index.dim()}}},
           {"text_index", text},
           {"checksums", s->checksums},
           {"k_ceiling", config_.k_ceiling}}};
}

ApiResponse QueryService::rebuild(const std::string& token, const std::string& body) {
  if (config_.admin_token.empty() || token != config_.admin_token) {
    return error_response(401, "unauthorized", "missing or wrong admin token");
  }
  ArtifactPaths paths;
  {
    std::lock_guard lock(artifacts_mutex_);
    paths = artifacts_;
  }
  if (!body.empty()) {
    const auto j = parse_body(body);
    if (!j) return error_response(400, "bad_request", "body must be a JSON object");
    auto take = [&](const char* key, std::string& field) -> bool {
      if (!j->contains(key)) return true;
      if (!j->at(key).is_string()) return false;
      field = j->at(key).get<std::string>();
      return true;
    };
    if (!take("dataset", paths.dataset) || !take("ae_trend", paths.ae_trend) ||
        !take("ae_vol", paths.ae_vol) || !take("aligner", paths.aligner) ||
        !take("sketch_index", paths.sketch_index) || !take("text_index", paths.text_index)) {
      return error_response(400, "bad_request", "artifact paths must be strings");
    }
  }
  if (rebuilding_.exchange(true)) {
    return error_response(409, "conflict", "a rebuild is already running");
  }
  struct Reset {
    std::atomic<bool>& flag;
    ~Reset() { flag.store(false); }
  } reset{rebuilding_};

  const auto old = snapshot();
  const std::uint64_t next = old ? old->generation + 1 : 1;
  std::shared_ptr<const Snapshot> fresh;
  try {
    fresh = load_snapshot(paths, next);
  } catch (const Error& e) {
    return error_response(422, e.kind(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
  publish(fresh);
  {
    std::lock_guard lock(artifacts_mutex_);
    artifacts_ = paths;
  }
  return {200,
          {{"status", "rebuilt"},
           {"generation", next},
           {"sketch_index_size", fresh->sketch_index.size()}}};
}

struct HttpServer::Impl {
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(QueryService& service, std::string bind, int port, std::size_t threads)
    : impl_(std::make_unique<Impl>()), bind_(std::move(bind)), port_(port) {
  auto& srv = impl_->server;
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto guarded = [reply](auto&& fn) {
    return [reply, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, fn(req));
      } catch (const std::exception& e) {
        reply(res, error_response(500, "internal", e.what()));
      }
    };
  };
  srv.Post("/api/query/sketch", guarded([&service](const httplib::Request& req) {
             return service.query_sketch(req.body);
           }));
  srv.Post("/api/query/text", guarded([&service](const httplib::Request& req) {
             return service.query_text(req.body);
           }));
  srv.Get(R"(/api/series/(.+))", guarded([&service](const httplib::Request& req) {
            return service.series(req.matches[1].str());
          }));
  srv.Get("/api/health",
          guarded([&service](const httplib::Request&) { return service.health(); }));
  srv.Get("/api/info", guarded([&service](const httplib::Request&) { return service.info(); }));
  srv.Post("/api/admin/rebuild", guarded([&service](const httplib::Request& req) {
             return service.rebuild(req.get_header_value("X-Admin-Token"), req.body);
           }));
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(json{{"error", "http"}, {"status", res.status}}.dump(), "application/json");
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  auto& srv = impl_->server;
  if (port_ == 0) {
    port_ = srv.bind_to_any_port(bind_);
    if (port_ < 0) throw IoError("cannot bind " + bind_);
  } else if (!srv.bind_to_port(bind_, port_)) {
    throw IoError("cannot bind " + bind_ + ":" + std::to_string(port_));
  }
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void HttpServer::run() {
  if (!impl_->server.listen(bind_, port_)) {
    throw IoError("cannot listen on " + bind_ + ":" + std::to_string(port_));
  }
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tsr
