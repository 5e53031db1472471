#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tsr/aligner.hpp"
#include "tsr/dataset.hpp"
#include "tsr/encoders.hpp"
#include "tsr/index.hpp"

namespace tsr {

/// Artifact locations for one index generation. Index paths are optional:
/// when empty (or missing on disk) the index is rebuilt from the dataset.
struct ArtifactPaths {
  std::string dataset;
  std::string ae_trend;
  std::string ae_vol;
  std::string aligner;  // optional; text queries return 503 without it
  std::string sketch_index;
  std::string text_index;
};

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  ArtifactPaths artifacts;
  std::string admin_token;
  std::size_t k_ceiling = 100;
  std::size_t threads = 8;

  void validate() const;
};

ServiceConfig service_config_from_json(const nlohmann::json& j);
nlohmann::json service_config_to_json(const ServiceConfig& c);

/// Environment lookup; returns nullopt for unset variables.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

/// Overrides fields from TSR_BIND, TSR_PORT, TSR_DATASET, TSR_AE_TREND,
/// TSR_AE_VOL, TSR_ALIGNER, TSR_SKETCH_INDEX, TSR_TEXT_INDEX,
/// TSR_ADMIN_TOKEN and TSR_K_CEILING.
void apply_env_overrides(ServiceConfig& c, const EnvLookup& env = process_env);

/// Reads a JSON config file then applies environment overrides.
ServiceConfig load_service_config(const std::filesystem::path& path,
                                  const EnvLookup& env = process_env);

/// One immutable generation of loaded artifacts.
struct Snapshot {
  std::uint64_t generation = 0;
  Dataset dataset;
  std::unordered_map<std::string, std::size_t> positions;
  SketchModels models;
  std::optional<Aligner> aligner;
  VectorIndex sketch_index;
  std::optional<VectorIndex> text_index;
  nlohmann::json checksums = nlohmann::json::object();
};

/// Loads (or builds) every artifact; checks that each indexed id resolves.
std::shared_ptr<const Snapshot> load_snapshot(const ArtifactPaths& paths,
                                              std::uint64_t generation = 1);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Request handling independent of the transport. Queries read the current
/// snapshot; a rebuild prepares a new one off to the side and publishes it in
/// a single pointer swap.
class QueryService {
 public:
  explicit QueryService(ServiceConfig config);

  void publish(std::shared_ptr<const Snapshot> snapshot);
  std::shared_ptr<const Snapshot> snapshot() const;
  const ServiceConfig& config() const noexcept { return config_; }

  ApiResponse query_sketch(const std::string& body) const;
  ApiResponse query_text(const std::string& body) const;
  ApiResponse series(const std::string& id) const;
  ApiResponse health() const;
  ApiResponse info() const;
  /// `token` is the value of the X-Admin-Token header, empty when absent.
  ApiResponse rebuild(const std::string& token, const std::string& body);

  bool rebuild_running() const noexcept { return rebuilding_.load(); }

 private:
  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Snapshot> current_;
  std::atomic<bool> rebuilding_{false};
  std::mutex artifacts_mutex_;
  ArtifactPaths artifacts_;
};

/// cpp-httplib front end for a QueryService.
class HttpServer {
 public:
  HttpServer(QueryService& service, std::string bind, int port, std::size_t threads = 8);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket (port 0 picks a free one) and serves on a background
  /// thread. Returns the bound port.
  int start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string bind_;
  int port_;
};

}  // namespace tsr
