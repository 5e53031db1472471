#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "oracles.hpp"
#include "tsr/aligner.hpp"
#include "tsr/error.hpp"
#include "tsr/pipeline.hpp"
#include "tsr/service.hpp"
#include "tsr/synthgen.hpp"

// After Eigen: resolv.h defines a _res macro that clashes with Eigen parameter names.
#include "httplib.h"

using namespace tsr;
using nlohmann::json;

namespace {

struct Artifacts {
  std::filesystem::path dir;
  ArtifactPaths paths;
  Dataset dataset;
};

Artifacts make_artifacts(const std::string& name, std::size_t n) {
  Artifacts a;
  a.dir = oracle::temp_dir(name);
  DatasetConfig cfg;
  cfg.n = n;
  cfg.seed = 5;
  a.dataset = make_synthetic_dataset(cfg, PhraseBank::builtin(), "svc");
  save_manifest(a.dataset, a.dir / "data.json");
  SketchModels models{make_autoencoder({}, 1), make_autoencoder({}, 2), {}};
  save_autoencoder(a.dir / "trend.tsnn", models.trend);
  save_autoencoder(a.dir / "vol.tsnn", models.vol, {{"vol_half_window", 4}});

  std::vector<std::string> captions;
  for (const auto& s : a.dataset.samples) captions.push_back(*s.caption);
  AlignerConfig ac;
  ac.train.epochs = 2;
  ac.tau_grid = {0.1};
  ac.embedding_dim = 16;
  const auto normalized = normalized_series(a.dataset);
  const auto trained = train_aligner(captions, normalized, models, ac);
  save_aligner(a.dir / "aligner.tsnn", trained.aligner);
  save_index(build_sketch_index(models, normalized), a.dir / "sketch.tslx");

  a.paths.dataset = (a.dir / "data.json").string();
  a.paths.ae_trend = (a.dir / "trend.tsnn").string();
  a.paths.ae_vol = (a.dir / "vol.tsnn").string();
  a.paths.aligner = (a.dir / "aligner.tsnn").string();
  a.paths.sketch_index = (a.dir / "sketch.tslx").string();
  return a;
}

const Artifacts& artifacts() {
  static const Artifacts a = make_artifacts("service", 200);
  return a;
}

ServiceConfig config_for(const Artifacts& a) {
  ServiceConfig c;
  c.artifacts = a.paths;
  c.admin_token = "secret";
  c.k_ceiling = 20;
  return c;
}

std::unique_ptr<QueryService> loaded_service(const Artifacts& a) {
  auto svc = std::make_unique<QueryService>(config_for(a));
  svc->publish(load_snapshot(a.paths));
  return svc;
}

json points_of(const Series& s) { return json{{"points", s.values}}; }

}  // namespace

TEST(ServiceConfig, JsonAndEnvOverrides) {
  ServiceConfig c;
  c.port = 9000;
  c.artifacts.dataset = "d.json";
  c.admin_token = "t";
  const auto back = service_config_from_json(service_config_to_json(c));
  EXPECT_EQ(back.port, 9000);
  EXPECT_EQ(back.artifacts.dataset, "d.json");
  std::map<std::string, std::string> env{
      {"TSR_PORT", "1234"}, {"TSR_DATASET", "other.json"}, {"TSR_K_CEILING", "7"}};
  apply_env_overrides(c, [&](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
  });
  EXPECT_EQ(c.port, 1234);
  EXPECT_EQ(c.artifacts.dataset, "other.json");
  EXPECT_EQ(c.k_ceiling, 7u);
  EXPECT_EQ(c.bind, "127.0.0.1");
}

TEST(QueryService, NotLoadedAnswers503AndHealthLoading) {
  QueryService svc(config_for(artifacts()));
  EXPECT_EQ(svc.health().body["status"], "loading");
  EXPECT_EQ(svc.query_sketch("{\"points\":[0,1]}").status, 503);
  EXPECT_EQ(svc.info().status, 503);
}

TEST(QueryService, SketchQueryReturnsMemberFirst) {
  const auto& a = artifacts();
  auto svc = loaded_service(a);
  const Series member = ensure_normalized(a.dataset.samples[17].series);
  json body = points_of(member);
  body["k"] = 3;
  const auto r = svc->query_sketch(body.dump());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_EQ(r.body["results"].size(), 3u);
  const auto& top = r.body["results"][0];
  EXPECT_EQ(top["id"], member.id);
  EXPECT_NEAR(top["score"].get<double>(), 1.0, 1e-6);
  EXPECT_EQ(top["series"].size(), 30u);
  EXPECT_EQ(top["vol_series"].size(), 30u);
  EXPECT_TRUE(top.contains("labels"));
  EXPECT_TRUE(top.contains("caption"));
  EXPECT_EQ(r.body["generation"], 1);
}

TEST(QueryService, SketchValidationAndKCeiling) {
  auto svc = loaded_service(artifacts());
  EXPECT_EQ(svc->query_sketch("not json").status, 400);
  EXPECT_EQ(svc->query_sketch("{\"points\":[1]}").status, 400);
  EXPECT_EQ(svc->query_sketch("{\"points\":[1,\"x\"]}").status, 400);
  EXPECT_EQ(svc->query_sketch("{\"points\":[0,1],\"k\":0}").status, 400);
  EXPECT_EQ(svc->query_sketch("{\"points\":[0,1],\"k\":1.5}").status, 400);
  const auto big = svc->query_sketch("{\"points\":[0,1,0.5],\"k\":1000}");
  EXPECT_EQ(big.status, 200);
  EXPECT_EQ(big.body["k"], 20);
  EXPECT_EQ(big.body["results"].size(), 20u);
  const auto def = svc->query_sketch("{\"points\":[0,1,0.5]}");
  EXPECT_EQ(def.body["results"].size(), 10u);
}

TEST(QueryService, TextQueries) {
  auto svc = loaded_service(artifacts());
  const auto ok = svc->query_text(R"({"text":"sudden shocks zzzq","k":4})");
  ASSERT_EQ(ok.status, 200) << ok.body.dump();
  EXPECT_EQ(ok.body["results"].size(), 4u);
  EXPECT_EQ(ok.body["unknown_tokens"], json::array({"zzzq"}));
  const auto bad = svc->query_text(R"({"text":"qwerty asdf"})");
  EXPECT_EQ(bad.status, 422);
  EXPECT_EQ(bad.body["error"], "unmatchable");
  EXPECT_EQ(bad.body["unknown_tokens"], json::array({"qwerty", "asdf"}));
  EXPECT_EQ(svc->query_text(R"({"text":"  "})").status, 400);
  EXPECT_EQ(svc->query_text(R"({"txt":"up"})").status, 400);
}

TEST(QueryService, TextWithoutAlignerIs503) {
  auto paths = artifacts().paths;
  paths.aligner.clear();
  QueryService svc(config_for(artifacts()));
  svc.publish(load_snapshot(paths));
  EXPECT_EQ(svc.query_text(R"({"text":"up"})").status, 503);
  EXPECT_EQ(svc.query_sketch(R"({"points":[0,1]})").status, 200);
}

TEST(QueryService, SeriesLookup) {
  const auto& a = artifacts();
  auto svc = loaded_service(a);
  const auto& id = a.dataset.samples[3].series.id;
  const auto r = svc->series(id);
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["id"], id);
  EXPECT_EQ(r.body["series"].get<std::vector<double>>(), a.dataset.samples[3].series.values);
  EXPECT_EQ(svc->series("missing").status, 404);
}

TEST(QueryService, RebuildAuthAndGeneration) {
  auto svc = loaded_service(artifacts());
  EXPECT_EQ(svc->rebuild("", "").status, 401);
  EXPECT_EQ(svc->rebuild("wrong", "").status, 401);
  const auto r = svc->rebuild("secret", "");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["generation"], 2);
  EXPECT_EQ(svc->snapshot()->generation, 2u);
  EXPECT_EQ(svc->rebuild("secret", R"({"dataset":"/nonexistent.json"})").status, 422);
  EXPECT_EQ(svc->snapshot()->generation, 2u);
  EXPECT_EQ(svc->rebuild("secret", "[1]").status, 400);
}

TEST(QueryService, ConcurrentRebuildConflictsAndQueriesKeepWorking) {
  const auto big = make_artifacts("service_big", 6000);
  auto svc = loaded_service(big);
  std::atomic<bool> done{false};
  int first_status = 0;
  std::thread rebuild([&] {
    first_status = svc->rebuild("secret", "").status;
    done = true;
  });
  while (!svc->rebuild_running() && !done) std::this_thread::yield();
  bool saw_conflict = false;
  std::size_t queries = 0;
  const json q = points_of(ensure_normalized(big.dataset.samples[0].series));
  while (!done) {
    if (!saw_conflict) saw_conflict = svc->rebuild("secret", "").status == 409;
    const auto r = svc->query_sketch(q.dump());
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body["results"][0]["id"], big.dataset.samples[0].series.id);
    ++queries;
  }
  rebuild.join();
  EXPECT_EQ(first_status, 200);
  EXPECT_TRUE(saw_conflict);
  EXPECT_GT(queries, 0u);
  EXPECT_EQ(svc->snapshot()->generation, 2u);
}

TEST(HttpServer, RoutesOverLoopback) {
  const auto& a = artifacts();
  auto svc = loaded_service(a);
  HttpServer server(*svc, "127.0.0.1", 0, 4);
  const int port = server.start();
  ASSERT_GT(port, 0);
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");

  const Series member = ensure_normalized(a.dataset.samples[5].series);
  auto sk = cli.Post("/api/query/sketch", points_of(member).dump(), "application/json");
  ASSERT_TRUE(sk);
  EXPECT_EQ(sk->status, 200);
  EXPECT_EQ(json::parse(sk->body)["results"][0]["id"], member.id);

  auto bad = cli.Post("/api/query/sketch", "{", "application/json");
  EXPECT_EQ(bad->status, 400);
  auto text = cli.Post("/api/query/text", R"({"text":"liquidity"})", "application/json");
  EXPECT_EQ(text->status, 200);
  auto unmatch = cli.Post("/api/query/text", R"({"text":"xyzzy"})", "application/json");
  EXPECT_EQ(unmatch->status, 422);
  auto series = cli.Get(("/api/series/" + member.id).c_str());
  EXPECT_EQ(series->status, 200);
  EXPECT_EQ(cli.Get("/api/series/nope")->status, 404);
  auto info = cli.Get("/api/info");
  EXPECT_EQ(json::parse(info->body)["sketch_index"]["size"], 200);
  EXPECT_EQ(cli.Post("/api/admin/rebuild", "", "application/json")->status, 401);
  httplib::Headers h{{"X-Admin-Token", "secret"}};
  auto rb = cli.Post("/api/admin/rebuild", h, "", "application/json");
  EXPECT_EQ(rb->status, 200);
  EXPECT_EQ(cli.Get("/api/nowhere")->status, 404);
  server.stop();
}
