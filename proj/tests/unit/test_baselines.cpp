#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tsr/baselines.hpp"
#include "tsr/error.hpp"

using namespace tsr;
using nn::Matrix;
using nn::Vector;

namespace {

Series unit_series(std::string id, std::vector<double> v) {
  Series s;
  s.id = std::move(id);
  s.values = std::move(v);
  s.normalized = true;
  return s;
}

std::vector<Series> random_series(std::size_t n, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Series> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(len);
    for (auto& x : v) x = u(rng);
    out.push_back(unit_series("s" + std::to_string(i), v));
  }
  return out;
}

double naive_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(RawDatabase, StoresTrendAndVolatility) {
  const auto series = random_series(5, 30, 1);
  const auto db = RawDatabase::from_series(series, 30);
  ASSERT_EQ(db.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(db.id(i), series[i].id);
    const auto t = db.trend(i);
    EXPECT_TRUE(std::equal(t.begin(), t.end(), series[i].values.begin()));
    const auto o = oracle::window_std(series[i].values, 4);
    for (std::size_t j = 0; j < 30; ++j) EXPECT_NEAR(db.vol(i)[j], o[j], 1e-12);
  }
  EXPECT_EQ(*db.find("s3"), 3u);
  RawDatabase bad(30);
  EXPECT_THROW(bad.add(unit_series("x", std::vector<double>(29, 0.5))), ShapeError);
}

TEST(BruteForce, HandDistances) {
  RawDatabase db(3, VolConfig{1});
  db.add(unit_series("near", {0.0, 0.5, 1.0}));
  db.add(unit_series("far", {1.0, 1.0, 1.0}));
  const std::vector<double> q{0.0, 0.5, 0.9};
  const auto r = bf_search(db, q, 2);
  ASSERT_EQ(r.hits.size(), 2u);
  EXPECT_EQ(r.order, ScoreOrder::distance_ascending);
  EXPECT_EQ(r.hits[0].id, "near");
  EXPECT_NEAR(r.hits[0].score, 0.1, 1e-15);
  EXPECT_EQ(r.hits[1].id, "far");
  EXPECT_NEAR(r.hits[1].score, std::sqrt(1.0 + 0.25 + 0.01), 1e-15);
}

TEST(BruteForce, MatchesNaiveOracle) {
  const auto series = random_series(200, 30, 2);
  const auto db = RawDatabase::from_series(series, 30);
  const auto queries = random_series(20, 30, 3);
  for (const auto& q : queries) {
    const auto qv = oracle::window_std(q.values, 4);
    std::vector<std::pair<std::string, double>> trend_only, avg;
    for (const auto& s : series) {
      const auto sv = oracle::window_std(s.values, 4);
      trend_only.emplace_back(s.id, naive_l2(q.values, s.values));
      avg.emplace_back(s.id, (naive_l2(q.values, s.values) + naive_l2(qv, sv)) / 2.0);
    }
    const auto want_bf = oracle::full_sort(trend_only, false, 10);
    const auto want_avg = oracle::full_sort(avg, false, 10);
    const auto got_bf = bf_search(db, q, 10);
    const auto got_avg = bf_avg_search(db, q, volatility_series(q), 10);
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_EQ(got_bf.hits[i].id, want_bf[i].first);
      EXPECT_NEAR(got_bf.hits[i].score, want_bf[i].second, 1e-12);
      EXPECT_EQ(got_avg.hits[i].id, want_avg[i].first);
      EXPECT_NEAR(got_avg.hits[i].score, want_avg[i].second, 1e-12);
    }
  }
}

TEST(BruteForce, TiesAndShortDatabases) {
  RawDatabase db(3, VolConfig{1});
  db.add(unit_series("b", {0.2, 0.2, 0.2}));
  db.add(unit_series("a", {0.2, 0.2, 0.2}));
  const auto r = bf_search(db, std::vector<double>{0.0, 0.0, 0.0}, 5);
  ASSERT_EQ(r.k_returned(), 2u);
  EXPECT_EQ(r.k_requested, 5u);
  EXPECT_EQ(r.hits[0].id, "a");
  EXPECT_EQ(r.hits[1].id, "b");
  EXPECT_THROW(bf_search(db, std::vector<double>{0.0, 0.0}, 1), ShapeError);
  EXPECT_THROW(bf_search(db, std::vector<double>{0.0, 0.0, 0.0}, 0), ParameterError);
}

TEST(Pca, MatchesJacobiOracle) {
  const auto series = random_series(100, 12, 4);
  Matrix samples(12, 100);
  for (Eigen::Index c = 0; c < 100; ++c)
    for (Eigen::Index r = 0; r < 12; ++r) samples(r, c) = series[static_cast<std::size_t>(c)].values[static_cast<std::size_t>(r)];
  const auto pca = fit_channel_pca(samples, 5);

  std::vector<double> mean(12, 0.0);
  for (Eigen::Index c = 0; c < 100; ++c)
    for (std::size_t r = 0; r < 12; ++r) mean[r] += samples(static_cast<Eigen::Index>(r), c) / 100.0;
  std::vector<std::vector<double>> cov(12, std::vector<double>(12, 0.0));
  for (Eigen::Index c = 0; c < 100; ++c)
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j)
        cov[i][j] += (samples(static_cast<Eigen::Index>(i), c) - mean[i]) *
                     (samples(static_cast<Eigen::Index>(j), c) - mean[j]) / 99.0;
  auto [values, vectors] = oracle::jacobi_eigen(cov);

  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(pca.eigenvalues(static_cast<Eigen::Index>(i)), values[i], 1e-10);
  for (std::size_t k = 0; k < 5; ++k) {
    // Oracle sign convention: largest-magnitude entry positive.
    auto& v = vectors[k];
    std::size_t arg = 0;
    for (std::size_t j = 1; j < 12; ++j)
      if (std::fabs(v[j]) > std::fabs(v[arg])) arg = j;
    if (v[arg] < 0)
      for (double& x : v) x = -x;
    for (std::size_t j = 0; j < 12; ++j)
      EXPECT_NEAR(pca.axes(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)), v[j], 1e-8);
  }
  const Matrix gram = pca.axes * pca.axes.transpose();
  EXPECT_LT((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, RankTwoDataHasVanishingTail) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Vector a = Vector::LinSpaced(10, 0.0, 1.0);
  Vector b(10);
  for (Eigen::Index i = 0; i < 10; ++i) b(i) = std::sin(static_cast<double>(i));
  Matrix samples(10, 50);
  for (Eigen::Index c = 0; c < 50; ++c) samples.col(c) = n(rng) * a + n(rng) * b;
  const auto pca = fit_channel_pca(samples, 4);
  EXPECT_GT(pca.eigenvalues(1), 1e-3);
  for (Eigen::Index i = 2; i < 10; ++i) EXPECT_LE(std::fabs(pca.eigenvalues(i)), 1e-10);
  // Two components reconstruct every sample exactly.
  const auto pca2 = fit_channel_pca(samples, 2);
  for (Eigen::Index c = 0; c < 50; ++c) {
    const Vector x = samples.col(c);
    const Vector back = pca2.reconstruct(pca2.project(std::span<const double>(x.data(), 10)));
    EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Pca, MoreComponentsReconstructBetter) {
  const auto series = random_series(200, 30, 6);
  Matrix samples(30, 200);
  for (Eigen::Index c = 0; c < 200; ++c)
    samples.col(c) = Eigen::Map<const Vector>(series[static_cast<std::size_t>(c)].values.data(), 30);
  auto error = [&](std::size_t k) {
    const auto p = fit_channel_pca(samples, k);
    double e = 0.0;
    for (Eigen::Index c = 0; c < 200; ++c) {
      const Vector x = samples.col(c);
      e += (p.reconstruct(p.project(std::span<const double>(x.data(), 30))) - x).squaredNorm();
    }
    return e;
  };
  EXPECT_LT(error(16), error(8));
}

TEST(Pca, SignCanonicalization) {
  Matrix axes(2, 3);
  axes << 0.1, -0.9, 0.3, 0.5, -0.5, 0.1;
  canonicalize_signs(axes);
  EXPECT_EQ(axes(0, 1), 0.9);
  EXPECT_EQ(axes(0, 0), -0.1);
  EXPECT_EQ(axes(1, 0), 0.5);  // tie: first entry decides
}

TEST(Pca, NeedsMoreSamplesThanComponents) {
  EXPECT_THROW(fit_channel_pca(Matrix::Zero(30, 16), 16), DataError);
  EXPECT_THROW(fit_channel_pca(Matrix::Zero(30, 40), 0), ParameterError);
}

TEST(Pca, EmbeddingsAreUnitAndIndexed) {
  const auto series = random_series(60, 30, 7);
  const auto db = RawDatabase::from_series(series, 30);
  const auto model = fit_pca(db, 16);
  EXPECT_EQ(model.trend.components(), 16u);
  const auto index = build_pca_index(model, db);
  EXPECT_EQ(index.size(), 60u);
  EXPECT_EQ(index.dim(), 32u);
  for (std::size_t i = 0; i < 60; ++i) {
    const Vector e = pca_embed(model, db.trend(i), db.vol(i));
    EXPECT_NEAR(e.norm(), 1.0, 1e-12);
    EXPECT_NEAR(e.head(16).squaredNorm(), 0.5, 1e-12);
    EXPECT_EQ(index.query(std::span<const double>(e.data(), 32), 1).hits[0].id, db.id(i));
  }
  const auto mean_t = std::vector<double>(model.trend.mean.data(), model.trend.mean.data() + 30);
  const auto mean_v = std::vector<double>(model.vol.mean.data(), model.vol.mean.data() + 30);
  const Vector zero = pca_embed(model, mean_t, mean_v);
  EXPECT_NEAR(zero(0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(zero(16), 1.0 / std::sqrt(2.0), 1e-15);
}
