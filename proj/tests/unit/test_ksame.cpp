// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "embanon/errors.hpp"
#include "embanon/ksame.hpp"
#include "embanon/metrics.hpp"
#include "oracles.hpp"

using namespace embanon;

namespace {

EmbeddingDataset one_class(Matrix x) {
  EmbeddingDataset ds;
  ds.labels.assign(x.rows(), 0);
  ds.features = std::move(x);
  ds.num_classes = 1;
  return ds;
}

std::vector<std::size_t> sizes(const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<std::size_t> s;
  for (const auto& g : groups) s.push_back(g.size());
  return s;
}

}  // namespace

TEST_CASE("k=2 on the collinear points 0, 1, 10, 11 pairs neighbours") {
  const auto ds = one_class(Matrix::from_rows({{0}, {1}, {10}, {11}}));
  const auto groups = cluster_within_class(ds.features, 2);
  CHECK(groups == std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}});
  const auto out = ksame_anonymize(ds, {2, 0});
  CHECK(out.features == Matrix::from_rows({{0.5F}, {0.5F}, {10.5F}, {10.5F}}));
}

TEST_CASE("k=1 is the identity") {
  std::mt19937_64 g(1);
  for (int t = 0; t < 10; ++t) {
    const auto ds = oracle::random_dataset(g, oracle::uniform_int(g, 1, 40), 5, 3);
    const auto out = ksame_anonymize(ds, {1, 0});
    CHECK(bitwise_equal(out.features, ds.features));
    CHECK(out.labels == ds.labels);
  }
}

TEST_CASE("k at or above the class size collapses each class to its mean") {
  std::mt19937_64 g(2);
  const auto ds = oracle::random_dataset(g, 30, 4, 3);
  const auto counts = ds.class_counts();
  const std::size_t k = *std::max_element(counts.begin(), counts.end());
  for (const std::size_t kk : {k, k + 5}) {
    const auto out = ksame_anonymize(ds, {kk, 0});
    for (std::uint32_t c = 0; c < 3; ++c) {
      std::vector<double> mean(4, 0.0);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] != c) continue;
        for (std::size_t j = 0; j < 4; ++j) mean[j] += ds.features(i, j) / static_cast<double>(counts[c]);
      }
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] != c) continue;
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(out.features(i, j) - mean[j]) <= 1e-6);
      }
    }
  }
}

TEST_CASE("five points with k=2 form groups of sizes 2, 2 and 1") {
  const auto x = Matrix::from_rows({{0}, {5}, {1}, {6}, {20}});
  const auto groups = cluster_within_class(x, 2);
  CHECK(sizes(groups) == std::vector<std::size_t>{2, 2, 1});
  CHECK(groups == std::vector<std::vector<std::size_t>>{{0, 2}, {1, 3}, {4}});
}

TEST_CASE("equidistant candidates go to the lower index") {
  const auto x = Matrix::from_rows({{0}, {1}, {-1}, {1}});
  const auto groups = cluster_within_class(x, 2);
  CHECK(groups[0] == std::vector<std::size_t>{0, 1});
  CHECK(groups[1] == std::vector<std::size_t>{2, 3});
  const auto three = cluster_within_class(x, 3);
  CHECK(three[0] == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("groups replay the greedy trace on random points") {
  std::mt19937_64 g(3);
  for (int t = 0; t < 30; ++t) {
    const auto x = oracle::random_matrix(g, 20, oracle::uniform_int(g, 1, 5));
    const std::size_t k = 4;
    const auto groups = cluster_within_class(x, k);
    CHECK(groups == oracle::replay_greedy_groups(x, k));

    // At each step, no unassigned outsider is closer to the anchor than any
    // member, and members are within twice the anchor's group radius.
    std::set<std::size_t> unassigned;
    for (std::size_t i = 0; i < 20; ++i) unassigned.insert(i);
    for (const auto& grp : groups) {
      CHECK(grp.front() == *unassigned.begin());
      double radius = 0.0;
      for (const auto m : grp) radius = std::max(radius, oracle::euclid(x.row(grp[0]), x.row(m)));
      for (const auto m : grp) unassigned.erase(m);
      for (const auto o : unassigned) CHECK(oracle::euclid(x.row(grp[0]), x.row(o)) >= radius);
      for (const auto a : grp) {
        for (const auto b : grp) CHECK(oracle::euclid(x.row(a), x.row(b)) <= 2.0 * radius + 1e-12);
      }
    }
    CHECK(unassigned.empty());
  }
}

TEST_CASE("every output row is its group mean and groups stay inside a class") {
  std::mt19937_64 g(4);
  for (int t = 0; t < 20; ++t) {
    const auto ds = oracle::random_dataset(g, oracle::uniform_int(g, 5, 60), 3,
                                           static_cast<std::uint32_t>(oracle::uniform_int(g, 1, 4)));
    const std::size_t k = oracle::uniform_int(g, 2, 6);
    const auto out = ksame_anonymize(ds, {k, 0});
    CHECK(out.labels == ds.labels);
    CHECK(out.class_counts() == ds.class_counts());
    for (std::uint32_t c = 0; c < ds.num_classes; ++c) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] == c) rows.push_back(i);
      }
      if (rows.empty()) continue;
      const auto sub = ds.subset(rows).features;
      const auto expected = oracle::group_means(sub, oracle::replay_greedy_groups(sub, k));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(out.features(rows[r], j) - expected(r, j)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("k-Same never increases dispersion") {
  std::mt19937_64 g(5);
  for (int t = 0; t < 20; ++t) {
    const auto ds = oracle::random_dataset(g, oracle::uniform_int(g, 20, 80), oracle::uniform_int(g, 2, 8),
                                           static_cast<std::uint32_t>(oracle::uniform_int(g, 1, 4)));
    const double before = max_dispersion(ds).total;
    for (const std::size_t k : {2, 5, 10, 15}) {
      CHECK(max_dispersion(ksame_anonymize(ds, {k, 0})).total <= before);
    }
  }
}

TEST_CASE("provenance records the parameters and the grouping rule") {
  std::mt19937_64 g(6);
  auto ds = oracle::random_dataset(g, 9, 2, 2);
  ds.provenance = {{"source", "unit"}};
  const auto out = ksame_anonymize(ds, {3, 42});
  CHECK(out.provenance.at("method") == "ksame");
  CHECK(out.provenance.at("k") == 3);
  CHECK(out.provenance.at("seed") == 42);
  CHECK(out.provenance.at("clustering_rule") == std::string(kKSameClusteringRule));
  CHECK(out.provenance.at("source") == ds.provenance);
  CHECK_THROWS_AS(ksame_anonymize(ds, {0, 0}), ConfigError);
  CHECK_THROWS_AS(cluster_within_class(ds.features, 0), ConfigError);
}
