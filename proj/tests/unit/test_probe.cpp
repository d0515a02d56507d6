// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "embanon/decoder.hpp"
#include "embanon/errors.hpp"
#include "embanon/probe.hpp"
#include "embanon/synth.hpp"
#include "oracles.hpp"

using namespace embanon;

namespace {

std::vector<std::uint8_t> as_positive(std::initializer_list<int> v) {
  std::vector<std::uint8_t> out;
  for (const int x : v) out.push_back(static_cast<std::uint8_t>(x));
  return out;
}

EmbeddingDataset blobs(std::uint64_t seed, std::size_t per_class, std::size_t classes = 2, std::size_t d = 2,
                       double separation = 6.0, double stddev = 0.5) {
  Rng rng(seed);
  return synth_mixture(MixtureSpec::on_axes(classes, d, separation, stddev), per_class, d, rng);
}

double accuracy(const ProbeParams& p, const EmbeddingDataset& ds) {
  const auto s = predict_scores(p, ds.features);
  std::size_t right = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = s.row(i);
    const auto best = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    right += best == ds.labels[i] ? 1 : 0;
  }
  return static_cast<double>(right) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("AUC of a perfect ranking is one") {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  CHECK(auc_binary(s, as_positive({1, 1, 0, 0})) == 1.0);
  const std::vector<double> s2{0.9, 0.2, 0.8, 0.1};
  CHECK(auc_binary(s2, as_positive({1, 0, 1, 0})) == 1.0);
}

TEST_CASE("a single inversion among four positive-negative pairs gives 0.75") {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  CHECK(auc_binary(s, as_positive({1, 0, 1, 0})) == 0.75);
}

TEST_CASE("all-tied scores give one half") {
  const std::vector<double> s(6, 0.3);
  CHECK(auc_binary(s, as_positive({1, 0, 1, 0, 0, 1})) == 0.5);
  MatrixD scores(6, 3, 1.0 / 3.0);
  const std::vector<std::uint32_t> labels{0, 1, 2, 0, 1, 2};
  const auto r = auc_macro(scores, labels);
  CHECK(r.macro == 0.5);
  for (const double v : r.per_class) CHECK(v == 0.5);
}

TEST_CASE("AUC equals brute-force pair counting") {
  std::mt19937_64 g(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = oracle::uniform_int(g, 2, 200);
    std::vector<double> s(n);
    std::vector<std::uint8_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(oracle::uniform_int(g, 0, 20)) / 4.0;
      pos[i] = static_cast<std::uint8_t>(oracle::uniform_int(g, 0, 1));
    }
    pos[0] = 1;
    pos[1] = 0;
    CHECK(std::abs(auc_binary(s, pos) - oracle::brute_auc(s, pos)) <= 1e-12);
  }
}

TEST_CASE("AUC is invariant under strictly increasing transforms") {
  std::mt19937_64 g(2);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = oracle::uniform_int(g, 4, 80);
    std::vector<double> s(n), e(n), c(n);
    std::vector<std::uint8_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(oracle::uniform_int(g, 0, 10)) - 5.0;
      e[i] = std::exp(s[i]);
      c[i] = s[i] * s[i] * s[i] + 7.0;
      pos[i] = static_cast<std::uint8_t>(i % 2);
    }
    const double base = auc_binary(s, pos);
    CHECK(auc_binary(e, pos) == base);
    CHECK(auc_binary(c, pos) == base);
  }
}

TEST_CASE("macro AUC averages evaluable classes and reports skipped ones") {
  const auto scores = MatrixD::from_rows({{0.7, 0.2, 0.1}, {0.2, 0.7, 0.1}, {0.6, 0.3, 0.1}, {0.1, 0.8, 0.1}});
  const std::vector<std::uint32_t> labels{0, 1, 0, 1};
  const auto r = auc_macro(scores, labels);
  CHECK(r.skipped_classes == std::vector<std::uint32_t>{2});
  CHECK(std::isnan(r.per_class[2]));
  CHECK(r.per_class[0] == 1.0);
  CHECK(r.per_class[1] == 1.0);
  CHECK(r.macro == 1.0);

  const std::vector<std::uint32_t> single{0, 0, 0, 0};
  CHECK_THROWS_AS(auc_macro(scores, single), DataError);
  CHECK_THROWS_AS(auc_binary(std::vector<double>{1.0, 2.0}, as_positive({1, 1})), DataError);
}

TEST_CASE("macro AUC matches per-class brute force on random multi-class scores") {
  std::mt19937_64 g(3);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = oracle::uniform_int(g, 10, 200);
    const auto c = static_cast<std::uint32_t>(oracle::uniform_int(g, 2, 5));
    MatrixD s(n, c);
    for (auto& v : s.values()) v = oracle::uniform(g, 0, 1);
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % c);
    const auto r = auc_macro(s, labels);
    double sum = 0.0;
    for (std::uint32_t k = 0; k < c; ++k) {
      std::vector<double> col(n);
      std::vector<std::uint8_t> pos(n);
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = s(i, k);
        pos[i] = labels[i] == k ? 1 : 0;
      }
      const double ref = oracle::brute_auc(col, pos);
      CHECK(std::abs(r.per_class[k] - ref) <= 1e-12);
      sum += ref;
    }
    CHECK(std::abs(r.macro - sum / c) <= 1e-12);
  }
}

TEST_CASE("zero parameters predict the uniform distribution and rows sum to one") {
  const auto p = init_probe(4, 5);
  std::mt19937_64 g(4);
  const auto s = predict_scores(p, oracle::random_matrix(g, 6, 4, -10, 10));
  for (const double v : s.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  ProbeParams q = init_probe(3, 4);
  for (auto& w : q.layer.weights.values()) w = static_cast<float>(oracle::uniform(g, -3, 3));
  const auto s2 = predict_scores(q, oracle::random_matrix(g, 50, 3, -10, 10));
  for (std::size_t i = 0; i < s2.rows(); ++i) {
    double sum = 0.0;
    for (const double v : s2.row(i)) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
  CHECK_THROWS_AS(predict_scores(q, Matrix(2, 5)), DimensionError);
}

TEST_CASE("probabilities are monotone in the logits") {
  ProbeParams p = init_probe(1, 2);
  p.layer.weights = Matrix::from_rows({{1.0F}, {-1.0F}});
  const auto s = predict_scores(p, Matrix::from_rows({{-2.0F}, {0.0F}, {1.0F}, {3.0F}}));
  for (std::size_t i = 1; i < 4; ++i) CHECK(s(i, 0) > s(i - 1, 0));
  CHECK(s(1, 0) == 0.5);
}

TEST_CASE("probe loss gradients match central differences at 64 bits") {
  std::mt19937_64 g(5);
  oracle::FiniteDifferenceStats stats;
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = oracle::uniform_int(g, 1, 6);
    const auto c = static_cast<std::uint32_t>(oracle::uniform_int(g, 2, 5));
    const std::size_t n = oracle::uniform_int(g, 1, 10);
    BasicDenseLayer<double> layer{MatrixD(c, d), std::vector<double>(c), Activation::Identity};
    for (auto& w : layer.weights.values()) w = oracle::uniform(g, -1, 1);
    for (auto& b : layer.bias) b = oracle::uniform(g, -1, 1);
    MatrixD x(n, d);
    for (auto& v : x.values()) v = oracle::uniform(g, -2, 2);
    std::vector<std::uint32_t> y(n);
    for (auto& v : y) v = static_cast<std::uint32_t>(oracle::uniform_int(g, 0, c - 1));
    oracle::check_probe_gradients(layer, x, y, stats);
  }
  CHECK(stats.checked > 200);
  CHECK(stats.skipped_at_kink == 0);
  CHECK(stats.max_relative_error < 1e-6);
}

TEST_CASE("probe loss of zero parameters is log C") {
  const BasicDenseLayer<double> layer{MatrixD(3, 2), std::vector<double>(3), Activation::Identity};
  const std::vector<std::uint32_t> y{0, 2};
  CHECK(probe_loss_and_gradients<double>(layer, MatrixD(2, 2, 1.0), y).loss == doctest::Approx(std::log(3.0)));
}

TEST_CASE("separable blobs are fitted perfectly") {
  const auto train = blobs(1, 100);
  const auto val = blobs(2, 30);
  ProbeTrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 16;
  const auto result = train_probe(train, val, cfg);
  CHECK(accuracy(result.params, train) == 1.0);
  CHECK(auc_macro(predict_scores(result.params, val.features), val.labels).macro == 1.0);
  const auto& h = result.history;
  for (const auto& e : h.epochs) CHECK(h.epochs[h.best_epoch].val_loss <= e.val_loss);
  CHECK(h.epochs[h.best_epoch].val_loss < h.initial_val_loss);
}

TEST_CASE("zero epochs return the initialization and a fixed seed fixes the result") {
  const auto train = blobs(3, 40);
  const auto val = blobs(4, 10);
  ProbeTrainConfig cfg;
  cfg.max_epochs = 0;
  const auto none = train_probe(train, val, cfg);
  CHECK(none.params == init_probe(2, 2));
  CHECK(none.history.epochs.empty());

  cfg.max_epochs = 30;
  cfg.seed = 9;
  const auto a = train_probe(train, val, cfg);
  const auto b = train_probe(train, val, cfg);
  CHECK(a.params == b.params);
  CHECK(a.history.to_json() == b.history.to_json());
  cfg.seed = 10;
  CHECK_FALSE(train_probe(train, val, cfg).params == a.params);
}

TEST_CASE("standardization is fitted on the first batch and stored with the probe") {
  auto train = blobs(5, 50);
  for (std::size_t i = 0; i < train.size(); ++i) train.features(i, 1) = train.features(i, 1) * 100.0F + 1000.0F;
  auto val = blobs(6, 10);
  for (std::size_t i = 0; i < val.size(); ++i) val.features(i, 1) = val.features(i, 1) * 100.0F + 1000.0F;
  ProbeTrainConfig cfg;
  cfg.standardize = true;
  cfg.max_epochs = 20;
  cfg.learning_rate = 0.01;
  const auto r = train_probe(train, val, cfg);
  REQUIRE(r.params.standardize);
  CHECK(r.params.shift.size() == 2);
  CHECK(r.params.shift[1] > 500.0F);
  CHECK(r.params.scale[1] > 10.0F);
  CHECK(accuracy(r.params, val) == 1.0);
}

TEST_CASE("training rejects mismatched validation data") {
  const auto train = blobs(7, 10);
  const auto val = blobs(8, 10, 3, 3);
  CHECK_THROWS_AS(train_probe(train, val, {}), DimensionError);
  ProbeTrainConfig cfg;
  cfg.patience = 0;
  CHECK_THROWS_AS(train_probe(train, blobs(8, 10), cfg), ConfigError);
  CHECK_THROWS_AS(ProbeTrainConfig::from_json({{"epochs", 3}}), ConfigError);
  cfg.patience = 4;
  CHECK(ProbeTrainConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
}

TEST_CASE("probe files round-trip with standardization and metadata") {
  std::mt19937_64 g(6);
  ProbeParams p = init_probe(3, 2);
  for (auto& w : p.layer.weights.values()) w = static_cast<float>(oracle::uniform(g, -1, 1));
  p.layer.bias = {0.25F, -0.5F};
  p.standardize = true;
  p.shift = {1.0F, 2.0F, 3.0F};
  p.scale = {0.5F, 1.5F, 2.5F};
  oracle::TempDir dir("probe");
  save_probe(dir / "p.probe", p, {{"seed", 4}});
  nlohmann::json meta;
  const auto back = load_probe(dir / "p.probe", &meta);
  CHECK(back == p);
  CHECK(meta.at("seed") == 4);
  auto bytes = serialize_probe(p, {});
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "PROBEW01");
  bytes[30] ^= 0x40;
  CHECK_THROWS_AS(deserialize_probe(bytes), CorruptionError);
  const auto dec_bytes = serialize_decoder(oracle::random_decoder(g, 2, 2, 3));
  CHECK_THROWS_AS(deserialize_probe(dec_bytes), FormatError);
}

TEST_CASE("a stream epoch is ceil(reference size / batch size) pulls") {
  std::mt19937_64 g(7);
  SampleStream stream(std::make_shared<const CvaeDecoder>(oracle::random_decoder(g, 2, 2, 2)),
                      CategoricalDistribution({0.5, 0.5}), 64, {});
  CHECK(StreamSource(stream, 600).batches_per_epoch() == 10);
  CHECK(StreamSource(stream, 640).batches_per_epoch() == 10);
  CHECK(StreamSource(stream, 641).batches_per_epoch() == 11);
  CHECK(StreamSource(stream, 1).batches_per_epoch() == 1);
}

TEST_CASE("online training sees only decoder batches and is bit-reproducible") {
  std::mt19937_64 g(8);
  const auto dec = std::make_shared<const CvaeDecoder>(oracle::random_decoder(g, 3, 2, 2, 16, 8, 1.0));
  const CategoricalDistribution dist({0.5, 0.5});
  const auto val = blobs(9, 20);
  ProbeTrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.batch_size = 32;

  SampleStream spy_stream(dec, dist, cfg.batch_size, {1.0, 21});
  oracle::RecordingSource spy(spy_stream, 100);
  const auto spied = train_probe(spy, val, cfg);

  SampleStream plain_stream(dec, dist, cfg.batch_size, {1.0, 21});
  StreamSource plain(plain_stream, 100);
  const auto reference = train_probe(plain, val, cfg);
  CHECK(spied.params == reference.params);

  // Every batch the trainer consumed is exactly what the decoder generates.
  SampleStream replay(dec, dist, cfg.batch_size, {1.0, 21});
  CHECK(spy.seen.size() == spied.history.epochs.size() * 4);
  for (const auto& b : spy.seen) {
    const auto expected = replay.next();
    CHECK(b.labels == expected.labels);
    CHECK(bitwise_equal(b.features, expected.features));
  }

  SampleStream other_stream(dec, dist, cfg.batch_size, {1.0, 22});
  StreamSource other(other_stream, 100);
  CHECK_FALSE(train_probe(other, val, cfg).params == reference.params);
}
