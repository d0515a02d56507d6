// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "embanon/cvae.hpp"
#include "embanon/dataset.hpp"
#include "embanon/decoder.hpp"
#include "embanon/probe.hpp"
#include "embanon/report.hpp"

namespace embanon {

std::string tool_version();

/// One declarative experiment. JSON keys match the field names; unknown keys
/// are rejected. Per-cell seeds are derived from `seeds`, so any seed inside
/// `cvae` or `probe` is overwritten.
struct ExperimentConfig {
  std::optional<std::filesystem::path> train;
  /// Clean validation set; when absent, a stratified split of `train`.
  std::optional<std::filesystem::path> validation;
  std::filesystem::path test;
  /// Pre-trained decoder; when absent, one is trained per seed.
  std::optional<std::filesystem::path> decoder;
  std::filesystem::path output_dir = "results";

  std::vector<std::string> methods{"baseline", "ksame", "cvae-offline", "cvae-online"};
  std::vector<std::size_t> ksame_k{2, 5, 10, 15};
  double validation_fraction = 0.1;
  std::uint64_t split_seed = 0;
  double sampling_variance = 1.0;
  std::vector<double> sampling_variance_sweep{0.5, 1.0, 1.5};
  std::vector<double> noise_sigma{0.0, 1.0, 2.0, 3.0};
  std::size_t noise_replicas = 3;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  CvaeTrainConfig cvae;
  ProbeTrainConfig probe;

  void validate() const;
  nlohmann::json to_json() const;
  /// Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Datasets and decoder an experiment runs on, already validated against each other.
struct ExperimentInputs {
  std::optional<EmbeddingDataset> train;
  EmbeddingDataset validation;
  EmbeddingDataset test;
  std::optional<CvaeDecoder> decoder;
};

/// Reads every configured file. Throws ConfigError when a requested method
/// needs an input that is not configured.
ExperimentInputs load_inputs(const ExperimentConfig& config);

/// `config` with "baseline" prepended to the methods when it is missing.
ExperimentConfig with_baseline(ExperimentConfig config);

/// Per (method, seed): anonymize, train a probe, clean-test AUC, nearest-neighbour
/// distance to the training set and dispersion; then seed averages. The
/// baseline method always runs, listed or not.
MetricsReport run_evaluate(const ExperimentConfig& config, const ExperimentInputs& inputs);

/// Per (method, seed, sampling variance where it applies): one probe, then
/// test AUC at every noise level averaged over noise replicas. The noise-free
/// level is evaluated once on the clean test set.
MetricsReport run_robustness(const ExperimentConfig& config, const ExperimentInputs& inputs);

/// Online path on its own: a probe trained only on decoder samples, scored on `test`.
struct OnlineProbeResult {
  ProbeTrainResult probe;
  AucReport auc;
};
OnlineProbeResult run_online_probe(const CvaeDecoder& decoder, const EmbeddingDataset& validation,
                                   const EmbeddingDataset& test, const ProbeTrainConfig& probe_config,
                                   double sampling_variance, std::uint64_t stream_seed);

}  // namespace embanon
