// SPDX-License-Identifier: Apache-2.0
#include "embanon/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "embanon/dataset_io.hpp"
#include "embanon/errors.hpp"
#include "embanon/ksame.hpp"
#include "embanon/metrics.hpp"
#include "embanon/rng.hpp"
#include "embanon/sampler.hpp"
#include "embanon/split.hpp"

#ifndef EMBANON_VERSION
#define EMBANON_VERSION "0.0.0"
#endif

namespace embanon {

std::string tool_version() { return EMBANON_VERSION; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const std::set<std::string> kMethods{"baseline", "ksame", "cvae-offline", "cvae-online"};

bool wants(const ExperimentConfig& c, const std::string& method) {
  return std::find(c.methods.begin(), c.methods.end(), method) != c.methods.end();
}

bool wants_cvae(const ExperimentConfig& c) { return wants(c, "cvae-offline") || wants(c, "cvae-online"); }

nlohmann::json path_json(const std::optional<std::filesystem::path>& p) {
  return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  const std::filesystem::path p(text);
  return p.is_absolute() || base.empty() ? p : base / p;
}

enum class MethodKind { Baseline, KSame, CvaeOffline, CvaeOnline };

struct Method {
  MethodKind kind;
  std::string name;
  std::size_t k = 0;

  bool is_cvae() const { return kind == MethodKind::CvaeOffline || kind == MethodKind::CvaeOnline; }
};

std::vector<Method> expand_methods(const ExperimentConfig& c) {
  std::vector<Method> out;
  for (const auto& m : c.methods) {
    if (m == "baseline") out.push_back({MethodKind::Baseline, m});
    else if (m == "cvae-offline") out.push_back({MethodKind::CvaeOffline, m});
    else if (m == "cvae-online") out.push_back({MethodKind::CvaeOnline, m});
    else {
      for (const auto k : c.ksame_k) out.push_back({MethodKind::KSame, "ksame-" + std::to_string(k), k});
    }
  }
  return out;
}

ProbeTrainConfig probe_config_for(const ExperimentConfig& c, std::uint64_t seed) {
  ProbeTrainConfig p = c.probe;
  p.seed = derive_seed(seed, "probe");
  return p;
}

/// Decoders for each seed: the configured one, or one trained with a derived seed.
class DecoderPool {
 public:
  DecoderPool(const ExperimentConfig& config, const ExperimentInputs& inputs) : config_(config), inputs_(inputs) {}

  const CvaeDecoder& get(std::uint64_t seed) {
    if (inputs_.decoder) return *inputs_.decoder;
    auto it = trained_.find(seed);
    if (it != trained_.end()) return it->second;
    if (!inputs_.train) throw ConfigError("cvae methods need either a decoder or a training set");
    CvaeTrainConfig cfg = config_.cvae;
    cfg.seed = derive_seed(seed, "cvae");
    const auto result = train_cvae(*inputs_.train, inputs_.validation, cfg);
    auto decoder = extract_decoder(result.params, decoder_training_metadata(*inputs_.train, cfg, result.history));
    histories_[std::to_string(seed)] = {{"best_epoch", result.history.best_epoch},
                                        {"epochs_run", result.history.epochs.size()},
                                        {"decoder_hash", decoder_hash(decoder)}};
    return trained_.emplace(seed, std::move(decoder)).first->second;
  }

  nlohmann::json histories() const { return histories_; }

 private:
  const ExperimentConfig& config_;
  const ExperimentInputs& inputs_;
  std::map<std::uint64_t, CvaeDecoder> trained_;
  nlohmann::json histories_ = nlohmann::json::object();
};

/// The first epoch of a stream, as one dataset.
EmbeddingDataset stream_snapshot(const CvaeDecoder& decoder, std::size_t batch_size, const SamplerConfig& sampler) {
  auto shared = std::make_shared<const CvaeDecoder>(decoder);
  SampleStream stream(shared, decoder_class_distribution(decoder), batch_size, sampler);
  const StreamSource source(stream, decoder_reference_size(decoder));
  std::vector<float> values;
  EmbeddingDataset out;
  for (std::size_t b = 0; b < source.batches_per_epoch(); ++b) {
    auto batch = stream.next();
    values.insert(values.end(), batch.features.values().begin(), batch.features.values().end());
    out.labels.insert(out.labels.end(), batch.labels.begin(), batch.labels.end());
  }
  out.features = Matrix(out.labels.size(), decoder.output_dim, std::move(values));
  out.num_classes = decoder.num_classes;
  out.provenance = {{"method", "cvae-online-snapshot"},
                    {"decoder_hash", decoder_hash(decoder)},
                    {"sampler", sampler.to_json()},
                    {"batches", source.batches_per_epoch()}};
  return out;
}

/// A trained probe plus the anonymized data it stands for.
struct Cell {
  ProbeTrainResult probe;
  EmbeddingDataset anonymized;
  double prototype_distance = kNaN;
};

Cell run_cell(const Method& method, std::uint64_t seed, double sampling_variance, const ExperimentConfig& config,
              const ExperimentInputs& inputs, DecoderPool& decoders) {
  const ProbeTrainConfig probe_cfg = probe_config_for(config, seed);
  Cell cell;
  auto require_train = [&]() -> const EmbeddingDataset& {
    if (!inputs.train) throw ConfigError("method " + method.name + " needs a training set");
    return *inputs.train;
  };

  switch (method.kind) {
    case MethodKind::Baseline:
      cell.anonymized = require_train();
      break;
    case MethodKind::KSame:
      cell.anonymized = ksame_anonymize(require_train(), {method.k, seed});
      break;
    case MethodKind::CvaeOffline: {
      const auto& decoder = decoders.get(seed);
      const SamplerConfig sampler{sampling_variance, derive_seed(seed, "sampler")};
      cell.anonymized = replicate_proportions(decoder, require_train(), sampler);
      cell.prototype_distance = mean_prototype_distance(cell.anonymized, class_prototypes(decoder));
      break;
    }
    case MethodKind::CvaeOnline: {
      const auto& decoder = decoders.get(seed);
      const SamplerConfig sampler{sampling_variance, derive_seed(seed, "stream")};
      auto shared = std::make_shared<const CvaeDecoder>(decoder);
      SampleStream stream(shared, decoder_class_distribution(decoder), probe_cfg.batch_size, sampler);
      StreamSource source(stream, decoder_reference_size(decoder));
      cell.probe = train_probe(source, inputs.validation, probe_cfg);
      cell.anonymized = stream_snapshot(decoder, probe_cfg.batch_size, sampler);
      cell.prototype_distance = mean_prototype_distance(cell.anonymized, class_prototypes(decoder));
      return cell;
    }
  }
  cell.probe = train_probe(cell.anonymized, inputs.validation, probe_cfg);
  return cell;
}

nlohmann::json report_metadata(const std::string& command, const ExperimentConfig& config,
                               const ExperimentInputs& inputs) {
  nlohmann::json hashes = {{"validation", dataset_hash(inputs.validation)}, {"test", dataset_hash(inputs.test)}};
  if (inputs.train) hashes["train"] = dataset_hash(*inputs.train);
  if (inputs.decoder) hashes["decoder"] = decoder_hash(*inputs.decoder);
  return {{"tool", "embanon"},
          {"version", tool_version()},
          {"command", command},
          {"config", config.to_json()},
          {"inputs", std::move(hashes)},
          {"rng", std::string(Rng::algorithm_id)}};
}

nlohmann::json cell_json(const Method& method, std::uint64_t seed, double sv, const Cell& cell) {
  return {{"method", method.name},
          {"seed", seed},
          {"sampling_variance", std::isnan(sv) ? nlohmann::json(nullptr) : nlohmann::json(sv)},
          {"probe_best_epoch", cell.probe.history.best_epoch},
          {"probe_epochs_run", cell.probe.history.epochs.size()},
          {"anonymized_rows", cell.anonymized.size()}};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("experiment: methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!kMethods.contains(m)) throw ConfigError("experiment: unknown method '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("experiment: method '" + m + "' listed twice");
  }
  if (wants(*this, "ksame")) {
    if (ksame_k.empty()) throw ConfigError("experiment: ksame_k must not be empty");
    for (const auto k : ksame_k) {
      if (k == 0) throw ConfigError("experiment: every ksame_k must be >= 1");
    }
    if (std::set<std::size_t>(ksame_k.begin(), ksame_k.end()).size() != ksame_k.size()) {
      throw ConfigError("experiment: ksame_k has duplicates");
    }
  }
  if (test.empty()) throw ConfigError("experiment: test path is required");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("experiment: validation_fraction must lie in (0, 1)");
  }
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(sampling_variance)) throw ConfigError("experiment: sampling_variance must be > 0");
  if (sampling_variance_sweep.empty()) throw ConfigError("experiment: sampling_variance_sweep must not be empty");
  for (const double v : sampling_variance_sweep) {
    if (!positive(v)) throw ConfigError("experiment: sampling_variance_sweep entries must be > 0");
  }
  if (noise_sigma.empty()) throw ConfigError("experiment: noise_sigma must not be empty");
  for (const double s : noise_sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("experiment: noise_sigma entries must be >= 0");
  }
  if (noise_replicas == 0) throw ConfigError("experiment: noise_replicas must be >= 1");
  if (seeds.empty()) throw ConfigError("experiment: seeds must not be empty");
  cvae.validate();
  probe.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"train", path_json(train)},
          {"validation", path_json(validation)},
          {"test", test.generic_string()},
          {"decoder", path_json(decoder)},
          {"output_dir", output_dir.generic_string()},
          {"methods", methods},
          {"ksame_k", ksame_k},
          {"validation_fraction", validation_fraction},
          {"split_seed", split_seed},
          {"sampling_variance", sampling_variance},
          {"sampling_variance_sweep", sampling_variance_sweep},
          {"noise_sigma", noise_sigma},
          {"noise_replicas", noise_replicas},
          {"seeds", seeds},
          {"cvae", cvae.to_json()},
          {"probe", probe.to_json()}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  auto optional_path = [&](const nlohmann::json& v) -> std::optional<std::filesystem::path> {
    if (v.is_null()) return std::nullopt;
    return resolve(base_dir, v.get<std::string>());
  };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "train") c.train = optional_path(value);
      else if (key == "validation") c.validation = optional_path(value);
      else if (key == "test") c.test = resolve(base_dir, value.get<std::string>());
      else if (key == "decoder") c.decoder = optional_path(value);
      else if (key == "output_dir") c.output_dir = resolve(base_dir, value.get<std::string>());
      else if (key == "methods") c.methods = value.get<std::vector<std::string>>();
      else if (key == "ksame_k") c.ksame_k = value.get<std::vector<std::size_t>>();
      else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
      else if (key == "split_seed") c.split_seed = value.get<std::uint64_t>();
      else if (key == "sampling_variance") c.sampling_variance = value.get<double>();
      else if (key == "sampling_variance_sweep") c.sampling_variance_sweep = value.get<std::vector<double>>();
      else if (key == "noise_sigma") c.noise_sigma = value.get<std::vector<double>>();
      else if (key == "noise_replicas") c.noise_replicas = value.get<std::size_t>();
      else if (key == "seeds") c.seeds = value.get<std::vector<std::uint64_t>>();
      else if (key == "cvae") c.cvae = CvaeTrainConfig::from_json(value);
      else if (key == "probe") c.probe = ProbeTrainConfig::from_json(value);
      else throw ConfigError("experiment config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

ExperimentInputs load_inputs(const ExperimentConfig& config) {
  config.validate();
  const bool train_needed = wants(config, "baseline") || wants(config, "ksame") || wants(config, "cvae-offline") ||
                            (wants_cvae(config) && !config.decoder) || !config.validation;
  if (train_needed && !config.train) throw ConfigError("experiment needs a train dataset for the chosen methods");

  ExperimentInputs in;
  if (config.train) in.train = read_dataset(*config.train);
  if (config.validation) {
    in.validation = read_dataset(*config.validation);
  } else {
    Rng rng(config.split_seed);
    auto parts = stratified_split(*in.train, config.validation_fraction, rng);
    in.train = std::move(parts.train);
    in.validation = std::move(parts.validation);
  }
  in.test = read_dataset(config.test);
  if (config.decoder) in.decoder = load_decoder(*config.decoder);

  auto check = [](const EmbeddingDataset& a, const EmbeddingDataset& b, const char* what) {
    if (a.dim() != b.dim() || a.num_classes != b.num_classes) {
      throw DimensionError(std::string(what) + " disagree on d or C");
    }
  };
  check(in.validation, in.test, "validation and test");
  if (in.train) check(*in.train, in.test, "train and test");
  if (in.decoder && (in.decoder->output_dim != in.test.dim() || in.decoder->num_classes != in.test.num_classes)) {
    throw DimensionError("decoder and test disagree on d or C");
  }
  return in;
}

ExperimentConfig with_baseline(ExperimentConfig config) {
  if (!wants(config, "baseline")) config.methods.insert(config.methods.begin(), "baseline");
  return config;
}

MetricsReport run_evaluate(const ExperimentConfig& requested, const ExperimentInputs& inputs) {
  const auto config = with_baseline(requested);
  config.validate();
  DecoderPool decoders(config, inputs);
  MetricsReport report;
  report.metadata = report_metadata("evaluate", config, inputs);
  nlohmann::json cells = nlohmann::json::array();

  for (const auto& method : expand_methods(config)) {
    for (const auto seed : config.seeds) {
      const double sv = method.is_cvae() ? config.sampling_variance : kNaN;
      const Cell cell = run_cell(method, seed, sv, config, inputs, decoders);
      const auto auc = auc_macro(predict_scores(cell.probe.params, inputs.test.features), inputs.test.labels);
      const auto disp = max_dispersion(cell.anonymized);

      MetricsRow row;
      row.section = "evaluate";
      row.method = method.name;
      row.seed = seed;
      row.noise_sigma = 0.0;
      row.sampling_variance = sv;
      row.auc = auc.macro;
      row.nn_distance = inputs.train ? avg_nn_distance(cell.anonymized, *inputs.train) : kNaN;
      row.dispersion = disp.total;
      row.mean_pairwise_distance = disp.mean_pairwise;
      row.prototype_distance = cell.prototype_distance;
      report.rows.push_back(row);

      auto info = cell_json(method, seed, sv, cell);
      info["auc"] = auc.to_json();
      cells.push_back(std::move(info));
    }
  }
  append_seed_averages(report);
  report.metadata["cells"] = std::move(cells);
  report.metadata["cvae_training"] = decoders.histories();
  return report;
}

MetricsReport run_robustness(const ExperimentConfig& config, const ExperimentInputs& inputs) {
  config.validate();
  DecoderPool decoders(config, inputs);
  MetricsReport report;
  report.metadata = report_metadata("robustness", config, inputs);
  nlohmann::json cells = nlohmann::json::array();

  std::map<std::uint64_t, std::map<std::size_t, std::vector<EmbeddingDataset>>> noisy_tests;
  auto noisy = [&](std::uint64_t seed, std::size_t sigma_index) -> const std::vector<EmbeddingDataset>& {
    auto& slot = noisy_tests[seed][sigma_index];
    if (slot.empty()) {
      slot = perturb_replicas(inputs.test,
                              {config.noise_sigma[sigma_index], derive_seed(seed, "noise"), config.noise_replicas});
    }
    return slot;
  };

  for (const auto& method : expand_methods(config)) {
    const std::vector<double> variances = method.is_cvae() ? config.sampling_variance_sweep : std::vector<double>{kNaN};
    for (const auto seed : config.seeds) {
      for (const double sv : variances) {
        const Cell cell = run_cell(method, seed, sv, config, inputs, decoders);
        nlohmann::json per_sigma = nlohmann::json::array();
        for (std::size_t si = 0; si < config.noise_sigma.size(); ++si) {
          const double sigma = config.noise_sigma[si];
          std::vector<double> replica_auc;
          if (sigma == 0.0) {
            replica_auc.push_back(
                auc_macro(predict_scores(cell.probe.params, inputs.test.features), inputs.test.labels).macro);
          } else {
            for (const auto& t : noisy(seed, si)) {
              replica_auc.push_back(auc_macro(predict_scores(cell.probe.params, t.features), t.labels).macro);
            }
          }
          double mean = 0.0;
          for (const double a : replica_auc) mean += a;
          mean /= static_cast<double>(replica_auc.size());

          MetricsRow row;
          row.section = "robustness";
          row.method = method.name;
          row.seed = seed;
          row.noise_sigma = sigma;
          row.sampling_variance = sv;
          row.auc = mean;
          row.nn_distance = kNaN;
          row.dispersion = kNaN;
          row.mean_pairwise_distance = kNaN;
          row.prototype_distance = cell.prototype_distance;
          report.rows.push_back(row);
          per_sigma.push_back({{"noise_sigma", sigma}, {"replica_auc", replica_auc}});
        }
        auto info = cell_json(method, seed, sv, cell);
        info["noise"] = std::move(per_sigma);
        cells.push_back(std::move(info));
      }
    }
  }
  append_seed_averages(report);
  report.metadata["cells"] = std::move(cells);
  report.metadata["cvae_training"] = decoders.histories();
  return report;
}

OnlineProbeResult run_online_probe(const CvaeDecoder& decoder, const EmbeddingDataset& validation,
                                   const EmbeddingDataset& test, const ProbeTrainConfig& probe_config,
                                   double sampling_variance, std::uint64_t stream_seed) {
  auto shared = std::make_shared<const CvaeDecoder>(decoder);
  SampleStream stream(shared, decoder_class_distribution(decoder), probe_config.batch_size,
                      {sampling_variance, stream_seed});
  StreamSource source(stream, decoder_reference_size(decoder));
  OnlineProbeResult out;
  out.probe = train_probe(source, validation, probe_config);
  out.auc = auc_macro(predict_scores(out.probe.params, test.features), test.labels);
  return out;
}

}  // namespace embanon
