// SPDX-License-Identifier: Apache-2.0
// embanon: command-line front end for the anonymization toolkit.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "embanon/binary_io.hpp"
#include "embanon/dataset_io.hpp"
#include "embanon/decoder.hpp"
#include "embanon/errors.hpp"
#include "embanon/experiment.hpp"
#include "embanon/ksame.hpp"
#include "embanon/layer_file.hpp"
#include "embanon/metrics.hpp"
#include "embanon/probe.hpp"
#include "embanon/sampler.hpp"
#include "embanon/split.hpp"
#include "embanon/synth.hpp"

namespace fs = std::filesystem;
using namespace embanon;

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumeric = 4 };

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// A sub-config file may hold the section directly or wrap it under `key`.
nlohmann::json section_of(const nlohmann::json& j, const char* key) {
  return j.is_object() && j.contains(key) ? j.at(key) : j;
}

nlohmann::json layer_shapes(const std::vector<DenseLayer>& layers) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& l : layers) {
    out.push_back({{"rows", l.out_dim()}, {"cols", l.in_dim()}, {"activation", activation_name(l.activation)}});
  }
  return out;
}

nlohmann::json inspect_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 8) throw FormatError(path.string() + ": too short to carry a magic tag");
  const std::string magic(bytes.begin(), bytes.begin() + 8);
  if (magic == std::string(kDatasetMagic, 8)) {
    const auto ds = deserialize_dataset(bytes);
    return {{"kind", "dataset"},
            {"version", kDatasetVersion},
            {"rows", ds.size()},
            {"dim", ds.dim()},
            {"classes", ds.num_classes},
            {"class_counts", ds.class_counts()},
            {"class_names", ds.class_names},
            {"provenance", ds.provenance},
            {"hash", dataset_hash(ds)},
            {"bytes", bytes.size()}};
  }
  if (magic == "CVAEDEC1") {
    const auto dec = deserialize_decoder(bytes);
    return {{"kind", "decoder"},
            {"latent_dim", dec.latent_dim},
            {"classes", dec.num_classes},
            {"output_dim", dec.output_dim},
            {"layers", layer_shapes(dec.layers)},
            {"metadata", dec.metadata},
            {"hash", decoder_hash(dec)},
            {"bytes", bytes.size()}};
  }
  if (magic == kProbeMagic) {
    nlohmann::json meta;
    const auto probe = deserialize_probe(bytes, &meta);
    return {{"kind", "probe"},
            {"dim", probe.input_dim()},
            {"classes", probe.num_classes()},
            {"standardize", probe.standardize},
            {"metadata", meta},
            {"bytes", bytes.size()}};
  }
  throw FormatError(path.string() + ": unrecognised magic tag");
}

int run(int argc, char** argv) {
  CLI::App app{"Embedding anonymization with conditional VAEs, k-Same baselines and probe evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  // synth
  auto* synth = app.add_subcommand("synth", "Write a labeled Gaussian-mixture dataset");
  std::size_t synth_classes = 3, synth_dim = 16, synth_per_class = 200;
  std::vector<std::size_t> synth_counts;
  double synth_separation = 8.0, synth_std = 1.0;
  std::uint64_t synth_seed = 0;
  fs::path synth_out;
  synth->add_option("--classes", synth_classes, "Number of classes")->capture_default_str();
  synth->add_option("--dim", synth_dim, "Feature width")->capture_default_str();
  synth->add_option("--per-class", synth_per_class, "Rows per class")->capture_default_str();
  synth->add_option("--counts", synth_counts, "Rows for each class (overrides --per-class)");
  synth->add_option("--separation", synth_separation, "Distance between every pair of class means")
      ->capture_default_str();
  synth->add_option("--std", synth_std, "Per-component standard deviation")->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out)->required();

  // split
  auto* split = app.add_subcommand("split", "Stratified train/validation split");
  fs::path split_in, split_train, split_val;
  double split_fraction = 0.1;
  std::uint64_t split_seed = 0;
  split->add_option("--in", split_in)->required();
  split->add_option("--fraction", split_fraction, "Validation share per class")->capture_default_str();
  split->add_option("--seed", split_seed)->capture_default_str();
  split->add_option("--train-out", split_train)->required();
  split->add_option("--val-out", split_val)->required();

  // train-cvae
  auto* train = app.add_subcommand("train-cvae", "Train a conditional VAE and save its decoder");
  fs::path tc_train, tc_out;
  std::optional<fs::path> tc_val, tc_config, tc_history;
  double tc_fraction = 0.1;
  std::uint64_t tc_split_seed = 0;
  std::optional<std::uint64_t> tc_seed;
  std::optional<std::size_t> tc_epochs, tc_batch, tc_patience;
  std::optional<double> tc_beta, tc_lr;
  std::optional<std::uint32_t> tc_latent;
  train->add_option("--train", tc_train)->required();
  train->add_option("--val", tc_val, "Validation set; default is a stratified split of --train");
  train->add_option("--val-fraction", tc_fraction)->capture_default_str();
  train->add_option("--split-seed", tc_split_seed)->capture_default_str();
  train->add_option("--config", tc_config, "JSON with cvae settings (bare or under \"cvae\")");
  train->add_option("--seed", tc_seed);
  train->add_option("--epochs", tc_epochs, "Maximum epochs");
  train->add_option("--batch-size", tc_batch);
  train->add_option("--patience", tc_patience);
  train->add_option("--beta", tc_beta);
  train->add_option("--lr", tc_lr);
  train->add_option("--latent-dim", tc_latent);
  train->add_option("--out", tc_out, "Decoder file")->required();
  train->add_option("--history", tc_history, "Training history JSON");

  // anonymize
  auto* anon = app.add_subcommand("anonymize", "Generate a synthetic replica with a decoder");
  fs::path an_decoder, an_out;
  std::optional<fs::path> an_replicate;
  std::optional<std::size_t> an_count;
  double an_variance = 1.0;
  std::uint64_t an_seed = 0;
  anon->add_option("--decoder", an_decoder)->required();
  anon->add_option("--out", an_out)->required();
  auto* an_rep_opt = anon->add_option("--replicate", an_replicate, "Reproduce this dataset's label sequence exactly");
  anon->add_option("--n", an_count, "Rows to draw from the decoder's class distribution (default: its training size)")
      ->excludes(an_rep_opt);
  anon->add_option("--sampling-variance", an_variance)->capture_default_str();
  anon->add_option("--seed", an_seed)->capture_default_str();

  // ksame
  auto* ks = app.add_subcommand("ksame", "k-Same centroid anonymization");
  fs::path ks_in, ks_out;
  std::size_t ks_k = 2;
  std::uint64_t ks_seed = 0;
  ks->add_option("--in", ks_in)->required();
  ks->add_option("--k", ks_k)->capture_default_str();
  ks->add_option("--seed", ks_seed)->capture_default_str();
  ks->add_option("--out", ks_out)->required();

  // probe
  auto* pr = app.add_subcommand("probe", "Train a linear probe and report test AUC");
  std::optional<fs::path> pr_train, pr_decoder, pr_config, pr_weights, pr_report;
  fs::path pr_val, pr_test;
  std::optional<std::uint64_t> pr_seed;
  std::optional<std::size_t> pr_epochs, pr_batch, pr_patience;
  std::optional<double> pr_lr;
  bool pr_standardize = false;
  double pr_variance = 1.0;
  std::uint64_t pr_stream_seed = 0;
  auto* pr_train_opt = pr->add_option("--train", pr_train, "Train on this dataset");
  pr->add_option("--decoder", pr_decoder, "Train online on fresh samples from this decoder")->excludes(pr_train_opt);
  pr->add_option("--val", pr_val, "Clean validation set")->required();
  pr->add_option("--test", pr_test)->required();
  pr->add_option("--config", pr_config, "JSON with probe settings (bare or under \"probe\")");
  pr->add_option("--seed", pr_seed);
  pr->add_option("--epochs", pr_epochs);
  pr->add_option("--batch-size", pr_batch);
  pr->add_option("--patience", pr_patience);
  pr->add_option("--lr", pr_lr);
  pr->add_flag("--standardize", pr_standardize, "Standardize features inside the probe");
  pr->add_option("--sampling-variance", pr_variance, "Online mode latent variance")->capture_default_str();
  pr->add_option("--stream-seed", pr_stream_seed, "Online mode sampler seed")->capture_default_str();
  pr->add_option("--weights", pr_weights, "Write probe weights here");
  pr->add_option("--report", pr_report, "Write a JSON report here");

  // evaluate / robustness
  std::optional<fs::path> ex_out_dir;
  fs::path ex_config;
  std::vector<std::uint64_t> ex_seeds;
  std::vector<std::string> ex_methods;
  auto* ev = app.add_subcommand("evaluate", "AUC, nearest-neighbour distance and dispersion per method and seed");
  auto* rb = app.add_subcommand("robustness", "AUC under test noise and sampling-variance sweeps");
  for (auto* sub : {ev, rb}) {
    sub->add_option("--config", ex_config, "Experiment JSON")->required();
    sub->add_option("--out-dir", ex_out_dir, "Overrides output_dir");
    sub->add_option("--seeds", ex_seeds, "Overrides seeds");
    sub->add_option("--methods", ex_methods, "Overrides methods");
  }

  // pca-export
  auto* pca = app.add_subcommand("pca-export", "2-D PCA projection as CSV x,y,label");
  fs::path pca_in, pca_out;
  pca->add_option("--in", pca_in)->required();
  pca->add_option("--out", pca_out)->required();

  // inspect
  auto* insp = app.add_subcommand("inspect", "Validate a dataset, decoder or probe file and print its header");
  fs::path insp_path;
  insp->add_option("file", insp_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*synth) {
    const auto spec = MixtureSpec::on_axes(synth_classes, synth_dim, synth_separation, synth_std);
    Rng rng(synth_seed);
    const auto ds = synth_counts.empty() ? synth_mixture(spec, synth_per_class, synth_dim, rng)
                                         : synth_mixture(spec, synth_counts, synth_dim, rng);
    write_dataset(ds, synth_out);
  } else if (*split) {
    Rng rng(split_seed);
    const auto parts = stratified_split(read_dataset(split_in), split_fraction, rng);
    write_dataset(parts.train, split_train);
    write_dataset(parts.validation, split_val);
  } else if (*train) {
    CvaeTrainConfig cfg;
    if (tc_config) cfg = CvaeTrainConfig::from_json(section_of(read_json_file(*tc_config), "cvae"));
    if (tc_seed) cfg.seed = *tc_seed;
    if (tc_epochs) cfg.max_epochs = *tc_epochs;
    if (tc_batch) cfg.batch_size = *tc_batch;
    if (tc_patience) cfg.patience = *tc_patience;
    if (tc_beta) cfg.beta = *tc_beta;
    if (tc_lr) cfg.learning_rate = *tc_lr;
    if (tc_latent) cfg.latent_dim = *tc_latent;
    cfg.validate();

    EmbeddingDataset train_set = read_dataset(tc_train);
    EmbeddingDataset val_set;
    if (tc_val) {
      val_set = read_dataset(*tc_val);
    } else {
      Rng rng(tc_split_seed);
      auto parts = stratified_split(train_set, tc_fraction, rng);
      train_set = std::move(parts.train);
      val_set = std::move(parts.validation);
    }
    const auto result = train_cvae(train_set, val_set, cfg);
    const auto decoder = extract_decoder(result.params, decoder_training_metadata(train_set, cfg, result.history));
    save_decoder(decoder, tc_out);
    if (tc_history) {
      const nlohmann::json h = {{"tool", "embanon"},
                                {"version", tool_version()},
                                {"command", "train-cvae"},
                                {"config", cfg.to_json()},
                                {"decoder_hash", decoder_hash(decoder)},
                                {"history", result.history.to_json()}};
      write_text(*tc_history, h.dump(2) + "\n");
    }
    std::cout << "decoder " << decoder_hash(decoder) << " best_epoch " << result.history.best_epoch << " epochs "
              << result.history.epochs.size() << "\n";
  } else if (*anon) {
    const auto decoder = load_decoder(an_decoder);
    const SamplerConfig sampler{an_variance, an_seed};
    const auto out = an_replicate ? replicate_proportions(decoder, read_dataset(*an_replicate), sampler)
                                  : anonymize_offline(decoder, decoder_class_distribution(decoder),
                                                      an_count.value_or(decoder_reference_size(decoder)), sampler);
    write_dataset(out, an_out);
  } else if (*ks) {
    write_dataset(ksame_anonymize(read_dataset(ks_in), {ks_k, ks_seed}), ks_out);
  } else if (*pr) {
    if (!pr_train && !pr_decoder) throw ConfigError("probe needs --train or --decoder");
    ProbeTrainConfig cfg;
    if (pr_config) cfg = ProbeTrainConfig::from_json(section_of(read_json_file(*pr_config), "probe"));
    if (pr_seed) cfg.seed = *pr_seed;
    if (pr_epochs) cfg.max_epochs = *pr_epochs;
    if (pr_batch) cfg.batch_size = *pr_batch;
    if (pr_patience) cfg.patience = *pr_patience;
    if (pr_lr) cfg.learning_rate = *pr_lr;
    if (pr_standardize) cfg.standardize = true;
    cfg.validate();

    const auto val_set = read_dataset(pr_val);
    const auto test_set = read_dataset(pr_test);
    nlohmann::json inputs = {{"validation", dataset_hash(val_set)}, {"test", dataset_hash(test_set)}};
    nlohmann::json mode;
    ProbeTrainResult result;
    AucReport auc;
    if (pr_decoder) {
      const auto decoder = load_decoder(*pr_decoder);
      inputs["decoder"] = decoder_hash(decoder);
      mode = {{"mode", "online"}, {"sampling_variance", pr_variance}, {"stream_seed", pr_stream_seed}};
      auto online = run_online_probe(decoder, val_set, test_set, cfg, pr_variance, pr_stream_seed);
      result = std::move(online.probe);
      auc = std::move(online.auc);
    } else {
      const auto train_set = read_dataset(*pr_train);
      inputs["train"] = dataset_hash(train_set);
      mode = {{"mode", "dataset"}};
      result = train_probe(train_set, val_set, cfg);
      auc = auc_macro(predict_scores(result.params, test_set.features), test_set.labels);
    }
    const nlohmann::json report = {{"tool", "embanon"},     {"version", tool_version()},
                                   {"command", "probe"},    {"source", mode},
                                   {"config", cfg.to_json()}, {"inputs", inputs},
                                   {"history", result.history.to_json()}, {"auc", auc.to_json()}};
    if (pr_weights) save_probe(*pr_weights, result.params, {{"probe_config", cfg.to_json()}, {"source", mode}});
    if (pr_report) write_text(*pr_report, report.dump(2) + "\n");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", auc.macro);
    std::cout << "macro_auc " << buf << "\n";
  } else if (*ev || *rb) {
    auto cfg = ExperimentConfig::load(ex_config);
    if (ex_out_dir) cfg.output_dir = *ex_out_dir;
    if (!ex_seeds.empty()) cfg.seeds = ex_seeds;
    if (!ex_methods.empty()) cfg.methods = ex_methods;
    const bool evaluate = static_cast<bool>(*ev);
    if (evaluate) cfg = with_baseline(std::move(cfg));
    cfg.validate();
    const auto inputs = load_inputs(cfg);
    const auto report = evaluate ? run_evaluate(cfg, inputs) : run_robustness(cfg, inputs);
    fs::create_directories(cfg.output_dir);
    const std::string stem = evaluate ? "evaluate" : "robustness";
    report.write(cfg.output_dir / (stem + ".json"), cfg.output_dir / (stem + ".csv"));
    std::cout << "wrote " << (cfg.output_dir / (stem + ".json")).string() << " and " << stem << ".csv\n";
  } else if (*pca) {
    const auto ds = read_dataset(pca_in);
    write_pca_csv(pca_out, pca_project(ds.features, 2), ds.labels);
  } else if (*insp) {
    std::cout << inspect_file(insp_path).dump(2) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "embanon: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "embanon: numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "embanon: data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "embanon: " << e.what() << "\n";
    return kOther;
  }
}
