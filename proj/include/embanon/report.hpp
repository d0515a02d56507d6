// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace embanon {

/// One measured cell. NaN marks a quantity that does not apply (for example
/// sampling_variance for k-Same). A missing seed marks an average over seeds.
struct MetricsRow {
  std::string section;  // "evaluate" or "robustness"
  std::string method;   // "baseline", "ksame-<k>", "cvae-offline", "cvae-online"
  std::optional<std::uint64_t> seed;
  double noise_sigma = 0.0;
  double sampling_variance = 0.0;
  double auc = 0.0;
  double nn_distance = 0.0;
  double dispersion = 0.0;
  double mean_pairwise_distance = 0.0;
  double prototype_distance = 0.0;

  bool operator==(const MetricsRow& other) const;
};

struct MetricsReport {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<MetricsRow> rows;

  /// {"metadata": ..., "results": {section: {method: {"sigma=..": {"sampling_variance=..": {"seed=..": cell}}}}}}.
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);

  /// Flat table, one line per row; numbers as %.17g, empty fields for NaN or no seed.
  std::string to_csv() const;
  static MetricsReport from_csv(const std::string& text);

  void write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const;
};

/// Appends one seed-averaged row per (section, method, noise, sampling variance)
/// group of seeded rows. Groups keep first-appearance order.
void append_seed_averages(MetricsReport& report);

}  // namespace embanon
