// SPDX-License-Identifier: Apache-2.0
#include "embanon/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "embanon/binary_io.hpp"
#include "embanon/errors.hpp"

namespace embanon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kCsvHeader =
    "section,method,seed,noise_sigma,sampling_variance,auc,nn_distance,dispersion,mean_pairwise_distance,"
    "prototype_distance";

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

double number_from(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

double parse_number(std::string_view field, std::size_t line) {
  if (field.empty()) return kNaN;
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw FormatError("report csv line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

nlohmann::json cell_json(const MetricsRow& r) {
  return {{"auc", number_or_null(r.auc)},
          {"nn_distance", number_or_null(r.nn_distance)},
          {"dispersion", number_or_null(r.dispersion)},
          {"mean_pairwise_distance", number_or_null(r.mean_pairwise_distance)},
          {"prototype_distance", number_or_null(r.prototype_distance)}};
}

}  // namespace

bool MetricsRow::operator==(const MetricsRow& o) const {
  return section == o.section && method == o.method && seed == o.seed && same(noise_sigma, o.noise_sigma) &&
         same(sampling_variance, o.sampling_variance) && same(auc, o.auc) && same(nn_distance, o.nn_distance) &&
         same(dispersion, o.dispersion) && same(mean_pairwise_distance, o.mean_pairwise_distance) &&
         same(prototype_distance, o.prototype_distance);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json results = nlohmann::json::object();
  nlohmann::json flat = nlohmann::json::array();
  for (const auto& r : rows) {
    const std::string sigma_key = "sigma=" + format_number(r.noise_sigma);
    const std::string sv_key =
        "sampling_variance=" + (std::isnan(r.sampling_variance) ? std::string("n/a") : format_number(r.sampling_variance));
    const std::string seed_key = r.seed ? "seed=" + std::to_string(*r.seed) : std::string("mean");
    results[r.section][r.method][sigma_key][sv_key][seed_key] = cell_json(r);

    nlohmann::json row = cell_json(r);
    row["section"] = r.section;
    row["method"] = r.method;
    row["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
    row["noise_sigma"] = r.noise_sigma;
    row["sampling_variance"] = number_or_null(r.sampling_variance);
    flat.push_back(std::move(row));
  }
  return {{"metadata", metadata}, {"results", std::move(results)}, {"rows", std::move(flat)}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport report;
  try {
    report.metadata = j.at("metadata");
    for (const auto& row : j.at("rows")) {
      MetricsRow r;
      r.section = row.at("section").get<std::string>();
      r.method = row.at("method").get<std::string>();
      if (!row.at("seed").is_null()) r.seed = row.at("seed").get<std::uint64_t>();
      r.noise_sigma = row.at("noise_sigma").get<double>();
      r.sampling_variance = number_from(row.at("sampling_variance"));
      r.auc = number_from(row.at("auc"));
      r.nn_distance = number_from(row.at("nn_distance"));
      r.dispersion = number_from(row.at("dispersion"));
      r.mean_pairwise_distance = number_from(row.at("mean_pairwise_distance"));
      r.prototype_distance = number_from(row.at("prototype_distance"));
      report.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics report json: ") + e.what());
  }
  return report;
}

std::string MetricsReport::to_csv() const {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    if (r.section.find_first_of(",\n") != std::string::npos || r.method.find_first_of(",\n") != std::string::npos) {
      throw FormatError("report labels may not contain commas or newlines");
    }
    out += r.section + ',' + r.method + ',' + (r.seed ? std::to_string(*r.seed) : std::string()) + ',' +
           format_number(r.noise_sigma) + ',' + format_number(r.sampling_variance) + ',' + format_number(r.auc) +
           ',' + format_number(r.nn_distance) + ',' + format_number(r.dispersion) + ',' +
           format_number(r.mean_pairwise_distance) + ',' + format_number(r.prototype_distance) + '\n';
  }
  return out;
}

MetricsReport MetricsReport::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw FormatError("report csv: unexpected header");
  MetricsReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 10) {
      throw FormatError("report csv line " + std::to_string(line_no) + ": expected 10 fields");
    }
    MetricsRow r;
    r.section = std::string(fields[0]);
    r.method = std::string(fields[1]);
    if (!fields[2].empty()) {
      std::uint64_t seed = 0;
      const auto [end, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), seed);
      if (ec != std::errc() || end != fields[2].data() + fields[2].size()) {
        throw FormatError("report csv line " + std::to_string(line_no) + ": bad seed");
      }
      r.seed = seed;
    }
    r.noise_sigma = parse_number(fields[3], line_no);
    r.sampling_variance = parse_number(fields[4], line_no);
    r.auc = parse_number(fields[5], line_no);
    r.nn_distance = parse_number(fields[6], line_no);
    r.dispersion = parse_number(fields[7], line_no);
    r.mean_pairwise_distance = parse_number(fields[8], line_no);
    r.prototype_distance = parse_number(fields[9], line_no);
    report.rows.push_back(std::move(r));
  }
  return report;
}

void MetricsReport::write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const {
  const std::string json_text = to_json().dump(2) + "\n";
  const std::string csv_text = to_csv();
  write_file_bytes(json_path, std::span(reinterpret_cast<const std::uint8_t*>(json_text.data()), json_text.size()));
  write_file_bytes(csv_path, std::span(reinterpret_cast<const std::uint8_t*>(csv_text.data()), csv_text.size()));
}

void append_seed_averages(MetricsReport& report) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const MetricsRow*>> groups;
  for (const auto& r : report.rows) {
    if (!r.seed) continue;
    Key key{r.section, r.method, format_number(r.noise_sigma), format_number(r.sampling_variance)};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<MetricsRow> averages;
  for (const auto& key : order) {
    const auto& members = groups.at(key);
    auto mean = [&](double MetricsRow::*field) {
      double s = 0.0;
      for (const auto* m : members) s += m->*field;
      return s / static_cast<double>(members.size());
    };
    MetricsRow avg = *members.front();
    avg.seed.reset();
    avg.auc = mean(&MetricsRow::auc);
    avg.nn_distance = mean(&MetricsRow::nn_distance);
    avg.dispersion = mean(&MetricsRow::dispersion);
    avg.mean_pairwise_distance = mean(&MetricsRow::mean_pairwise_distance);
    avg.prototype_distance = mean(&MetricsRow::prototype_distance);
    averages.push_back(std::move(avg));
  }
  report.rows.insert(report.rows.end(), averages.begin(), averages.end());
}

}  // namespace embanon
