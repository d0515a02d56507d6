// SPDX-License-Identifier: Apache-2.0
#include "embanon/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "embanon/binary_io.hpp"
#include "embanon/errors.hpp"

namespace embanon {

namespace {

constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 4 + 4 + 4;

}  // namespace

std::vector<std::uint8_t> serialize_dataset(const EmbeddingDataset& dataset) {
  dataset.validate();
  nlohmann::json meta = nlohmann::json::object();
  if (!dataset.class_names.empty()) meta["class_names"] = dataset.class_names;
  if (!dataset.provenance.is_null() && !dataset.provenance.empty()) {
    meta["provenance"] = dataset.provenance;
  }
  const std::string blob = meta.dump();

  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kDatasetMagic), 8});
  w.u32(kDatasetVersion);
  w.u64(dataset.size());
  w.u32(static_cast<std::uint32_t>(dataset.dim()));
  w.u32(dataset.num_classes);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.text(blob);
  for (const float v : dataset.features.values()) w.f32(v);
  for (const auto y : dataset.labels) w.u32(y);
  w.seal();
  return w.take();
}

EmbeddingDataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  const std::string ctx = "dataset file";
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kDatasetMagic, 8) != 0) {
    throw FormatError(ctx + ": bad magic (expected EMBDSET1)");
  }
  ByteReader header(bytes, ctx);
  header.raw(8);
  const std::uint32_t version = header.u32();
  if (version != kDatasetVersion) {
    throw FormatError(ctx + ": unsupported version " + std::to_string(version));
  }
  const std::uint64_t n = header.u64();
  const std::uint32_t d = header.u32();
  const std::uint32_t c = header.u32();
  const std::uint32_t blob_len = header.u32();

  // Expected total length, guarding against overflow from hostile headers.
  const long double expected = static_cast<long double>(kHeaderSize) + blob_len +
                               4.0L * static_cast<long double>(n) * d + 4.0L * n + 8.0L;
  if (expected != static_cast<long double>(bytes.size())) {
    throw CorruptionError(ctx + ": length " + std::to_string(bytes.size()) +
                          " does not match header (N=" + std::to_string(n) +
                          ", d=" + std::to_string(d) + ")");
  }
  const auto body = verify_sealed(bytes, ctx);

  ByteReader r(body, ctx);
  r.raw(kHeaderSize);
  const std::string blob = r.text(blob_len);

  EmbeddingDataset ds;
  ds.num_classes = c;
  try {
    const auto meta = nlohmann::json::parse(blob);
    if (!meta.is_object()) throw FormatError(ctx + ": metadata is not a JSON object");
    if (meta.contains("class_names")) ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
    if (meta.contains("provenance")) ds.provenance = meta.at("provenance");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ctx + ": invalid metadata JSON: " + e.what());
  }

  std::vector<float> values(static_cast<std::size_t>(n) * d);
  for (auto& v : values) v = r.f32();
  ds.features = Matrix(static_cast<std::size_t>(n), d, std::move(values));
  ds.labels.resize(static_cast<std::size_t>(n));
  for (auto& y : ds.labels) y = r.u32();
  ds.validate();
  return ds;
}

void write_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_dataset(dataset));
}

EmbeddingDataset read_dataset(const std::filesystem::path& path) {
  return deserialize_dataset(read_file_bytes(path));
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& cell : cells) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
  }
  return cells;
}

}  // namespace

EmbeddingDataset read_csv_dataset(const std::filesystem::path& path,
                                  std::optional<std::uint32_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "label") {
    throw FormatError(path.string() + ": header must be label,f0,f1,...");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j - 1)) {
      throw FormatError(path.string() + ": unexpected column '" + std::string(header[j]) + "'");
    }
  }
  const std::size_t d = header.size() - 1;

  std::vector<float> values;
  std::vector<std::uint32_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != d + 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(d + 1) + " cells, got " + std::to_string(cells.size()));
    }
    std::uint32_t y = 0;
    auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), y);
    if (ec != std::errc{} || p != cells[0].data() + cells[0].size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad label");
    }
    labels.push_back(y);
    for (std::size_t j = 1; j <= d; ++j) {
      float v = 0.0F;
      auto [q, ec2] = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
      if (ec2 != std::errc{} || q != cells[j].data() + cells[j].size()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad value in column " +
                          std::to_string(j));
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) throw DataError(path.string() + ": no data rows");

  EmbeddingDataset ds;
  ds.num_classes = num_classes.value_or(*std::max_element(labels.begin(), labels.end()) + 1);
  ds.features = Matrix(labels.size(), d, std::move(values));
  ds.labels = std::move(labels);
  ds.provenance = {{"source", "csv"}, {"path", path.filename().string()}};
  ds.validate();
  return ds;
}

std::string dataset_hash(const EmbeddingDataset& dataset) {
  return sealed_digest(serialize_dataset(dataset));
}

}  // namespace embanon
