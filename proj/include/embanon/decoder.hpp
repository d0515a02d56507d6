// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "embanon/cvae.hpp"
#include "embanon/layer_file.hpp"

namespace embanon {

/// The shareable half of a trained CVAE. Encoder weights never enter this type.
struct CvaeDecoder {
  std::uint32_t latent_dim = 0;
  std::uint32_t num_classes = 0;
  std::uint32_t output_dim = 0;
  std::vector<DenseLayer> layers;
  /// beta, seed, rng algorithm, training-set hash, class distribution, ...
  nlohmann::json metadata = nlohmann::json::object();

  void validate() const;
};

CvaeDecoder extract_decoder(const CvaeParams& params, nlohmann::json metadata);

/// Metadata recorded with a decoder trained on `train` under `config`.
nlohmann::json decoder_training_metadata(const EmbeddingDataset& train, const CvaeTrainConfig& config,
                                         const TrainHistory& history);

Matrix decode(const CvaeDecoder& decoder, const Matrix& z, std::span<const std::uint32_t> labels);

/// Decoder file: the layer container with magic "CVAEDEC1"; input_dim holds the latent width.
inline const std::array<char, 8> kDecoderMagic = make_magic("CVAEDEC1");

std::vector<std::uint8_t> serialize_decoder(const CvaeDecoder& decoder);
CvaeDecoder deserialize_decoder(std::span<const std::uint8_t> bytes);
void save_decoder(const CvaeDecoder& decoder, const std::filesystem::path& path);
CvaeDecoder load_decoder(const std::filesystem::path& path);

/// CRC-64 of the serialized decoder, as 16 hex digits.
std::string decoder_hash(const CvaeDecoder& decoder);

}  // namespace embanon
