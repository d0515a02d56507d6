// SPDX-License-Identifier: Apache-2.0
#include "embanon/decoder.hpp"

#include "embanon/binary_io.hpp"
#include "embanon/dataset_io.hpp"
#include "embanon/errors.hpp"

namespace embanon {

void CvaeDecoder::validate() const {
  if (latent_dim == 0 || num_classes == 0 || output_dim == 0) {
    throw FormatError("decoder: latent_dim, num_classes and output_dim must be >= 1");
  }
  if (layers.empty()) throw FormatError("decoder has no layers");
  std::size_t width = std::size_t{latent_dim} + num_classes;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate();
    if (layers[i].in_dim() != width) {
      throw DimensionError("decoder layer " + std::to_string(i) + " expects width " +
                           std::to_string(layers[i].in_dim()) + ", previous provides " +
                           std::to_string(width));
    }
    width = layers[i].out_dim();
  }
  if (width != output_dim) throw DimensionError("decoder output width differs from header");
}

CvaeDecoder extract_decoder(const CvaeParams& params, nlohmann::json metadata) {
  params.validate();
  CvaeDecoder dec;
  dec.latent_dim = params.arch.latent_dim;
  dec.num_classes = params.arch.num_classes;
  dec.output_dim = params.arch.input_dim;
  const auto layers = params.decoder();
  dec.layers.assign(layers.begin(), layers.end());
  dec.metadata = std::move(metadata);
  return dec;
}

nlohmann::json decoder_training_metadata(const EmbeddingDataset& train, const CvaeTrainConfig& config,
                                         const TrainHistory& history) {
  const auto dist = class_distribution(train);
  return {{"beta", config.beta},
          {"seed", config.seed},
          {"rng", std::string(Rng::algorithm_id)},
          {"training_dataset_hash", dataset_hash(train)},
          {"train_size", train.size()},
          {"class_distribution", std::vector<double>(dist.probabilities().begin(),
                                                     dist.probabilities().end())},
          {"class_names", train.class_names},
          {"train_config", config.to_json()},
          {"best_epoch", history.best_epoch},
          {"epochs_run", history.epochs.size()}};
}

Matrix decode(const CvaeDecoder& decoder, const Matrix& z, std::span<const std::uint32_t> labels) {
  return decode_with<float>(decoder.layers, decoder.latent_dim, decoder.num_classes, z, labels);
}

std::vector<std::uint8_t> serialize_decoder(const CvaeDecoder& decoder) {
  decoder.validate();
  LayerContainer c;
  c.magic = kDecoderMagic;
  c.input_dim = decoder.latent_dim;
  c.num_classes = decoder.num_classes;
  c.output_dim = decoder.output_dim;
  c.layers = decoder.layers;
  c.metadata = decoder.metadata;
  return serialize_layers(c);
}

CvaeDecoder deserialize_decoder(std::span<const std::uint8_t> bytes) {
  auto c = deserialize_layers(bytes, kDecoderMagic);
  CvaeDecoder dec;
  dec.latent_dim = c.input_dim;
  dec.num_classes = c.num_classes;
  dec.output_dim = c.output_dim;
  dec.layers = std::move(c.layers);
  dec.metadata = std::move(c.metadata);
  dec.validate();
  return dec;
}

void save_decoder(const CvaeDecoder& decoder, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_decoder(decoder));
}

CvaeDecoder load_decoder(const std::filesystem::path& path) {
  return deserialize_decoder(read_file_bytes(path));
}

std::string decoder_hash(const CvaeDecoder& decoder) {
  return sealed_digest(serialize_decoder(decoder));
}

}  // namespace embanon
