// SPDX-License-Identifier: Apache-2.0
#include "embanon/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "embanon/errors.hpp"
#include "embanon/parallel.hpp"
#include "embanon/rng.hpp"

namespace embanon {

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = static_cast<double>(a[k]) - b[k];
    sq += diff * diff;
  }
  return sq;
}

constexpr std::size_t kRowBlock = 64;

}  // namespace

double avg_nn_distance(const Matrix& anonymized, const Matrix& original) {
  if (anonymized.cols() != original.cols()) {
    throw DimensionError("avg_nn_distance: widths " + std::to_string(anonymized.cols()) + " and " +
                         std::to_string(original.cols()) + " differ");
  }
  if (original.rows() == 0) throw DataError("avg_nn_distance: empty original set");
  if (anonymized.rows() == 0) throw DataError("avg_nn_distance: empty anonymized set");

  std::vector<double> nearest(anonymized.rows(), std::numeric_limits<double>::infinity());
  parallel_for(anonymized.rows(), kRowBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t ob = 0; ob < original.rows(); ob += kRowBlock) {
      const std::size_t oe = std::min(original.rows(), ob + kRowBlock);
      for (std::size_t j = begin; j < end; ++j) {
        const auto a = anonymized.row(j);
        double best = nearest[j];
        for (std::size_t i = ob; i < oe; ++i) best = std::min(best, squared_distance(a, original.row(i)));
        nearest[j] = best;
      }
    }
  });
  double total = 0.0;
  for (const double sq : nearest) total += std::sqrt(sq);
  return total / static_cast<double>(anonymized.rows());
}

double avg_nn_distance(const EmbeddingDataset& anonymized, const EmbeddingDataset& original) {
  return avg_nn_distance(anonymized.features, original.features);
}

Dispersion max_dispersion(const Matrix& points) {
  const std::size_t n = points.rows();
  if (n == 0) throw DataError("max_dispersion of an empty set");
  std::vector<double> row_sums(n, 0.0);
  parallel_for(n, 16, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double s = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) s += std::sqrt(squared_distance(points.row(i), points.row(j)));
      row_sums[i] = s;
    }
  });
  Dispersion out;
  for (const double s : row_sums) out.total += s;
  if (n > 1) out.mean_pairwise = out.total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
  return out;
}

Dispersion max_dispersion(const EmbeddingDataset& dataset) { return max_dispersion(dataset.features); }

void PerturbSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noise sigma must be finite and >= 0");
  if (replicas == 0) throw ConfigError("noise replicas must be >= 1");
}

EmbeddingDataset perturb_gaussian(const EmbeddingDataset& dataset, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noise sigma must be finite and >= 0");
  EmbeddingDataset out = dataset;
  out.provenance = {{"method", "gaussian-noise"},
                    {"sigma", sigma},
                    {"seed", seed},
                    {"rng", std::string(Rng::algorithm_id)},
                    {"source", dataset.provenance}};
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (float& v : out.features.values()) v = static_cast<float>(static_cast<double>(v) + sigma * rng.normal());
  return out;
}

std::vector<EmbeddingDataset> perturb_replicas(const EmbeddingDataset& dataset, const PerturbSpec& spec) {
  spec.validate();
  std::vector<EmbeddingDataset> out;
  out.reserve(spec.replicas);
  for (std::size_t r = 0; r < spec.replicas; ++r) {
    out.push_back(perturb_gaussian(dataset, spec.sigma, derive_seed(spec.seed, static_cast<std::uint64_t>(r))));
  }
  return out;
}

PcaProjection pca_project(const Matrix& points, std::size_t target_dims) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (n < 2) throw DataError("pca_project needs at least 2 rows");
  if (target_dims == 0 || target_dims > d) {
    throw DimensionError("pca_project: target_dims must lie in [1, d]");
  }

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = points(i, j);
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

  PcaProjection out{MatrixD(n, target_dims), MatrixD(target_dims, d), std::vector<double>(target_dims, 0.0)};
  const double trace = cov.trace();
  if (!(trace > 0.0)) return out;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_project: eigendecomposition failed");
  // Eigenvalues come back ascending.
  for (std::size_t c = 0; c < target_dims; ++c) {
    const auto col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index pivot = 0;
    for (Eigen::Index j = 1; j < v.size(); ++j) {
      if (std::abs(v(j)) > std::abs(v(pivot))) pivot = j;
    }
    if (v(pivot) < 0.0) v = -v;
    out.explained_share[c] = std::max(0.0, solver.eigenvalues()(col)) / trace;
    for (std::size_t j = 0; j < d; ++j) out.components(c, j) = v(static_cast<Eigen::Index>(j));
    const Eigen::VectorXd proj = x * v;
    for (std::size_t i = 0; i < n; ++i) out.coordinates(i, c) = proj(static_cast<Eigen::Index>(i));
  }
  return out;
}

void write_pca_csv(const std::filesystem::path& path, const PcaProjection& projection,
                   std::span<const std::uint32_t> labels) {
  if (projection.coordinates.cols() != 2) throw DimensionError("pca csv needs a 2-D projection");
  if (projection.coordinates.rows() != labels.size()) throw DimensionError("pca csv: label count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "x,y,label\n";
  char buf[64];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", projection.coordinates(i, 0), projection.coordinates(i, 1));
    out << buf << ',' << labels[i] << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace embanon
