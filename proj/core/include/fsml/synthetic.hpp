#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>

#include "fsml/embedding_store.hpp"
#include "fsml/matrix.hpp"
#include "fsml/metrics.hpp"

namespace fsml {

/// Stores with independent exponential features per (class, feature).
struct SyntheticSpec {
  std::size_t num_classes = 20;
  std::uint32_t dim = 64;
  std::size_t samples_per_class = 200;
  double lambda_lo = 0.5;
  double lambda_hi = 5.0;
  std::uint64_t seed = 0;
};

/// True rate for each class (row) and feature (column).
struct GroundTruth {
  RowMatrix lambda;

  [[nodiscard]] std::size_t num_classes() const noexcept { return lambda.rows(); }
  [[nodiscard]] std::span<const double> rates(ClassId c) const;
  /// True rates as an unclipped class model, for injection into the MLL scorer.
  [[nodiscard]] ClassModel model(ClassId c) const;
};

/// Rates are log-uniform on [lambda_lo, lambda_hi], drawn once per
/// (class, feature); samples are class-major with labels 0..C-1.
std::pair<EmbeddingStore, GroundTruth> generate(const SyntheticSpec& spec);

/// argmax over candidates of sum_i log(lambda_ci) - lambda_ci * f_i with the
/// true rates; ties go to the smallest class id.
ClassId bayes_oracle_classify(const GroundTruth& truth, std::span<const double> query,
                              std::span<const ClassId> candidates);

std::string truth_to_json(const GroundTruth& truth, const SyntheticSpec& spec);
GroundTruth truth_from_json(const std::string& text);
void save_truth(const GroundTruth& truth, const SyntheticSpec& spec, const std::filesystem::path& path);
GroundTruth load_truth(const std::filesystem::path& path);

/// `store.fsem` -> `store.truth.json`
std::filesystem::path truth_path_for(const std::filesystem::path& store_path);

}  // namespace fsml
