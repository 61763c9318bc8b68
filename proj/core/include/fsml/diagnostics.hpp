#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsml/embedding_store.hpp"
#include "fsml/fusion.hpp"

namespace fsml {

inline constexpr std::size_t kDefaultHistogramBins = 60;

/// Empirical density over half-open bins [z - B/2, z + B/2).
struct HistogramDensity {
  double bin_size = 0.0;
  std::vector<double> centers;
  std::vector<double> densities;
  std::size_t count = 0;
};

/// Bins start at zero: centers B/2, 3B/2, ... up to the bin holding max(values).
/// Each density is (count in bin) / (L * B).
HistogramDensity histogram_density(std::span<const double> values, double bin_size);

/// Same, with the first bin starting at `origin` (used for signed scores).
HistogramDensity histogram_density(std::span<const double> values, double bin_size, double origin);

/// (max - min) / bins, or 1 when all values coincide.
double default_bin_size(std::span<const double> values, std::size_t bins = kDefaultHistogramBins);

struct ExponentialFitReport {
  ClassId class_id = 0;
  std::size_t feature = 0;
  double lambda = 0.0;
  std::size_t count = 0;
  double mean = 0.0;
};

/// Rate MLE: count / sum.
ExponentialFitReport fit_exponential(std::span<const double> values);

struct FeatureReport {
  HistogramDensity histogram;
  ExponentialFitReport fit;
};

FeatureReport class_feature_report(const EmbeddingStore& store, ClassId class_id,
                                   std::size_t feature, std::optional<double> bin_size = {});

/// Rows `z,empirical_density,fitted_density`.
std::string feature_report_csv(const FeatureReport& report);

struct GaussianFit {
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 for a single sample
  std::size_t count = 0;
};

GaussianFit fit_gaussian(std::span<const double> values);

struct ScoreDistribution {
  Metric metric = Metric::kMll;
  bool intra = true;
  GaussianFit fit;
  HistogramDensity histogram;
};

/// Six entries: {euclid, cosine, mll} x {intra, cross}.
std::vector<ScoreDistribution> score_distribution_report(const ScoreSampleSet& samples,
                                                         std::size_t bins = kDefaultHistogramBins);

/// Rows `metric,population,bin_center,density,gauss_mean,gauss_var`.
std::string score_report_csv(std::span<const ScoreDistribution> report);

struct AgreementReport {
  double euc_cos = 0.0;
  double euc_mll = 0.0;
  double cos_mll = 0.0;
  double unanimous = 0.0;
  std::size_t count = 0;
};

AgreementReport metric_agreement(std::span<const std::size_t> euc, std::span<const std::size_t> cos,
                                 std::span<const std::size_t> mll);

}  // namespace fsml
