#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "fsml/embedding_store.hpp"
#include "fsml/episode_sampler.hpp"
#include "fsml/matrix.hpp"

namespace fsml {

/// Clip value used when classifying.
inline constexpr double kEvalLambdaMax = 40.0;
/// Clip value used when computing the episode loss.
inline constexpr double kLossLambdaMax = 100.0;

enum class Metric { kEuclidean, kCosine, kMll };

std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);

/// Prototype and clipped exponential rates for one class of an episode.
struct ClassModel {
  ClassId class_id = 0;
  std::vector<double> prototype;
  std::vector<double> lambda;
  double lambda_max = kEvalLambdaMax;
};

/// Per-class similarity under the three metrics; higher means more similar.
struct ScoreTriple {
  double euc = 0.0;
  double cos = 0.0;
  double mll = 0.0;

  friend bool operator==(const ScoreTriple&, const ScoreTriple&) = default;
};

std::vector<double> prototype(const RowMatrix& support);

/// Rate MLE per feature, K / sum_k f_ik, clipped to lambda_max. A zero
/// column sum maps to lambda_max.
std::vector<double> estimate_lambda(const RowMatrix& support, double lambda_max);

ClassModel fit_class_model(ClassId class_id, const RowMatrix& support, double lambda_max);

/// sum_i log(lambda_i) - lambda . f
double mll_score(std::span<const double> lambda, std::span<const double> query);
double mll_score(const ClassModel& model, std::span<const double> query);

/// Negative squared Euclidean distance.
double euclidean_score(std::span<const double> prototype, std::span<const double> query);

double cosine_score(std::span<const double> prototype, std::span<const double> query);

/// Index of the largest score; ties go to the smallest class id.
std::size_t argmax_lowest_id(std::span<const double> scores, std::span<const ClassId> class_ids);

/// M x N matrix of scores for every query against every episode class.
RowMatrix score_matrix(const Task& task, Metric metric, double lambda_max);

/// MLL scores against externally supplied class models (e.g. true rates).
RowMatrix mll_score_matrix(const Task& task, std::span<const ClassModel> models);

/// Predictions are episode positions (indices into task.classes).
std::vector<std::size_t> classify_inductive(const Task& task, Metric metric,
                                            double lambda_max = kEvalLambdaMax);
std::vector<std::size_t> classify_from_scores(const RowMatrix& scores,
                                              std::span<const ClassId> class_ids);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// Max-shifted softmax.
std::vector<double> softmax_posterior(std::span<const double> scores);

/// J = -(1/(N*M)) * sum_q log p(true class | q) under MLL scores.
double episode_loss(const Episode& episode, double lambda_max = kLossLambdaMax);

struct LossGradient {
  std::vector<RowMatrix> support;  // per episode position, K x dim
  RowMatrix queries;               // M x dim
};

/// Analytic dJ/df for every support and query entry. Clipped rates are
/// treated as constants (zero derivative through the clip).
LossGradient loss_feature_gradient(const Episode& episode, double lambda_max = kLossLambdaMax);

}  // namespace fsml
