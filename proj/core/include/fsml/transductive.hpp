#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fsml/episode_sampler.hpp"
#include "fsml/matrix.hpp"
#include "fsml/metrics.hpp"

namespace fsml {

struct TransductiveOptions {
  std::size_t iters = 10;
  double eta = 0.5;
  double lambda_max = kEvalLambdaMax;
  // Use the literal weighted sum for the query prototype instead of the
  // per-coordinate weighted average.
  bool raw_sum = false;
};

/// Exponential CDF per coordinate: 1 - exp(-lambda_i * f_i).
std::vector<double> cdf_weight(std::span<const double> lambda, std::span<const double> query);

/// Per-coordinate weighted average of the rows of `queries`. A coordinate
/// whose weights sum to zero falls back to the plain mean of that coordinate.
std::vector<double> weighted_prototype(const RowMatrix& queries, const RowMatrix& weights);

/// Per-coordinate weighted sum, sum_m w_mi * f_mi.
std::vector<double> weighted_sum(const RowMatrix& queries, const RowMatrix& weights);

/**
 * Probability-weighted prototype refinement over one query batch.
 *
 * Starts from the inductive MLL solution. Each step weights every query by
 * the CDF of its currently assigned class, pulls each class prototype toward
 * the weighted prototype of its assigned queries by eta, then re-derives the
 * clipped rates and reassigns every query. Classes with no assigned queries
 * keep their prototype for that step.
 */
class TransductiveState {
 public:
  TransductiveState(const Task& task, const TransductiveOptions& options);

  void step();
  void run();

  [[nodiscard]] const std::vector<std::size_t>& assignments() const noexcept { return assignments_; }
  [[nodiscard]] const std::vector<std::vector<double>>& prototypes() const noexcept { return prototypes_; }
  [[nodiscard]] const std::vector<ClassModel>& models() const noexcept { return models_; }
  [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }

 private:
  void refresh_rates(std::size_t c);
  void reassign();

  const Task* task_;
  TransductiveOptions options_;
  std::vector<std::vector<double>> prototypes_;
  std::vector<ClassModel> models_;
  std::vector<std::size_t> assignments_;
  std::size_t iteration_ = 0;
};

struct TransductiveResult {
  std::vector<std::size_t> inductive;
  std::vector<std::size_t> transductive;
};

TransductiveResult transductive_classify(const Task& task, const TransductiveOptions& options);

}  // namespace fsml
