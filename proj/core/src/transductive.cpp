#include "fsml/transductive.hpp"

#include <algorithm>
#include <cmath>

#include "fsml/error.hpp"

namespace fsml {

namespace {

void check_weights(const RowMatrix& queries, const RowMatrix& weights) {
  if (queries.rows() == 0) {
    throw Error(ErrorCode::kInsufficientData, "weighted prototype: no assigned queries");
  }
  if (queries.rows() != weights.rows() || queries.cols() != weights.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "weighted prototype: queries and weights differ in shape");
  }
}

}  // namespace

std::vector<double> cdf_weight(std::span<const double> lambda, std::span<const double> query) {
  if (lambda.size() != query.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cdf_weight: dimension mismatch");
  }
  std::vector<double> w(lambda.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = -std::expm1(-lambda[i] * query[i]);
  return w;
}

std::vector<double> weighted_prototype(const RowMatrix& queries, const RowMatrix& weights) {
  check_weights(queries, weights);
  const std::size_t dim = queries.cols();
  std::vector<double> num(dim, 0.0);
  std::vector<double> den(dim, 0.0);
  std::vector<double> plain(dim, 0.0);
  for (std::size_t m = 0; m < queries.rows(); ++m) {
    for (std::size_t i = 0; i < dim; ++i) {
      num[i] += weights(m, i) * queries(m, i);
      den[i] += weights(m, i);
      plain[i] += queries(m, i);
    }
  }
  std::vector<double> g(dim);
  const double count = static_cast<double>(queries.rows());
  for (std::size_t i = 0; i < dim; ++i) g[i] = den[i] > 0.0 ? num[i] / den[i] : plain[i] / count;
  return g;
}

std::vector<double> weighted_sum(const RowMatrix& queries, const RowMatrix& weights) {
  check_weights(queries, weights);
  std::vector<double> g(queries.cols(), 0.0);
  for (std::size_t m = 0; m < queries.rows(); ++m) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weights(m, i) * queries(m, i);
  }
  return g;
}

TransductiveState::TransductiveState(const Task& task, const TransductiveOptions& options)
    : task_(&task), options_(options) {
  if (!(options.eta >= 0.0 && options.eta <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "transductive: eta must lie in [0, 1]");
  }
  for (double v : task.queries.data()) {
    if (v < 0.0) throw Error(ErrorCode::kInvalidArgument, "transductive: negative query feature");
  }
  const std::size_t n = task.n_way();
  prototypes_.reserve(n);
  models_.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    models_.push_back(fit_class_model(task.classes[c], task.support[c], options.lambda_max));
    prototypes_.push_back(models_.back().prototype);
  }
  reassign();
}

void TransductiveState::refresh_rates(std::size_t c) {
  auto& model = models_[c];
  model.prototype = prototypes_[c];
  for (std::size_t i = 0; i < model.lambda.size(); ++i) {
    const double f = prototypes_[c][i];
    model.lambda[i] = f > 0.0 ? std::min(1.0 / f, options_.lambda_max) : options_.lambda_max;
  }
}

void TransductiveState::reassign() {
  assignments_ = classify_from_scores(mll_score_matrix(*task_, models_), task_->classes);
}

void TransductiveState::step() {
  const RowMatrix& queries = task_->queries;
  const std::size_t n = task_->n_way();
  const std::size_t dim = queries.cols();

  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t q = 0; q < assignments_.size(); ++q) members[assignments_[q]].push_back(q);

  std::vector<bool> moved(n, false);
  for (std::size_t c = 0; c < n; ++c) {
    if (members[c].empty()) continue;
    RowMatrix assigned(members[c].size(), dim);
    RowMatrix weights(members[c].size(), dim);
    for (std::size_t j = 0; j < members[c].size(); ++j) {
      auto f = queries.row(members[c][j]);
      std::copy(f.begin(), f.end(), assigned.row(j).begin());
      const auto w = cdf_weight(models_[c].lambda, f);
      std::copy(w.begin(), w.end(), weights.row(j).begin());
    }
    const auto g = options_.raw_sum ? weighted_sum(assigned, weights)
                                    : weighted_prototype(assigned, weights);
    for (std::size_t i = 0; i < dim; ++i) {
      const double updated = (1.0 - options_.eta) * prototypes_[c][i] + options_.eta * g[i];
      moved[c] = moved[c] || updated != prototypes_[c][i];
      prototypes_[c][i] = updated;
    }
  }
  // Rates of an unmoved class stay as they were so a stationary prototype
  // reproduces its scores exactly.
  for (std::size_t c = 0; c < n; ++c) {
    if (moved[c]) refresh_rates(c);
  }
  reassign();
  ++iteration_;
}

void TransductiveState::run() {
  while (iteration_ < options_.iters) step();
}

TransductiveResult transductive_classify(const Task& task, const TransductiveOptions& options) {
  TransductiveState state(task, options);
  TransductiveResult result;
  result.inductive = state.assignments();
  state.run();
  result.transductive = state.assignments();
  return result;
}

}  // namespace fsml
