#include "fsml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsml/error.hpp"

namespace fsml {

namespace {

void require_same_dim(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": dimension mismatch (" +
                                                   std::to_string(a.size()) + " vs " +
                                                   std::to_string(b.size()) + ")");
  }
}

// Unclipped-rate bookkeeping shared by the loss and its gradient.
struct MllClass {
  std::vector<double> lambda;
  std::vector<bool> clipped;
  double log_lambda_sum = 0.0;
};

MllClass mll_class(const RowMatrix& support, double lambda_max) {
  MllClass out;
  out.lambda = estimate_lambda(support, lambda_max);
  out.clipped.resize(out.lambda.size());
  const double k = static_cast<double>(support.rows());
  for (std::size_t i = 0; i < out.lambda.size(); ++i) {
    double sum = 0.0;
    for (std::size_t r = 0; r < support.rows(); ++r) sum += support(r, i);
    out.clipped[i] = sum <= 0.0 || k / sum >= lambda_max;
    out.log_lambda_sum += std::log(out.lambda[i]);
  }
  return out;
}

}  // namespace

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kEuclidean:
      return "euclid";
    case Metric::kCosine:
      return "cosine";
    case Metric::kMll:
      return "mll";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "euclid" || name == "euclidean") return Metric::kEuclidean;
  if (name == "cosine") return Metric::kCosine;
  if (name == "mll") return Metric::kMll;
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

std::vector<double> prototype(const RowMatrix& support) {
  if (support.rows() == 0) {
    throw Error(ErrorCode::kInsufficientData, "prototype: empty support set");
  }
  std::vector<double> mean(support.cols(), 0.0);
  for (std::size_t r = 0; r < support.rows(); ++r) {
    auto row = support.row(r);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += row[i];
  }
  const double k = static_cast<double>(support.rows());
  for (auto& v : mean) v /= k;
  return mean;
}

std::vector<double> estimate_lambda(const RowMatrix& support, double lambda_max) {
  if (!(lambda_max > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "estimate_lambda: lambda_max must be positive");
  }
  if (support.rows() == 0) {
    throw Error(ErrorCode::kInsufficientData, "estimate_lambda: empty support set");
  }
  std::vector<double> sums(support.cols(), 0.0);
  for (std::size_t r = 0; r < support.rows(); ++r) {
    auto row = support.row(r);
    for (std::size_t i = 0; i < sums.size(); ++i) {
      if (row[i] < 0.0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "estimate_lambda: negative feature value at support row " + std::to_string(r));
      }
      sums[i] += row[i];
    }
  }
  const double k = static_cast<double>(support.rows());
  std::vector<double> lambda(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    lambda[i] = sums[i] > 0.0 ? std::min(k / sums[i], lambda_max) : lambda_max;
  }
  return lambda;
}

ClassModel fit_class_model(ClassId class_id, const RowMatrix& support, double lambda_max) {
  return ClassModel{class_id, prototype(support), estimate_lambda(support, lambda_max), lambda_max};
}

double mll_score(std::span<const double> lambda, std::span<const double> query) {
  require_same_dim(lambda, query, "mll_score");
  double log_sum = 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    log_sum += std::log(lambda[i]);
    dot += lambda[i] * query[i];
  }
  return log_sum - dot;
}

double mll_score(const ClassModel& model, std::span<const double> query) {
  return mll_score(model.lambda, query);
}

double euclidean_score(std::span<const double> prototype, std::span<const double> query) {
  require_same_dim(prototype, query, "euclidean_score");
  double d2 = 0.0;
  for (std::size_t i = 0; i < prototype.size(); ++i) {
    const double d = query[i] - prototype[i];
    d2 += d * d;
  }
  return -d2;
}

double cosine_score(std::span<const double> prototype, std::span<const double> query) {
  require_same_dim(prototype, query, "cosine_score");
  double dot = 0.0;
  double pp = 0.0;
  double qq = 0.0;
  for (std::size_t i = 0; i < prototype.size(); ++i) {
    dot += prototype[i] * query[i];
    pp += prototype[i] * prototype[i];
    qq += query[i] * query[i];
  }
  if (pp == 0.0 || qq == 0.0) {
    throw Error(ErrorCode::kNumerical, "cosine_score: zero-norm vector");
  }
  return dot / (std::sqrt(pp) * std::sqrt(qq));
}

std::size_t argmax_lowest_id(std::span<const double> scores, std::span<const ClassId> class_ids) {
  if (scores.empty() || scores.size() != class_ids.size()) {
    throw Error(ErrorCode::kInvalidArgument, "argmax: scores and class ids must be nonempty and aligned");
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best] || (scores[c] == scores[best] && class_ids[c] < class_ids[best])) {
      best = c;
    }
  }
  return best;
}

RowMatrix score_matrix(const Task& task, Metric metric, double lambda_max) {
  const std::size_t n = task.n_way();
  if (n == 0 || task.support.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "score_matrix: task has no classes or mismatched support");
  }
  RowMatrix scores(task.queries.rows(), n);
  if (metric == Metric::kMll) {
    std::vector<ClassModel> models;
    models.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
      models.push_back(fit_class_model(task.classes[c], task.support[c], lambda_max));
    }
    return mll_score_matrix(task, models);
  }
  for (std::size_t c = 0; c < n; ++c) {
    const auto proto = prototype(task.support[c]);
    for (std::size_t q = 0; q < task.queries.rows(); ++q) {
      scores(q, c) = metric == Metric::kEuclidean ? euclidean_score(proto, task.queries.row(q))
                                                  : cosine_score(proto, task.queries.row(q));
    }
  }
  return scores;
}

RowMatrix mll_score_matrix(const Task& task, std::span<const ClassModel> models) {
  if (models.size() != task.n_way()) {
    throw Error(ErrorCode::kInvalidArgument, "mll_score_matrix: need one model per episode class");
  }
  RowMatrix scores(task.queries.rows(), models.size());
  for (std::size_t c = 0; c < models.size(); ++c) {
    if (models[c].lambda.size() != task.queries.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "mll_score_matrix: dimension mismatch");
    }
    double log_sum = 0.0;
    for (double l : models[c].lambda) log_sum += std::log(l);
    for (std::size_t q = 0; q < task.queries.rows(); ++q) {
      auto f = task.queries.row(q);
      double dot = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) dot += models[c].lambda[i] * f[i];
      scores(q, c) = log_sum - dot;
    }
  }
  return scores;
}

std::vector<std::size_t> classify_from_scores(const RowMatrix& scores,
                                              std::span<const ClassId> class_ids) {
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t q = 0; q < scores.rows(); ++q) out[q] = argmax_lowest_id(scores.row(q), class_ids);
  return out;
}

std::vector<std::size_t> classify_inductive(const Task& task, Metric metric, double lambda_max) {
  return classify_from_scores(score_matrix(task, metric, lambda_max), task.classes);
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kInvalidArgument, "accuracy: length mismatch");
  }
  if (predicted.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < predicted.size(); ++q) hits += predicted[q] == truth[q] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<double> softmax_posterior(std::span<const double> scores) {
  if (scores.empty()) return {};
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    p[c] = std::exp(scores[c] - top);
    z += p[c];
  }
  for (auto& v : p) v /= z;
  return p;
}

double episode_loss(const Episode& episode, double lambda_max) {
  const Task& task = episode.task;
  const auto scores = score_matrix(task, Metric::kMll, lambda_max);
  const double n = static_cast<double>(task.n_way());
  const double m = static_cast<double>(task.queries.rows());
  double total = 0.0;
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    auto row = scores.row(q);
    const double top = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double s : row) z += std::exp(s - top);
    // log p(true) = s_true - top - log z
    total += row[episode.hidden_labels[q]] - top - std::log(z);
  }
  return -total / (n * m);
}

LossGradient loss_feature_gradient(const Episode& episode, double lambda_max) {
  const Task& task = episode.task;
  const std::size_t n = task.n_way();
  const std::size_t m = task.queries.rows();
  const std::size_t dim = task.dim();
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(m));

  std::vector<MllClass> classes;
  classes.reserve(n);
  for (std::size_t c = 0; c < n; ++c) classes.push_back(mll_class(task.support[c], lambda_max));

  // dJ/dalpha_qc = (p_qc - [c == y_q]) / (N M)
  RowMatrix d_alpha(m, n);
  for (std::size_t q = 0; q < m; ++q) {
    auto f = task.queries.row(q);
    std::vector<double> alpha(n);
    for (std::size_t c = 0; c < n; ++c) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += classes[c].lambda[i] * f[i];
      alpha[c] = classes[c].log_lambda_sum - dot;
    }
    const auto p = softmax_posterior(alpha);
    for (std::size_t c = 0; c < n; ++c) {
      d_alpha(q, c) = norm * (p[c] - (episode.hidden_labels[q] == c ? 1.0 : 0.0));
    }
  }

  LossGradient grad;
  grad.queries = RowMatrix(m, dim);
  for (std::size_t q = 0; q < m; ++q) {
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i = 0; i < dim; ++i) grad.queries(q, i) -= d_alpha(q, c) * classes[c].lambda[i];
    }
  }

  grad.support.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    const RowMatrix& support = task.support[c];
    const double k = static_cast<double>(support.rows());
    RowMatrix g(support.rows(), dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (classes[c].clipped[i]) continue;
      const double lam = classes[c].lambda[i];
      // dJ/dlambda_ci = sum_q dJ/dalpha_qc * (1/lambda_ci - f_qi)
      double d_lambda = 0.0;
      for (std::size_t q = 0; q < m; ++q) {
        d_lambda += d_alpha(q, c) * (1.0 / lam - task.queries(q, i));
      }
      // lambda = K / sum_k f_ki  =>  dlambda/df_ki = -lambda^2 / K
      const double d_feature = d_lambda * (-lam * lam / k);
      for (std::size_t r = 0; r < support.rows(); ++r) g(r, i) = d_feature;
    }
    grad.support.push_back(std::move(g));
  }
  return grad;
}

}  // namespace fsml
