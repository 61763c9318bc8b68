#include "fsml/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fsml/error.hpp"

namespace fsml {

std::span<const double> GroundTruth::rates(ClassId c) const {
  if (c >= lambda.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "ground truth: unknown class " + std::to_string(c));
  }
  return lambda.row(c);
}

ClassModel GroundTruth::model(ClassId c) const {
  auto r = rates(c);
  ClassModel m;
  m.class_id = c;
  m.lambda.assign(r.begin(), r.end());
  m.prototype.resize(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) m.prototype[i] = 1.0 / r[i];
  m.lambda_max = std::numeric_limits<double>::infinity();
  return m;
}

std::pair<EmbeddingStore, GroundTruth> generate(const SyntheticSpec& spec) {
  if (spec.num_classes == 0 || spec.dim == 0 || spec.samples_per_class == 0) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic spec: counts must be positive");
  }
  if (!(spec.lambda_lo > 0.0) || !(spec.lambda_hi >= spec.lambda_lo) || !std::isfinite(spec.lambda_hi)) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic spec: need 0 < lambda_lo <= lambda_hi");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> log_rate(std::log(spec.lambda_lo), std::log(spec.lambda_hi));

  GroundTruth truth{RowMatrix(spec.num_classes, spec.dim)};
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.dim; ++i) {
      const double rate = spec.lambda_lo == spec.lambda_hi ? spec.lambda_lo : std::exp(log_rate(rng));
      truth.lambda(c, i) = std::clamp(rate, spec.lambda_lo, spec.lambda_hi);
    }
  }

  std::vector<ClassId> labels;
  std::vector<float> features;
  labels.reserve(spec.num_classes * spec.samples_per_class);
  features.reserve(spec.num_classes * spec.samples_per_class * spec.dim);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      labels.push_back(static_cast<ClassId>(c));
      for (std::size_t i = 0; i < spec.dim; ++i) {
        // Inverse-CDF draw; 1 - u lies in (0, 1].
        const double u = unit(rng);
        features.push_back(static_cast<float>(-std::log1p(-u) / truth.lambda(c, i)));
      }
    }
  }
  return {EmbeddingStore(spec.dim, true, std::move(labels), std::move(features)), std::move(truth)};
}

ClassId bayes_oracle_classify(const GroundTruth& truth, std::span<const double> query,
                              std::span<const ClassId> candidates) {
  if (candidates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "bayes oracle: no candidate classes");
  }
  ClassId best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (ClassId c : candidates) {
    auto rates = truth.rates(c);
    if (rates.size() != query.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "bayes oracle: dimension mismatch");
    }
    double score = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) score += std::log(rates[i]) - rates[i] * query[i];
    if (first || score > best_score || (score == best_score && c < best)) {
      best = c;
      best_score = score;
      first = false;
    }
  }
  return best;
}

std::string truth_to_json(const GroundTruth& truth, const SyntheticSpec& spec) {
  nlohmann::json j;
  j["num_classes"] = spec.num_classes;
  j["dim"] = spec.dim;
  j["samples_per_class"] = spec.samples_per_class;
  j["lambda_lo"] = spec.lambda_lo;
  j["lambda_hi"] = spec.lambda_hi;
  j["seed"] = spec.seed;
  auto rows = nlohmann::json::array();
  for (std::size_t c = 0; c < truth.lambda.rows(); ++c) {
    auto r = truth.lambda.row(c);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["lambda"] = std::move(rows);
  return j.dump();
}

GroundTruth truth_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& rows = j.at("lambda");
    if (!rows.is_array() || rows.empty()) {
      throw Error(ErrorCode::kFormat, "ground truth: empty lambda matrix");
    }
    const std::size_t dim = rows[0].size();
    GroundTruth truth{RowMatrix(rows.size(), dim)};
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (rows[c].size() != dim) throw Error(ErrorCode::kFormat, "ground truth: ragged lambda matrix");
      for (std::size_t i = 0; i < dim; ++i) truth.lambda(c, i) = rows[c][i].get<double>();
    }
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("ground truth: ") + e.what());
  }
}

void save_truth(const GroundTruth& truth, const SyntheticSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << truth_to_json(truth, spec) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return truth_from_json(ss.str());
}

std::filesystem::path truth_path_for(const std::filesystem::path& store_path) {
  std::filesystem::path p = store_path;
  p.replace_extension(".truth.json");
  return p;
}

}  // namespace fsml
