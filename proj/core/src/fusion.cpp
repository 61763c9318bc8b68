#include "fsml/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "fsml/error.hpp"
#include "fsml/parallel.hpp"

namespace fsml {

namespace {

struct Moments {
  Vec3 mean{};
  Mat3 cov{};
};

Moments sample_moments(const std::vector<ScoreTriple>& samples, const char* population) {
  if (samples.size() < kMinFusionSamples) {
    throw Error(ErrorCode::kInsufficientData,
                std::string("fit_fusion: ") + population + " population has " +
                    std::to_string(samples.size()) + " samples, need at least " +
                    std::to_string(kMinFusionSamples));
  }
  Moments m;
  for (const auto& t : samples) {
    const Vec3 v = as_vec3(t);
    for (int i = 0; i < 3; ++i) {
      if (!std::isfinite(v[i])) {
        throw Error(ErrorCode::kNumerical,
                    std::string("fit_fusion: non-finite score in ") + population + " population");
      }
      m.mean[i] += v[i];
    }
  }
  const double n = static_cast<double>(samples.size());
  for (auto& x : m.mean) x /= n;
  for (const auto& t : samples) {
    const Vec3 v = as_vec3(t);
    for (int r = 0; r < 3; ++r) {
      for (int c = r; c < 3; ++c) m.cov[r][c] += (v[r] - m.mean[r]) * (v[c] - m.mean[c]);
    }
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = r; c < 3; ++c) {
      m.cov[r][c] /= n - 1.0;
      m.cov[c][r] = m.cov[r][c];
    }
  }
  return m;
}

double smallest_eigenvalue(const Mat3& s) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = s[r][c];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool is_positive_definite(const Mat3& s) {
  if (!(smallest_eigenvalue(s) > 0.0)) return false;
  try {
    (void)cholesky3(s);
  } catch (const Error&) {
    return false;
  }
  return true;
}

// Returns true if a ridge was added.
bool regularize(Mat3& cov, const char* population) {
  const double trace = cov[0][0] + cov[1][1] + cov[2][2];
  const double threshold = trace > 0.0 ? kRidgeEpsilon * trace / 3.0 : kRidgeEpsilon;
  if (smallest_eigenvalue(cov) > threshold) return false;

  double ridge = threshold;
  for (int attempt = 0; attempt < 64; ++attempt, ridge *= 2.0) {
    Mat3 candidate = cov;
    for (int i = 0; i < 3; ++i) candidate[i][i] += ridge;
    if (is_positive_definite(candidate)) {
      cov = candidate;
      return true;
    }
  }
  throw Error(ErrorCode::kNumerical,
              std::string("fit_fusion: ") + population + " covariance is singular after regularization");
}

nlohmann::json mat_to_json(const Mat3& m) {
  return nlohmann::json::array({m[0], m[1], m[2]});
}

Mat3 mat_from_json(const nlohmann::json& j) {
  Mat3 m{};
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kFormat, "fusion model: bad matrix");
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) {
      throw Error(ErrorCode::kFormat, "fusion model: bad matrix row");
    }
    for (int c = 0; c < 3; ++c) m[r][c] = j[r][c].get<double>();
  }
  return m;
}

Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kFormat, "fusion model: bad vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

FusionModel fit_fusion(const ScoreSampleSet& samples) {
  Moments intra = sample_moments(samples.intra, "intra");
  Moments cross = sample_moments(samples.cross, "cross");
  FusionModel model;
  const bool ridge_intra = regularize(intra.cov, "intra");
  const bool ridge_cross = regularize(cross.cov, "cross");
  model.mu_intra = intra.mean;
  model.sigma_intra = intra.cov;
  model.mu_cross = cross.mean;
  model.sigma_cross = cross.cov;
  model.n_intra = samples.intra.size();
  model.n_cross = samples.cross.size();
  model.ridge_applied = ridge_intra || ridge_cross;
  return model;
}

double youden_statistic(const ScoreTriple& alpha, const FusionModel& model) {
  const Vec3 a = as_vec3(alpha);
  const double tp = mvn_cdf(a, model.mu_intra, model.sigma_intra);
  const double fp = 1.0 - mvn_cdf(a, model.mu_cross, model.sigma_cross);
  return tp - fp;
}

std::size_t classify_combined(std::span<const ScoreTriple> per_class, const FusionModel& model,
                              std::span<const ClassId> class_ids) {
  if (per_class.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "classify_combined: no classes");
  }
  if (per_class.size() == 1) return 0;
  std::vector<double> stat(per_class.size());
  for (std::size_t c = 0; c < per_class.size(); ++c) stat[c] = youden_statistic(per_class[c], model);
  return argmax_lowest_id(stat, class_ids);
}

std::string fusion_to_json(const FusionModel& model) {
  nlohmann::json j;
  j["mu_intra"] = model.mu_intra;
  j["sigma_intra"] = mat_to_json(model.sigma_intra);
  j["mu_cross"] = model.mu_cross;
  j["sigma_cross"] = mat_to_json(model.sigma_cross);
  j["n_intra"] = model.n_intra;
  j["n_cross"] = model.n_cross;
  j["ridge_applied"] = model.ridge_applied;
  j["degraded"] = model.degraded;
  return j.dump(2);
}

FusionModel fusion_from_json(const std::string& text) {
  FusionModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.mu_intra = vec_from_json(j.at("mu_intra"));
    m.sigma_intra = mat_from_json(j.at("sigma_intra"));
    m.mu_cross = vec_from_json(j.at("mu_cross"));
    m.sigma_cross = mat_from_json(j.at("sigma_cross"));
    m.n_intra = j.at("n_intra").get<std::size_t>();
    m.n_cross = j.at("n_cross").get<std::size_t>();
    m.ridge_applied = j.at("ridge_applied").get<bool>();
    m.degraded = j.value("degraded", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("fusion model: ") + e.what());
  }
  // Reject models that cannot be evaluated.
  (void)cholesky3(m.sigma_intra);
  (void)cholesky3(m.sigma_cross);
  return m;
}

void save_fusion(const FusionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << fusion_to_json(model) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

FusionModel load_fusion(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return fusion_from_json(ss.str());
}

void check_aligned(const MetricStores& stores) {
  if (stores.euc == nullptr || stores.cos == nullptr || stores.mll == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "metric stores: all three stores must be set");
  }
  for (const EmbeddingStore* s : {stores.cos, stores.mll}) {
    if (s->size() != stores.euc->size()) {
      throw Error(ErrorCode::kDimensionMismatch, "metric stores: sample counts differ");
    }
    if (!std::equal(s->labels().begin(), s->labels().end(), stores.euc->labels().begin())) {
      throw Error(ErrorCode::kDimensionMismatch, "metric stores: labels differ");
    }
  }
}

std::vector<std::vector<ScoreTriple>> episode_triples(const EpisodePlan& plan,
                                                      const MetricStores& stores,
                                                      double lambda_max) {
  const Episode euc = materialize(plan, *stores.euc);
  const RowMatrix s_euc = score_matrix(euc.task, Metric::kEuclidean, lambda_max);
  const RowMatrix s_cos = score_matrix(
      stores.cos == stores.euc ? euc.task : materialize(plan, *stores.cos).task, Metric::kCosine,
      lambda_max);
  const RowMatrix s_mll = score_matrix(
      stores.mll == stores.euc ? euc.task : materialize(plan, *stores.mll).task, Metric::kMll,
      lambda_max);

  std::vector<std::vector<ScoreTriple>> out(s_euc.rows(), std::vector<ScoreTriple>(s_euc.cols()));
  for (std::size_t q = 0; q < s_euc.rows(); ++q) {
    for (std::size_t c = 0; c < s_euc.cols(); ++c) {
      out[q][c] = ScoreTriple{s_euc(q, c), s_cos(q, c), s_mll(q, c)};
    }
  }
  return out;
}

CollectedScores collect_scores(const MetricStores& stores, const ScorePlan& plan) {
  check_aligned(stores);
  if (plan.episodes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "collect_scores: need at least one episode");
  }
  EpisodeSampler sampler(*stores.mll, plan.n_way, plan.k_shot, plan.queries_per_class);

  struct EpisodeScores {
    std::vector<std::vector<ScoreTriple>> triples;
    std::vector<std::size_t> truth;
    std::vector<ClassId> classes;
  };
  std::vector<EpisodeScores> per_episode(plan.episodes);
  parallel_for(plan.episodes, plan.threads, [&](std::size_t e) {
    const EpisodePlan ep = sampler.plan_balanced(plan.queries_per_class, plan.seed, e);
    per_episode[e] = {episode_triples(ep, stores, plan.lambda_max), ep.query_positions, ep.classes};
  });

  CollectedScores out;
  for (const auto& ep : per_episode) {
    for (std::size_t q = 0; q < ep.triples.size(); ++q) {
      const auto& row = ep.triples[q];
      std::vector<double> euc(row.size());
      std::vector<double> cos(row.size());
      std::vector<double> mll(row.size());
      for (std::size_t c = 0; c < row.size(); ++c) {
        (c == ep.truth[q] ? out.samples.intra : out.samples.cross).push_back(row[c]);
        euc[c] = row[c].euc;
        cos[c] = row[c].cos;
        mll[c] = row[c].mll;
      }
      out.pred_euc.push_back(argmax_lowest_id(euc, ep.classes));
      out.pred_cos.push_back(argmax_lowest_id(cos, ep.classes));
      out.pred_mll.push_back(argmax_lowest_id(mll, ep.classes));
      out.truth.push_back(ep.truth[q]);
    }
  }
  return out;
}

}  // namespace fsml
