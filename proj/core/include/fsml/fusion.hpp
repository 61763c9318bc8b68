#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsml/embedding_store.hpp"
#include "fsml/metrics.hpp"

namespace fsml {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

inline constexpr std::size_t kMinFusionSamples = 10;
inline constexpr double kRidgeEpsilon = 1e-6;
inline constexpr std::size_t kMvnQmcPoints = std::size_t{1} << 10;

/// Score triples split by whether the scored class is the query's true class.
struct ScoreSampleSet {
  std::vector<ScoreTriple> intra;
  std::vector<ScoreTriple> cross;
};

/// Gaussian models of intra-class and cross-class score triples.
struct FusionModel {
  Vec3 mu_intra{};
  Mat3 sigma_intra{};
  Vec3 mu_cross{};
  Mat3 sigma_cross{};
  std::size_t n_intra = 0;
  std::size_t n_cross = 0;
  bool ridge_applied = false;
  bool degraded = false;  // fitted with one store standing in for all three

  friend bool operator==(const FusionModel&, const FusionModel&) = default;
};

inline Vec3 as_vec3(const ScoreTriple& t) { return {t.euc, t.cos, t.mll}; }

/**
 * Sample means and unbiased covariances of both populations.
 *
 * When a covariance's smallest eigenvalue is at or below
 * kRidgeEpsilon * trace / 3 (kRidgeEpsilon when the trace is zero) that
 * amount is added to the diagonal, doubling until the matrix is
 * positive definite.
 */
FusionModel fit_fusion(const ScoreSampleSet& samples);

/**
 * P(Z <= x componentwise) for Z ~ N(mu, sigma), sigma 3x3 SPD.
 *
 * Sequential conditioning after a Cholesky factorization reduces the
 * integral to a smooth 2-d integrand over the unit square, which is averaged
 * over a fixed, shifted 2-d Sobol point set. The result is a deterministic
 * function of the inputs. Infinite entries of x are allowed.
 */
double mvn_cdf(const Vec3& x, const Vec3& mu, const Mat3& sigma,
               std::size_t points = kMvnQmcPoints);

/// Lower Cholesky factor; throws if sigma is not symmetric positive definite.
Mat3 cholesky3(const Mat3& sigma);

/// Phi_intra(alpha) - (1 - Phi_cross(alpha)), in [-1, 1].
double youden_statistic(const ScoreTriple& alpha, const FusionModel& model);

/// Episode position maximizing the Youden statistic; ties go to the smallest class id.
std::size_t classify_combined(std::span<const ScoreTriple> per_class, const FusionModel& model,
                              std::span<const ClassId> class_ids);

std::string fusion_to_json(const FusionModel& model);
FusionModel fusion_from_json(const std::string& text);
void save_fusion(const FusionModel& model, const std::filesystem::path& path);
FusionModel load_fusion(const std::filesystem::path& path);

/// Three embeddings of the same samples, one per metric's network. The same
/// store may stand in for all three.
struct MetricStores {
  const EmbeddingStore* euc = nullptr;
  const EmbeddingStore* cos = nullptr;
  const EmbeddingStore* mll = nullptr;

  [[nodiscard]] bool degraded() const noexcept { return euc == cos && cos == mll; }
};

/// Throws unless the three stores agree on sample count and labels.
void check_aligned(const MetricStores& stores);

/// M x N grid of triples for one episode plan.
std::vector<std::vector<ScoreTriple>> episode_triples(const EpisodePlan& plan,
                                                      const MetricStores& stores,
                                                      double lambda_max);

struct ScorePlan {
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t queries_per_class = 15;
  std::size_t episodes = 2000;
  double lambda_max = kEvalLambdaMax;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct CollectedScores {
  ScoreSampleSet samples;
  // Single-metric predictions for every query of every episode, in episode order.
  std::vector<std::size_t> pred_euc;
  std::vector<std::size_t> pred_cos;
  std::vector<std::size_t> pred_mll;
  std::vector<std::size_t> truth;
};

CollectedScores collect_scores(const MetricStores& stores, const ScorePlan& plan);

}  // namespace fsml
