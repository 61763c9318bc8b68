#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fsml/embedding_store.hpp"
#include "fsml/matrix.hpp"

namespace fsml {

/// Per-episode RNG seed: splitmix64 mix of (master_seed, episode_index, stream).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t episode_index,
                          std::uint64_t stream = 0);

/// Which samples make up an episode, by index into a store. Materialize it
/// against any store that shares sample ordering to get features.
struct EpisodePlan {
  std::uint64_t episode_id = 0;
  std::size_t k_shot = 0;
  std::vector<ClassId> classes;                          // episode position -> class id
  std::vector<std::vector<std::size_t>> support_indices; // per position, K indices
  std::vector<std::size_t> query_indices;
  std::vector<std::size_t> query_positions;              // true episode position per query

  [[nodiscard]] std::size_t n_way() const noexcept { return classes.size(); }
};

/// What a classifier is allowed to see: support sets and unlabeled queries.
struct Task {
  std::vector<ClassId> classes;
  std::vector<RowMatrix> support;  // per episode position, K x dim
  RowMatrix queries;               // M x dim

  [[nodiscard]] std::size_t n_way() const noexcept { return classes.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return queries.cols(); }
};

/// A task plus held-out query labels (episode positions), used only for scoring.
struct Episode {
  std::uint64_t episode_id = 0;
  std::size_t k_shot = 0;
  Task task;
  std::vector<std::size_t> hidden_labels;

  [[nodiscard]] std::size_t n_way() const noexcept { return task.n_way(); }
};

Episode materialize(const EpisodePlan& plan, const EmbeddingStore& store);

struct QueryCounts {
  std::vector<std::size_t> per_class;

  [[nodiscard]] std::size_t total() const noexcept;
};

/// Dirichlet(a,...,a) proportions rounded to integer counts by largest remainder.
QueryCounts dirichlet_query_counts(std::size_t n_way, std::size_t total, double concentration,
                                   std::mt19937_64& rng);

/// Largest-remainder rounding of total * proportions; sums to total exactly.
std::vector<std::size_t> largest_remainder(std::span<const double> proportions, std::size_t total);

/**
 * Draws N-way K-shot episode plans from one store.
 *
 * Classes with fewer than K + max_queries_per_class samples are dropped from
 * the eligible pool once, at construction, with a warning on stderr. Every
 * plan is a pure function of (master_seed, episode_index).
 */
class EpisodeSampler {
 public:
  EpisodeSampler(const EmbeddingStore& store, std::size_t n_way, std::size_t k_shot,
                 std::size_t max_queries_per_class);

  [[nodiscard]] EpisodePlan plan(std::span<const std::size_t> query_counts,
                                 std::uint64_t master_seed, std::uint64_t episode_index) const;
  [[nodiscard]] EpisodePlan plan_balanced(std::size_t queries_per_class, std::uint64_t master_seed,
                                          std::uint64_t episode_index) const;

  [[nodiscard]] const std::vector<ClassId>& eligible_classes() const noexcept { return eligible_; }
  [[nodiscard]] std::size_t n_way() const noexcept { return n_way_; }
  [[nodiscard]] std::size_t k_shot() const noexcept { return k_shot_; }

 private:
  const EmbeddingStore* store_;
  std::size_t n_way_;
  std::size_t k_shot_;
  std::size_t max_queries_;
  std::vector<ClassId> eligible_;
};

Episode sample_balanced_episode(const EmbeddingStore& store, std::size_t n_way, std::size_t k_shot,
                                std::size_t queries_per_class, std::uint64_t master_seed,
                                std::uint64_t episode_index);

Episode sample_imbalanced_episode(const EmbeddingStore& store, std::size_t n_way,
                                  std::size_t k_shot, const QueryCounts& counts,
                                  std::uint64_t master_seed, std::uint64_t episode_index);

}  // namespace fsml
