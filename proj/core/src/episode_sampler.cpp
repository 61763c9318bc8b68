#include "fsml/episode_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "fsml/error.hpp"

namespace fsml {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Moves a uniform random k-subset of v to its front, in random order.
template <typename T>
void partial_shuffle(std::vector<T>& v, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
    std::swap(v[i], v[pick(rng)]);
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t episode_index,
                          std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master_seed) ^ episode_index) ^ stream);
}

std::size_t QueryCounts::total() const noexcept {
  return std::accumulate(per_class.begin(), per_class.end(), std::size_t{0});
}

std::vector<std::size_t> largest_remainder(std::span<const double> proportions, std::size_t total) {
  const std::size_t n = proportions.size();
  std::vector<std::size_t> counts(n, 0);
  if (n == 0) return counts;
  std::vector<double> remainder(n, 0.0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const double exact = proportions[c] * static_cast<double>(total);
    const double floor_v = std::floor(exact);
    counts[c] = static_cast<std::size_t>(floor_v);
    remainder[c] = exact - floor_v;
    assigned += counts[c];
  }
  // Floating-point slop can push the floors past total; trim from the smallest remainders.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t j = 0; assigned < total; j = (j + 1) % n) {
    ++counts[order[j]];
    ++assigned;
  }
  while (assigned > total) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > total; ++it) {
      if (counts[*it] > 0) {
        --counts[*it];
        --assigned;
      }
    }
  }
  return counts;
}

QueryCounts dirichlet_query_counts(std::size_t n_way, std::size_t total, double concentration,
                                   std::mt19937_64& rng) {
  if (n_way == 0) {
    throw Error(ErrorCode::kInvalidArgument, "dirichlet counts: n_way must be >= 1");
  }
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw Error(ErrorCode::kInvalidArgument, "dirichlet counts: concentration must be positive");
  }
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(n_way);
  double sum = 0.0;
  for (auto& x : p) {
    x = gamma(rng);
    sum += x;
  }
  if (sum > 0.0) {
    for (auto& x : p) x /= sum;
  } else {
    // Every gamma draw underflowed (tiny concentration); treat as uniform.
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n_way));
  }
  return QueryCounts{largest_remainder(p, total)};
}

EpisodeSampler::EpisodeSampler(const EmbeddingStore& store, std::size_t n_way, std::size_t k_shot,
                               std::size_t max_queries_per_class)
    : store_(&store), n_way_(n_way), k_shot_(k_shot), max_queries_(max_queries_per_class) {
  if (n_way == 0) {
    throw Error(ErrorCode::kInvalidArgument, "sampler: n_way must be >= 1");
  }
  if (k_shot == 0) {
    throw Error(ErrorCode::kInvalidArgument, "sampler: k_shot must be >= 1");
  }
  const std::size_t needed = k_shot + max_queries_per_class;
  std::size_t dropped = 0;
  for (const auto& [c, samples] : store.class_index()) {
    if (samples.size() >= needed) {
      eligible_.push_back(c);
    } else {
      ++dropped;
    }
  }
  if (dropped > 0) {
    std::clog << "warning: " << dropped << " class(es) have fewer than " << needed
              << " samples and are excluded from episode sampling\n";
  }
  if (eligible_.size() < n_way) {
    throw Error(ErrorCode::kInsufficientData,
                "sampler: " + std::to_string(eligible_.size()) + " eligible classes with >= " +
                    std::to_string(needed) + " samples, need " + std::to_string(n_way));
  }
}

EpisodePlan EpisodeSampler::plan(std::span<const std::size_t> query_counts,
                                 std::uint64_t master_seed, std::uint64_t episode_index) const {
  if (query_counts.size() != n_way_) {
    throw Error(ErrorCode::kInvalidArgument, "sampler: query count vector must have n_way entries");
  }
  for (std::size_t m : query_counts) {
    if (m > max_queries_) {
      throw Error(ErrorCode::kInsufficientData,
                  "sampler: query count " + std::to_string(m) +
                      " exceeds the per-class maximum this sampler was built for (" +
                      std::to_string(max_queries_) + ")");
    }
  }

  std::mt19937_64 rng(derive_seed(master_seed, episode_index));
  std::vector<ClassId> pool = eligible_;
  partial_shuffle(pool, n_way_, rng);

  EpisodePlan plan;
  plan.episode_id = episode_index;
  plan.k_shot = k_shot_;
  plan.classes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_way_));
  plan.support_indices.resize(n_way_);
  for (std::size_t pos = 0; pos < n_way_; ++pos) {
    std::vector<std::size_t> samples = store_->samples_of(plan.classes[pos]);
    const std::size_t m = query_counts[pos];
    partial_shuffle(samples, k_shot_ + m, rng);
    plan.support_indices[pos].assign(samples.begin(),
                                     samples.begin() + static_cast<std::ptrdiff_t>(k_shot_));
    for (std::size_t j = 0; j < m; ++j) {
      plan.query_indices.push_back(samples[k_shot_ + j]);
      plan.query_positions.push_back(pos);
    }
  }
  return plan;
}

EpisodePlan EpisodeSampler::plan_balanced(std::size_t queries_per_class, std::uint64_t master_seed,
                                          std::uint64_t episode_index) const {
  const std::vector<std::size_t> counts(n_way_, queries_per_class);
  return plan(counts, master_seed, episode_index);
}

Episode materialize(const EpisodePlan& plan, const EmbeddingStore& store) {
  const std::size_t dim = store.dim();
  auto copy_row = [&](std::size_t sample, std::span<double> out) {
    auto src = store.features(sample);
    std::copy(src.begin(), src.end(), out.begin());
  };

  Episode ep;
  ep.episode_id = plan.episode_id;
  ep.k_shot = plan.k_shot;
  ep.task.classes = plan.classes;
  ep.task.support.reserve(plan.n_way());
  for (const auto& indices : plan.support_indices) {
    RowMatrix support(indices.size(), dim);
    for (std::size_t k = 0; k < indices.size(); ++k) copy_row(indices[k], support.row(k));
    ep.task.support.push_back(std::move(support));
  }
  ep.task.queries = RowMatrix(plan.query_indices.size(), dim);
  for (std::size_t q = 0; q < plan.query_indices.size(); ++q) {
    copy_row(plan.query_indices[q], ep.task.queries.row(q));
  }
  ep.hidden_labels = plan.query_positions;
  return ep;
}

Episode sample_balanced_episode(const EmbeddingStore& store, std::size_t n_way, std::size_t k_shot,
                                std::size_t queries_per_class, std::uint64_t master_seed,
                                std::uint64_t episode_index) {
  EpisodeSampler sampler(store, n_way, k_shot, queries_per_class);
  return materialize(sampler.plan_balanced(queries_per_class, master_seed, episode_index), store);
}

Episode sample_imbalanced_episode(const EmbeddingStore& store, std::size_t n_way,
                                  std::size_t k_shot, const QueryCounts& counts,
                                  std::uint64_t master_seed, std::uint64_t episode_index) {
  const std::size_t max_m =
      counts.per_class.empty() ? 0 : *std::max_element(counts.per_class.begin(), counts.per_class.end());
  EpisodeSampler sampler(store, n_way, k_shot, max_m);
  return materialize(sampler.plan(counts.per_class, master_seed, episode_index), store);
}

}  // namespace fsml
