#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsml/metrics.hpp"

namespace fsml::cli {

/// Where embeddings come from. `store` backs every metric unless a
/// per-metric store overrides it.
struct StoreOptions {
  std::string store;
  std::string store_euc;
  std::string store_cos;
  std::string store_mll;
  std::string manifest;
  std::string split;
};

struct EvalConfig {
  StoreOptions stores{{}, {}, {}, {}, {}, "test"};
  std::vector<std::string> metrics{"mll"};
  std::string fusion;
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t queries = 15;
  std::size_t episodes = 10000;
  double lambda_max = kEvalLambdaMax;
  bool report_loss = false;
  double loss_lambda_max = kLossLambdaMax;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TransductiveConfig {
  StoreOptions stores{{}, {}, {}, {}, {}, "test"};
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t query_total = 75;
  double dirichlet_a = 2.0;
  std::size_t iters = 10;
  double eta = 0.5;
  bool raw_sum_prototype = false;
  std::size_t episodes = 10000;
  double lambda_max = kEvalLambdaMax;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct FitFusionConfig {
  StoreOptions stores{{}, {}, {}, {}, {}, "val"};
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t queries = 15;
  std::size_t fit_episodes = 2000;
  double lambda_max = kEvalLambdaMax;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out;
};

struct DiagnoseConfig {
  StoreOptions stores{{}, {}, {}, {}, {}, "val"};
  // Feature mode.
  std::optional<ClassId> class_id;
  std::size_t feature = 0;
  std::size_t bins = 60;
  std::optional<double> bin_size;
  // Score mode.
  bool scores = false;
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t queries = 15;
  std::size_t episodes = 500;
  double lambda_max = kEvalLambdaMax;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct SynthConfig {
  std::size_t classes = 20;
  std::uint32_t dim = 64;
  std::size_t per_class = 200;
  double lambda_lo = 0.5;
  double lambda_hi = 5.0;
  std::uint64_t seed = 0;
  std::string out;
};

/// Reports carry {"command", "config", "results", "run"}; everything but
/// "run" (thread count, wall time) is a deterministic function of the config.
nlohmann::json run_eval(const EvalConfig& config);
nlohmann::json run_transductive(const TransductiveConfig& config);

/// Writes the model to config.out; returns a summary with agreement statistics.
nlohmann::json run_fit_fusion(const FitFusionConfig& config);

/// Returns the CSV text (feature or score report) plus a JSON summary.
struct DiagnoseOutput {
  std::string csv;
  nlohmann::json summary;
};
DiagnoseOutput run_diagnose(const DiagnoseConfig& config);

nlohmann::json run_synth(const SynthConfig& config);

/// Writes to a sibling temp file and renames, so a failed run leaves nothing behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Mean and 95% normal-approximation half-width over per-episode accuracies.
struct AccuracySummary {
  double mean = 0.0;
  double ci95 = 0.0;
  std::size_t episodes = 0;
};
AccuracySummary summarize(const std::vector<double>& per_episode);

}  // namespace fsml::cli
