#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>

#include "fsml/diagnostics.hpp"
#include "fsml/embedding_store.hpp"
#include "fsml/episode_sampler.hpp"
#include "fsml/error.hpp"
#include "fsml/fusion.hpp"
#include "fsml/parallel.hpp"
#include "fsml/synthetic.hpp"
#include "fsml/transductive.hpp"

namespace fsml::cli {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

json stores_json(const StoreOptions& s) {
  return {{"store", s.store},         {"store_euc", s.store_euc}, {"store_cos", s.store_cos},
          {"store_mll", s.store_mll}, {"manifest", s.manifest},   {"split", s.split}};
}

// Split-restricted stores. Identical paths share one EmbeddingStore.
class LoadedStores {
 public:
  explicit LoadedStores(const StoreOptions& opts) {
    const std::string euc = opts.store_euc.empty() ? opts.store : opts.store_euc;
    const std::string cos = opts.store_cos.empty() ? opts.store : opts.store_cos;
    const std::string mll = opts.store_mll.empty() ? opts.store : opts.store_mll;
    if (euc.empty() || cos.empty() || mll.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "a --store (or all three per-metric stores) is required");
    }
    std::optional<SplitManifest> manifest;
    if (!opts.manifest.empty()) manifest = load_manifest(opts.manifest);

    auto get = [&](const std::string& path) -> const EmbeddingStore* {
      for (const auto& [p, s] : loaded_) {
        if (p == path) return s.get();
      }
      EmbeddingStore full = load_store(path);
      std::unique_ptr<EmbeddingStore> store;
      if (manifest) {
        validate_manifest(*manifest, full);
        store = std::make_unique<EmbeddingStore>(restrict_to_split(full, *manifest, opts.split));
      } else {
        store = std::make_unique<EmbeddingStore>(std::move(full));
      }
      loaded_.emplace_back(path, std::move(store));
      return loaded_.back().second.get();
    };
    stores_.euc = get(euc);
    stores_.cos = get(cos);
    stores_.mll = get(mll);
    check_aligned(stores_);
  }

  [[nodiscard]] const MetricStores& metric_stores() const noexcept { return stores_; }
  [[nodiscard]] const EmbeddingStore& primary() const noexcept { return *stores_.mll; }
  [[nodiscard]] const EmbeddingStore& for_metric(Metric m) const noexcept {
    return m == Metric::kEuclidean ? *stores_.euc : m == Metric::kCosine ? *stores_.cos : *stores_.mll;
  }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<EmbeddingStore>>> loaded_;
  MetricStores stores_;
};

json summary_json(const AccuracySummary& s) {
  return {{"mean_accuracy", s.mean}, {"ci95_half_width", s.ci95}, {"episodes", s.episodes}};
}

json run_block(std::size_t threads, Clock::time_point start) {
  return {{"threads", threads},
          {"wall_time_s", std::chrono::duration<double>(Clock::now() - start).count()}};
}

void require_episodes(std::size_t episodes) {
  if (episodes == 0) throw Error(ErrorCode::kInvalidArgument, "--episodes must be at least 1");
}

}  // namespace

AccuracySummary summarize(const std::vector<double>& per_episode) {
  AccuracySummary s;
  s.episodes = per_episode.size();
  if (per_episode.empty()) return s;
  double sum = 0.0;
  for (double a : per_episode) sum += a;
  s.mean = sum / static_cast<double>(per_episode.size());
  if (per_episode.size() > 1) {
    double ss = 0.0;
    for (double a : per_episode) ss += (a - s.mean) * (a - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(per_episode.size() - 1));
    s.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(per_episode.size()));
  }
  return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json run_eval(const EvalConfig& config) {
  const auto start = Clock::now();
  require_episodes(config.episodes);
  if (config.metrics.empty()) throw Error(ErrorCode::kInvalidArgument, "--metric is required");

  std::vector<std::string> names = config.metrics;
  std::optional<FusionModel> fusion;
  for (const auto& name : names) {
    if (name == "combined") {
      if (config.fusion.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "--metric combined requires --fusion model.json");
      }
      fusion = load_fusion(config.fusion);
    } else {
      (void)parse_metric(name);
    }
  }

  const LoadedStores stores(config.stores);
  const EpisodeSampler sampler(stores.primary(), config.n_way, config.k_shot, config.queries);

  std::vector<std::vector<double>> acc(names.size(), std::vector<double>(config.episodes));
  std::vector<double> loss(config.report_loss ? config.episodes : 0);
  parallel_for(config.episodes, config.threads, [&](std::size_t e) {
    const EpisodePlan plan = sampler.plan_balanced(config.queries, config.seed, e);
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (names[k] == "combined") {
        const auto triples = episode_triples(plan, stores.metric_stores(), config.lambda_max);
        std::vector<std::size_t> pred(triples.size());
        for (std::size_t q = 0; q < triples.size(); ++q) {
          pred[q] = classify_combined(triples[q], *fusion, plan.classes);
        }
        acc[k][e] = accuracy(pred, plan.query_positions);
      } else {
        const Metric m = parse_metric(names[k]);
        const Episode ep = materialize(plan, stores.for_metric(m));
        acc[k][e] = accuracy(classify_inductive(ep.task, m, config.lambda_max), ep.hidden_labels);
      }
    }
    if (config.report_loss) {
      loss[e] = episode_loss(materialize(plan, stores.primary()), config.loss_lambda_max);
    }
  });

  json results = json::object();
  for (std::size_t k = 0; k < names.size(); ++k) results[names[k]] = summary_json(summarize(acc[k]));
  if (config.report_loss) {
    double total = 0.0;
    for (double l : loss) total += l;
    results["mll_loss"] = {{"mean", total / static_cast<double>(loss.size())},
                           {"lambda_max", config.loss_lambda_max}};
  }

  json cfg = {{"stores", stores_json(config.stores)},
              {"metrics", config.metrics},
              {"fusion", config.fusion},
              {"n_way", config.n_way},
              {"k_shot", config.k_shot},
              {"queries", config.queries},
              {"episodes", config.episodes},
              {"lambda_max", config.lambda_max},
              {"report_loss", config.report_loss},
              {"loss_lambda_max", config.loss_lambda_max},
              {"seed", config.seed}};
  return {{"command", "eval"}, {"config", cfg}, {"results", results},
          {"run", run_block(config.threads, start)}};
}

json run_transductive(const TransductiveConfig& config) {
  const auto start = Clock::now();
  require_episodes(config.episodes);
  if (!(config.dirichlet_a > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "--dirichlet-a must be positive");
  }
  const LoadedStores stores(config.stores);
  const EmbeddingStore& store = stores.for_metric(Metric::kMll);
  const EpisodeSampler sampler(store, config.n_way, config.k_shot, config.query_total);
  const TransductiveOptions options{config.iters, config.eta, config.lambda_max, config.raw_sum_prototype};

  std::vector<double> inductive(config.episodes);
  std::vector<double> transductive(config.episodes);
  std::vector<std::vector<std::size_t>> counts(config.episodes);
  parallel_for(config.episodes, config.threads, [&](std::size_t e) {
    std::mt19937_64 count_rng(derive_seed(config.seed, e, 1));
    counts[e] = dirichlet_query_counts(config.n_way, config.query_total, config.dirichlet_a, count_rng)
                    .per_class;
    const Episode ep = materialize(sampler.plan(counts[e], config.seed, e), store);
    const auto result = transductive_classify(ep.task, options);
    inductive[e] = accuracy(result.inductive, ep.hidden_labels);
    transductive[e] = accuracy(result.transductive, ep.hidden_labels);
  });

  std::vector<double> diff(config.episodes);
  std::size_t min_count = config.query_total;
  std::size_t max_count = 0;
  for (std::size_t e = 0; e < config.episodes; ++e) {
    diff[e] = transductive[e] - inductive[e];
    for (std::size_t c : counts[e]) {
      min_count = std::min(min_count, c);
      max_count = std::max(max_count, c);
    }
  }
  const AccuracySummary d = summarize(diff);

  json results = {
      {"inductive_mll", summary_json(summarize(inductive))},
      {"transductive", summary_json(summarize(transductive))},
      {"paired_gain", {{"mean", d.mean}, {"standard_error", d.ci95 / 1.96}, {"episodes", d.episodes}}},
      {"query_counts", {{"min_per_class", min_count}, {"max_per_class", max_count}}}};
  json cfg = {{"stores", stores_json(config.stores)},
              {"n_way", config.n_way},
              {"k_shot", config.k_shot},
              {"query_total", config.query_total},
              {"dirichlet_a", config.dirichlet_a},
              {"iters", config.iters},
              {"eta", config.eta},
              {"raw_sum_prototype", config.raw_sum_prototype},
              {"episodes", config.episodes},
              {"lambda_max", config.lambda_max},
              {"seed", config.seed}};
  return {{"command", "transductive"}, {"config", cfg}, {"results", results},
          {"run", run_block(config.threads, start)}};
}

json run_fit_fusion(const FitFusionConfig& config) {
  const auto start = Clock::now();
  if (config.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  if (config.fit_episodes == 0) {
    throw Error(ErrorCode::kInsufficientData, "--fit-episodes must be at least 1");
  }
  const LoadedStores stores(config.stores);
  ScorePlan plan;
  plan.n_way = config.n_way;
  plan.k_shot = config.k_shot;
  plan.queries_per_class = config.queries;
  plan.episodes = config.fit_episodes;
  plan.lambda_max = config.lambda_max;
  plan.seed = config.seed;
  plan.threads = config.threads;
  const CollectedScores scores = collect_scores(stores.metric_stores(), plan);

  FusionModel model = fit_fusion(scores.samples);
  model.degraded = stores.metric_stores().degraded();
  write_file_atomic(config.out, fusion_to_json(model) + "\n");

  const AgreementReport agree = metric_agreement(scores.pred_euc, scores.pred_cos, scores.pred_mll);
  json cfg = {{"stores", stores_json(config.stores)},
              {"n_way", config.n_way},
              {"k_shot", config.k_shot},
              {"queries", config.queries},
              {"fit_episodes", config.fit_episodes},
              {"lambda_max", config.lambda_max},
              {"seed", config.seed},
              {"out", config.out}};
  json results = {{"n_intra", model.n_intra},
                  {"n_cross", model.n_cross},
                  {"ridge_applied", model.ridge_applied},
                  {"degraded", model.degraded},
                  {"agreement",
                   {{"euclid_cosine", agree.euc_cos},
                    {"euclid_mll", agree.euc_mll},
                    {"cosine_mll", agree.cos_mll},
                    {"unanimous", agree.unanimous},
                    {"queries", agree.count}}}};
  return {{"command", "fit-fusion"}, {"config", cfg}, {"results", results},
          {"run", run_block(config.threads, start)}};
}

DiagnoseOutput run_diagnose(const DiagnoseConfig& config) {
  const LoadedStores stores(config.stores);
  DiagnoseOutput out;
  if (config.scores) {
    ScorePlan plan;
    plan.n_way = config.n_way;
    plan.k_shot = config.k_shot;
    plan.queries_per_class = config.queries;
    plan.episodes = config.episodes;
    plan.lambda_max = config.lambda_max;
    plan.seed = config.seed;
    plan.threads = config.threads;
    const CollectedScores scores = collect_scores(stores.metric_stores(), plan);
    const auto report = score_distribution_report(scores.samples, config.bins);
    out.csv = score_report_csv(report);
    const auto agree = metric_agreement(scores.pred_euc, scores.pred_cos, scores.pred_mll);
    json fits = json::array();
    for (const auto& d : report) {
      fits.push_back({{"metric", metric_name(d.metric)},
                      {"population", d.intra ? "intra" : "cross"},
                      {"mean", d.fit.mean},
                      {"variance", d.fit.variance},
                      {"count", d.fit.count}});
    }
    out.summary = {{"command", "diagnose"},
                   {"mode", "scores"},
                   {"gaussian_fits", fits},
                   {"unanimous_agreement", agree.unanimous}};
    return out;
  }

  if (!config.class_id) {
    throw Error(ErrorCode::kInvalidArgument, "diagnose needs --class (or --scores)");
  }
  if (config.bins == 0) throw Error(ErrorCode::kInvalidArgument, "--bins must be positive");
  const EmbeddingStore& store = stores.primary();
  std::optional<double> bin_size = config.bin_size;
  if (!bin_size && store.has_class(*config.class_id) && config.feature < store.dim()) {
    std::vector<double> values;
    for (std::size_t s : store.samples_of(*config.class_id)) {
      values.push_back(store.features(s)[config.feature]);
    }
    bin_size = default_bin_size(values, config.bins);
  }
  const FeatureReport report = class_feature_report(store, *config.class_id, config.feature, bin_size);
  out.csv = feature_report_csv(report);
  out.summary = {{"command", "diagnose"},
                 {"mode", "feature"},
                 {"class", report.fit.class_id},
                 {"feature", report.fit.feature},
                 {"lambda", report.fit.lambda},
                 {"mean", report.fit.mean},
                 {"count", report.fit.count},
                 {"bin_size", report.histogram.bin_size}};
  return out;
}

json run_synth(const SynthConfig& config) {
  if (config.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  SyntheticSpec spec;
  spec.num_classes = config.classes;
  spec.dim = config.dim;
  spec.samples_per_class = config.per_class;
  spec.lambda_lo = config.lambda_lo;
  spec.lambda_hi = config.lambda_hi;
  spec.seed = config.seed;
  const auto [store, truth] = generate(spec);

  const std::filesystem::path store_path = config.out;
  const std::filesystem::path truth_path = truth_path_for(store_path);
  const auto bytes = encode_fsem(store);
  write_file_atomic(truth_path, truth_to_json(truth, spec) + "\n");
  write_file_atomic(store_path, std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  return {{"command", "synth"},
          {"config",
           {{"classes", config.classes},
            {"dim", config.dim},
            {"per_class", config.per_class},
            {"lambda_lo", config.lambda_lo},
            {"lambda_hi", config.lambda_hi},
            {"seed", config.seed},
            {"out", config.out}}},
          {"results", {{"samples", store.size()}, {"truth", truth_path.string()}}}};
}

}  // namespace fsml::cli
