#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "fsml/error.hpp"

namespace {

using fsml::cli::StoreOptions;

struct Shared {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out;
};

void add_store_flags(CLI::App* cmd, StoreOptions& s) {
  cmd->add_option("--store", s.store, "FSEM store used for every metric");
  cmd->add_option("--store-euc", s.store_euc, "store for the Euclidean scores");
  cmd->add_option("--store-cos", s.store_cos, "store for the cosine scores");
  cmd->add_option("--store-mll", s.store_mll, "store for the MLL scores");
  cmd->add_option("--manifest", s.manifest, "split manifest JSON");
  cmd->add_option("--split", s.split, "split name inside the manifest")->capture_default_str();
}

void add_shared_flags(CLI::App* cmd, Shared& shared) {
  cmd->add_option("--seed", shared.seed, "master seed")->capture_default_str();
  cmd->add_option("--threads", shared.threads, "worker threads (default: FSML_THREADS or 1)");
  cmd->add_option("--out", shared.out, "output path");
}

std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("FSML_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid FSML_THREADS=" << env << '\n';
  }
  return 1;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    fsml::cli::write_file_atomic(out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot evaluation with the maximum log-likelihood metric"};
  app.require_subcommand(1);
  Shared shared;

  fsml::cli::EvalConfig eval;
  auto* eval_cmd = app.add_subcommand("eval", "inductive N-way K-shot evaluation");
  add_store_flags(eval_cmd, eval.stores);
  add_shared_flags(eval_cmd, shared);
  eval_cmd->add_option("--metric", eval.metrics, "euclid, cosine, mll or combined (repeatable)")
      ->delimiter(',')
      ->capture_default_str();
  eval_cmd->add_option("--fusion", eval.fusion, "fusion model JSON for --metric combined");
  eval_cmd->add_option("--n-way", eval.n_way)->capture_default_str();
  eval_cmd->add_option("--k-shot", eval.k_shot)->capture_default_str();
  eval_cmd->add_option("--queries", eval.queries, "queries per class")->capture_default_str();
  eval_cmd->add_option("--episodes", eval.episodes)->capture_default_str();
  eval_cmd->add_option("--lambda-max", eval.lambda_max)->capture_default_str();
  eval_cmd->add_flag("--report-loss", eval.report_loss, "also report the mean MLL episode loss");
  eval_cmd->add_option("--loss-lambda-max", eval.loss_lambda_max)->capture_default_str();

  fsml::cli::TransductiveConfig trans;
  auto* trans_cmd = app.add_subcommand("transductive", "probability-weighted transductive MLL");
  add_store_flags(trans_cmd, trans.stores);
  add_shared_flags(trans_cmd, shared);
  trans_cmd->add_option("--n-way", trans.n_way)->capture_default_str();
  trans_cmd->add_option("--k-shot", trans.k_shot)->capture_default_str();
  trans_cmd->add_option("--query-total", trans.query_total)->capture_default_str();
  trans_cmd->add_option("--dirichlet-a", trans.dirichlet_a)->capture_default_str();
  trans_cmd->add_option("--iters", trans.iters)->capture_default_str();
  trans_cmd->add_option("--eta", trans.eta)->capture_default_str();
  trans_cmd->add_flag("--raw-sum-prototype", trans.raw_sum_prototype,
                      "use the raw weighted sum instead of the weighted average");
  trans_cmd->add_option("--episodes", trans.episodes)->capture_default_str();
  trans_cmd->add_option("--lambda-max", trans.lambda_max)->capture_default_str();

  fsml::cli::FitFusionConfig fit;
  auto* fit_cmd = app.add_subcommand("fit-fusion", "fit the three-metric Gaussian fusion model");
  add_store_flags(fit_cmd, fit.stores);
  add_shared_flags(fit_cmd, shared);
  fit_cmd->add_option("--n-way", fit.n_way)->capture_default_str();
  fit_cmd->add_option("--k-shot", fit.k_shot)->capture_default_str();
  fit_cmd->add_option("--queries", fit.queries)->capture_default_str();
  fit_cmd->add_option("--fit-episodes", fit.fit_episodes)->capture_default_str();
  fit_cmd->add_option("--lambda-max", fit.lambda_max)->capture_default_str();

  fsml::cli::DiagnoseConfig diag;
  std::int64_t diag_class = -1;
  double diag_bin_size = 0.0;
  auto* diag_cmd = app.add_subcommand("diagnose", "feature and score distribution reports (CSV)");
  add_store_flags(diag_cmd, diag.stores);
  add_shared_flags(diag_cmd, shared);
  diag_cmd->add_option("--class", diag_class, "class id for the feature report");
  diag_cmd->add_option("--feature", diag.feature)->capture_default_str();
  diag_cmd->add_option("--bins", diag.bins, "histogram bin count")->capture_default_str();
  diag_cmd->add_option("--bin-size", diag_bin_size, "explicit histogram bin width");
  diag_cmd->add_flag("--scores", diag.scores, "report score distributions instead of a feature");
  diag_cmd->add_option("--n-way", diag.n_way)->capture_default_str();
  diag_cmd->add_option("--k-shot", diag.k_shot)->capture_default_str();
  diag_cmd->add_option("--queries", diag.queries)->capture_default_str();
  diag_cmd->add_option("--episodes", diag.episodes)->capture_default_str();
  diag_cmd->add_option("--lambda-max", diag.lambda_max)->capture_default_str();

  fsml::cli::SynthConfig synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic exponential store");
  add_shared_flags(synth_cmd, shared);
  synth_cmd->add_option("--classes", synth.classes)->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim)->capture_default_str();
  synth_cmd->add_option("--per-class", synth.per_class)->capture_default_str();
  synth_cmd->add_option("--lambda-lo", synth.lambda_lo)->capture_default_str();
  synth_cmd->add_option("--lambda-hi", synth.lambda_hi)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::size_t threads = resolve_threads(shared.threads);
  try {
    if (eval_cmd->parsed()) {
      eval.seed = shared.seed;
      eval.threads = threads;
      emit(fsml::cli::run_eval(eval).dump(2) + "\n", shared.out);
    } else if (trans_cmd->parsed()) {
      trans.seed = shared.seed;
      trans.threads = threads;
      emit(fsml::cli::run_transductive(trans).dump(2) + "\n", shared.out);
    } else if (fit_cmd->parsed()) {
      fit.seed = shared.seed;
      fit.threads = threads;
      fit.out = shared.out;
      std::cout << fsml::cli::run_fit_fusion(fit).dump(2) << '\n';
    } else if (diag_cmd->parsed()) {
      diag.seed = shared.seed;
      diag.threads = threads;
      if (diag_class >= 0) diag.class_id = static_cast<fsml::ClassId>(diag_class);
      if (diag_cmd->count("--bin-size") > 0) diag.bin_size = diag_bin_size;
      const auto result = fsml::cli::run_diagnose(diag);
      emit(result.csv, shared.out);
      std::cerr << result.summary.dump(2) << '\n';
    } else if (synth_cmd->parsed()) {
      synth.seed = shared.seed;
      synth.out = shared.out;
      std::cout << fsml::cli::run_synth(synth).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
