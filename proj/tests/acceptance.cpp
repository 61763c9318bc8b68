// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "fsml/diagnostics.hpp"
#include "fsml/episode_sampler.hpp"
#include "fsml/fusion.hpp"
#include "fsml/metrics.hpp"
#include "fsml/synthetic.hpp"
#include "fsml/transductive.hpp"
#include "test_support.hpp"

namespace {

using namespace fsml;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr std::uint64_t kSeed = 42;

SyntheticSpec benchmark_spec() {
  return {.num_classes = 20, .dim = 64, .samples_per_class = 200, .lambda_lo = 0.5,
          .lambda_hi = 5.0, .seed = kSeed};
}

const std::pair<EmbeddingStore, GroundTruth>& benchmark() {
  static const auto data = generate(benchmark_spec());
  return data;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

struct PairedStats {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double gap = 0.0;
  double se = 0.0;
};

PairedStats paired(const std::vector<double>& a, const std::vector<double>& b) {
  PairedStats s;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    s.mean_a += a[i] / n;
    s.mean_b += b[i] / n;
  }
  s.gap = s.mean_a - s.mean_b;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) - s.gap;
    ss += d * d;
  }
  s.se = std::sqrt(ss / (n - 1.0) / n);
  return s;
}

Outcome oracle_equivalence() {
  const auto& [store, truth] = benchmark();
  const EpisodeSampler sampler(store, 5, 1, 15);
  std::size_t queries = 0;
  std::size_t agree = 0;
  for (std::uint64_t e = 0; queries < 10000; ++e) {
    const auto plan = sampler.plan_balanced(15, kSeed, e);
    const Episode ep = materialize(plan, store);
    std::vector<ClassModel> models;
    for (ClassId c : plan.classes) models.push_back(truth.model(c));
    const auto pred = classify_from_scores(mll_score_matrix(ep.task, models), plan.classes);
    for (std::size_t q = 0; q < pred.size() && queries < 10000; ++q, ++queries) {
      agree += plan.classes[pred[q]] == bayes_oracle_classify(truth, ep.task.queries.row(q), plan.classes);
    }
  }
  return {agree == queries, std::to_string(agree) + "/" + std::to_string(queries) + " queries agree"};
}

Outcome exponential_advantage() {
  const auto& store = benchmark().first;
  const EpisodeSampler sampler(store, 5, 1, 15);
  const std::size_t episodes = 10000;
  std::vector<double> mll(episodes);
  std::vector<double> euc(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    const Episode ep = materialize(sampler.plan_balanced(15, kSeed, e), store);
    mll[e] = accuracy(classify_inductive(ep.task, Metric::kMll, kEvalLambdaMax), ep.hidden_labels);
    euc[e] = accuracy(classify_inductive(ep.task, Metric::kEuclidean), ep.hidden_labels);
  }
  const PairedStats s = paired(mll, euc);
  return {s.gap > 2.0 * s.se,
          "5-way 1-shot mll " + fmt(s.mean_a) + " euclid " + fmt(s.mean_b) + " gap " + fmt(s.gap, 4) +
              " paired SE " + fmt(s.se, 3) + " (z " + fmt(s.gap / s.se, 3) + ")"};
}

Outcome gradient_check() {
  std::mt19937_64 rng(kSeed);
  double worst = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Episode ep = fsml::testing::random_episode(3, 2, 2, 8, rng);
    const LossGradient g = loss_feature_gradient(ep);
    auto probe = [&](double& x, double analytic) {
      const double x0 = x;
      const double h = 1e-5;
      x = x0 + h;
      const double up = episode_loss(ep);
      x = x0 - h;
      const double down = episode_loss(ep);
      x = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(analytic - numeric) / scale;
      if (rel > worst) {
        worst = rel;
        worst_analytic = analytic;
        worst_numeric = numeric;
      }
    };
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t i = 0; i < 8; ++i) probe(ep.task.support[c](r, i), g.support[c](r, i));
      }
    }
    for (std::size_t q = 0; q < 6; ++q) {
      for (std::size_t i = 0; i < 8; ++i) probe(ep.task.queries(q, i), g.queries(q, i));
    }
  }
  return {worst <= 1e-4, "max relative error " + fmt(worst, 3) + " over 100 episodes (analytic " +
                            fmt(worst_analytic, 4) + ", finite difference " + fmt(worst_numeric, 4) + ")"};
}

Outcome scale_invariance() {
  const auto& store = benchmark().first;
  const EpisodeSampler sampler(store, 5, 1, 15);
  const double lambda_max = 1e12;
  std::size_t agree = 0;
  std::size_t total = 0;
  bool clipped = false;
  for (std::uint64_t e = 0; e < 1000; ++e) {
    const Episode ep = materialize(sampler.plan_balanced(15, kSeed + 1, e), store);
    std::vector<std::vector<std::size_t>> preds;
    for (double s : {0.1, 1.0, 10.0}) {
      Task scaled = ep.task;
      for (auto& sup : scaled.support) {
        for (double& v : sup.data()) v *= s;
        for (double l : estimate_lambda(sup, lambda_max)) clipped = clipped || l >= lambda_max;
      }
      for (double& v : scaled.queries.data()) v *= s;
      preds.push_back(classify_inductive(scaled, Metric::kMll, lambda_max));
    }
    for (std::size_t q = 0; q < preds[0].size(); ++q, ++total) {
      agree += preds[0][q] == preds[1][q] && preds[1][q] == preds[2][q];
    }
  }
  return {!clipped && agree == total,
          std::to_string(agree) + "/" + std::to_string(total) + " queries identical across s in {0.1, 1, 10}" +
              (clipped ? " (clipping occurred)" : "")};
}

Outcome mvn_cdf_accuracy() {
  const Mat3 eye{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  const double symmetric = mvn_cdf({0, 0, 0}, {0, 0, 0}, eye);
  bool pass = std::fabs(symmetric - 0.125) <= 1e-3;

  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    // Random correlated covariance L L^T with a well-conditioned diagonal.
    Mat3 l{};
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < r; ++k) l[r][k] = n(rng);
      l[r][r] = 0.5 + std::fabs(n(rng));
    }
    Mat3 sigma{};
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) {
        for (int j = 0; j < 3; ++j) sigma[r][k] += l[r][j] * l[k][j];
      }
    }
    const Vec3 mu{n(rng), n(rng), n(rng)};
    const Vec3 x{mu[0] + n(rng) * std::sqrt(sigma[0][0]), mu[1] + n(rng) * std::sqrt(sigma[1][1]),
                 mu[2] + n(rng) * std::sqrt(sigma[2][2])};
    std::mt19937_64 mc_rng(1000 + static_cast<std::uint64_t>(c));
    std::normal_distribution<double> z(0.0, 1.0);
    const std::size_t draws = 10'000'000;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
      const double z0 = z(mc_rng);
      const double z1 = z(mc_rng);
      const double z2 = z(mc_rng);
      hits += mu[0] + l[0][0] * z0 <= x[0] && mu[1] + l[1][0] * z0 + l[1][1] * z1 <= x[1] &&
              mu[2] + l[2][0] * z0 + l[2][1] * z1 + l[2][2] * z2 <= x[2];
    }
    const double mc = static_cast<double>(hits) / static_cast<double>(draws);
    worst = std::max(worst, std::fabs(mvn_cdf(x, mu, sigma) - mc));
  }
  pass = pass && worst <= 3e-3;
  return {pass, "symmetric point " + fmt(symmetric, 8) + ", worst |delta| vs 1e7-draw MC over 20 cases " +
                    fmt(worst, 3)};
}

Outcome transductive_reduction_and_gain(const std::string& store_path) {
  const auto& store = benchmark().first;
  const std::size_t episodes = 10000;

  // Reduction, per episode.
  const EpisodeSampler sampler(store, 5, 1, 75);
  std::size_t identical = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::mt19937_64 rng(derive_seed(kSeed, e, 1));
    const auto counts = dirichlet_query_counts(5, 75, 2.0, rng);
    const Episode ep = materialize(sampler.plan(counts.per_class, kSeed, e), store);
    const auto r = transductive_classify(ep.task, {.iters = 0});
    identical += r.transductive == classify_inductive(ep.task, Metric::kMll, kEvalLambdaMax);
  }

  cli::TransductiveConfig cfg;
  cfg.stores.store = store_path;
  cfg.episodes = episodes;
  cfg.seed = kSeed;
  const json r = cli::run_transductive(cfg)["results"];
  const double gain = r["paired_gain"]["mean"].get<double>();
  const double se = r["paired_gain"]["standard_error"].get<double>();
  const bool pass = identical == episodes && gain > 2.0 * se;
  return {pass, "iters=0 identical on " + std::to_string(identical) + "/" + std::to_string(episodes) +
                    " episodes; inductive " + fmt(r["inductive_mll"]["mean_accuracy"].get<double>()) +
                    " transductive " + fmt(r["transductive"]["mean_accuracy"].get<double>()) + " gain " +
                    fmt(gain, 4) + " paired SE " + fmt(se, 3)};
}

Outcome determinism(const std::string& store_path) {
  auto strip = [](json j) {
    j.erase("run");
    return j.dump();
  };
  cli::EvalConfig eval;
  eval.stores.store = store_path;
  eval.metrics = {"mll", "euclid", "cosine"};
  eval.report_loss = true;
  eval.episodes = 2000;
  eval.seed = 7;
  eval.threads = 1;
  const std::string e1 = strip(cli::run_eval(eval));
  eval.threads = 8;
  const std::string e8 = strip(cli::run_eval(eval));

  cli::TransductiveConfig trans;
  trans.stores.store = store_path;
  trans.episodes = 1000;
  trans.seed = 7;
  trans.threads = 1;
  const std::string t1 = strip(cli::run_transductive(trans));
  trans.threads = 8;
  const std::string t8 = strip(cli::run_transductive(trans));
  return {e1 == e8 && t1 == t8, std::string("eval ") + (e1 == e8 ? "identical" : "DIFFERS") +
                                    ", transductive " + (t1 == t8 ? "identical" : "DIFFERS") +
                                    " for threads 1 vs 8"};
}

Outcome mle_and_histogram_invariants() {
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 500);
  double worst_mle = 0.0;
  double worst_mass = 0.0;
  bool negative = false;
  for (int trial = 0; trial < 1000; ++trial) {
    const double rate = 0.1 + 10.0 * u(rng);
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v) x = -std::log1p(-u(rng)) / rate;
    const auto fit = fit_exponential(v);
    double sum = 0.0;
    for (double x : v) sum += x;
    worst_mle = std::max(worst_mle, std::fabs(fit.lambda * (sum / static_cast<double>(v.size())) - 1.0));
  }
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    const double spread = 0.1 + 20.0 * u(rng);
    for (auto& x : v) x = spread * u(rng);
    const double b = 0.001 + u(rng) * spread / 5.0;
    const auto h = histogram_density(v, b);
    double mass = 0.0;
    for (double d : h.densities) {
      negative = negative || d < 0.0;
      mass += d * b;
    }
    worst_mass = std::max(worst_mass, std::fabs(mass - 1.0));
  }
  return {worst_mle <= 1e-9 && worst_mass <= 1e-9 && !negative,
          "max |lambda*mean - 1| " + fmt(worst_mle, 3) + ", max |sum p*B - 1| " + fmt(worst_mass, 3)};
}

}  // namespace

int main() {
  fsml::testing::TempDir dir;
  const std::string store_path = (dir / "benchmark.fsem").string();
  cli::SynthConfig synth;
  synth.seed = kSeed;
  synth.out = store_path;
  (void)cli::run_synth(synth);

  struct Criterion {
    std::string name;
    std::function<Outcome()> check;
    double time_limit_s;
  };
  const double none = std::numeric_limits<double>::infinity();
  const std::vector<Criterion> criteria = {
      {"oracle equivalence", oracle_equivalence, 60.0},
      {"exponential-data advantage", exponential_advantage, 300.0},
      {"gradient check", gradient_check, none},
      {"scale invariance", scale_invariance, none},
      {"mvn_cdf accuracy", mvn_cdf_accuracy, none},
      {"transductive reduction and gain", [&] { return transductive_reduction_and_gain(store_path); }, 600.0},
      {"determinism across thread counts", [&] { return determinism(store_path); }, none},
      {"MLE identity and histogram normalization", mle_and_histogram_invariants, none},
  };

  int failures = 0;
  for (const auto& [name, check, time_limit_s] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > time_limit_s) {
      outcome.pass = false;
      outcome.detail += " (over the " + fmt(time_limit_s) + "s limit)";
    }
    failures += outcome.pass ? 0 : 1;
    std::printf("%s  %s: %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
  return failures == 0 ? 0 : 1;
}
