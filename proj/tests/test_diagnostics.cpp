#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fsml/diagnostics.hpp"
#include "fsml/error.hpp"
#include "fsml/synthetic.hpp"

namespace fsml {
namespace {

TEST(Histogram, TwoValuesTwoBins) {
  const std::vector<double> v{0.25, 0.75};
  const auto h = histogram_density(v, 0.5);
  ASSERT_EQ(h.densities.size(), 2u);
  EXPECT_DOUBLE_EQ(h.densities[0], 1.0);
  EXPECT_DOUBLE_EQ(h.densities[1], 1.0);
  EXPECT_DOUBLE_EQ(h.centers[0], 0.25);
  EXPECT_DOUBLE_EQ(h.centers[1], 0.75);
}

TEST(Histogram, SingleOccupiedBin) {
  const std::vector<double> v{1.01, 1.02, 1.05, 1.09};
  const auto h = histogram_density(v, 0.1);
  std::size_t occupied = 0;
  for (double d : h.densities) {
    if (d > 0.0) {
      ++occupied;
      EXPECT_NEAR(d, 1.0 / 0.1, 1e-12);
    }
  }
  EXPECT_EQ(occupied, 1u);
}

TEST(Histogram, BinEdgesAreHalfOpen) {
  const std::vector<double> v{0.0, 0.5, 1.0};
  const auto h = histogram_density(v, 0.5);
  ASSERT_EQ(h.densities.size(), 3u);
  for (double d : h.densities) EXPECT_DOUBLE_EQ(d, 1.0 / (3 * 0.5));
}

TEST(Histogram, NormalizationAndNonnegativity) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.3);
  std::uniform_real_distribution<double> bin(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial * 7);
    for (auto& x : v) x = e(rng);
    const double b = bin(rng);
    const auto h = histogram_density(v, b);
    double mass = 0.0;
    for (double d : h.densities) {
      EXPECT_GE(d, 0.0);
      mass += d * b;
    }
    EXPECT_NEAR(mass, 1.0, 1e-9);
  }
}

TEST(Histogram, MatchesExponentialDensity) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(2.0);
  std::vector<double> v(10000);
  for (auto& x : v) x = e(rng);
  const auto h = histogram_density(v, 0.05);
  double worst = 0.0;
  for (std::size_t k = 0; k < h.centers.size(); ++k) {
    worst = std::max(worst, std::fabs(h.densities[k] - 2.0 * std::exp(-2.0 * h.centers[k])));
  }
  EXPECT_LT(worst, 0.15);
}

TEST(Histogram, RejectsBadInput) {
  const std::vector<double> neg{0.5, -0.1};
  EXPECT_THROW((void)histogram_density(neg, 0.1), Error);
  const std::vector<double> ok{0.5};
  EXPECT_THROW((void)histogram_density(ok, 0.0), Error);
  EXPECT_THROW((void)histogram_density(std::vector<double>{}, 0.1), Error);
  EXPECT_NO_THROW((void)histogram_density(neg, 0.1, -1.0));
}

TEST(Histogram, DefaultBinSize) {
  const std::vector<double> v{1.0, 4.0, 7.0};
  EXPECT_DOUBLE_EQ(default_bin_size(v, 60), 0.1);
  const std::vector<double> flat{2.0, 2.0};
  EXPECT_DOUBLE_EQ(default_bin_size(flat, 60), 1.0);
}

TEST(FitExponential, KnownValues) {
  EXPECT_DOUBLE_EQ(fit_exponential(std::vector<double>(9, 1.0)).lambda, 1.0);
  EXPECT_DOUBLE_EQ(fit_exponential(std::vector<double>{0.5, 1.5}).lambda, 1.0);
  EXPECT_THROW((void)fit_exponential(std::vector<double>{}), Error);
  EXPECT_THROW((void)fit_exponential(std::vector<double>{0.0, 0.0}), Error);
  EXPECT_THROW((void)fit_exponential(std::vector<double>{1.0, -1.0}), Error);
}

TEST(FitExponential, MleIdentityOnRandomInputs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(1 + trial % 50);
    for (auto& x : v) x = u(rng);
    const auto fit = fit_exponential(v);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    EXPECT_NEAR(fit.lambda * mean, 1.0, 1e-9);
  }
}

TEST(FitExponential, RecoversRateFromSamples) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(3.7);
  std::vector<double> v(100000);
  for (auto& x : v) x = e(rng);
  EXPECT_NEAR(fit_exponential(v).lambda, 3.7, 0.05);
}

TEST(FeatureReport, SyntheticClassRecoversTrueRate) {
  const auto [store, truth] = generate({.num_classes = 1, .dim = 3, .samples_per_class = 10000,
                                        .lambda_lo = 2.0, .lambda_hi = 2.0, .seed = 5});
  for (std::size_t i = 0; i < 3; ++i) {
    const auto report = class_feature_report(store, 0, i);
    EXPECT_NEAR(report.fit.lambda, 2.0, 0.1);
    EXPECT_EQ(report.fit.count, 10000u);
  }
}

TEST(FeatureReport, CsvHasFittedDensityColumn) {
  const auto [store, truth] = generate({.num_classes = 2, .dim = 2, .samples_per_class = 500,
                                        .lambda_lo = 1.0, .lambda_hi = 3.0, .seed = 6});
  const auto report = class_feature_report(store, 1, 1, 0.2);
  const std::string csv = feature_report_csv(report);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "z,empirical_density,fitted_density");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    double z = 0.0;
    double emp = 0.0;
    double fitted = 0.0;
    char c1 = 0;
    char c2 = 0;
    std::istringstream row(line);
    row >> z >> c1 >> emp >> c2 >> fitted;
    EXPECT_NEAR(fitted, report.fit.lambda * std::exp(-report.fit.lambda * z), 1e-12);
    ++rows;
  }
  EXPECT_EQ(rows, report.histogram.centers.size());
}

TEST(FeatureReport, Errors) {
  const auto store = generate({.num_classes = 2, .dim = 2, .samples_per_class = 5,
                               .lambda_lo = 1.0, .lambda_hi = 3.0, .seed = 6})
                         .first;
  EXPECT_THROW((void)class_feature_report(store, 7, 0), Error);
  EXPECT_THROW((void)class_feature_report(store, 0, 2), Error);
}

TEST(FitGaussian, ConstantAndSampled) {
  const auto flat = fit_gaussian(std::vector<double>(10, 3.5));
  EXPECT_EQ(flat.mean, 3.5);
  EXPECT_EQ(flat.variance, 0.0);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(1.0, 2.0);
  std::vector<double> v(20000);
  for (auto& x : v) x = n(rng);
  const auto g = fit_gaussian(v);
  EXPECT_NEAR(g.mean, 1.0, 3.0 * 2.0 / std::sqrt(20000.0));
  EXPECT_NEAR(g.variance, 4.0, 4.0 * 4.0 * std::sqrt(2.0 / 20000.0));
}

TEST(ScoreReport, ConstantPopulationIsSingleSpike) {
  ScoreSampleSet s;
  s.intra.assign(20, ScoreTriple{-1.0, 0.5, -3.0});
  s.cross.assign(20, ScoreTriple{-2.0, 0.25, -6.0});
  const auto report = score_distribution_report(s, 10);
  ASSERT_EQ(report.size(), 6u);
  for (const auto& d : report) {
    EXPECT_EQ(d.fit.variance, 0.0);
    ASSERT_EQ(d.histogram.densities.size(), 1u);
  }
}

TEST(ScoreReport, IntraBeatsCrossOnSyntheticData) {
  const auto store = generate({.num_classes = 20, .dim = 32, .samples_per_class = 60,
                               .lambda_lo = 0.5, .lambda_hi = 5.0, .seed = 8})
                         .first;
  ScorePlan plan;
  plan.episodes = 200;
  const auto scores = collect_scores(MetricStores{&store, &store, &store}, plan);
  const auto report = score_distribution_report(scores.samples);
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& intra = report[2 * m];
    const auto& cross = report[2 * m + 1];
    ASSERT_TRUE(intra.intra);
    ASSERT_FALSE(cross.intra);
    EXPECT_GT(intra.fit.mean, cross.fit.mean) << metric_name(intra.metric);
    double mass = 0.0;
    for (double d : intra.histogram.densities) mass += d * intra.histogram.bin_size;
    EXPECT_NEAR(mass, 1.0, 1e-9);
  }
  const std::string csv = score_report_csv(report);
  EXPECT_EQ(csv.rfind("metric,population,bin_center,density,gauss_mean,gauss_var\n", 0), 0u);
}

TEST(Agreement, Fractions) {
  const std::vector<std::size_t> a{0, 1, 2, 0};
  const auto same = metric_agreement(a, a, a);
  EXPECT_EQ(same.unanimous, 1.0);
  EXPECT_EQ(same.euc_cos, 1.0);
  EXPECT_EQ(same.count, 4u);

  const std::vector<std::size_t> b{1, 2, 0, 1};
  const std::vector<std::size_t> c{2, 0, 1, 2};
  const auto disjoint = metric_agreement(a, b, c);
  EXPECT_EQ(disjoint.unanimous, 0.0);
  EXPECT_EQ(disjoint.euc_mll, 0.0);

  const std::vector<std::size_t> d{0, 1, 0, 1};
  const auto partial = metric_agreement(a, a, d);
  EXPECT_DOUBLE_EQ(partial.unanimous, 0.5);
  EXPECT_DOUBLE_EQ(partial.euc_cos, 1.0);
  EXPECT_DOUBLE_EQ(partial.cos_mll, 0.5);

  EXPECT_THROW((void)metric_agreement(a, b, std::vector<std::size_t>{}), Error);
}

}  // namespace
}  // namespace fsml
