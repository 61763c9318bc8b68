#include "fsml/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fsml/error.hpp"

namespace fsml {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

HistogramDensity histogram_density(std::span<const double> values, double bin_size) {
  for (double v : values) {
    if (v < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "histogram: values must be nonnegative");
    }
  }
  return histogram_density(values, bin_size, 0.0);
}

HistogramDensity histogram_density(std::span<const double> values, double bin_size, double origin) {
  if (values.empty()) {
    throw Error(ErrorCode::kInsufficientData, "histogram: no values");
  }
  if (!(bin_size > 0.0) || !std::isfinite(bin_size)) {
    throw Error(ErrorCode::kInvalidArgument, "histogram: bin size must be positive");
  }
  double top = origin;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "histogram: non-finite value");
    if (v < origin) throw Error(ErrorCode::kInvalidArgument, "histogram: value below origin");
    top = std::max(top, v);
  }
  const auto bin_of = [&](double v) {
    return static_cast<std::size_t>(std::floor((v - origin) / bin_size));
  };
  const std::size_t bins = bin_of(top) + 1;

  HistogramDensity h;
  h.bin_size = bin_size;
  h.count = values.size();
  h.centers.resize(bins);
  h.densities.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    h.centers[k] = origin + (static_cast<double>(k) + 0.5) * bin_size;
  }
  const double unit = 1.0 / (static_cast<double>(values.size()) * bin_size);
  for (double v : values) h.densities[bin_of(v)] += unit;
  return h;
}

double default_bin_size(std::span<const double> values, std::size_t bins) {
  if (values.empty() || bins == 0) return 1.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  return range > 0.0 ? range / static_cast<double>(bins) : 1.0;
}

ExponentialFitReport fit_exponential(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kInsufficientData, "fit_exponential: no values");
  }
  double sum = 0.0;
  for (double v : values) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "fit_exponential: values must be finite and nonnegative");
    }
    sum += v;
  }
  if (sum <= 0.0) {
    throw Error(ErrorCode::kInsufficientData, "fit_exponential: all values are zero");
  }
  ExponentialFitReport r;
  r.count = values.size();
  r.lambda = static_cast<double>(values.size()) / sum;
  r.mean = sum / static_cast<double>(values.size());
  return r;
}

FeatureReport class_feature_report(const EmbeddingStore& store, ClassId class_id,
                                   std::size_t feature, std::optional<double> bin_size) {
  if (!store.has_class(class_id)) {
    throw Error(ErrorCode::kInvalidArgument, "diagnose: class " + std::to_string(class_id) +
                                                 " has no samples in this split");
  }
  if (feature >= store.dim()) {
    throw Error(ErrorCode::kInvalidArgument, "diagnose: feature index " + std::to_string(feature) +
                                                 " out of range for dim " + std::to_string(store.dim()));
  }
  std::vector<double> values;
  for (std::size_t s : store.samples_of(class_id)) values.push_back(store.features(s)[feature]);

  FeatureReport report;
  report.fit = fit_exponential(values);
  report.fit.class_id = class_id;
  report.fit.feature = feature;
  report.histogram = histogram_density(values, bin_size.value_or(default_bin_size(values)));
  return report;
}

std::string feature_report_csv(const FeatureReport& report) {
  std::ostringstream os;
  os << "z,empirical_density,fitted_density\n";
  const double lambda = report.fit.lambda;
  for (std::size_t k = 0; k < report.histogram.centers.size(); ++k) {
    const double z = report.histogram.centers[k];
    os << format_double(z) << ',' << format_double(report.histogram.densities[k]) << ','
       << format_double(lambda * std::exp(-lambda * z)) << '\n';
  }
  return os.str();
}

GaussianFit fit_gaussian(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kInsufficientData, "gaussian fit: empty population");
  }
  GaussianFit g;
  g.count = values.size();
  for (double v : values) g.mean += v;
  g.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    for (double v : values) g.variance += (v - g.mean) * (v - g.mean);
    g.variance /= static_cast<double>(values.size() - 1);
  }
  return g;
}

std::vector<ScoreDistribution> score_distribution_report(const ScoreSampleSet& samples,
                                                         std::size_t bins) {
  if (samples.intra.empty() || samples.cross.empty()) {
    throw Error(ErrorCode::kInsufficientData, "score report: empty population");
  }
  std::vector<ScoreDistribution> out;
  for (Metric metric : {Metric::kEuclidean, Metric::kCosine, Metric::kMll}) {
    for (bool intra : {true, false}) {
      const auto& population = intra ? samples.intra : samples.cross;
      std::vector<double> values;
      values.reserve(population.size());
      for (const auto& t : population) {
        values.push_back(metric == Metric::kEuclidean ? t.euc : metric == Metric::kCosine ? t.cos : t.mll);
      }
      ScoreDistribution d;
      d.metric = metric;
      d.intra = intra;
      d.fit = fit_gaussian(values);
      const double origin = *std::min_element(values.begin(), values.end());
      d.histogram = histogram_density(values, default_bin_size(values, bins), origin);
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::string score_report_csv(std::span<const ScoreDistribution> report) {
  std::ostringstream os;
  os << "metric,population,bin_center,density,gauss_mean,gauss_var\n";
  for (const auto& d : report) {
    for (std::size_t k = 0; k < d.histogram.centers.size(); ++k) {
      os << metric_name(d.metric) << ',' << (d.intra ? "intra" : "cross") << ','
         << format_double(d.histogram.centers[k]) << ',' << format_double(d.histogram.densities[k])
         << ',' << format_double(d.fit.mean) << ',' << format_double(d.fit.variance) << '\n';
    }
  }
  return os.str();
}

AgreementReport metric_agreement(std::span<const std::size_t> euc, std::span<const std::size_t> cos,
                                 std::span<const std::size_t> mll) {
  if (euc.size() != cos.size() || euc.size() != mll.size()) {
    throw Error(ErrorCode::kInvalidArgument, "metric agreement: prediction lists differ in length");
  }
  AgreementReport r;
  r.count = euc.size();
  if (r.count == 0) return r;
  std::size_t ec = 0;
  std::size_t em = 0;
  std::size_t cm = 0;
  std::size_t all = 0;
  for (std::size_t q = 0; q < r.count; ++q) {
    ec += euc[q] == cos[q];
    em += euc[q] == mll[q];
    cm += cos[q] == mll[q];
    all += euc[q] == cos[q] && cos[q] == mll[q];
  }
  const double n = static_cast<double>(r.count);
  r.euc_cos = static_cast<double>(ec) / n;
  r.euc_mll = static_cast<double>(em) / n;
  r.cos_mll = static_cast<double>(cm) / n;
  r.unanimous = static_cast<double>(all) / n;
  return r;
}

}  // namespace fsml
