#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "fsml/error.hpp"
#include "fsml/fusion.hpp"

namespace fsml {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kSqrt2 = 1.41421356237309504880;

double norm_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }

using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

double norm_quantile(double p) {
  // Callers keep p inside (0, 1).
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p, FastPolicy());
}

// Fixed Cranley-Patterson shift so no point lands on the unit-square boundary.
struct SobolShift {
  double u1;
  double u2;
};

const SobolShift& sobol_shift() {
  static const SobolShift shift = [] {
    std::mt19937_64 rng(0x5eed0f5c0b01ull);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng);
    const double b = u(rng);
    return SobolShift{a, b};
  }();
  return shift;
}

double clamp_open(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  return std::clamp(p, lo, 1.0 - std::numeric_limits<double>::epsilon() / 2);
}

}  // namespace

Mat3 cholesky3(const Mat3& sigma) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(sigma[r][c])) {
        throw Error(ErrorCode::kNumerical, "cholesky: non-finite covariance entry");
      }
      const double scale = std::max(std::abs(sigma[r][c]), std::abs(sigma[c][r]));
      if (std::abs(sigma[r][c] - sigma[c][r]) > 1e-12 * std::max(1.0, scale)) {
        throw Error(ErrorCode::kNumerical, "cholesky: covariance is not symmetric");
      }
    }
  }
  Mat3 l{};
  for (int j = 0; j < 3; ++j) {
    double d = sigma[j][j];
    for (int k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (!(d > 0.0)) {
      throw Error(ErrorCode::kNumerical, "cholesky: covariance is not positive definite");
    }
    l[j][j] = std::sqrt(d);
    for (int i = j + 1; i < 3; ++i) {
      double s = sigma[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = s / l[j][j];
    }
  }
  return l;
}

double mvn_cdf(const Vec3& x, const Vec3& mu, const Mat3& sigma, std::size_t points) {
  if (points == 0) {
    throw Error(ErrorCode::kInvalidArgument, "mvn_cdf: need at least one point");
  }
  const Mat3 l = cholesky3(sigma);
  const Vec3 b{x[0] - mu[0], x[1] - mu[1], x[2] - mu[2]};
  for (double v : b) {
    if (std::isnan(v)) throw Error(ErrorCode::kNumerical, "mvn_cdf: NaN argument");
  }

  const double e1 = norm_cdf(b[0] / l[0][0]);
  if (e1 == 0.0) return 0.0;

  // 2-d Sobol sequence in Gray-code order: dimension 1 is van der Corput,
  // dimension 2 uses the primitive polynomial x + 1.
  std::uint32_t v1[32];
  std::uint32_t v2[32];
  v1[0] = v2[0] = 1u << 31;
  for (int k = 1; k < 32; ++k) {
    v1[k] = 1u << (31 - k);
    v2[k] = v2[k - 1] ^ (v2[k - 1] >> 1);
  }
  const SobolShift& shift = sobol_shift();
  constexpr double kTwoPow32 = 4294967296.0;

  std::uint32_t s1 = 0;
  std::uint32_t s2 = 0;
  double total = 0.0;
  for (std::size_t n = 0; n < points; ++n) {
    if (n > 0) {
      const int c = std::countr_zero(static_cast<std::uint64_t>(n));
      s1 ^= v1[c];
      s2 ^= v2[c];
    }
    double w1 = s1 / kTwoPow32 + shift.u1;
    double w2 = s2 / kTwoPow32 + shift.u2;
    if (w1 >= 1.0) w1 -= 1.0;
    if (w2 >= 1.0) w2 -= 1.0;

    const double y1 = norm_quantile(clamp_open(w1 * e1));
    const double e2 = norm_cdf((b[1] - l[1][0] * y1) / l[1][1]);
    if (e2 == 0.0) continue;
    const double y2 = norm_quantile(clamp_open(w2 * e2));
    const double e3 = norm_cdf((b[2] - l[2][0] * y1 - l[2][1] * y2) / l[2][2]);
    total += e2 * e3;
  }
  return std::clamp(e1 * total / static_cast<double>(points), 0.0, 1.0);
}

}  // namespace fsml
