#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "semdens/record.hpp"

namespace semdens {

struct TTestResult {
  std::size_t n = 0;
  double mean_difference = 0.0;
  double sd_difference = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// All paired differences are the same non-zero constant, so the
/// t statistic is unbounded.
class DegenerateTTest : public Error {
 public:
  explicit DegenerateTTest(double difference)
      : Error("paired differences have zero variance (constant difference " + std::to_string(difference) + ")"),
        difference_(difference) {}

  double difference() const noexcept { return difference_; }

 private:
  double difference_;
};

/// Two-sided paired Student t-test on a - b with n - 1 degrees of freedom.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("paired t-test needs equally many values on both sides");
  if (a.size() < 2) throw Error("paired t-test needs at least two paired configurations");

  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);

  double ss = 0.0;
  bool constant = true;
  const double first = a[0] - b[0];
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    ss += (d - mean) * (d - mean);
    constant = constant && d == first;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.n = n;
  r.mean_difference = mean;
  r.sd_difference = sd;
  r.df = static_cast<double>(n - 1);
  if (constant || sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    if (first == 0.0 && constant) {
      r.t = 0.0;
      r.p = 1.0;
      return r;
    }
    throw DegenerateTTest(mean);
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace semdens
