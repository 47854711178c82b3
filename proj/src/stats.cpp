#include "inhomarkov/stats.hpp"

#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "inhomarkov/common.hpp"

namespace inhomarkov {

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw InputError("degrees of freedom must be positive");
  if (std::isnan(t)) throw InputError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  // P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  const double x = df / (df + t * t);
  return boost::math::ibeta(0.5 * df, 0.5, x);
}

double mean(std::span<const double> x) {
  if (x.empty()) throw InputError("mean of an empty sample");
  const auto n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  const double first = s / n;
  // Correction pass; makes the mean of a constant sample exact.
  double r = 0.0;
  for (double v : x) r += v - first;
  return first + r / n;
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw InputError("variance needs at least two samples");
  const double mu = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace inhomarkov
