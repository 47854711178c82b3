#pragma once

#include <span>

namespace inhomarkov {

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees
/// of freedom. Infinite t gives 0.
double student_t_two_sided_p(double t, double df);

double mean(std::span<const double> x);
/// Unbiased (n-1) sample variance.
double sample_variance(std::span<const double> x);

}  // namespace inhomarkov
