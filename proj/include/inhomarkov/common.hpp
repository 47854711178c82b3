#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace inhomarkov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Probabilities are floored here before taking logs.
inline constexpr double kProbFloor = 1e-12;

/// Malformed input, bad configuration, or a violated precondition.
/// The command-line tool maps it to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite gradients, divergent training).
/// The command-line tool maps it to exit code 1.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace inhomarkov
