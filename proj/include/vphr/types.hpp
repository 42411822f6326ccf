// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace vphr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Point (amplitude, spread) of the parameter box: perturbation amplitude of
/// the spatial density and standard deviation of the velocity distribution.
struct Parameter {
  double amplitude = 0.0;
  double spread = 1.0;
};

/// Raised when a numerical procedure cannot produce a meaningful result
/// (non-convergent root find, singular factorization, collinear EIM basis).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The Cayley retraction became singular; the caller should shrink the step.
class StepSizeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace vphr
