#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace stt {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Target and observer coincide; no bearing is defined.
struct DegenerateGeometryError : Error {
  using Error::Error;
};

/// A vector that must be unit length is not.
struct InvalidBearingError : Error {
  using Error::Error;
};

/// Bad parameters, weights, or scenario configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// A matrix that must be positive definite or invertible is not.
struct NumericalError : Error {
  using Error::Error;
};

/// The accumulated normal matrix is singular: the state is not
/// observable from the recorded data.
struct ObservabilityError : Error {
  using Error::Error;
};

}  // namespace stt
