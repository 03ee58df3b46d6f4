#pragma once

// Shared numeric aliases, physical constants and the error hierarchy.

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace structsearch {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// n x 3 block of per-atom rows (fractional or Cartesian coordinates, forces).
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Boltzmann constant in eV/K.
inline constexpr double kBoltzmann = 8.617333262e-5;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Two atoms closer than the hard floor of a potential.
class OverlapError : public Error {
 public:
  using Error::Error;
};

/// A relaxation or sampler produced a non-finite state.
class DivergedError : public Error {
 public:
  explicit DivergedError(const std::string& what, long step = -1)
      : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Bad configuration (unknown keys, out-of-range values, missing files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Coords& c) { return c.allFinite(); }

}  // namespace structsearch
