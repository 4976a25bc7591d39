#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace wadc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Spectrum = std::vector<Complex>;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid model data or an unsolvable operating point.
class ModelError : public Error {
public:
  using Error::Error;
};

/// Argument shapes or values that violate an operation's preconditions.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Mode analysis or DMD could not produce a well-defined result.
class ModalError : public Error {
public:
  using Error::Error;
};

/// Simulation or training produced non-finite numbers.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

/// Malformed or inconsistent configuration input.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
public:
  using Error::Error;
};

/// Sorts eigenvalues by descending real part, ties by descending imaginary part.
void sort_spectrum(Spectrum& values);

}  // namespace wadc
