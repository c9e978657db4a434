#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ppg {

// Scalar type used by every numeric routine in the library.
using Scalar = double;

template <int Rows = Eigen::Dynamic, int Cols = Rows>
using Matrix = Eigen::Matrix<Scalar, Rows, Cols>;

template <int Rows = Eigen::Dynamic>
using Vector = Matrix<Rows, 1>;

using VectorX = Vector<>;
using MatrixX = Matrix<>;

// Error categories map onto CLI exit codes: validation -> 1, divergence -> 2, io -> 3.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, int iter) : std::runtime_error(msg), iteration(iter) {}
  int iteration;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ppg
