#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace uwdbn {

// Error taxonomy. The CLI maps config errors to exit code 2 (usage/config),
// everything else to 1.
struct input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct capability_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct detection_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix. Rows are samples almost everywhere in this codebase.
struct Matrix {
  size_t rows = 0, cols = 0;
  std::vector<double> d;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), d(r * c, 0.0) {}

  double* row(size_t i) { return d.data() + i * cols; }
  const double* row(size_t i) const { return d.data() + i * cols; }
  double& at(size_t i, size_t j) { return d[i * cols + j]; }
  double at(size_t i, size_t j) const { return d[i * cols + j]; }
};

inline double sigmoid(double x) {
  // split on sign so exp() never overflows
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x)
inline double softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace uwdbn
