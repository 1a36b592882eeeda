#pragma once

#include <cstddef>
#include <vector>

namespace ewmb {

// Dense square matrix, row-major. dim == 0 means "not present".
struct SquareMatrix {
  std::size_t dim = 0;
  std::vector<double> a;

  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t d) : dim(d), a(d * d, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a[i * dim + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * dim + j]; }
  bool empty() const { return dim == 0; }
};

}  // namespace ewmb
