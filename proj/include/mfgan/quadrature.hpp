#pragma once

#include <cstddef>
#include <vector>

#include "mfgan/errors.hpp"

namespace mfgan::eval {

/// Uniform tensor grid on the unit torus [0,1)^d with nodes k/n per axis.
class TorusGrid {
 public:
  TorusGrid(std::size_t dim, std::size_t points_per_axis);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t points_per_axis() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }
  double spacing() const noexcept { return 1.0 / static_cast<double>(n_); }
  double weight() const noexcept { return 1.0 / static_cast<double>(size_); }

  /// Coordinates of flat node `index` (axis 0 varies fastest).
  void point(std::size_t index, double* out) const;
  std::vector<double> point(std::size_t index) const;

  /// Periodic neighbour of a 1-D index.
  std::size_t wrap(long k) const noexcept {
    const long n = static_cast<long>(n_);
    return static_cast<std::size_t>(((k % n) + n) % n);
  }

 private:
  std::size_t dim_;
  std::size_t n_;
  std::size_t size_;
};

/// Rectangle rule on the torus (identical to the periodic trapezoidal rule).
/// `fn` receives a pointer to d coordinates. The sum runs in node order.
template <class Fn>
auto quadrature_torus(const Fn& fn, const TorusGrid& grid) {
  std::vector<double> x(grid.dim());
  grid.point(0, x.data());
  auto sum = fn(static_cast<const double*>(x.data()));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    grid.point(k, x.data());
    sum = sum + fn(static_cast<const double*>(x.data()));
  }
  return sum * grid.weight();
}

}  // namespace mfgan::eval
