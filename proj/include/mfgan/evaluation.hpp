#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mfgan/autodiff.hpp"
#include "mfgan/problems.hpp"
#include "mfgan/quadrature.hpp"

namespace mfgan::eval {

using PointFn = std::function<double(std::span<const double>)>;

/// sqrt(∫(f − g)² / ∫g²) by the torus rectangle rule. Throws ZeroReference
/// when ∫g² < 1e-300. Point evaluations may run on `threads` workers; the
/// sums are reduced in node order.
double rel_l2_error(const PointFn& f, const PointFn& g, const TorusGrid& grid,
                    std::size_t threads = 1);

/// Same metric over an explicit point set with equal weights (used with
/// quasi-random points when a tensor grid is too large).
double rel_l2_error(const PointFn& f, const PointFn& g, std::span<const double> points,
                    std::size_t dim, std::size_t threads = 1);

/// First `count` points of the Halton sequence in [0,1)^dim (bases 2, 3, 5, …).
std::vector<double> halton_points(std::size_t count, std::size_t dim);

enum class FdOrder { grad, laplacian };

struct FdCheck {
  std::vector<double> autodiff;
  std::vector<double> finite_difference;
  double rel_error = 0.0;
};

/// Compares hyper-dual derivatives with central differences of step h
/// (second order for the gradient, 3-point per axis for the Laplacian).
FdCheck fd_check(const ad::Field<double>& fn, std::span<const double> x, FdOrder order, double h);

struct FdSolution {
  std::vector<double> x;
  std::vector<double> u;
  std::vector<double> m;
  double hbar = 0.0;
  int iterations = 0;
  double hjb_residual = 0.0;  // max |discrete HJB equation|
  double fp_residual = 0.0;   // max |discrete FP equation| · h
  double last_change = 0.0;
};

struct FdSolverOptions {
  std::size_t points = 256;
  double damping = 0.5;
  double tolerance = 1e-11;
  int max_iterations = 500;
};

/// Damped fixed-point iteration on the periodic grid x_k = k/n: Newton for the
/// discretized HJB with mean-zero u (which fixes H̄), then the conservative
/// stationary FP system with h·Σm = 1, with m relaxed by `damping`. Throws
/// NoConvergence when the successive relative change stays above tolerance.
FdSolution fd_reference_solver_1d(const mfg::MFGProblem& problem, const FdSolverOptions& options);

}  // namespace mfgan::eval
