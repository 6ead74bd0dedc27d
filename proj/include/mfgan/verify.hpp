#pragma once

// Self-checks shared by the `verify` subcommand and the acceptance suite.
// Each function returns measured quantities; callers apply thresholds.

#include <cstdint>
#include <string>
#include <vector>

namespace mfgan::verify {

struct ClosedFormResiduals {
  double max_hjb = 0.0;  // max |r_u|
  double max_fp = 0.0;   // max |r_m|
  double hbar = 0.0;     // ergodic constant used
};

/// Wires u*, m*, H̄* of the explicit problem through the residuals at
/// `points` points: x_k = k/(points−1) for d = 1, seeded uniform points
/// otherwise.
ClosedFormResiduals closed_form_residuals(std::size_t dim, std::size_t points = 101);

struct GradientCheck {
  double value_rel = 0.0;    // ‖∇θ L̂_Val − FD‖ / ‖FD‖
  double density_rel = 0.0;  // ‖∇ω L̂_MF − FD‖ / ‖FD‖
};

/// Random width-4, one-layer DGM pair. Even seeds use the explicit d = 1
/// problem with a grid-normalized density; odd seeds use the d = 2 congestion
/// problem in penalty mode with periodicity penalties.
GradientCheck gradient_check(std::uint64_t seed, double step = 1e-6);

/// Relative error of hyper-dual input derivatives (gradient and Laplacian)
/// of a random network against central differences.
struct InputDerivativeCheck {
  double grad_rel = 0.0;
  double laplacian_rel = 0.0;
};
InputDerivativeCheck input_derivative_check(std::uint64_t seed);

struct OracleCheck {
  double rel_u = 0.0;
  double rel_m = 0.0;
  double hbar_error = 0.0;
  double order_u = 0.0;  // log2(err(n/2) / err(n))
  double order_m = 0.0;
  int iterations = 0;
};

/// Finite-difference solve of the explicit d = 1 problem at n and n/2 points
/// against the closed form on the grid nodes.
OracleCheck oracle_check(std::size_t points = 256);

struct GameCheck {
  double self_cost_error = 0.0;      // |cost(μ, μ) + ln 4|
  double js_identity_error = 0.0;    // max |cost − (2 JS − ln 4)|
  double brute_force_error = 0.0;    // max |D_grid − D*|
  double brute_force_step = 0.0;
  double pareto_deviation = 0.0;     // max over test measures
  double pareto_resolution = 0.0;
  bool pareto_unique = true;
  int convergence_passes = 0;        // seeds with distance < 0.02
  int convergence_seeds = 0;
};

GameCheck game_check(int seeds = 20, std::size_t samples = 100000);

}  // namespace mfgan::verify
