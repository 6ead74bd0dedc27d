#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mfgan/autodiff.hpp"

namespace mfgan::mfg {

using ad::Var;
using HD = ad::HyperDual<ad::Var>;
using PointFn = std::function<double(std::span<const double>)>;

/// Closed-form equilibrium of an ergodic problem.
struct ClosedFormSolution {
  PointFn value;    // u*
  PointFn density;  // m*
  double ergodic_constant = 0.0;  // H̄*
  std::function<std::vector<double>(std::span<const double>)> control;  // α* = ∇u*
  /// u* and m* as hyper-dual fields, for wiring through the residuals.
  ad::Field<Var> value_field;
  ad::Field<Var> density_field;
};

/// Long-run average cost problem on the torus with L(x,α) = ½|α|² + f̃(x),
/// so H₀(x,p) = ½|p|² − f̃(x).
struct ErgodicData {
  double epsilon = 0.5;
  PointFn potential;  // f̃
  std::function<Var(std::span<const double>, const Var&)> coupling;  // f(x, m)
};

using DriftFn = std::function<std::vector<HD>(const HD& s, std::span<const HD> x, const HD& m,
                                              std::span<const HD> alpha)>;
using HamiltonianFn =
    std::function<HD(const HD& s, std::span<const HD> x, const HD& m, std::span<const HD> p)>;
using ControlFn = std::function<std::vector<HD>(const HD& s, std::span<const HD> x, const HD& m,
                                                std::span<const HD> p)>;
using StateFn = std::function<HD(const HD& s, std::span<const HD> x, const HD& m)>;

/// b(s,x,m,α) = offset(s,x,m) + gain·α. A null offset means zero.
struct AffineDrift {
  std::function<std::vector<HD>(const HD& s, std::span<const HD> x, const HD& m)> offset;
  double gain = 1.0;
};

/// f(s,x,m,α) = ½·weight·|α|² + state_cost(s,x,m). A null state cost means zero.
struct QuadraticCost {
  double weight = 1.0;
  StateFn state_cost;
};

/// Generic drift and running cost, used when no closed-form minimizer exists.
struct GeneralDynamics {
  DriftFn drift;
  std::function<HD(const HD& s, std::span<const HD> x, const HD& m, std::span<const HD> alpha)>
      running_cost;
  HamiltonianFn hamiltonian;      // caller-supplied H; may be null
  ControlFn optimal_control;      // caller-supplied α*; may be null
};

using Dynamics = std::variant<std::pair<AffineDrift, QuadraticCost>, GeneralDynamics>;

struct FiniteHorizonData {
  double horizon = 1.0;
  double sigma = 1.0;
  DriftFn drift;
  HamiltonianFn hamiltonian;
  ControlFn optimal_control;
  std::function<Var(std::span<const double>, const Var&)> terminal_cost;  // g(x, m); null = 0
  PointFn initial_density;                                                // m⁰
  std::function<double(double, std::span<const double>)> fp_source;      // null = 0
};

enum class Flavor { ergodic, finite_horizon };

struct MFGProblem {
  std::string name;
  std::size_t dim = 1;
  std::variant<ErgodicData, FiniteHorizonData> data;
  std::optional<ClosedFormSolution> closed_form;

  Flavor flavor() const { return data.index() == 0 ? Flavor::ergodic : Flavor::finite_horizon; }
  const ErgodicData& ergodic() const;
  const FiniteHorizonData& finite_horizon() const;

  /// H₀(x, p) = ½|p|² − f̃(x) for ergodic problems.
  double hamiltonian(std::span<const double> x, std::span<const double> p) const;
};

/// f̃(x) = 2π²[−Σ sin 2πx_i + Σ cos² 2πx_i] − 2Σ sin 2πx_i, f(x,m) = ln m, ε = ½,
/// with closed form u* = Σ sin 2πx_i.
MFGProblem ergodic_explicit_problem(std::size_t dim);

/// f̃(x) = ½Σ[sin 2πx_i + cos 2πx_i], f(x,m) = m² + 1, ε = ½; no closed form.
MFGProblem ergodic_congestion_problem(std::size_t dim);

/// Generic finite-horizon problem. With AffineDrift + QuadraticCost the
/// Hamiltonian and minimizer are formed in closed form; with GeneralDynamics
/// both must be supplied or MissingHamiltonian is thrown.
MFGProblem finite_horizon_problem(std::size_t dim, double horizon, double sigma,
                                  const Dynamics& dynamics,
                                  std::function<Var(std::span<const double>, const Var&)> terminal_cost,
                                  PointFn initial_density,
                                  std::function<double(double, std::span<const double>)> fp_source = {});

/// Built-in problems by configuration name: "ergodic_explicit",
/// "ergodic_congestion", "finite_horizon_custom".
MFGProblem problem_by_name(const std::string& name, std::size_t dim, double horizon = 1.0,
                           double sigma = 1.0);

/// ln ∫_{T^d} exp(2 Σ sin 2πx_i) dx = d · ln I₀(2), evaluated by the
/// rectangle rule on `points` nodes (the integrand factorizes per axis).
double explicit_ergodic_constant(std::size_t dim, std::size_t points = 1024);

}  // namespace mfgan::mfg
