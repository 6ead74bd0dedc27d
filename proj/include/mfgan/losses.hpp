#pragma once

// Residual and penalty losses of the HJB/FP system. Sign convention for the
// ergodic system:
//   r_u = ε Δu + ½|∇u|² − f̃(x) − f(x, m) − H̄
//   r_m = ε Δm − div(m ∇u)
// which the closed form of ergodic_explicit_problem annihilates at ε = ½.

#include <span>
#include <vector>

#include "mfgan/autodiff.hpp"
#include "mfgan/problems.hpp"

namespace mfgan::loss {

using ad::Var;
using Field = ad::Field<Var>;

/// β_Val (mean-zero or terminal penalty), β_MF (normalization or initial
/// penalty), β_per (periodicity penalty). All nonnegative.
struct LossWeights {
  double value = 1.0;
  double density = 0.0;
  double periodicity = 0.0;

  void validate() const;
};

/// Collocation points stored contiguously. Finite-horizon points are
/// (s, x₁, …, x_d).
struct Batch {
  std::size_t dim = 0;
  std::vector<double> coords;

  std::size_t size() const noexcept { return dim == 0 ? 0 : coords.size() / dim; }
  bool empty() const noexcept { return size() == 0; }
  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dim, dim}; }
  void push_back(std::span<const double> p);
};

Var ergodic_hjb_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m,
                         const Var& hbar, std::span<const double> x);
Var ergodic_fp_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m,
                        std::span<const double> x);

/// ∂_s u + (σ²/2)Δu + H(s, x, m, ∇u).
Var fh_hjb_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m, double s,
                    std::span<const double> x);
/// ∂_s m + div(m b(s, x, m, α*)) − (σ²/2)Δm − source(s, x).
Var fh_fp_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m, double s,
                   std::span<const double> x);

/// Corner pairs (z, z with z_i replaced by 1 − z_i), z ∈ {0,1}^d, listed once
/// per unordered pair: d·2^{d−1} pairs in total.
struct CornerPair {
  std::size_t axis = 0;
  std::vector<double> first;
  std::vector<double> second;
};
std::vector<CornerPair> periodicity_pairs(std::size_t dim);

enum class Side { value, density, both };

struct LossOptions {
  Side side = Side::both;
  /// Adds (mean m − 1)² for ergodic problems (penalty-mode densities).
  bool normalization_penalty = false;
};

/// Batch losses. Components a side did not request are literal zeros.
struct EmpiricalLosses {
  Var hjb;          // mean r_u²
  Var fp;           // mean r_m²
  Var value_pen;    // ergodic: (mean u)²; finite horizon: mean (u(T,x) − g)²
  Var density_pen;  // ergodic: (mean m − 1)²; finite horizon: mean (m(0,x) − m⁰)²
  Var value_per;    // Σ (u(z¹) − u(z²))² over corner pairs
  Var density_per;  // Σ (m(z¹) − m(z²))² over corner pairs
  Var value_total;    // hjb + β_Val·value_pen + β_per·value_per
  Var density_total;  // fp + β_MF·density_pen + β_per·density_per
};

EmpiricalLosses empirical_losses(const mfg::MFGProblem& problem, const Field& u, const Field& m,
                                 const Var& hbar, const Batch& batch, const LossWeights& weights,
                                 const LossOptions& options = {});

}  // namespace mfgan::loss
