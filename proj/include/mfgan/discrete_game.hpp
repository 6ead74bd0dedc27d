#pragma once

// Brute-force checks of the cooperative-game view of GAN training on finite
// alphabets: the optimal biased discriminator, the collective cost and its
// Jensen-Shannon identity, Pareto optimality of matching the data measure,
// and convergence of the empirical discriminator.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace mfgan::game {

using Atom = std::int64_t;

/// Finite probability measure; weights are nonnegative and sum to 1.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  /// Throws Error unless the weights are nonnegative and sum to 1 ± 1e-12.
  explicit EmpiricalMeasure(std::map<Atom, double> weights);

  double weight(Atom x) const;
  bool contains(Atom x) const { return weights_.count(x) != 0; }
  const std::map<Atom, double>& weights() const noexcept { return weights_; }
  std::vector<Atom> support() const;

 private:
  std::map<Atom, double> weights_;
};

/// Weight of x is its multiplicity over the sample count. Throws EmptySamples.
EmpiricalMeasure empirical_measure(std::span<const Atom> samples);

/// μ_r(x) / (μ_r(x) + μ_G(x)); throws OutOfSupport outside both supports.
double optimal_discriminator(const EmpiricalMeasure& real, const EmpiricalMeasure& generated, Atom x);

/// Σ_x [μ_r(x) ln D(x) + μ_G(x) ln(1 − D(x))] with 0·ln 0 = 0, for a
/// discriminator given per atom.
double discriminator_objective(const EmpiricalMeasure& real, const EmpiricalMeasure& generated,
                               const std::map<Atom, double>& discriminator);

/// Discriminator objective at the optimal discriminator.
double collective_cost(const EmpiricalMeasure& real, const EmpiricalMeasure& generated);

/// JS(μ_r, μ_G) = ½KL(μ_r‖M) + ½KL(μ_G‖M), M the midpoint.
double jensen_shannon(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// Per-atom maximizer of the discriminator objective over {0, step, …, 1}.
std::map<Atom, double> brute_force_discriminator(const EmpiricalMeasure& real,
                                                 const EmpiricalMeasure& generated, double step);

struct ParetoReport {
  std::vector<Atom> support;
  std::vector<double> minimizer;  // grid μ_G minimizing the collective cost
  std::vector<double> nearest;    // grid point closest to μ_r (max norm)
  double min_cost = 0.0;
  std::size_t grid_points = 0;
  bool unique = false;
  bool matches_nearest = false;
  double max_deviation = 0.0;  // max_x |minimizer − μ_r|
};

/// Exhaustive search over μ_G on the simplex grid of step `resolution` over
/// support(μ_r). Requires |support| ≤ 5 and resolution ≤ 1/50.
ParetoReport verify_pareto_minimum(const EmpiricalMeasure& real, double resolution);

/// Draws N samples from p_r and M from p_G over atoms 0..k−1 and returns the
/// max over observed atoms of |D^{N,M}(x) − p_r(x)/(p_r(x) + p_G(x))|.
double convergence_demo(std::span<const double> p_real, std::span<const double> p_generated,
                        std::size_t n_real, std::size_t n_generated, std::uint64_t seed);

}  // namespace mfgan::game
