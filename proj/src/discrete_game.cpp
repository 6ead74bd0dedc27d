#include "mfgan/discrete_game.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfgan/errors.hpp"
#include "mfgan/random.hpp"

namespace mfgan::game {

namespace {

/// a·ln(b) with 0·ln(anything) = 0.
double xlogy(double a, double b) {
  if (a == 0.0) return 0.0;
  if (b <= 0.0) return -std::numeric_limits<double>::infinity();
  return a * std::log(b);
}

std::vector<Atom> union_support(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  std::vector<Atom> atoms = a.support();
  for (Atom x : b.support()) {
    if (!a.contains(x)) atoms.push_back(x);
  }
  std::sort(atoms.begin(), atoms.end());
  return atoms;
}

std::size_t sample_index(Rng& rng, std::span<const double> cdf) {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::map<Atom, double> weights) : weights_(std::move(weights)) {
  double total = 0.0;
  for (const auto& [x, w] : weights_) {
    if (!(w >= 0.0)) throw Error(fmt::format("measure weight of atom {} is negative", x));
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(fmt::format("measure weights sum to {}", total));
  std::erase_if(weights_, [](const auto& kv) { return kv.second == 0.0; });
}

double EmpiricalMeasure::weight(Atom x) const {
  const auto it = weights_.find(x);
  return it == weights_.end() ? 0.0 : it->second;
}

std::vector<Atom> EmpiricalMeasure::support() const {
  std::vector<Atom> out;
  out.reserve(weights_.size());
  for (const auto& kv : weights_) out.push_back(kv.first);
  return out;
}

EmpiricalMeasure empirical_measure(std::span<const Atom> samples) {
  if (samples.empty()) throw EmptySamples("empirical_measure: no samples");
  std::map<Atom, std::size_t> counts;
  for (Atom x : samples) ++counts[x];
  std::map<Atom, double> weights;
  const auto n = static_cast<double>(samples.size());
  for (const auto& [x, c] : counts) weights[x] = static_cast<double>(c) / n;
  return EmpiricalMeasure(std::move(weights));
}

double optimal_discriminator(const EmpiricalMeasure& real, const EmpiricalMeasure& generated, Atom x) {
  const double r = real.weight(x);
  const double g = generated.weight(x);
  if (r + g == 0.0) throw OutOfSupport(fmt::format("atom {} is outside both supports", x));
  return r / (r + g);
}

double discriminator_objective(const EmpiricalMeasure& real, const EmpiricalMeasure& generated,
                               const std::map<Atom, double>& discriminator) {
  double total = 0.0;
  for (Atom x : union_support(real, generated)) {
    const auto it = discriminator.find(x);
    if (it == discriminator.end()) throw OutOfSupport(fmt::format("no discriminator value at atom {}", x));
    total += xlogy(real.weight(x), it->second) + xlogy(generated.weight(x), 1.0 - it->second);
  }
  return total;
}

double collective_cost(const EmpiricalMeasure& real, const EmpiricalMeasure& generated) {
  std::map<Atom, double> d;
  for (Atom x : union_support(real, generated)) d[x] = optimal_discriminator(real, generated, x);
  return discriminator_objective(real, generated, d);
}

double jensen_shannon(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  double js = 0.0;
  for (Atom x : union_support(a, b)) {
    const double pa = a.weight(x);
    const double pb = b.weight(x);
    const double mid = 0.5 * (pa + pb);
    if (pa > 0.0) js += 0.5 * pa * std::log(pa / mid);
    if (pb > 0.0) js += 0.5 * pb * std::log(pb / mid);
  }
  return js;
}

std::map<Atom, double> brute_force_discriminator(const EmpiricalMeasure& real,
                                                 const EmpiricalMeasure& generated, double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("brute_force_discriminator: bad step");
  const auto levels = static_cast<long>(std::llround(1.0 / step));
  std::map<Atom, double> best;
  for (Atom x : union_support(real, generated)) {
    double best_value = -std::numeric_limits<double>::infinity();
    double best_d = 0.0;
    for (long k = 0; k <= levels; ++k) {
      const double d = static_cast<double>(k) / static_cast<double>(levels);
      const double v = xlogy(real.weight(x), d) + xlogy(generated.weight(x), 1.0 - d);
      if (v > best_value) {
        best_value = v;
        best_d = d;
      }
    }
    best[x] = best_d;
  }
  return best;
}

ParetoReport verify_pareto_minimum(const EmpiricalMeasure& real, double resolution) {
  ParetoReport report;
  report.support = real.support();
  const std::size_t k = report.support.size();
  if (k == 0 || k > 5) throw ConfigError("verify_pareto_minimum: support size must be 1..5");
  if (!(resolution > 0.0 && resolution <= 1.0 / 50.0 + 1e-15)) {
    throw ConfigError("verify_pareto_minimum: resolution must be <= 1/50");
  }
  const auto levels = static_cast<long>(std::llround(1.0 / resolution));

  std::vector<double> target(k);
  for (std::size_t i = 0; i < k; ++i) target[i] = real.weight(report.support[i]);

  std::vector<long> counts(k, 0);
  double best = std::numeric_limits<double>::infinity();
  double best_distance = std::numeric_limits<double>::infinity();
  std::size_t ties = 0;
  const double tie_tol = 1e-12;

  auto visit = [&]() {
    std::map<Atom, double> w;
    std::vector<double> p(k);
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = static_cast<double>(counts[i]) / static_cast<double>(levels);
      if (counts[i] > 0) w[report.support[i]] = p[i];
    }
    const double cost = collective_cost(real, EmpiricalMeasure(std::move(w)));
    ++report.grid_points;
    if (cost < best - tie_tol) {
      best = cost;
      report.minimizer = p;
      ties = 1;
    } else if (std::abs(cost - best) <= tie_tol) {
      ++ties;
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < k; ++i) dist = std::max(dist, std::abs(p[i] - target[i]));
    if (dist < best_distance) {
      best_distance = dist;
      report.nearest = p;
    }
  };

  // enumerate compositions of `levels` into k nonnegative parts
  auto recurse = [&](auto&& self, std::size_t i, long remaining) -> void {
    if (i + 1 == k) {
      counts[i] = remaining;
      visit();
      return;
    }
    for (long c = 0; c <= remaining; ++c) {
      counts[i] = c;
      self(self, i + 1, remaining - c);
    }
  };
  recurse(recurse, 0, levels);

  report.min_cost = best;
  report.unique = ties == 1;
  report.matches_nearest = report.minimizer == report.nearest;
  for (std::size_t i = 0; i < k; ++i) {
    report.max_deviation = std::max(report.max_deviation, std::abs(report.minimizer[i] - target[i]));
  }
  return report;
}

double convergence_demo(std::span<const double> p_real, std::span<const double> p_generated,
                        std::size_t n_real, std::size_t n_generated, std::uint64_t seed) {
  if (p_real.size() != p_generated.size() || p_real.empty()) {
    throw DimensionError("convergence_demo: distributions must share a nonempty alphabet");
  }
  auto cdf_of = [](std::span<const double> p) {
    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = acc += p[i];
    for (double& c : cdf) c /= acc;
    return cdf;
  };
  const auto cdf_r = cdf_of(p_real);
  const auto cdf_g = cdf_of(p_generated);
  Rng rng(seed);
  std::vector<Atom> real(n_real);
  std::vector<Atom> gen(n_generated);
  for (auto& x : real) x = static_cast<Atom>(sample_index(rng, cdf_r));
  for (auto& x : gen) x = static_cast<Atom>(sample_index(rng, cdf_g));
  const auto mu_r = empirical_measure(real);
  const auto mu_g = empirical_measure(gen);

  double sup = 0.0;
  for (Atom x : union_support(mu_r, mu_g)) {
    const auto i = static_cast<std::size_t>(x);
    const double truth = p_real[i] / (p_real[i] + p_generated[i]);
    sup = std::max(sup, std::abs(optimal_discriminator(mu_r, mu_g, x) - truth));
  }
  return sup;
}

}  // namespace mfgan::game
