#include "mfgan/problems.hpp"

#include <cmath>

#include "mfgan/errors.hpp"

namespace mfgan::mfg {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double sum_sin(std::span<const double> x) {
  double s = 0.0;
  for (double xi : x) s += std::sin(kTwoPi * xi);
  return s;
}

}  // namespace

const ErgodicData& MFGProblem::ergodic() const {
  if (const auto* e = std::get_if<ErgodicData>(&data)) return *e;
  throw Error("problem '" + name + "' is not ergodic");
}

const FiniteHorizonData& MFGProblem::finite_horizon() const {
  if (const auto* f = std::get_if<FiniteHorizonData>(&data)) return *f;
  throw Error("problem '" + name + "' is not finite-horizon");
}

double MFGProblem::hamiltonian(std::span<const double> x, std::span<const double> p) const {
  double half_sq = 0.0;
  for (double pi : p) half_sq += 0.5 * pi * pi;
  return half_sq - ergodic().potential(x);
}

double explicit_ergodic_constant(std::size_t dim, std::size_t points) {
  double z = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    z += std::exp(2.0 * std::sin(kTwoPi * static_cast<double>(k) / static_cast<double>(points)));
  }
  z /= static_cast<double>(points);
  return static_cast<double>(dim) * std::log(z);
}

MFGProblem ergodic_explicit_problem(std::size_t dim) {
  if (dim == 0) throw ConfigError("dimension must be >= 1");
  MFGProblem p;
  p.name = "ergodic_explicit";
  p.dim = dim;

  ErgodicData e;
  e.epsilon = 0.5;
  e.potential = [](std::span<const double> x) {
    double s = 0.0;
    double c2 = 0.0;
    for (double xi : x) {
      s += std::sin(kTwoPi * xi);
      c2 += std::pow(std::cos(kTwoPi * xi), 2);
    }
    return 2.0 * M_PI * M_PI * (-s + c2) - 2.0 * s;
  };
  e.coupling = [](std::span<const double>, const Var& m) { return ad::log(m); };
  p.data = e;

  const double hbar = explicit_ergodic_constant(dim);
  const double z = std::exp(hbar);
  ClosedFormSolution cf;
  cf.ergodic_constant = hbar;
  cf.value = [](std::span<const double> x) { return sum_sin(x); };
  cf.density = [z](std::span<const double> x) { return std::exp(2.0 * sum_sin(x)) / z; };
  cf.control = [](std::span<const double> x) {
    std::vector<double> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = kTwoPi * std::cos(kTwoPi * x[i]);
    return a;
  };
  cf.value_field = [](std::span<const HD> x) {
    HD u = ad::constant(Var(0.0));
    for (const HD& xi : x) u = u + sin(Var(kTwoPi) * xi);
    return u;
  };
  cf.density_field = [z, value = cf.value_field](std::span<const HD> x) {
    return exp(Var(2.0) * value(x)) / Var(z);
  };
  p.closed_form = std::move(cf);
  return p;
}

MFGProblem ergodic_congestion_problem(std::size_t dim) {
  if (dim == 0) throw ConfigError("dimension must be >= 1");
  MFGProblem p;
  p.name = "ergodic_congestion";
  p.dim = dim;
  ErgodicData e;
  e.epsilon = 0.5;
  e.potential = [](std::span<const double> x) {
    double s = 0.0;
    for (double xi : x) s += std::sin(kTwoPi * xi) + std::cos(kTwoPi * xi);
    return 0.5 * s;
  };
  e.coupling = [](std::span<const double>, const Var& m) { return ad::square(m) + Var(1.0); };
  p.data = e;
  return p;
}

MFGProblem finite_horizon_problem(std::size_t dim, double horizon, double sigma,
                                  const Dynamics& dynamics,
                                  std::function<Var(std::span<const double>, const Var&)> terminal_cost,
                                  PointFn initial_density,
                                  std::function<double(double, std::span<const double>)> fp_source) {
  if (dim == 0) throw ConfigError("dimension must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("finite-horizon problem needs T > 0");
  if (!(sigma > 0.0)) throw ConfigError("finite-horizon problem needs sigma > 0");

  FiniteHorizonData fh;
  fh.horizon = horizon;
  fh.sigma = sigma;
  fh.terminal_cost = std::move(terminal_cost);
  fh.initial_density = std::move(initial_density);
  fh.fp_source = std::move(fp_source);

  if (const auto* affine = std::get_if<0>(&dynamics)) {
    const AffineDrift drift = affine->first;
    const QuadraticCost cost = affine->second;
    if (!(cost.weight > 0.0)) throw ConfigError("quadratic control cost needs weight > 0");
    const double gain = drift.gain;
    const double weight = cost.weight;
    auto offset = [drift](const HD& s, std::span<const HD> x, const HD& m) {
      if (drift.offset) return drift.offset(s, x, m);
      return std::vector<HD>(x.size(), ad::constant(Var(0.0)));
    };
    fh.drift = [offset, gain](const HD& s, std::span<const HD> x, const HD& m,
                              std::span<const HD> alpha) {
      std::vector<HD> b = offset(s, x, m);
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = b[i] + Var(gain) * alpha[i];
      return b;
    };
    // argmin_α {(b0 + gα)·p + ½w|α|² + c} = −g p / w
    fh.optimal_control = [gain, weight](const HD&, std::span<const HD>, const HD&,
                                        std::span<const HD> p) {
      std::vector<HD> a(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) a[i] = Var(-gain / weight) * p[i];
      return a;
    };
    fh.hamiltonian = [offset, gain, weight, state = cost.state_cost](
                         const HD& s, std::span<const HD> x, const HD& m, std::span<const HD> p) {
      const std::vector<HD> b0 = offset(s, x, m);
      HD h = state ? state(s, x, m) : ad::constant(Var(0.0));
      for (std::size_t i = 0; i < p.size(); ++i) {
        h = h + b0[i] * p[i] - Var(0.5 * gain * gain / weight) * (p[i] * p[i]);
      }
      return h;
    };
  } else {
    const auto& general = std::get<GeneralDynamics>(dynamics);
    if (!general.hamiltonian || !general.optimal_control) {
      throw MissingHamiltonian(
          "no closed-form minimizer for this drift/cost; supply the Hamiltonian and α*");
    }
    if (!general.drift) throw ConfigError("general dynamics need a drift");
    fh.drift = general.drift;
    fh.hamiltonian = general.hamiltonian;
    fh.optimal_control = general.optimal_control;
  }

  MFGProblem p;
  p.name = "finite_horizon_custom";
  p.dim = dim;
  p.data = std::move(fh);
  return p;
}

MFGProblem problem_by_name(const std::string& name, std::size_t dim, double horizon, double sigma) {
  if (name == "ergodic_explicit") return ergodic_explicit_problem(dim);
  if (name == "ergodic_congestion") return ergodic_congestion_problem(dim);
  if (name == "finite_horizon_custom") {
    // b = α, f = ½|α|² + ½Σ cos 2πx_i, g = 0, uniform initial density
    QuadraticCost cost;
    cost.state_cost = [](const HD&, std::span<const HD> x, const HD&) {
      HD c = ad::constant(Var(0.0));
      for (const HD& xi : x) c = c + Var(0.5) * cos(Var(kTwoPi) * xi);
      return c;
    };
    return finite_horizon_problem(dim, horizon, sigma, Dynamics{std::pair{AffineDrift{}, cost}},
                                  {}, [](std::span<const double>) { return 1.0; });
  }
  throw ConfigError("unknown problem '" + name + "'");
}

}  // namespace mfgan::mfg
