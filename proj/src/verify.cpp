#include "mfgan/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "mfgan/discrete_game.hpp"
#include "mfgan/evaluation.hpp"
#include "mfgan/losses.hpp"
#include "mfgan/problems.hpp"
#include "mfgan/trainer.hpp"

namespace mfgan::verify {

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double relative_gap(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm(d) / std::max(norm(b), 1e-300);
}

void jitter(nn::NetworkParams& p, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.1);
  for (double& v : p.values) v += noise(rng);
  for (auto& e : p.extras) e.second += noise(rng);
}

double get(const nn::NetworkParams& p, std::size_t i) {
  return i < p.values.size() ? p.values[i] : p.extras[i - p.values.size()].second;
}

void set(nn::NetworkParams& p, std::size_t i, double v) {
  if (i < p.values.size()) {
    p.values[i] = v;
  } else {
    p.extras[i - p.values.size()].second = v;
  }
}

}  // namespace

ClosedFormResiduals closed_form_residuals(std::size_t dim, std::size_t points) {
  const auto problem = mfg::ergodic_explicit_problem(dim);
  const auto& cf = *problem.closed_form;
  ClosedFormResiduals out;
  out.hbar = cf.ergodic_constant;
  Rng rng(split_seed(101, dim));
  std::vector<double> x(dim);
  for (std::size_t k = 0; k < points; ++k) {
    if (dim == 1) {
      x[0] = static_cast<double>(k) / static_cast<double>(points - 1);
    } else {
      for (double& xi : x) xi = uniform01(rng);
    }
    const auto ru = loss::ergodic_hjb_residual(problem, cf.value_field, cf.density_field,
                                               ad::Var(cf.ergodic_constant), x);
    const auto rm = loss::ergodic_fp_residual(problem, cf.value_field, cf.density_field, x);
    out.max_hjb = std::max(out.max_hjb, std::abs(ru.value()));
    out.max_fp = std::max(out.max_fp, std::abs(rm.value()));
  }
  return out;
}

GradientCheck gradient_check(std::uint64_t seed, double step) {
  train::TrainConfig config;
  config.value_net = {nn::LayerKind::dgm, 4, 1, nn::Activation::tanh};
  config.density_net = {nn::LayerKind::dgm, 4, 1, nn::Activation::sigmoid};
  if (seed % 2 == 1) {
    config.problem = "ergodic_congestion";
    config.dim = 2;
    config.embedding = nn::Embedding::identity;
    config.density_mode = nn::DensityMode::penalty;
    config.weights = {1.0, 10.0, 10.0};
  }
  const auto problem = mfg::problem_by_name(config.problem, config.dim);
  Rng rng(split_seed(seed, 17));
  auto value = nn::initialize(config.value_architecture(), rng);
  value.set_extra("hbar", 0.0);
  auto density = nn::initialize(config.density_architecture(), rng);
  jitter(value, rng);
  jitter(density, rng);
  const auto batch = train::sample_batch(rng, config.dim, 8, problem.flavor());

  ad::Tape tape;
  auto fd = [&](nn::NetworkParams& p, auto&& objective) {
    std::vector<double> g(p.trainable_count());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p0 = get(p, i);
      const double h = step * std::max(1.0, std::abs(p0));
      set(p, i, p0 + h);
      const double up = objective().losses.total;
      set(p, i, p0 - h);
      const double down = objective().losses.total;
      set(p, i, p0);
      g[i] = (up - down) / (2.0 * h);
    }
    return g;
  };

  GradientCheck out;
  {
    const auto ad_grad =
        train::value_objective(problem, value, density, config, batch, tape).grad;
    const auto fd_grad = fd(value, [&] {
      return train::value_objective(problem, value, density, config, batch, tape, false);
    });
    out.value_rel = relative_gap(ad_grad, fd_grad);
  }
  {
    const auto ad_grad =
        train::density_objective(problem, value, density, config, batch, tape).grad;
    const auto fd_grad = fd(density, [&] {
      return train::density_objective(problem, value, density, config, batch, tape, false);
    });
    out.density_rel = relative_gap(ad_grad, fd_grad);
  }
  return out;
}

InputDerivativeCheck input_derivative_check(std::uint64_t seed) {
  Rng rng(split_seed(seed, 29));
  const auto arch = nn::Architecture::dgm(2, 4, 1, nn::Activation::tanh, nn::Embedding::fourier);
  auto p = nn::initialize(arch, rng);
  jitter(p, rng);
  const ad::Field<double> f = [&](std::span<const ad::HyperDual<double>> x) {
    return nn::evaluate<ad::HyperDual<double>, double>(arch, std::span<const double>(p.values), x);
  };
  const std::vector<double> x{uniform01(rng), uniform01(rng)};
  InputDerivativeCheck out;
  out.grad_rel = eval::fd_check(f, x, eval::FdOrder::grad, 1e-6).rel_error;
  out.laplacian_rel = eval::fd_check(f, x, eval::FdOrder::laplacian, 2e-5).rel_error;
  return out;
}

OracleCheck oracle_check(std::size_t points) {
  const auto problem = mfg::ergodic_explicit_problem(1);
  const auto& cf = *problem.closed_form;
  auto errors = [&](std::size_t n, OracleCheck* detail) {
    eval::FdSolverOptions opts;
    opts.points = n;
    const auto sol = eval::fd_reference_solver_1d(problem, opts);
    double du = 0.0, nu = 0.0, dm = 0.0, nm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double xk[1] = {sol.x[k]};
      const double u = cf.value(xk);
      const double m = cf.density(xk);
      du += (sol.u[k] - u) * (sol.u[k] - u);
      nu += u * u;
      dm += (sol.m[k] - m) * (sol.m[k] - m);
      nm += m * m;
    }
    const std::pair<double, double> e{std::sqrt(du / nu), std::sqrt(dm / nm)};
    if (detail != nullptr) {
      detail->rel_u = e.first;
      detail->rel_m = e.second;
      detail->hbar_error = std::abs(sol.hbar - cf.ergodic_constant);
      detail->iterations = sol.iterations;
    }
    return e;
  };
  OracleCheck out;
  const auto fine = errors(points, &out);
  const auto coarse = errors(points / 2, nullptr);
  out.order_u = std::log2(coarse.first / fine.first);
  out.order_m = std::log2(coarse.second / fine.second);
  return out;
}

GameCheck game_check(int seeds, std::size_t samples) {
  using game::EmpiricalMeasure;
  GameCheck out;
  const EmpiricalMeasure mu({{0, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.4}});
  out.self_cost_error = std::abs(game::collective_cost(mu, mu) + std::log(4.0));

  // random pairs with partially overlapping supports
  Rng rng(split_seed(5, 0));
  out.brute_force_step = 1e-3;
  for (int trial = 0; trial < 10; ++trial) {
    auto random_measure = [&](game::Atom lo) {
      std::map<game::Atom, double> w;
      double total = 0.0;
      for (game::Atom x = lo; x < lo + 4; ++x) total += w[x] = 0.05 + uniform01(rng);
      for (auto& kv : w) kv.second /= total;
      double s = 0.0;
      for (auto it = w.begin(); it != std::prev(w.end()); ++it) s += it->second;
      std::prev(w.end())->second = 1.0 - s;
      return EmpiricalMeasure(w);
    };
    const auto real = random_measure(0);
    const auto gen = random_measure(trial % 3);
    const auto bf = game::brute_force_discriminator(real, gen, out.brute_force_step);
    for (const auto& [x, d] : bf) {
      out.brute_force_error =
          std::max(out.brute_force_error, std::abs(d - game::optimal_discriminator(real, gen, x)));
    }
    const double cost = game::collective_cost(real, gen);
    out.js_identity_error = std::max(
        out.js_identity_error, std::abs(cost - (2.0 * game::jensen_shannon(real, gen) - std::log(4.0))));
  }

  out.pareto_resolution = 1.0 / 50.0;
  const std::vector<EmpiricalMeasure> targets{
      EmpiricalMeasure({{0, 0.2}, {1, 0.3}, {2, 0.5}}),
      EmpiricalMeasure({{0, 0.123}, {1, 0.377}, {2, 0.5}}),
      EmpiricalMeasure({{0, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.4}}),
      EmpiricalMeasure({{0, 0.5}, {1, 0.5}})};
  for (const auto& t : targets) {
    const auto rep = game::verify_pareto_minimum(t, out.pareto_resolution);
    out.pareto_deviation = std::max(out.pareto_deviation, rep.max_deviation);
    out.pareto_unique = out.pareto_unique && rep.unique;
  }

  const std::vector<double> p_real{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> p_gen{0.25, 0.25, 0.25, 0.25};
  out.convergence_seeds = seeds;
  for (int s = 0; s < seeds; ++s) {
    const double d = game::convergence_demo(p_real, p_gen, samples, samples, static_cast<std::uint64_t>(s));
    if (d < 0.02) ++out.convergence_passes;
  }
  return out;
}

}  // namespace mfgan::verify
