#include "mfgan/evaluation.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "mfgan/errors.hpp"
#include "mfgan/parallel.hpp"

namespace mfgan {

std::size_t worker_threads() {
  if (const char* env = std::getenv("MFGAN_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace mfgan

namespace mfgan::eval {

TorusGrid::TorusGrid(std::size_t dim, std::size_t points_per_axis)
    : dim_(dim), n_(points_per_axis), size_(1) {
  if (dim == 0) throw DimensionError("TorusGrid: dimension must be >= 1");
  if (points_per_axis < 2) throw ConfigError("TorusGrid: need at least 2 points per axis");
  for (std::size_t i = 0; i < dim; ++i) size_ *= n_;
}

void TorusGrid::point(std::size_t index, double* out) const {
  for (std::size_t i = 0; i < dim_; ++i) {
    out[i] = static_cast<double>(index % n_) / static_cast<double>(n_);
    index /= n_;
  }
}

std::vector<double> TorusGrid::point(std::size_t index) const {
  std::vector<double> x(dim_);
  point(index, x.data());
  return x;
}

namespace {

double rel_l2_from(std::span<const double> f, std::span<const double> g) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    num += (f[k] - g[k]) * (f[k] - g[k]);
    den += g[k] * g[k];
  }
  den /= static_cast<double>(g.size());
  num /= static_cast<double>(f.size());
  if (den < 1e-300) throw ZeroReference("rel_l2_error: reference function vanishes on the grid");
  return std::sqrt(num / den);
}

}  // namespace

double rel_l2_error(const PointFn& f, const PointFn& g, const TorusGrid& grid, std::size_t threads) {
  std::vector<double> fv(grid.size());
  std::vector<double> gv(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    const auto x = grid.point(k);
    fv[k] = f(x);
    gv[k] = g(x);
  });
  return rel_l2_from(fv, gv);
}

double rel_l2_error(const PointFn& f, const PointFn& g, std::span<const double> points,
                    std::size_t dim, std::size_t threads) {
  const std::size_t n = points.size() / dim;
  if (n == 0) throw EmptyBatch("rel_l2_error: no points");
  std::vector<double> fv(n);
  std::vector<double> gv(n);
  parallel_for(n, threads, [&](std::size_t k) {
    const auto x = points.subspan(k * dim, dim);
    fv[k] = f(x);
    gv[k] = g(x);
  });
  return rel_l2_from(fv, gv);
}

std::vector<double> halton_points(std::size_t count, std::size_t dim) {
  static constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                         41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
  if (dim > std::size(kPrimes)) throw DimensionError("halton_points: dimension too large");
  std::vector<double> out(count * dim);
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t i = 0; i < dim; ++i) {
      const unsigned base = kPrimes[i];
      double f = 1.0;
      double r = 0.0;
      for (std::size_t n = k + 1; n > 0; n /= base) {
        f /= base;
        r += f * static_cast<double>(n % base);
      }
      out[k * dim + i] = r;
    }
  }
  return out;
}

FdCheck fd_check(const ad::Field<double>& fn, std::span<const double> x, FdOrder order, double h) {
  if (!(h > 0.0)) throw ConfigError("fd_check: step must be positive");
  auto value_at = [&](std::span<const double> p) {
    std::vector<ad::HyperDual<double>> in(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) in[i] = ad::constant(p[i]);
    return fn(in).v;
  };
  FdCheck out;
  std::vector<double> p(x.begin(), x.end());
  const double center = value_at(p);
  double lap_ad = 0.0;
  double lap_fd = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto lifted = ad::directional_second(fn, x, i);
    p[i] = x[i] + h;
    const double plus = value_at(p);
    p[i] = x[i] - h;
    const double minus = value_at(p);
    p[i] = x[i];
    if (order == FdOrder::grad) {
      out.autodiff.push_back(lifted.d1);
      out.finite_difference.push_back((plus - minus) / (2.0 * h));
    } else {
      lap_ad += lifted.d2;
      lap_fd += (plus - 2.0 * center + minus) / (h * h);
    }
  }
  if (order == FdOrder::laplacian) {
    out.autodiff = {lap_ad};
    out.finite_difference = {lap_fd};
  }
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < out.autodiff.size(); ++i) {
    diff = std::max(diff, std::abs(out.autodiff[i] - out.finite_difference[i]));
    scale = std::max({scale, std::abs(out.autodiff[i]), std::abs(out.finite_difference[i])});
  }
  out.rel_error = scale == 0.0 ? diff : diff / scale;
  return out;
}

// --- finite-difference reference solver ------------------------------------

namespace {

struct Grid1d {
  std::size_t n;
  double h;
  double epsilon;
  std::vector<double> x;
  std::vector<double> potential;
  std::size_t next(std::size_t k) const { return k + 1 == n ? 0 : k + 1; }
  std::size_t prev(std::size_t k) const { return k == 0 ? n - 1 : k - 1; }
};

std::vector<double> central_gradient(const Grid1d& g, const std::vector<double>& u) {
  std::vector<double> d(g.n);
  for (std::size_t k = 0; k < g.n; ++k) d[k] = (u[g.next(k)] - u[g.prev(k)]) / (2.0 * g.h);
  return d;
}

/// Discrete HJB residual G_k and the mean-zero row.
Eigen::VectorXd hjb_system(const Grid1d& g, const Eigen::VectorXd& z, const std::vector<double>& coupling) {
  const std::size_t n = g.n;
  Eigen::VectorXd r(static_cast<long>(n + 1));
  const double inv_h2 = 1.0 / (g.h * g.h);
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double up = z[static_cast<long>(g.next(k))];
    const double um = z[static_cast<long>(g.prev(k))];
    const double uk = z[static_cast<long>(k)];
    const double grad = (up - um) / (2.0 * g.h);
    r[static_cast<long>(k)] = g.epsilon * (up - 2.0 * uk + um) * inv_h2 + 0.5 * grad * grad -
                              g.potential[k] - coupling[k] - z[static_cast<long>(n)];
    mean += uk;
  }
  r[static_cast<long>(n)] = mean / static_cast<double>(n);
  return r;
}

/// Newton solve of the HJB for (u, H̄) given the coupling values f(x_k, m_k).
void solve_hjb(const Grid1d& g, const std::vector<double>& coupling, std::vector<double>& u, double& hbar) {
  const std::size_t n = g.n;
  const long nn = static_cast<long>(n + 1);
  Eigen::VectorXd z(nn);
  for (std::size_t k = 0; k < n; ++k) z[static_cast<long>(k)] = u[k];
  z[static_cast<long>(n)] = hbar;
  const double inv_h2 = 1.0 / (g.h * g.h);

  Eigen::VectorXd r = hjb_system(g, z, coupling);
  for (int it = 0; it < 60 && r.lpNorm<Eigen::Infinity>() > 1e-12; ++it) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nn, nn);
    for (std::size_t k = 0; k < n; ++k) {
      const long row = static_cast<long>(k);
      const long kp = static_cast<long>(g.next(k));
      const long km = static_cast<long>(g.prev(k));
      const double grad = (z[kp] - z[km]) / (2.0 * g.h);
      jac(row, kp) += g.epsilon * inv_h2 + grad / (2.0 * g.h);
      jac(row, km) += g.epsilon * inv_h2 - grad / (2.0 * g.h);
      jac(row, row) += -2.0 * g.epsilon * inv_h2;
      jac(row, nn - 1) = -1.0;
      jac(nn - 1, row) = 1.0 / static_cast<double>(n);
    }
    const Eigen::VectorXd step = jac.partialPivLu().solve(-r);
    // backtracking on the max-norm of the residual
    double t = 1.0;
    const double before = r.lpNorm<Eigen::Infinity>();
    Eigen::VectorXd trial = z + step;
    Eigen::VectorXd r_trial = hjb_system(g, trial, coupling);
    while (r_trial.lpNorm<Eigen::Infinity>() > before && t > 1e-4) {
      t *= 0.5;
      trial = z + t * step;
      r_trial = hjb_system(g, trial, coupling);
    }
    z = trial;
    r = r_trial;
  }
  for (std::size_t k = 0; k < n; ++k) u[k] = z[static_cast<long>(k)];
  hbar = z[static_cast<long>(n)];
}

/// (A m)_k = ε Δ_h m − δ_h(m D u), with D the central gradient.
std::vector<double> fp_apply(const Grid1d& g, const std::vector<double>& grad_u, const std::vector<double>& m) {
  std::vector<double> out(g.n);
  const double inv_h2 = 1.0 / (g.h * g.h);
  for (std::size_t k = 0; k < g.n; ++k) {
    const std::size_t kp = g.next(k);
    const std::size_t km = g.prev(k);
    out[k] = g.epsilon * (m[kp] - 2.0 * m[k] + m[km]) * inv_h2 -
             (m[kp] * grad_u[kp] - m[km] * grad_u[km]) / (2.0 * g.h);
  }
  return out;
}

std::vector<double> solve_fp(const Grid1d& g, const std::vector<double>& grad_u) {
  const std::size_t n = g.n;
  const long nn = static_cast<long>(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nn, nn);
  const double inv_h2 = 1.0 / (g.h * g.h);
  for (std::size_t k = 1; k < n; ++k) {
    const long row = static_cast<long>(k);
    const long kp = static_cast<long>(g.next(k));
    const long km = static_cast<long>(g.prev(k));
    a(row, kp) += g.epsilon * inv_h2 - grad_u[g.next(k)] / (2.0 * g.h);
    a(row, km) += g.epsilon * inv_h2 + grad_u[g.prev(k)] / (2.0 * g.h);
    a(row, row) += -2.0 * g.epsilon * inv_h2;
  }
  // rows sum to zero over k, so one is replaced by the mass constraint
  a.row(0).setConstant(g.h);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn);
  rhs[0] = 1.0;
  const Eigen::VectorXd m = a.partialPivLu().solve(rhs);
  return {m.data(), m.data() + nn};
}

double relative_change(const std::vector<double>& now, const std::vector<double>& before) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < now.size(); ++k) {
    num += (now[k] - before[k]) * (now[k] - before[k]);
    den += now[k] * now[k];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

std::vector<double> coupling_values(const mfg::ErgodicData& e, const Grid1d& g, const std::vector<double>& m) {
  std::vector<double> c(g.n);
  for (std::size_t k = 0; k < g.n; ++k) {
    c[k] = e.coupling(std::span<const double>(&g.x[k], 1), ad::Var(m[k])).value();
  }
  return c;
}

}  // namespace

FdSolution fd_reference_solver_1d(const mfg::MFGProblem& problem, const FdSolverOptions& options) {
  if (problem.flavor() != mfg::Flavor::ergodic || problem.dim != 1) {
    throw ConfigError("fd_reference_solver_1d needs a one-dimensional ergodic problem");
  }
  if (options.points < 64) throw ConfigError("fd_reference_solver_1d needs n >= 64");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw ConfigError("fd_reference_solver_1d: damping must lie in (0, 1]");
  }
  const auto& e = problem.ergodic();
  Grid1d g;
  g.n = options.points;
  g.h = 1.0 / static_cast<double>(g.n);
  g.epsilon = e.epsilon;
  for (std::size_t k = 0; k < g.n; ++k) {
    g.x.push_back(static_cast<double>(k) * g.h);
    g.potential.push_back(e.potential(std::span<const double>(&g.x.back(), 1)));
  }

  std::vector<double> u(g.n, 0.0);
  std::vector<double> m(g.n, 1.0);
  double hbar = 0.0;
  FdSolution out;
  bool converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const std::vector<double> u_old = u;
    const std::vector<double> m_old = m;
    solve_hjb(g, coupling_values(e, g, m), u, hbar);
    const std::vector<double> m_new = solve_fp(g, central_gradient(g, u));
    for (std::size_t k = 0; k < g.n; ++k) {
      m[k] = (1.0 - options.damping) * m[k] + options.damping * m_new[k];
    }
    out.iterations = it;
    out.last_change = std::max(relative_change(u, u_old), relative_change(m, m_old));
    if (out.last_change < options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NoConvergence(fmt::format("fd_reference_solver_1d: no convergence after {} iterations "
                                    "(last relative change {:.3e})",
                                    out.iterations, out.last_change));
  }
  // final pass so (u, m) are mutually consistent
  solve_hjb(g, coupling_values(e, g, m), u, hbar);
  m = solve_fp(g, central_gradient(g, u));
  solve_hjb(g, coupling_values(e, g, m), u, hbar);

  Eigen::VectorXd z(static_cast<long>(g.n + 1));
  for (std::size_t k = 0; k < g.n; ++k) z[static_cast<long>(k)] = u[k];
  z[static_cast<long>(g.n)] = hbar;
  out.hjb_residual = hjb_system(g, z, coupling_values(e, g, m)).lpNorm<Eigen::Infinity>();
  const auto am = fp_apply(g, central_gradient(g, u), m);
  double fp = 0.0;
  for (double v : am) fp = std::max(fp, std::abs(v) * g.h);
  out.fp_residual = fp;
  out.x = g.x;
  out.u = std::move(u);
  out.m = std::move(m);
  out.hbar = hbar;
  return out;
}

}  // namespace mfgan::eval
