#include "mfgan/losses.hpp"

#include <fmt/format.h>

#include "mfgan/errors.hpp"

namespace mfgan::loss {

using mfg::HD;

void LossWeights::validate() const {
  if (!(value >= 0.0) || !(density >= 0.0) || !(periodicity >= 0.0)) {
    throw ConfigError("loss weights must be nonnegative");
  }
}

void Batch::push_back(std::span<const double> p) {
  if (p.size() != dim) throw DimensionError("batch point has the wrong dimension");
  coords.insert(coords.end(), p.begin(), p.end());
}

namespace {

HD constant_hd(double x) { return ad::constant(Var(x)); }

Var field_value(const Field& f, std::span<const double> x) {
  std::vector<HD> in(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = constant_hd(x[i]);
  return f(in).v;
}

Var sum_squares(std::span<const Var> v) {
  Var s(0.0);
  for (const Var& x : v) s = s + ad::square(x);
  return s;
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  Var s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
  return s;
}

Var ergodic_hjb_from(const mfg::ErgodicData& e, std::span<const double> x,
                     const ad::Derivatives<Var>& du, const Var& m, const Var& hbar) {
  return Var(e.epsilon) * du.laplacian + Var(0.5) * sum_squares(du.grad) - Var(e.potential(x)) -
         e.coupling(x, m) - hbar;
}

Var ergodic_fp_from(const mfg::ErgodicData& e, const ad::Derivatives<Var>& du,
                    const ad::Derivatives<Var>& dm) {
  return Var(e.epsilon) * dm.laplacian - dot(dm.grad, du.grad) - dm.value * du.laplacian;
}

void check_point(const mfg::MFGProblem& problem, std::size_t size) {
  if (size != problem.dim) {
    throw DimensionError(fmt::format("point has dimension {}, problem has {}", size, problem.dim));
  }
}

std::vector<double> space_time(double s, std::span<const double> x) {
  std::vector<double> p;
  p.reserve(x.size() + 1);
  p.push_back(s);
  p.insert(p.end(), x.begin(), x.end());
  return p;
}

/// Spatial derivatives plus ∂_s of a field on (s, x).
struct SpaceTimeDerivatives {
  ad::Derivatives<Var> space;
  Var dt;
  std::vector<HD> lifts;  // full lift along each spatial axis
};

SpaceTimeDerivatives space_time_derivatives(const Field& f, std::span<const double> pt) {
  SpaceTimeDerivatives out;
  out.dt = ad::directional_second(f, pt, 0).d1;
  out.space.laplacian = Var(0.0);
  for (std::size_t i = 1; i < pt.size(); ++i) {
    HD h = ad::directional_second(f, pt, i);
    if (i == 1) out.space.value = h.v;
    out.space.grad.push_back(h.d1);
    out.space.laplacian = out.space.laplacian + h.d2;
    out.lifts.push_back(std::move(h));
  }
  return out;
}

Var fh_hjb_from(const mfg::FiniteHorizonData& fh, std::span<const double> pt,
                const SpaceTimeDerivatives& du, const Var& m) {
  std::vector<HD> x;
  for (std::size_t i = 1; i < pt.size(); ++i) x.push_back(constant_hd(pt[i]));
  std::vector<HD> p;
  for (const Var& g : du.space.grad) p.push_back(ad::constant(g));
  const HD h = fh.hamiltonian(constant_hd(pt[0]), x, ad::constant(m), p);
  return du.dt + Var(0.5 * fh.sigma * fh.sigma) * du.space.laplacian + h.v;
}

/// Hessian entry ∂_i∂_j u by polarization along e_i + e_j.
Var mixed_partial(const Field& u, std::span<const double> pt, std::size_t i, std::size_t j,
                  const SpaceTimeDerivatives& du) {
  std::vector<double> dir(pt.size(), 0.0);
  dir[i + 1] = 1.0;
  dir[j + 1] = 1.0;
  const Var both = ad::directional_second_along(u, pt, dir).d2;
  return Var(0.5) * (both - du.lifts[i].d2 - du.lifts[j].d2);
}

Var fh_fp_from(const mfg::FiniteHorizonData& fh, const Field& u, std::span<const double> pt,
               const SpaceTimeDerivatives& du, const SpaceTimeDerivatives& dm) {
  const std::size_t d = pt.size() - 1;
  const HD s = constant_hd(pt[0]);
  Var divergence(0.0);
  for (std::size_t i = 0; i < d; ++i) {
    // every argument of m·b_i as a hyper-dual along e_i; only d1 is used
    std::vector<HD> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = j == i ? ad::lift<Var>(pt[j + 1]) : constant_hd(pt[j + 1]);
    std::vector<HD> p(d);
    for (std::size_t j = 0; j < d; ++j) {
      const Var uij = j == i ? du.lifts[i].d2 : mixed_partial(u, pt, i, j, du);
      p[j] = HD{du.space.grad[j], uij, Var(0.0)};
    }
    const HD& m = dm.lifts[i];
    const std::vector<HD> alpha = fh.optimal_control(s, x, m, p);
    const std::vector<HD> b = fh.drift(s, x, m, alpha);
    divergence = divergence + (m * b[i]).d1;
  }
  Var r = dm.dt + divergence - Var(0.5 * fh.sigma * fh.sigma) * dm.space.laplacian;
  if (fh.fp_source) r = r - Var(fh.fp_source(pt[0], pt.subspan(1)));
  return r;
}

Var mean(std::span<const Var> v) {
  Var s(0.0);
  for (const Var& x : v) s = s + x;
  return s / Var(static_cast<double>(v.size()));
}

}  // namespace

Var ergodic_hjb_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m,
                         const Var& hbar, std::span<const double> x) {
  check_point(problem, x.size());
  const auto du = ad::derivatives(u, x);
  return ergodic_hjb_from(problem.ergodic(), x, du, field_value(m, x), hbar);
}

Var ergodic_fp_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m,
                        std::span<const double> x) {
  check_point(problem, x.size());
  const auto du = ad::derivatives(u, x);
  const auto dm = ad::derivatives(m, x);
  return ergodic_fp_from(problem.ergodic(), du, dm);
}

Var fh_hjb_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m, double s,
                    std::span<const double> x) {
  check_point(problem, x.size());
  const auto pt = space_time(s, x);
  const auto du = space_time_derivatives(u, pt);
  return fh_hjb_from(problem.finite_horizon(), pt, du, field_value(m, pt));
}

Var fh_fp_residual(const mfg::MFGProblem& problem, const Field& u, const Field& m, double s,
                   std::span<const double> x) {
  check_point(problem, x.size());
  const auto pt = space_time(s, x);
  const auto du = space_time_derivatives(u, pt);
  const auto dm = space_time_derivatives(m, pt);
  return fh_fp_from(problem.finite_horizon(), u, pt, du, dm);
}

std::vector<CornerPair> periodicity_pairs(std::size_t dim) {
  if (dim == 0) throw ConfigError("periodicity_pairs: dimension must be >= 1");
  if (dim > 12) throw ConfigError("periodicity_pairs: dimension above 12 is rejected");
  std::vector<CornerPair> pairs;
  const std::size_t corners = std::size_t{1} << dim;
  for (std::size_t axis = 0; axis < dim; ++axis) {
    for (std::size_t mask = 0; mask < corners; ++mask) {
      if (mask & (std::size_t{1} << axis)) continue;  // unordered: x_axis = 0 first
      CornerPair p;
      p.axis = axis;
      p.first.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) p.first[j] = (mask >> j) & 1U ? 1.0 : 0.0;
      p.second = p.first;
      p.second[axis] = 1.0;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

EmpiricalLosses empirical_losses(const mfg::MFGProblem& problem, const Field& u, const Field& m,
                                 const Var& hbar, const Batch& batch, const LossWeights& weights,
                                 const LossOptions& options) {
  weights.validate();
  if (batch.empty()) throw EmptyBatch("empirical_losses: empty batch");
  const bool ergodic = problem.flavor() == mfg::Flavor::ergodic;
  const std::size_t expected = ergodic ? problem.dim : problem.dim + 1;
  if (batch.dim != expected) throw DimensionError("batch dimension does not match the problem");

  const bool want_value = options.side != Side::density;
  const bool want_density = options.side != Side::value;
  const std::size_t n = batch.size();

  std::vector<Var> r_u, r_m, u_vals, m_vals, term, init;
  r_u.reserve(n);
  r_m.reserve(n);

  if (ergodic) {
    const auto& e = problem.ergodic();
    for (std::size_t k = 0; k < n; ++k) {
      const auto x = batch.point(k);
      const auto du = ad::derivatives(u, x);
      if (want_value) {
        r_u.push_back(ergodic_hjb_from(e, x, du, field_value(m, x), hbar));
        u_vals.push_back(du.value);
      }
      if (want_density) {
        const auto dm = ad::derivatives(m, x);
        r_m.push_back(ergodic_fp_from(e, du, dm));
        m_vals.push_back(dm.value);
      }
    }
  } else {
    if (weights.periodicity > 0.0) {
      throw ConfigError("periodicity penalties are defined for ergodic problems only");
    }
    const auto& fh = problem.finite_horizon();
    for (std::size_t k = 0; k < n; ++k) {
      const auto pt = batch.point(k);
      const auto x = pt.subspan(1);
      const auto du = space_time_derivatives(u, pt);
      if (want_value) {
        r_u.push_back(fh_hjb_from(fh, pt, du, field_value(m, pt)));
        const auto at_t = space_time(fh.horizon, x);
        Var g(0.0);
        if (fh.terminal_cost) g = fh.terminal_cost(x, field_value(m, at_t));
        term.push_back(ad::square(field_value(u, at_t) - g));
      }
      if (want_density) {
        const auto dm = space_time_derivatives(m, pt);
        r_m.push_back(fh_fp_from(fh, u, pt, du, dm));
        const double m0 = fh.initial_density ? fh.initial_density(x) : 0.0;
        init.push_back(ad::square(field_value(m, space_time(0.0, x)) - Var(m0)));
      }
    }
  }

  EmpiricalLosses out;
  std::vector<CornerPair> pairs;
  if (ergodic && weights.periodicity > 0.0) pairs = periodicity_pairs(problem.dim);
  auto periodicity = [&](const Field& f) {
    Var s(0.0);
    for (const auto& p : pairs) s = s + ad::square(field_value(f, p.first) - field_value(f, p.second));
    return s;
  };

  if (want_value) {
    std::vector<Var> sq;
    for (const Var& r : r_u) sq.push_back(ad::square(r));
    out.hjb = mean(sq);
    out.value_pen = ergodic ? ad::square(mean(u_vals)) : mean(term);
    if (!pairs.empty()) out.value_per = periodicity(u);
    out.value_total = out.hjb + Var(weights.value) * out.value_pen +
                      Var(weights.periodicity) * out.value_per;
  }
  if (want_density) {
    std::vector<Var> sq;
    for (const Var& r : r_m) sq.push_back(ad::square(r));
    out.fp = mean(sq);
    if (ergodic) {
      if (options.normalization_penalty) out.density_pen = ad::square(mean(m_vals) - Var(1.0));
    } else {
      out.density_pen = mean(init);
    }
    if (!pairs.empty()) out.density_per = periodicity(m);
    out.density_total = out.fp + Var(weights.density) * out.density_pen +
                        Var(weights.periodicity) * out.density_per;
  }
  return out;
}

}  // namespace mfgan::loss
