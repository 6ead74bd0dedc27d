#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "mfgan/errors.hpp"
#include "mfgan/losses.hpp"
#include "mfgan/random.hpp"

using namespace mfgan;
using ad::Var;
using loss::Field;
using mfg::HD;

namespace {

const double kPi = 3.14159265358979323846;

Field constant_field(double c) {
  return [c](std::span<const HD>) { return ad::constant(Var(c)); };
}

// Manufactured finite-horizon solution in d dimensions with θ = Σ x_i:
//   u = (T − s) sin θ,  m = 1 + ½ e^{−s} cos θ,  b = α = −∇u.
struct Manufactured {
  std::size_t d;
  double T;
  double sigma;


  double fp_source(double s, double theta) const {
    const double tau = T - s;
    const double e = std::exp(-s);
    const double m = 1 + 0.5 * e * std::cos(theta);
    const double m_s = -0.5 * e * std::cos(theta);
    const double m_t = -0.5 * e * std::sin(theta);
    const double m_tt = -0.5 * e * std::cos(theta);
    const double b = -tau * std::cos(theta);
    const double b_t = tau * std::sin(theta);
    return m_s + d * (m_t * b + m * b_t) - 0.5 * sigma * sigma * d * m_tt;
  }

  mfg::MFGProblem problem() const {
    mfg::QuadraticCost cost;
    const double T_ = T, sigma_ = sigma;
    const std::size_t d_ = d;
    cost.state_cost = [T_, sigma_, d_](const HD& s, std::span<const HD> x, const HD&) {
      HD theta = ad::constant(Var(0.0));
      for (const auto& xi : x) theta = theta + xi;
      const HD tau = Var(T_) - s;
      return ad::sin(theta) + Var(0.5 * sigma_ * sigma_ * d_) * (tau * ad::sin(theta)) +
             Var(0.5 * d_) * (tau * tau * ad::square(ad::cos(theta)));
    };
    const Manufactured self = *this;
    return mfg::finite_horizon_problem(
        d, T, sigma, mfg::Dynamics{std::pair{mfg::AffineDrift{}, cost}}, {},
        [](std::span<const double> x) {
          double theta = 0;
          for (double xi : x) theta += xi;
          return 1 + 0.5 * std::cos(theta);
        },
        [self](double s, std::span<const double> x) {
          double theta = 0;
          for (double xi : x) theta += xi;
          return self.fp_source(s, theta);
        });
  }

  Field u() const {
    const double T_ = T;
    return [T_](std::span<const HD> in) {
      HD theta = ad::constant(Var(0.0));
      for (std::size_t i = 1; i < in.size(); ++i) theta = theta + in[i];
      return (Var(T_) - in[0]) * ad::sin(theta);
    };
  }

  Field m() const {
    return [](std::span<const HD> in) {
      HD theta = ad::constant(Var(0.0));
      for (std::size_t i = 1; i < in.size(); ++i) theta = theta + in[i];
      return Var(1.0) + Var(0.5) * (ad::exp(-in[0]) * ad::cos(theta));
    };
  }
};

}  // namespace

TEST_CASE("closed form annihilates both ergodic residuals") {
  for (std::size_t d : {1, 2, 3}) {
    const auto p = mfg::ergodic_explicit_problem(d);
    const auto& cf = *p.closed_form;
    Rng rng(d);
    for (int k = 0; k < 25; ++k) {
      std::vector<double> x(d);
      for (double& xi : x) xi = uniform01(rng);
      const Var hbar(cf.ergodic_constant);
      CHECK(std::abs(loss::ergodic_hjb_residual(p, cf.value_field, cf.density_field, hbar, x).value()) < 1e-8);
      CHECK(std::abs(loss::ergodic_fp_residual(p, cf.value_field, cf.density_field, x).value()) < 1e-8);
    }
  }
}

TEST_CASE("residuals of trivial fields") {
  const std::vector<double> zero{0.0};
  const auto ex = mfg::ergodic_explicit_problem(1);
  CHECK(loss::ergodic_hjb_residual(ex, constant_field(0), constant_field(1), Var(0.0), zero).value() ==
        doctest::Approx(-2 * kPi * kPi));
  const auto cg = mfg::ergodic_congestion_problem(1);
  CHECK(loss::ergodic_hjb_residual(cg, constant_field(0), constant_field(1), Var(0.0), zero).value() ==
        doctest::Approx(-2.5));
  const std::vector<double> x{0.37};
  CHECK(loss::ergodic_fp_residual(ex, constant_field(0), constant_field(1), x).value() == 0.0);
  const std::vector<double> two{0.1, 0.2};
  CHECK_THROWS_AS(loss::ergodic_fp_residual(ex, constant_field(0), constant_field(1), two), DimensionError);
}

TEST_CASE("FP residual with u = 0 is epsilon times the Laplacian of m") {
  const auto p = mfg::ergodic_explicit_problem(1);
  const auto& cf = *p.closed_form;
  const std::vector<double> x{0.0};
  const double r = loss::ergodic_fp_residual(p, constant_field(0), cf.density_field, x).value();
  const double h = 1e-3;
  auto m = [&](double y) {
    const std::vector<double> q{y};
    return cf.density(q);
  };
  const double fd_lap = (-m(2 * h) + 16 * m(h) - 30 * m(0) + 16 * m(-h) - m(-2 * h)) / (12 * h * h);
  CHECK(r != 0.0);
  CHECK(r == doctest::Approx(0.5 * fd_lap).epsilon(1e-6));
}

TEST_CASE("manufactured finite-horizon solution") {
  for (std::size_t d : {1, 2}) {
    const Manufactured mf{d, 1.0, 0.8};
    const auto p = mf.problem();
    Rng rng(77 + d);
    for (int k = 0; k < 20; ++k) {
      const double s = uniform01(rng);
      std::vector<double> x(d);
      for (double& xi : x) xi = uniform(rng, -1.0, 1.0);
      CHECK(std::abs(loss::fh_hjb_residual(p, mf.u(), mf.m(), s, x).value()) < 1e-8);
      CHECK(std::abs(loss::fh_fp_residual(p, mf.u(), mf.m(), s, x).value()) < 1e-8);
    }
    // a wrong density leaves a nonzero residual
    const std::vector<double> x(d, 0.3);
    CHECK(std::abs(loss::fh_fp_residual(p, mf.u(), constant_field(1), 0.4, x).value()) > 1e-3);
  }
}

TEST_CASE("finite-horizon residuals of trivial fields") {
  const auto p = mfg::finite_horizon_problem(
      2, 1.0, 1.0, mfg::Dynamics{std::pair{mfg::AffineDrift{}, mfg::QuadraticCost{}}}, {},
      [](std::span<const double>) { return 1.0; });
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    const std::vector<double> x{uniform01(rng), uniform01(rng)};
    CHECK(loss::fh_hjb_residual(p, constant_field(0), constant_field(1), uniform01(rng), x).value() == 0.0);
  }
  loss::Batch batch{3, {1.0, 0.2, 0.3, 0.5, 0.9, 0.1}};
  const auto l = loss::empirical_losses(p, constant_field(0), constant_field(1), Var(0.0), batch,
                                        loss::LossWeights{1.0, 1.0, 0.0});
  CHECK(l.value_pen.value() == 0.0);
  CHECK(l.density_pen.value() == 0.0);
  CHECK(l.hjb.value() == 0.0);
  CHECK_THROWS_AS(loss::empirical_losses(p, constant_field(0), constant_field(1), Var(0.0), batch,
                                         loss::LossWeights{1.0, 1.0, 1.0}),
                  ConfigError);
}

TEST_CASE("empirical losses at the closed form") {
  const auto p = mfg::ergodic_explicit_problem(2);
  const auto& cf = *p.closed_form;
  Rng rng(5);
  loss::Batch batch{2, {}};
  for (int k = 0; k < 64; ++k) {
    const std::vector<double> x{uniform01(rng), uniform01(rng)};
    batch.push_back(x);
  }
  const auto l = loss::empirical_losses(p, cf.value_field, cf.density_field, Var(cf.ergodic_constant),
                                        batch, loss::LossWeights{1.0, 0.0, 0.0});
  CHECK(l.hjb.value() < 1e-15);
  CHECK(l.fp.value() < 1e-15);
  const std::vector<double> bad{0.1};
  CHECK_THROWS_AS(batch.push_back(bad), DimensionError);
}

TEST_CASE("penalties") {
  const auto p = mfg::ergodic_congestion_problem(2);
  loss::Batch batch{2, {0.1, 0.2, 0.7, 0.4, 0.5, 0.5}};
  loss::LossOptions opts;
  opts.normalization_penalty = true;
  const auto l = loss::empirical_losses(p, constant_field(1.5), constant_field(1.0), Var(0.0), batch,
                                        loss::LossWeights{2.0, 3.0, 0.0}, opts);
  CHECK(l.value_pen.value() == doctest::Approx(2.25));
  CHECK(l.density_pen.value() == 0.0);
  CHECK(l.value_total.value() == doctest::Approx(l.hjb.value() + 2.0 * 2.25));

  const auto l2 = loss::empirical_losses(p, constant_field(0.0), constant_field(1.2), Var(0.0), batch,
                                         loss::LossWeights{1.0, 10.0, 0.0}, opts);
  CHECK(l2.density_pen.value() == doctest::Approx(0.04));
  CHECK(l2.density_total.value() == doctest::Approx(l2.fp.value() + 0.4));

  loss::Batch empty{2, {}};
  CHECK_THROWS_AS(loss::empirical_losses(p, constant_field(0), constant_field(1), Var(0.0), empty,
                                         loss::LossWeights{}),
                  EmptyBatch);
  CHECK_THROWS_AS((loss::LossWeights{-1.0, 0.0, 0.0}).validate(), ConfigError);
}

TEST_CASE("side selection leaves the other side at literal zero") {
  const auto p = mfg::ergodic_explicit_problem(1);
  loss::Batch batch{1, {0.1, 0.6}};
  loss::LossOptions opts;
  opts.side = loss::Side::value;
  const auto v = loss::empirical_losses(p, constant_field(0), constant_field(1), Var(0.0), batch,
                                        loss::LossWeights{}, opts);
  CHECK(v.fp.is_literal());
  CHECK(v.fp.value() == 0.0);
  CHECK(v.hjb.value() > 0.0);
}

TEST_CASE("periodicity pairs") {
  const auto one = loss::periodicity_pairs(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].first == std::vector<double>{0.0});
  CHECK(one[0].second == std::vector<double>{1.0});

  const auto two = loss::periodicity_pairs(2);
  CHECK(two.size() == 4);
  std::set<std::pair<std::vector<double>, std::vector<double>>> axis0;
  for (const auto& p : two) {
    if (p.axis == 0) axis0.insert({p.first, p.second});
  }
  CHECK(axis0 == std::set<std::pair<std::vector<double>, std::vector<double>>>{
                     {{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}});

  for (std::size_t d = 1; d <= 6; ++d) {
    const auto pairs = loss::periodicity_pairs(d);
    CHECK(pairs.size() == d * (std::size_t{1} << (d - 1)));
    std::set<std::pair<std::vector<double>, std::vector<double>>> seen;
    for (const auto& p : pairs) {
      std::size_t diff = 0;
      for (std::size_t j = 0; j < d; ++j) diff += p.first[j] != p.second[j];
      CHECK(diff == 1);
      CHECK(p.first[p.axis] != p.second[p.axis]);
      seen.insert({std::min(p.first, p.second), std::max(p.first, p.second)});
    }
    CHECK(seen.size() == pairs.size());
  }
  CHECK_THROWS_AS(loss::periodicity_pairs(13), ConfigError);
  CHECK_THROWS_AS(loss::periodicity_pairs(0), ConfigError);
}

TEST_CASE("periodicity penalty vanishes for periodic fields") {
  const auto p = mfg::ergodic_congestion_problem(2);
  const Field periodic = [](std::span<const HD> x) {
    return ad::sin(Var(2 * kPi) * x[0]) + ad::cos(Var(2 * kPi) * x[1]);
  };
  const Field linear = [](std::span<const HD> x) { return x[0] + x[1]; };
  loss::Batch batch{2, {0.3, 0.3}};
  const auto a = loss::empirical_losses(p, periodic, constant_field(1), Var(0.0), batch,
                                        loss::LossWeights{1.0, 0.0, 1.0});
  CHECK(a.value_per.value() < 1e-25);
  const auto b = loss::empirical_losses(p, linear, constant_field(1), Var(0.0), batch,
                                        loss::LossWeights{1.0, 0.0, 1.0});
  CHECK(b.value_per.value() == doctest::Approx(4.0));
}
