#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfgan/errors.hpp"
#include "mfgan/trainer.hpp"
#include "mfgan/verify.hpp"

using namespace mfgan;
using train::TrainConfig;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.outer_loops = 20;
  c.log_stride = 5;
  c.eval_points_per_axis = 32;
  c.quad_points = 32;
  c.eval_batch = 64;
  return c;
}

bool same_records(const std::vector<train::LogRecord>& a, const std::vector<train::LogRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].iteration != b[i].iteration || a[i].loss_hjb != b[i].loss_hjb ||
        a[i].loss_fp != b[i].loss_fp || a[i].rel_err_u != b[i].rel_err_u ||
        a[i].rel_err_m != b[i].rel_err_m || a[i].hbar != b[i].hbar) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("sample_batch ranges and determinism") {
  Rng a(11), b(11);
  const auto x = train::sample_batch(a, 3, 500, mfg::Flavor::ergodic);
  const auto y = train::sample_batch(b, 3, 500, mfg::Flavor::ergodic);
  CHECK(x.coords == y.coords);
  CHECK(x.size() == 500);
  CHECK(x.dim == 3);
  double mean = 0.0;
  for (double v : x.coords) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    mean += v;
  }
  mean /= static_cast<double>(x.coords.size());
  // uniform variance 1/12
  CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / 1500.0));

  Rng c(4);
  const auto t = train::sample_batch(c, 2, 200, mfg::Flavor::finite_horizon, 2.5);
  CHECK(t.dim == 3);
  double tmax = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto p = t.point(i);
    CHECK(p[0] >= 0.0);
    CHECK(p[0] <= 2.5);
    tmax = std::max(tmax, p[0]);
    CHECK(p[1] < 1.0);
  }
  CHECK(tmax > 1.0);
  CHECK_THROWS_AS(train::sample_batch(c, 1, 0, mfg::Flavor::ergodic), ConfigError);
}

TEST_CASE("adam") {
  SUBCASE("first step moves by the rate") {
    train::AdamState s;
    std::vector<double> w{1.0, -2.0};
    const std::vector<double> g{0.3, -7.0};
    train::adam_step(s, w, g, 0.01);
    CHECK(w[0] == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-1.99).epsilon(1e-6));
  }
  SUBCASE("zero gradient leaves parameters") {
    train::AdamState s;
    std::vector<double> w{1.0, 2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    for (int k = 0; k < 5; ++k) train::adam_step(s, w, g, 0.1);
    CHECK(w == std::vector<double>{1.0, 2.0, 3.0});
  }
  SUBCASE("quadratic") {
    train::AdamState s;
    std::vector<double> w{0.0};
    for (int k = 0; k < 100; ++k) {
      const std::vector<double> g{2.0 * (w[0] - 3.0)};
      train::adam_step(s, w, g, 0.1);
    }
    CHECK(std::abs(w[0] - 3.0) < 0.5);
  }
  train::AdamState s;
  std::vector<double> w{1.0};
  const std::vector<double> g{1.0, 2.0};
  CHECK_THROWS_AS(train::adam_step(s, w, g, 0.1), DimensionError);
}

TEST_CASE("zero outer loops records the initial state only") {
  auto c = small_config();
  c.outer_loops = 0;
  train::Trainer t(c);
  const auto v0 = t.value().values;
  const auto d0 = t.density().values;
  const auto rep = t.run();
  REQUIRE(rep.records.size() == 1);
  CHECK(rep.records[0].iteration == 0);
  CHECK(rep.value.values == v0);
  CHECK(rep.density.values == d0);
  CHECK(rep.records[0].hbar == 0.0);
  CHECK(std::isfinite(rep.records[0].rel_err_u));
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto c = small_config();
  const auto a = train::train(c);
  const auto b = train::train(c);
  CHECK(same_records(a.records, b.records));
  CHECK(a.value.values == b.value.values);
  CHECK(a.density.values == b.density.values);
  auto other = c;
  other.seed = 1;
  const auto z = train::train(other);
  CHECK_FALSE(same_records(a.records, z.records));
}

TEST_CASE("records are strictly increasing and end at K") {
  auto c = small_config();
  c.outer_loops = 23;
  c.log_stride = 5;
  const auto rep = train::train(c);
  std::vector<long> its;
  for (const auto& r : rep.records) its.push_back(r.iteration);
  CHECK(its == std::vector<long>{0, 5, 10, 15, 20, 23});
  for (std::size_t i = 1; i < rep.records.size(); ++i) {
    CHECK(rep.records[i].elapsed_s >= rep.records[i - 1].elapsed_s);
  }
}

TEST_CASE("each phase updates only its own network") {
  train::Trainer t(small_config());
  const auto v0 = t.value();
  const auto d0 = t.density();
  t.density_step(1);
  CHECK(t.value().values == v0.values);
  CHECK(t.value().extras == v0.extras);
  CHECK(t.density().values != d0.values);

  const auto d1 = t.density().values;
  const double z1 = t.normalizer();
  t.value_step(1);
  CHECK(t.density().values == d1);
  CHECK(t.normalizer() == z1);
  CHECK(t.value().values != v0.values);
  CHECK(t.value().extra("hbar") != 0.0);
}

TEST_CASE("objective gradients cover the right parameters") {
  const auto c = small_config();
  train::Trainer t(c);
  Rng rng(9);
  const auto batch = train::sample_batch(rng, 1, 8, mfg::Flavor::ergodic);
  ad::Tape tape;
  const auto v = train::value_objective(t.problem(), t.value(), t.density(), c, batch, tape);
  CHECK(v.grad.size() == t.value().trainable_count());
  const auto d = train::density_objective(t.problem(), t.value(), t.density(), c, batch, tape);
  CHECK(d.grad.size() == t.density().values.size());
  const auto no = train::value_objective(t.problem(), t.value(), t.density(), c, batch, tape, false);
  CHECK(no.grad.empty());
  CHECK(no.losses.total == doctest::Approx(v.losses.total));
  CHECK(v.losses.total == doctest::Approx(v.losses.residual + v.losses.penalty));
}

TEST_CASE("objective gradients agree with finite differences") {
  for (std::uint64_t seed : {0u, 1u, 2u, 3u}) {
    const auto g = verify::gradient_check(seed);
    CHECK(g.value_rel < 1e-4);
    CHECK(g.density_rel < 1e-4);
  }
  const auto in = verify::input_derivative_check(5);
  CHECK(in.grad_rel < 1e-6);
  CHECK(in.laplacian_rel < 1e-4);
}

TEST_CASE("non-finite losses stop training with a diagnostic record") {
  auto c = small_config();
  c.alpha_g = 1e200;
  try {
    train::train(c);
    FAIL("expected NonFiniteLoss");
  } catch (const train::NonFiniteLoss& e) {
    const auto& recs = e.report().records;
    REQUIRE(recs.size() >= 2);
    CHECK(recs.front().iteration == 0);
    const auto& last = recs.back();
    CHECK(last.iteration >= 1);
    CHECK(last.iteration <= c.outer_loops);
    CHECK((std::isnan(last.loss_hjb) || std::isinf(last.loss_hjb) || std::isnan(last.loss_fp) ||
           std::isinf(last.loss_fp)));
    for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i].iteration > recs[i - 1].iteration);
  }
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    auto c = small_config();
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.dim = 0; });
  bad([](TrainConfig& c) { c.alpha_g = 0.0; });
  bad([](TrainConfig& c) { c.alpha_d = -1.0; });
  bad([](TrainConfig& c) { c.value_batch = 0; });
  bad([](TrainConfig& c) { c.log_stride = 0; });
  bad([](TrainConfig& c) { c.outer_loops = -1; });
  bad([](TrainConfig& c) { c.weights.density = -2.0; });
  bad([](TrainConfig& c) { c.dim = 3; });  // grid normalization needs d <= 2
  bad([](TrainConfig& c) {
    c.problem = "finite_horizon_custom";
    c.density_mode = nn::DensityMode::penalty;
    c.weights.periodicity = 1.0;
  });
  CHECK_NOTHROW(small_config().validate());
  CHECK_THROWS_AS(train::Trainer([] {
                    auto c = small_config();
                    c.problem = "unknown";
                    return c;
                  }()),
                  ConfigError);
  CHECK(train::parse_update_order("value_first") == train::UpdateOrder::value_first);
  CHECK(train::to_string(train::UpdateOrder::density_first) == "density_first");
  CHECK_THROWS_AS(train::parse_update_order("sideways"), ConfigError);
}

TEST_CASE("finite-horizon and penalty-mode runs stay finite") {
  auto c = small_config();
  c.problem = "finite_horizon_custom";
  c.dim = 1;
  c.density_mode = nn::DensityMode::penalty;
  c.embedding = nn::Embedding::identity;
  c.weights = loss::LossWeights{1.0, 1.0, 0.0};
  const auto rep = train::train(c);
  for (const auto& r : rep.records) {
    CHECK(std::isfinite(r.loss_hjb));
    CHECK(std::isfinite(r.loss_fp));
    CHECK(std::isnan(r.rel_err_u));
    CHECK(std::isnan(r.hbar));
  }

  auto g = small_config();
  g.problem = "ergodic_congestion";
  g.dim = 2;
  g.density_mode = nn::DensityMode::penalty;
  g.weights = loss::LossWeights{1.0, 10.0, 1.0};
  g.order = train::UpdateOrder::value_first;
  const auto rep2 = train::train(g);
  CHECK(rep2.records.back().loss_pen_mf >= 0.0);
  CHECK(std::isfinite(rep2.records.back().hbar));
}
