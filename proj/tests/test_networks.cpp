#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "mfgan/errors.hpp"
#include "mfgan/networks.hpp"

using namespace mfgan;
using nn::Activation;
using nn::Architecture;
using nn::Embedding;

namespace {

const double kTwoPi = 6.283185307179586476925;

// Straight-line evaluation written against the documented parameter layout:
// dense layers store W (row-major) then b; gated layers store the Z, G, R, H
// gates in that order, each as [U | W | b]; the output stores w then b.
double tanh_dgm_by_hand(const std::vector<double>& p, const std::vector<double>& y, std::size_t n) {
  std::size_t pos = 0;
  const std::size_t in = y.size();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = p[n * in + i];
    for (std::size_t j = 0; j < in; ++j) a += p[i * in + j] * y[j];
    s[i] = std::tanh(a);
  }
  pos = n * in + n;
  auto gate = [&](const std::vector<double>& h) {
    std::vector<double> out(n);
    const std::size_t u0 = pos, w0 = pos + n * in, b0 = pos + n * in + n * n;
    for (std::size_t i = 0; i < n; ++i) {
      double a = p[b0 + i];
      for (std::size_t j = 0; j < in; ++j) a += p[u0 + i * in + j] * y[j];
      for (std::size_t j = 0; j < n; ++j) a += p[w0 + i * n + j] * h[j];
      out[i] = std::tanh(a);
    }
    pos = b0 + n;
    return out;
  };
  const auto z = gate(s);
  const auto g = gate(s);
  const auto r = gate(s);
  std::vector<double> sr(n);
  for (std::size_t i = 0; i < n; ++i) sr[i] = s[i] * r[i];
  const auto hh = gate(sr);
  double out = p[pos + n];
  for (std::size_t i = 0; i < n; ++i) out += p[pos + i] * ((1 - g[i]) * hh[i] + z[i] * s[i]);
  return out;
}

}  // namespace

TEST_CASE("periodic_embed") {
  const std::vector<double> zero{0.0};
  auto e = nn::periodic_embed<double>(zero);
  CHECK(e == std::vector<double>{0.0, 1.0});
  const std::vector<double> quarter{0.25};
  e = nn::periodic_embed<double>(quarter);
  CHECK(e[0] == doctest::Approx(1.0));
  CHECK(std::abs(e[1]) < 1e-15);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
    std::vector<double> shifted(x);
    for (double& v : shifted) v += 1.0;
    const auto a = nn::periodic_embed<double>(x);
    const auto b = nn::periodic_embed<double>(shifted);
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("time axes bypass the embedding") {
  const auto arch = Architecture::mlp(3, {2}, Activation::tanh, Embedding::fourier, 1);
  CHECK(arch.embedded_dim() == 5);
  const std::vector<double> x{0.7, 0.0, 0.25};
  const auto y = nn::embed_input<double>(arch, x);
  REQUIRE(y.size() == 5);
  CHECK(y[0] == 0.7);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == doctest::Approx(1.0));
  CHECK(y[3] == 1.0);
}

TEST_CASE("mlp_forward examples") {
  const auto arch = Architecture::mlp(2, {3, 3}, Activation::tanh);
  std::vector<double> w(arch.parameter_count(), 0.0);
  const std::vector<double> x{0.3, -0.4};
  CHECK(nn::mlp_forward<double, double>(arch, std::span<const double>(w), x) == 0.0);

  const auto affine = Architecture::mlp(1, {}, Activation::identity);
  REQUIRE(affine.parameter_count() == 2);
  const std::vector<double> wb{1.5, -0.25};
  const std::vector<double> x1{2.0};
  CHECK(nn::mlp_forward<double, double>(affine, std::span<const double>(wb), x1) == 2.75);

  // two hidden tanh layers, re-evaluated by hand
  Rng rng(42);
  const auto two = Architecture::mlp(2, {3, 2}, Activation::tanh);
  const auto p = nn::initialize(two, rng);
  std::vector<double> v(p.values);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += 0.01 * static_cast<double>(i % 7);
  std::vector<double> h1(3), h2(2);
  for (int i = 0; i < 3; ++i) h1[i] = std::tanh(v[6 + i] + v[2 * i] * x[0] + v[2 * i + 1] * x[1]);
  for (int i = 0; i < 2; ++i) {
    h2[i] = std::tanh(v[9 + 6 + i] + v[9 + 3 * i] * h1[0] + v[9 + 3 * i + 1] * h1[1] + v[9 + 3 * i + 2] * h1[2]);
  }
  const double expected = v[17] * h2[0] + v[18] * h2[1] + v[19];
  REQUIRE(v.size() == 20);
  CHECK(nn::mlp_forward<double, double>(two, std::span<const double>(v), x) == doctest::Approx(expected).epsilon(1e-14));

  const auto gated = Architecture::dgm(2, 3, 1, Activation::tanh);
  std::vector<double> g(gated.parameter_count(), 0.0);
  CHECK_THROWS_AS((nn::mlp_forward<double, double>(gated, std::span<const double>(g), x)), ConfigError);
}

TEST_CASE("dgm_forward with zero weights collapses to biases") {
  const std::size_t n = 4;
  const auto arch = Architecture::dgm(1, n, 1, Activation::tanh);
  const std::size_t count = arch.parameter_count();
  CHECK(count == (n + n) + 4 * (n * 1 + n * n + n) + (n + 1));
  std::vector<double> p(count, 0.0);
  // biases: S1, then gates Z, G, R, H, then output
  const double b1 = 0.3, bz = -0.2, bg = 0.5, br = 0.1, bh = -0.7, wo = 0.9, bo = 0.05;
  std::size_t pos = n;
  for (std::size_t i = 0; i < n; ++i) p[pos + i] = b1;
  pos = 2 * n;
  for (double b : {bz, bg, br, bh}) {
    pos += n * 1 + n * n;
    for (std::size_t i = 0; i < n; ++i) p[pos + i] = b;
    pos += n;
  }
  for (std::size_t i = 0; i < n; ++i) p[pos + i] = wo;
  p[pos + n] = bo;
  const double s1 = std::tanh(b1);
  const double s2 = (1 - std::tanh(bg)) * std::tanh(bh) + std::tanh(bz) * s1;
  const double expected = static_cast<double>(n) * wo * s2 + bo;
  for (double x : {0.0, 0.4, 0.9}) {
    const std::vector<double> in{x};
    CHECK(nn::dgm_forward<double, double>(arch, std::span<const double>(p), in) ==
          doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("dgm_forward matches a straight-line evaluation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto arch = Architecture::dgm(1, 4, 1, Activation::tanh, Embedding::fourier);
    auto p = nn::initialize(arch, rng);
    for (double& v : p.values) v += uniform(rng, -0.2, 0.2);
    const std::vector<double> x{uniform01(rng)};
    const std::vector<double> y{std::sin(kTwoPi * x[0]), std::cos(kTwoPi * x[0])};
    CHECK(nn::evaluate(p, x) == doctest::Approx(tanh_dgm_by_hand(p.values, y, 4)).epsilon(1e-13));
  }
  const auto dense_only = Architecture::mlp(1, {4}, Activation::tanh);
  std::vector<double> w(dense_only.parameter_count(), 0.0);
  const std::vector<double> x{0.1};
  CHECK_THROWS_AS((nn::dgm_forward<double, double>(dense_only, std::span<const double>(w), x)), ConfigError);
}

TEST_CASE("a random DGM net is not symmetric in its inputs") {
  Rng rng(9);
  const auto p = nn::initialize(Architecture::dgm(2, 4, 1, Activation::tanh), rng);
  const std::vector<double> a{0.2, 0.7};
  const std::vector<double> b{0.7, 0.2};
  CHECK(std::abs(nn::evaluate(p, a) - nn::evaluate(p, b)) > 1e-6);
}

TEST_CASE("architecture validation and shapes") {
  Architecture bad = Architecture::mlp(1, {3}, Activation::tanh);
  bad.layers[0].width = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  Architecture orphan;
  orphan.layers = {{nn::LayerKind::dgm, 3, Activation::tanh}};
  CHECK_THROWS_AS(orphan.validate(), ConfigError);

  const auto arch = Architecture::mlp(2, {3}, Activation::tanh);
  std::vector<double> w(arch.parameter_count(), 0.0);
  const std::vector<double> wrong{0.1, 0.2, 0.3};
  CHECK_THROWS_AS((nn::evaluate<double, double>(arch, std::span<const double>(w), wrong)), DimensionError);
  std::vector<double> short_w(3, 0.0);
  const std::vector<double> ok{0.1, 0.2};
  CHECK_THROWS_AS((nn::evaluate<double, double>(arch, std::span<const double>(short_w), ok)), DimensionError);

  Rng rng(1);
  const auto p = nn::initialize(Architecture::dgm(3, 5, 2, Activation::tanh), rng);
  CHECK(p.values.size() == p.architecture.parameter_count());
  CHECK(nn::parse_activation("sigmoid") == Activation::sigmoid);
  CHECK_THROWS_AS(nn::parse_activation("relu"), ConfigError);
}

TEST_CASE("Glorot-uniform initialization") {
  Rng rng(5);
  const auto arch = Architecture::mlp(2, {50}, Activation::tanh);
  const auto p = nn::initialize(arch, rng);
  const double limit = std::sqrt(6.0 / 52.0);
  for (std::size_t i = 0; i < 100; ++i) CHECK(std::abs(p.values[i]) <= limit);
  for (std::size_t i = 100; i < 150; ++i) CHECK(p.values[i] == 0.0);
  Rng again(5);
  CHECK(nn::initialize(arch, again).values == p.values);
}

TEST_CASE("density_eval") {
  Rng rng(2);
  auto zero = nn::initialize(Architecture::dgm(1, 4, 1, Activation::tanh, Embedding::fourier), rng);
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  for (double x : {0.0, 0.3, 0.77}) {
    const std::vector<double> pt{x};
    CHECK(nn::density_eval(zero, pt, nn::DensityMode::normalized_grid) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nn::density_eval(zero, pt, nn::DensityMode::penalty) == 1.0);
  }

  // f(x) = 2 sin 2πx through a Fourier embedding and an affine output
  nn::NetworkParams f;
  f.architecture = Architecture::mlp(1, {}, Activation::identity, Embedding::fourier);
  f.values = {2.0, 0.0, 0.0};
  const std::vector<double> q{0.25};
  CHECK(nn::density_normalizer(f, 64) == doctest::Approx(2.27958530233606726).epsilon(1e-13));
  CHECK(nn::density_eval(f, q, nn::DensityMode::normalized_grid) == doctest::Approx(3.24140364098615).epsilon(1e-12));

  nn::NetworkParams big = f;
  big.values = {0.0, 0.0, 701.0};
  CHECK_THROWS_AS(nn::density_eval(big, q, nn::DensityMode::penalty), OverflowError);

  nn::NetworkParams high;
  high.architecture = Architecture::mlp(3, {}, Activation::identity);
  high.values = {0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(nn::density_normalizer(high, 8), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(8);
  auto p = nn::initialize(Architecture::dgm(2, 3, 1, Activation::sigmoid, Embedding::fourier), rng);
  p.set_extra("hbar", 0.123456789012345678);
  std::stringstream buf;
  nn::write_checkpoint(buf, p);
  const auto q = nn::read_checkpoint(buf);
  CHECK(q.architecture == p.architecture);
  CHECK(q.values == p.values);
  CHECK(q.extra("hbar") == p.extra("hbar"));

  std::stringstream bad("not a checkpoint\n");
  CHECK_THROWS_AS(nn::read_checkpoint(bad), Error);
  std::stringstream whole;
  nn::write_checkpoint(whole, p);
  std::string text = whole.str();
  text.resize(text.size() - 5);
  std::stringstream truncated(text);
  CHECK_THROWS_AS(nn::read_checkpoint(truncated), Error);
}

TEST_CASE("bind yields leaves or literals") {
  Rng rng(4);
  auto p = nn::initialize(Architecture::mlp(1, {2}, Activation::tanh), rng);
  p.set_extra("hbar", 1.5);
  ad::Tape tape;
  const auto live = nn::bind(p, &tape, true);
  CHECK(live.size() == p.trainable_count());
  CHECK(tape.param_nodes().size() == p.trainable_count());
  CHECK(live.back().value() == 1.5);
  const auto frozen = nn::bind(p, nullptr, false);
  for (const auto& v : frozen) CHECK(v.is_literal());
}
