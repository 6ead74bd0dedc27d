#pragma once

// Scalar function approximators. Every forward pass is a template over the
// input scalar type T (double, ad::Var, ad::HyperDual<...>) and the weight
// scalar type S, so the same code runs for plain evaluation, parameter
// gradients and input derivatives.

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfgan/autodiff.hpp"
#include "mfgan/errors.hpp"
#include "mfgan/quadrature.hpp"
#include "mfgan/random.hpp"

namespace mfgan::nn {

enum class Activation { tanh, sigmoid, exp, identity };
enum class LayerKind { dense, dgm };
enum class Embedding { identity, fourier };
enum class DensityMode { normalized_grid, penalty };

std::string to_string(Activation a);
std::string to_string(LayerKind k);
std::string to_string(Embedding e);
std::string to_string(DensityMode m);
Activation parse_activation(std::string_view s);
Embedding parse_embedding(std::string_view s);
DensityMode parse_density_mode(std::string_view s);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t width = 0;
  Activation activation = Activation::tanh;

  bool operator==(const LayerSpec&) const = default;
};

/// Network descriptor. `input_dim` counts raw coordinates, the first
/// `time_axes` of which bypass the embedding.
struct Architecture {
  std::size_t input_dim = 1;
  std::size_t time_axes = 0;
  Embedding embedding = Embedding::identity;
  std::vector<LayerSpec> layers;
  Activation output_activation = Activation::identity;

  /// Width of the vector the hidden layers see.
  std::size_t embedded_dim() const;
  std::size_t parameter_count() const;
  /// Throws ConfigError on an inconsistent layer stack.
  void validate() const;

  bool operator==(const Architecture&) const = default;

  /// One dense layer producing S¹ followed by `dgm_layers` gated layers.
  static Architecture dgm(std::size_t input_dim, std::size_t width, std::size_t dgm_layers,
                          Activation act, Embedding embedding = Embedding::identity,
                          std::size_t time_axes = 0);
  static Architecture mlp(std::size_t input_dim, const std::vector<std::size_t>& widths,
                          Activation act, Embedding embedding = Embedding::identity,
                          std::size_t time_axes = 0);
};

/// Flat trainable state of one network plus named extra scalars (H̄ lives
/// here for the value network).
struct NetworkParams {
  Architecture architecture;
  std::vector<double> values;
  std::vector<std::pair<std::string, double>> extras;

  /// Values followed by extras, the order optimizers and gradients use.
  std::size_t trainable_count() const noexcept { return values.size() + extras.size(); }
  double extra(std::string_view name) const;
  void set_extra(std::string_view name, double v);
  bool has_extra(std::string_view name) const;
};

/// Glorot-uniform weights, zero biases.
NetworkParams initialize(const Architecture& arch, Rng& rng);

/// Binary checkpoint: a text header line, a one-line JSON descriptor, then
/// the values and extras as little-endian IEEE-754 doubles.
void write_checkpoint(std::ostream& out, const NetworkParams& params);
NetworkParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Forward passes.

template <class T>
struct ScalarTraits {
  using Scalar = T;
  static T from_scalar(const T& s) { return s; }
};

template <class S>
struct ScalarTraits<ad::HyperDual<S>> {
  using Scalar = S;
  static ad::HyperDual<S> from_scalar(const S& s) { return ad::constant(s); }
};

template <class T>
T activate(Activation a, const T& x) {
  using std::exp;
  using std::tanh;
  using ad::sigmoid;
  switch (a) {
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::exp: return exp(x);
    case Activation::identity: return x;
  }
  return x;
}

/// (sin 2πx₁, …, sin 2πx_d, cos 2πx₁, …, cos 2πx_d).
template <class T>
std::vector<T> periodic_embed(std::span<const T> x) {
  using std::cos;
  using std::sin;
  const std::size_t d = x.size();
  std::vector<T> y(2 * d);
  const double two_pi = 2.0 * M_PI;
  for (std::size_t i = 0; i < d; ++i) {
    using S = typename ScalarTraits<T>::Scalar;
    const T arg = S(two_pi) * x[i];
    y[i] = sin(arg);
    y[d + i] = cos(arg);
  }
  return y;
}

template <class T>
std::vector<T> embed_input(const Architecture& arch, std::span<const T> x) {
  if (x.size() != arch.input_dim) {
    throw DimensionError("network input has dimension " + std::to_string(x.size()) +
                         ", expected " + std::to_string(arch.input_dim));
  }
  if (arch.embedding == Embedding::identity) return {x.begin(), x.end()};
  std::vector<T> out(x.begin(), x.begin() + static_cast<long>(arch.time_axes));
  const auto y = periodic_embed<T>(x.subspan(arch.time_axes));
  out.insert(out.end(), y.begin(), y.end());
  return out;
}

namespace detail {

/// out_i = b_i + Σ_j W_ij in_j, weights read from `w` starting at `pos`.
template <class T, class S>
void affine(std::span<const S> w, std::size_t& pos, std::span<const T> in, std::size_t rows,
            std::vector<T>& out, bool add_bias = true) {
  const std::size_t cols = in.size();
  out.resize(rows);
  const std::size_t bias = pos + rows * cols;
  for (std::size_t i = 0; i < rows; ++i) {
    T acc = add_bias ? ScalarTraits<T>::from_scalar(w[bias + i]) : ScalarTraits<T>::from_scalar(S(0.0));
    const S* row = w.data() + pos + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc = acc + row[j] * in[j];
    out[i] = std::move(acc);
  }
  pos = bias + (add_bias ? rows : 0);
}

/// act(U y + W h + b) with layout [U | W | b].
template <class T, class S>
void gate(std::span<const S> w, std::size_t& pos, std::span<const T> y, std::span<const T> h,
          std::size_t width, Activation act, std::vector<T>& out) {
  std::vector<T> uy;
  affine<T, S>(w, pos, y, width, uy, false);
  std::vector<T> wh;
  affine<T, S>(w, pos, h, width, wh, true);
  out.resize(width);
  for (std::size_t i = 0; i < width; ++i) out[i] = activate(act, uy[i] + wh[i]);
}

}  // namespace detail

/// Hidden layers and output layer on an already-embedded input.
template <class T, class S>
T network_forward(const Architecture& arch, std::span<const S> w, std::span<const T> y) {
  if (y.size() != arch.embedded_dim()) {
    throw DimensionError("network layer input has dimension " + std::to_string(y.size()) +
                         ", expected " + std::to_string(arch.embedded_dim()));
  }
  if (w.size() != arch.parameter_count()) {
    throw DimensionError("parameter vector has " + std::to_string(w.size()) + " entries, expected " +
                         std::to_string(arch.parameter_count()));
  }
  std::size_t pos = 0;
  std::vector<T> h(y.begin(), y.end());
  std::vector<T> next;
  for (const LayerSpec& layer : arch.layers) {
    if (layer.kind == LayerKind::dense) {
      detail::affine<T, S>(w, pos, h, layer.width, next);
      for (T& v : next) v = activate(layer.activation, v);
      h.swap(next);
      continue;
    }
    // gated layer: Z, G, R use S; H uses S∘R; S ← (1−G)∘H + Z∘S
    const std::size_t n = layer.width;
    std::vector<T> z, g, r, hh;
    detail::gate<T, S>(w, pos, y, h, n, layer.activation, z);
    detail::gate<T, S>(w, pos, y, h, n, layer.activation, g);
    detail::gate<T, S>(w, pos, y, h, n, layer.activation, r);
    std::vector<T> sr(n);
    for (std::size_t i = 0; i < n; ++i) sr[i] = h[i] * r[i];
    detail::gate<T, S>(w, pos, y, sr, n, layer.activation, hh);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = (S(1.0) - g[i]) * hh[i] + z[i] * h[i];
    }
  }
  std::vector<T> out;
  detail::affine<T, S>(w, pos, h, 1, out);
  return activate(arch.output_activation, out[0]);
}

/// Embedding followed by the network.
template <class T, class S>
T evaluate(const Architecture& arch, std::span<const S> w, std::span<const T> x) {
  const std::vector<T> y = embed_input<T>(arch, x);
  return network_forward<T, S>(arch, w, y);
}

/// Plain dense stack; rejects descriptors containing gated layers.
template <class T, class S>
T mlp_forward(const Architecture& arch, std::span<const S> w, std::span<const T> x) {
  for (const auto& l : arch.layers) {
    if (l.kind != LayerKind::dense) throw ConfigError("mlp_forward: descriptor has a DGM layer");
  }
  return evaluate<T, S>(arch, w, x);
}

/// Requires at least one gated layer.
template <class T, class S>
T dgm_forward(const Architecture& arch, std::span<const S> w, std::span<const T> x) {
  bool any = false;
  for (const auto& l : arch.layers) any = any || l.kind == LayerKind::dgm;
  if (!any) throw ConfigError("dgm_forward: descriptor has no DGM layer");
  return evaluate<T, S>(arch, w, x);
}

inline double evaluate(const NetworkParams& p, std::span<const double> x) {
  return evaluate<double, double>(p.architecture, std::span<const double>(p.values), x);
}

/// Network weights as tape leaves (trainable) or as literals (frozen).
/// Extras are appended after the weights in the same order as `p.extras`.
std::vector<ad::Var> bind(const NetworkParams& p, ad::Tape* tape, bool trainable);

// ---------------------------------------------------------------------------
// Density head m = exp(f) [/ Z].

inline constexpr double kMaxExpArgument = 700.0;

/// exp with the overflow guard of the density head.
template <class T>
T guarded_exp(const T& f) {
  using std::exp;
  double v;
  if constexpr (requires { f.v; }) {
    v = ad::value_of(f.v);
  } else {
    v = ad::value_of(f);
  }
  if (v > kMaxExpArgument) {
    throw OverflowError("density head: exp argument " + std::to_string(v) + " exceeds 700", -1);
  }
  return exp(f);
}

/// Z = ∫ exp(f) over the torus by the rectangle rule. Requires d ≤ 2 and no
/// time axes.
template <class S>
S density_normalizer(const Architecture& arch, std::span<const S> w, std::size_t points_per_axis) {
  const std::size_t d = arch.input_dim;
  if (arch.time_axes != 0 || d > 2) {
    throw ConfigError("normalized_grid density requires an ergodic problem with d <= 2");
  }
  const eval::TorusGrid grid(d, points_per_axis);
  std::vector<S> x(d);
  return eval::quadrature_torus(
      [&](const double* p) {
        for (std::size_t i = 0; i < d; ++i) x[i] = S(p[i]);
        return guarded_exp(evaluate<S, S>(arch, w, std::span<const S>(x)));
      },
      grid);
}

double density_normalizer(const NetworkParams& f, std::size_t points_per_axis);

/// m(x) for the density network `f`. In normalized_grid mode the normalizer
/// is computed on a `points_per_axis` torus grid; penalty mode returns exp(f).
double density_eval(const NetworkParams& f, std::span<const double> x, DensityMode mode,
                    std::size_t points_per_axis = 64);

}  // namespace mfgan::nn
