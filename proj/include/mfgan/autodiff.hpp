#pragma once

// Scalar computation graph with reverse-mode parameter gradients, plus a
// hyper-dual lift for first and second input derivatives whose components
// are themselves graph nodes. Differentiating a Laplacian with respect to
// network weights is then a single reverse sweep over the tape.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mfgan/errors.hpp"

namespace mfgan::ad {

enum class Op : std::uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  div,
  neg,
  exp,
  ln,
  sin,
  cos,
  tanh,
  sigmoid,
  pow_int,
  square,
};

const char* op_name(Op op);

/// Number of inputs an opcode consumes (0 for leaf/constant).
int arity(Op op);

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct Node {
  double value;
  double aux;  // exponent for pow_int
  NodeId a;
  NodeId b;
  Op op;
};

/// Evaluates one opcode on plain values. Shared by the tape and by literal
/// folding so both paths produce identical bits. Throws DomainError.
double apply(Op op, double a, double b, int exponent, long node);

/// Append-only scalar graph. Node ids are topologically ordered: the inputs
/// of node k are always < k. Values are computed eagerly on record().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Adds an input leaf. Trainable leaves are listed in param_nodes().
  NodeId leaf(double value, bool trainable = true);
  NodeId constant(double value);

  NodeId record(Op op, std::span<const NodeId> inputs, int exponent = 0);

  NodeId record(Op op, NodeId a, NodeId b = kNoNode, int exponent = 0) {
    const NodeId id = static_cast<NodeId>(nodes_.size());
    const double va = nodes_[static_cast<std::size_t>(a)].value;
    const double vb = b == kNoNode ? 0.0 : nodes_[static_cast<std::size_t>(b)].value;
    nodes_.push_back(Node{apply(op, va, vb, exponent, id), static_cast<double>(exponent), a, b, op});
    return id;
  }

  double value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const NodeId> param_nodes() const noexcept { return params_; }

  /// Overwrites a leaf value; call replay() to propagate.
  void set_leaf(NodeId id, double value);

  /// Recomputes every derived value from the current leaves, in id order.
  void replay();

  /// d(root)/d(p) for every p in `wrt`, by one backward sweep.
  std::vector<double> reverse_grad(NodeId root, std::span<const NodeId> wrt) const;

  /// Drops all nodes but keeps the allocation.
  void clear() noexcept {
    nodes_.clear();
    params_.clear();
  }

  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
  mutable std::vector<double> adjoint_;
};

/// A scalar that is either a literal (no tape) or a node on a tape.
/// Operations on literals fold immediately; identities with literal 0 and 1
/// are folded so that constant derivative components cost no nodes.
class Var {
 public:
  Var() = default;
  Var(double literal) : value_(literal) {}  // NOLINT(google-explicit-constructor)
  Var(Tape& tape, NodeId id) : tape_(&tape), id_(id), value_(tape.value(id)) {}

  double value() const noexcept { return value_; }
  NodeId id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool is_literal() const noexcept { return tape_ == nullptr; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = kNoNode;
  double value_ = 0.0;
};

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

/// True when `x` is known to be exactly zero without looking at a tape.
inline bool is_structural_zero(double) { return false; }
inline bool is_structural_zero(const Var& x) { return x.is_literal() && x.value() == 0.0; }

namespace detail {

Tape* common_tape(const Var& a, const Var& b);

inline NodeId as_node(Tape& tape, const Var& x) {
  return x.is_literal() ? tape.constant(x.value()) : x.id();
}

inline Var binary(Op op, const Var& a, const Var& b) {
  if (a.is_literal() && b.is_literal()) return Var(apply(op, a.value(), b.value(), 0, -1));
  Tape& tape = *common_tape(a, b);
  const NodeId ia = as_node(tape, a);
  const NodeId ib = as_node(tape, b);
  return Var(tape, tape.record(op, ia, ib));
}

inline Var unary(Op op, const Var& a, int exponent = 0) {
  if (a.is_literal()) return Var(apply(op, a.value(), 0.0, exponent, -1));
  Tape& tape = *a.tape();
  return Var(tape, tape.record(op, a.id(), kNoNode, exponent));
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  if (is_structural_zero(a)) return b;
  if (is_structural_zero(b)) return a;
  return detail::binary(Op::add, a, b);
}

inline Var operator-(const Var& a) { return detail::unary(Op::neg, a); }

inline Var operator-(const Var& a, const Var& b) {
  if (is_structural_zero(b)) return a;
  if (is_structural_zero(a)) return -b;
  return detail::binary(Op::sub, a, b);
}

inline Var operator*(const Var& a, const Var& b) {
  if (is_structural_zero(a) || is_structural_zero(b)) return Var(0.0);
  if (a.is_literal() && a.value() == 1.0) return b;
  if (b.is_literal() && b.value() == 1.0) return a;
  return detail::binary(Op::mul, a, b);
}

inline Var operator/(const Var& a, const Var& b) {
  if (b.is_literal() && b.value() == 1.0) return a;
  if (is_structural_zero(a) && !(b.is_literal() && b.value() == 0.0)) return Var(0.0);
  return detail::binary(Op::div, a, b);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline Var exp(const Var& x) { return detail::unary(Op::exp, x); }
inline Var log(const Var& x) { return detail::unary(Op::ln, x); }
inline Var sin(const Var& x) { return detail::unary(Op::sin, x); }
inline Var cos(const Var& x) { return detail::unary(Op::cos, x); }
inline Var tanh(const Var& x) { return detail::unary(Op::tanh, x); }
inline Var sigmoid(const Var& x) { return detail::unary(Op::sigmoid, x); }
inline Var square(const Var& x) { return detail::unary(Op::square, x); }
inline Var powi(const Var& x, int n) { return detail::unary(Op::pow_int, x, n); }

inline double sigmoid(double x) { return apply(Op::sigmoid, x, 0.0, 0, -1); }
inline double square(double x) { return x * x; }
inline double powi(double x, int n) { return apply(Op::pow_int, x, 0.0, n, -1); }

/// Gradient of `root` with respect to tape leaves `wrt`. A literal root has
/// zero gradient.
std::vector<double> gradient(const Var& root, std::span<const Var> wrt);

// ---------------------------------------------------------------------------
// Hyper-dual numbers: value, first and second derivative along one direction.

template <class S>
struct HyperDual {
  S v{};
  S d1{};
  S d2{};
};

/// Lifts an input coordinate with unit direction: (x, 1, 0).
template <class S>
HyperDual<S> lift(double x) {
  return {S(x), S(1.0), S(0.0)};
}

template <class S>
HyperDual<S> constant(const S& c) {
  return {c, S(0.0), S(0.0)};
}

template <class S>
bool is_constant(const HyperDual<S>& x) {
  return is_structural_zero(x.d1) && is_structural_zero(x.d2);
}

/// Second-order chain rule for g∘x given g(x.v), g'(x.v), g''(x.v).
template <class S>
HyperDual<S> chain(const HyperDual<S>& x, S g, const S& g1, const S& g2) {
  return {std::move(g), g1 * x.d1, g2 * (x.d1 * x.d1) + g1 * x.d2};
}

template <class S>
HyperDual<S> operator+(const HyperDual<S>& a, const HyperDual<S>& b) {
  return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}

template <class S>
HyperDual<S> operator-(const HyperDual<S>& a, const HyperDual<S>& b) {
  return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}

template <class S>
HyperDual<S> operator-(const HyperDual<S>& a) {
  return {-a.v, -a.d1, -a.d2};
}

template <class S>
HyperDual<S> operator*(const HyperDual<S>& a, const HyperDual<S>& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1,
          a.d2 * b.v + S(2.0) * (a.d1 * b.d1) + a.v * b.d2};
}

template <class S>
HyperDual<S> operator/(const HyperDual<S>& a, const HyperDual<S>& b) {
  const S q = a.v / b.v;
  const S q1 = (a.d1 - q * b.d1) / b.v;
  const S q2 = (a.d2 - S(2.0) * (q1 * b.d1) - q * b.d2) / b.v;
  return {q, q1, q2};
}

// Mixed operations with a direction-independent scalar (weights, constants).
template <class S>
HyperDual<S> operator*(const S& w, const HyperDual<S>& x) {
  return {w * x.v, w * x.d1, w * x.d2};
}
template <class S>
HyperDual<S> operator*(const HyperDual<S>& x, const S& w) {
  return w * x;
}
template <class S>
HyperDual<S> operator+(const HyperDual<S>& x, const S& c) {
  return {x.v + c, x.d1, x.d2};
}
template <class S>
HyperDual<S> operator+(const S& c, const HyperDual<S>& x) {
  return x + c;
}
template <class S>
HyperDual<S> operator-(const S& c, const HyperDual<S>& x) {
  return {c - x.v, -x.d1, -x.d2};
}
template <class S>
HyperDual<S> operator-(const HyperDual<S>& x, const S& c) {
  return {x.v - c, x.d1, x.d2};
}
template <class S>
HyperDual<S> operator/(const HyperDual<S>& x, const S& c) {
  return {x.v / c, x.d1 / c, x.d2 / c};
}

template <class S>
HyperDual<S>& operator+=(HyperDual<S>& a, const HyperDual<S>& b) {
  return a = a + b;
}

template <class S>
HyperDual<S> exp(const HyperDual<S>& x) {
  using std::exp;
  S e = exp(x.v);
  if (is_constant(x)) return constant(e);
  return chain(x, e, e, e);
}

template <class S>
HyperDual<S> log(const HyperDual<S>& x) {
  using std::log;
  S l = log(x.v);
  if (is_constant(x)) return constant(l);
  const S inv = S(1.0) / x.v;
  return chain(x, l, inv, -(inv * inv));
}

template <class S>
HyperDual<S> sin(const HyperDual<S>& x) {
  using std::cos;
  using std::sin;
  S s = sin(x.v);
  if (is_constant(x)) return constant(s);
  return chain(x, s, cos(x.v), -s);
}

template <class S>
HyperDual<S> cos(const HyperDual<S>& x) {
  using std::cos;
  using std::sin;
  S c = cos(x.v);
  if (is_constant(x)) return constant(c);
  return chain(x, c, -sin(x.v), -c);
}

template <class S>
HyperDual<S> tanh(const HyperDual<S>& x) {
  using std::tanh;
  S t = tanh(x.v);
  if (is_constant(x)) return constant(t);
  const S g1 = S(1.0) - square(t);
  return chain(x, t, g1, S(-2.0) * (t * g1));
}

template <class S>
HyperDual<S> sigmoid(const HyperDual<S>& x) {
  S s = sigmoid(x.v);
  if (is_constant(x)) return constant(s);
  const S g1 = s * (S(1.0) - s);
  return chain(x, s, g1, g1 * (S(1.0) - S(2.0) * s));
}

template <class S>
HyperDual<S> square(const HyperDual<S>& x) {
  S sq = square(x.v);
  if (is_constant(x)) return constant(sq);
  return chain(x, sq, S(2.0) * x.v, S(2.0));
}

template <class S>
HyperDual<S> powi(const HyperDual<S>& x, int n) {
  S p = powi(x.v, n);
  if (is_constant(x) || n == 0) return constant(p);
  const S g1 = S(static_cast<double>(n)) * powi(x.v, n - 1);
  const S g2 = n == 1 ? S(0.0) : S(static_cast<double>(n) * (n - 1)) * powi(x.v, n - 2);
  return chain(x, p, g1, g2);
}

// ---------------------------------------------------------------------------
// Input derivatives of scalar fields.

/// A scalar field R^d -> R built on hyper-dual inputs.
template <class S>
using Field = std::function<HyperDual<S>(std::span<const HyperDual<S>>)>;

/// (f(x), ∂f/∂x_axis, ∂²f/∂x_axis²), each a node differentiable in the
/// parameters the field closes over.
template <class S>
HyperDual<S> directional_second(const Field<S>& f, std::span<const double> x, std::size_t axis) {
  if (axis >= x.size()) {
    throw DimensionError("directional_second: axis out of range");
  }
  std::vector<HyperDual<S>> in(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    in[j] = j == axis ? lift<S>(x[j]) : constant(S(x[j]));
  }
  return f(in);
}

/// Lift along an arbitrary direction v: d1 = ∇f·v, d2 = vᵀ(∇²f)v.
template <class S>
HyperDual<S> directional_second_along(const Field<S>& f, std::span<const double> x,
                                      std::span<const double> v) {
  if (v.size() != x.size()) throw DimensionError("direction and point differ in dimension");
  std::vector<HyperDual<S>> in(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) in[j] = {S(x[j]), S(v[j]), S(0.0)};
  return f(in);
}

/// Value, gradient and Laplacian of `f` at `x`; d directional lifts.
template <class S>
struct Derivatives {
  S value{};
  std::vector<S> grad;
  S laplacian{};
};

/// Derivatives over the axes [first, x.size()). Finite-horizon fields put
/// time on axis 0 and pass first = 1 for the spatial operators.
template <class S>
Derivatives<S> derivatives(const Field<S>& f, std::span<const double> x, std::size_t first = 0) {
  Derivatives<S> out;
  out.grad.reserve(x.size() - first);
  out.laplacian = S(0.0);
  for (std::size_t i = first; i < x.size(); ++i) {
    HyperDual<S> h = directional_second(f, x, i);
    if (i == first) out.value = h.v;
    out.grad.push_back(h.d1);
    out.laplacian = out.laplacian + h.d2;
  }
  if (first == x.size()) {
    std::vector<HyperDual<S>> in;
    for (double xi : x) in.push_back(constant(S(xi)));
    out.value = f(in).v;
  }
  return out;
}

template <class S>
S laplacian(const Field<S>& f, std::span<const double> x) {
  S sum = S(0.0);
  for (std::size_t i = 0; i < x.size(); ++i) sum = sum + directional_second(f, x, i).d2;
  return sum;
}

}  // namespace mfgan::ad
