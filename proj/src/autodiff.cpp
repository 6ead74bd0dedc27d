#include "mfgan/autodiff.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace mfgan::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::neg: return "neg";
    case Op::exp: return "exp";
    case Op::ln: return "ln";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::pow_int: return "pow_int";
    case Op::square: return "square";
  }
  return "?";
}

int arity(Op op) {
  switch (op) {
    case Op::leaf:
    case Op::constant: return 0;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: return 2;
    default: return 1;
  }
}

double apply(Op op, double a, double b, int exponent, long node) {
  switch (op) {
    case Op::leaf:
    case Op::constant: return a;
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
      if (b == 0.0) throw DomainError(fmt::format("division by zero at node {}", node), node);
      return a / b;
    case Op::neg: return -a;
    case Op::exp: return std::exp(a);
    case Op::ln:
      if (!(a > 0.0)) throw DomainError(fmt::format("ln({}) at node {}", a, node), node);
      return std::log(a);
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::tanh: return std::tanh(a);
    case Op::sigmoid:
      // split by sign so exp never overflows
      if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
      else {
        const double e = std::exp(a);
        return e / (1.0 + e);
      }
    case Op::pow_int: {
      if (exponent < 0 && a == 0.0) {
        throw DomainError(fmt::format("0^{} at node {}", exponent, node), node);
      }
      double result = 1.0;
      double base = exponent < 0 ? 1.0 / a : a;
      for (unsigned n = static_cast<unsigned>(std::abs(exponent)); n != 0; n >>= 1) {
        if (n & 1U) result *= base;
        base *= base;
      }
      return result;
    }
    case Op::square: return a * a;
  }
  return 0.0;
}

NodeId Tape::leaf(double value, bool trainable) {
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{value, 0.0, kNoNode, kNoNode, Op::leaf});
  if (trainable) params_.push_back(id);
  return id;
}

NodeId Tape::constant(double value) {
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{value, 0.0, kNoNode, kNoNode, Op::constant});
  return id;
}

NodeId Tape::record(Op op, std::span<const NodeId> inputs, int exponent) {
  const int n = arity(op);
  if (n == 0) throw Error("Tape::record: use leaf() or constant() for input nodes");
  if (static_cast<int>(inputs.size()) != n) {
    throw DimensionError(fmt::format("{} expects {} inputs, got {}", op_name(op), n, inputs.size()));
  }
  for (NodeId in : inputs) {
    if (in < 0 || static_cast<std::size_t>(in) >= nodes_.size()) {
      throw Error(fmt::format("{}: input node {} does not exist", op_name(op), in));
    }
  }
  return record(op, inputs[0], n == 2 ? inputs[1] : kNoNode, exponent);
}

void Tape::set_leaf(NodeId id, double value) {
  Node& node = nodes_.at(static_cast<std::size_t>(id));
  if (node.op != Op::leaf) throw Error(fmt::format("node {} is not a leaf", id));
  node.value = value;
}

void Tape::replay() {
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    Node& node = nodes_[k];
    if (node.op == Op::leaf || node.op == Op::constant) continue;
    const double va = nodes_[static_cast<std::size_t>(node.a)].value;
    const double vb = node.b == kNoNode ? 0.0 : nodes_[static_cast<std::size_t>(node.b)].value;
    node.value = apply(node.op, va, vb, static_cast<int>(node.aux), static_cast<long>(k));
  }
}

std::vector<double> Tape::reverse_grad(NodeId root, std::span<const NodeId> wrt) const {
  adjoint_.assign(static_cast<std::size_t>(root) + 1, 0.0);
  adjoint_[static_cast<std::size_t>(root)] = 1.0;
  for (NodeId k = root; k >= 0; --k) {
    const double g = adjoint_[static_cast<std::size_t>(k)];
    if (g == 0.0) continue;
    const Node& node = nodes_[static_cast<std::size_t>(k)];
    const auto a = static_cast<std::size_t>(node.a);
    const auto b = static_cast<std::size_t>(node.b);
    switch (node.op) {
      case Op::leaf:
      case Op::constant: break;
      case Op::add:
        adjoint_[a] += g;
        adjoint_[b] += g;
        break;
      case Op::sub:
        adjoint_[a] += g;
        adjoint_[b] -= g;
        break;
      case Op::mul:
        adjoint_[a] += g * nodes_[b].value;
        adjoint_[b] += g * nodes_[a].value;
        break;
      case Op::div: {
        const double vb = nodes_[b].value;
        adjoint_[a] += g / vb;
        adjoint_[b] -= g * node.value / vb;
        break;
      }
      case Op::neg: adjoint_[a] -= g; break;
      case Op::exp: adjoint_[a] += g * node.value; break;
      case Op::ln: adjoint_[a] += g / nodes_[a].value; break;
      case Op::sin: adjoint_[a] += g * std::cos(nodes_[a].value); break;
      case Op::cos: adjoint_[a] -= g * std::sin(nodes_[a].value); break;
      case Op::tanh: adjoint_[a] += g * (1.0 - node.value * node.value); break;
      case Op::sigmoid: adjoint_[a] += g * node.value * (1.0 - node.value); break;
      case Op::pow_int: {
        const int n = static_cast<int>(node.aux);
        if (n != 0) adjoint_[a] += g * n * apply(Op::pow_int, nodes_[a].value, 0.0, n - 1, k);
        break;
      }
      case Op::square: adjoint_[a] += 2.0 * g * nodes_[a].value; break;
    }
  }
  std::vector<double> out(wrt.size(), 0.0);
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    if (wrt[i] >= 0 && wrt[i] <= root) out[i] = adjoint_[static_cast<std::size_t>(wrt[i])];
  }
  return out;
}

namespace detail {

Tape* common_tape(const Var& a, const Var& b) {
  if (a.is_literal()) return b.tape();
  if (!b.is_literal() && a.tape() != b.tape()) {
    throw Error("operands live on different tapes");
  }
  return a.tape();
}

}  // namespace detail

std::vector<double> gradient(const Var& root, std::span<const Var> wrt) {
  if (root.is_literal()) return std::vector<double>(wrt.size(), 0.0);
  std::vector<NodeId> ids(wrt.size(), kNoNode);
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    if (!wrt[i].is_literal()) {
      if (wrt[i].tape() != root.tape()) throw Error("gradient: wrt node on a different tape");
      ids[i] = wrt[i].id();
    }
  }
  return root.tape()->reverse_grad(root.id(), ids);
}

}  // namespace mfgan::ad
