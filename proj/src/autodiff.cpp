#include "eat/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "eat/errors.hpp"
#include "eat/kernels.hpp"

namespace eat {
namespace {

kernels::MatrixView view(const Tensor& t) { return {t.data(), t.rows(), t.cols()}; }

kernels::MatrixView view(const std::vector<double>& g, const Tensor& shape_of) {
  return {g, shape_of.rows(), shape_of.cols()};
}

}  // namespace

Graph::Var Graph::push(Tensor value, std::function<void(Node&)> backprop,
                       std::initializer_list<Var> parents) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  for (Var p : parents) n->requires_grad = n->requires_grad || wants(p);
  if (n->requires_grad) n->backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

std::vector<double>& Graph::grad_of(Var v) {
  Node& n = node(v);
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Graph::Var Graph::leaf(Tensor& param) {
  Tensor copy(param.shape(), param.values());
  Var v = push(std::move(copy), nullptr, {});
  node(v).param = &param;
  node(v).requires_grad = true;
  return v;
}

Graph::Var Graph::constant(Tensor value) {
  value.drop_grad();
  return push(std::move(value), nullptr, {});
}

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw ContractViolation("graph node is not a scalar");
  return t[0];
}

Graph::Var Graph::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.rows()) throw ContractViolation("matmul: inner dimensions disagree");
  Tensor out({av.rows(), bv.cols()});
  kernels::serial::affine(view(av), view(bv), {}, out.data());
  return push(std::move(out), [this, a, b](Node& self) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    const auto dy = view(self.grad, self.value);
    if (wants(a)) kernels::serial::accumulate_a_bt(dy, view(bv), grad_of(a));
    if (wants(b)) kernels::serial::accumulate_at_b(view(av), dy, grad_of(b));
  }, {a, b});
}

Graph::Var Graph::add_bias(Var a, Var bias) {
  const Tensor& av = value(a);
  const Tensor& bv = value(bias);
  if (bv.size() != av.cols()) throw ContractViolation("add_bias: bias length");
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  return push(std::move(out), [this, a, bias](Node& self) {
    const std::size_t cols = self.value.cols();
    if (wants(a)) {
      auto& ga = grad_of(a);
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
    if (wants(bias)) {
      auto& gb = grad_of(bias);
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % cols] += self.grad[i];
    }
  }, {a, bias});
}

Graph::Var Graph::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape() != bv.shape()) throw ContractViolation("add: shape mismatch");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push(std::move(out), [this, a, b](Node& self) {
    for (Var v : {a, b}) {
      if (!wants(v)) continue;
      auto& gv = grad_of(v);
      for (std::size_t i = 0; i < self.grad.size(); ++i) gv[i] += self.grad[i];
    }
  }, {a, b});
}

Graph::Var Graph::relu(Var a) {
  Tensor out = Tensor::zeros_like(value(a));
  kernels::serial::relu(value(a).data(), out.data());
  return push(std::move(out), [this, a](Node& self) {
    const Tensor& in = value(a);
    auto& ga = grad_of(a);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in[i] > 0.0) ga[i] += self.grad[i];
    }
  }, {a});
}

Graph::Var Graph::scale(Var a, double factor) {
  Tensor out = value(a);
  for (auto& v : out.data()) v *= factor;
  return push(std::move(out), [this, a, factor](Node& self) {
    auto& ga = grad_of(a);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += factor * self.grad[i];
  }, {a});
}

Graph::Var Graph::softmax(Var a) {
  const Tensor& av = value(a);
  Tensor out = Tensor::zeros_like(av);
  for (std::size_t r = 0; r < av.rows(); ++r) softmax_into(av.row(r), out.row(r));
  return push(std::move(out), [this, a](Node& self) {
    auto& ga = grad_of(a);
    const std::size_t cols = self.value.cols();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      const auto y = self.value.row(r);
      const double* dy = self.grad.data() + r * cols;
      double inner = 0.0;
      for (std::size_t c = 0; c < cols; ++c) inner += dy[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += y[c] * (dy[c] - inner);
    }
  }, {a});
}

Graph::Var Graph::element(Var a, std::size_t row, std::size_t col) {
  const Tensor& av = value(a);
  if (row >= av.rows() || col >= av.cols()) throw ContractViolation("element: out of range");
  const std::size_t index = row * av.cols() + col;
  return push(Tensor::vector({av[index]}), [this, a, index](Node& self) {
    grad_of(a)[index] += self.grad[0];
  }, {a});
}

Graph::Var Graph::slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = value(a);
  if (begin >= end || end > av.cols()) throw ContractViolation("slice_cols: bad range");
  const std::size_t width = end - begin;
  Tensor out({av.rows(), width});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < width; ++c) out.at(r, c) = av.at(r, begin + c);
  }
  return push(std::move(out), [this, a, begin, width](Node& self) {
    auto& ga = grad_of(a);
    const std::size_t cols = value(a).cols();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        ga[r * cols + begin + c] += self.grad[r * width + c];
      }
    }
  }, {a});
}

Graph::Var Graph::softmax_xent(Var logits, Tensor targets, std::vector<double> row_weights) {
  const Tensor& lv = value(logits);
  if (targets.rows() != lv.rows() || targets.cols() != lv.cols()) {
    throw ContractViolation("softmax_xent: target shape mismatch");
  }
  if (row_weights.size() != lv.rows()) {
    throw ContractViolation("softmax_xent: weight count mismatch");
  }
  Tensor probs = Tensor::zeros_like(lv);
  double loss = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    const auto row = lv.row(r);
    softmax_into(row, probs.row(r));
    // lse - z_c split as (max - z_c) + log1p(rest) so confident rows keep their low bits
    const auto top = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    double rest = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c != top) rest += std::exp(row[c] - row[top]);
    }
    const double tail = std::log1p(rest);
    double term = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double t = targets.at(r, c);
      if (t != 0.0) term += t * ((row[top] - row[c]) + tail);
    }
    loss += row_weights[r] * term;
  }
  if (!std::isfinite(loss)) throw NumericDomainError("softmax_xent: non-finite loss");
  return push(Tensor::vector({loss}),
              [this, logits, targets = std::move(targets), weights = std::move(row_weights),
               probs = std::move(probs)](Node& self) {
                auto& gl = grad_of(logits);
                const double upstream = self.grad[0];
                const std::size_t cols = probs.cols();
                for (std::size_t r = 0; r < probs.rows(); ++r) {
                  double mass = 0.0;
                  for (std::size_t c = 0; c < cols; ++c) mass += targets.at(r, c);
                  const double w = upstream * weights[r];
                  for (std::size_t c = 0; c < cols; ++c) {
                    gl[r * cols + c] += w * (probs.at(r, c) * mass - targets.at(r, c));
                  }
                }
              }, {logits});
}

Graph::Var Graph::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  return push(Tensor::vector({s}), [this, a](Node& self) {
    auto& ga = grad_of(a);
    for (auto& g : ga) g += self.grad[0];
  }, {a});
}

void Graph::backward(Var root) {
  if (value(root).size() != 1) throw ContractViolation("backward: root must be a scalar");
  for (auto& n : nodes_) n->grad.clear();
  grad_of(root)[0] = 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = *nodes_[id];
    if (n.grad.empty()) continue;
    if (n.backprop) n.backprop(n);
    if (n.param != nullptr) {
      auto dst = n.param->ensure_grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    }
  }
}

}  // namespace eat
