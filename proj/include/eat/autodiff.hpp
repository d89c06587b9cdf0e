#pragma once

// Reverse-mode differentiation over the small op set the models need:
// matmul, bias add, add, relu, scale, row softmax, element pick, column slice
// and a fused softmax cross-entropy.

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "eat/tensor.hpp"

namespace eat {

class Graph {
 public:
  struct Var {
    std::size_t id;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Trainable leaf. Gradients accumulate into `param`'s grad slot on backward().
  /// `param` must outlive the graph.
  Var leaf(Tensor& param);
  Var constant(Tensor value);

  /// [n x k] * [k x m]
  Var matmul(Var a, Var b);
  /// Adds a rank-1 bias to every row.
  Var add_bias(Var a, Var bias);
  Var add(Var a, Var b);
  Var relu(Var a);
  Var scale(Var a, double factor);
  /// Row-wise softmax.
  Var softmax(Var a);
  /// Scalar node holding a(row, col).
  Var element(Var a, std::size_t row, std::size_t col);
  /// Columns [begin, end) of every row.
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  /// sum_r w_r * sum_c -t_rc * log softmax(logits_r)_c
  ///
  /// `targets` rows must be probability vectors; they and `row_weights` are constants.
  Var softmax_xent(Var logits, Tensor targets, std::vector<double> row_weights);
  Var sum(Var a);

  const Tensor& value(Var v) const { return nodes_[v.id]->value; }
  double scalar(Var v) const;

  /// Propagates d(root)/d(.) back to every leaf, adding into their grad slots.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    Tensor* param = nullptr;
    bool requires_grad = false;
    std::function<void(Node&)> backprop;
  };

  /// Creates an op node; it requires a gradient only if one of `parents` does.
  Var push(Tensor value, std::function<void(Node&)> backprop,
           std::initializer_list<Var> parents);
  bool wants(Var v) const { return nodes_[v.id]->requires_grad; }
  Node& node(Var v) { return *nodes_[v.id]; }
  std::vector<double>& grad_of(Var v);

  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace eat
