#pragma once

#include <functional>
#include <vector>

#include "oqa/mat.hpp"

namespace oqa {

using NodeId = int;

enum class Op {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  AddCol,
  Scale,
  AddScalar,
  Relu,
  Sigmoid,
  Abs,
  XLogX,
  Min2,
  Max2,
  Transpose,
  SoftmaxRows,
  LogSoftmaxRows,
  SliceRows,
  Col,
  ConcatRows,
  ColMean,
  Sum,
  Mean,
  NllRows,
};

// One recorded operation: its result, the gradient buffer filled by
// backward(), and references to the parent nodes.
struct Node {
  Mat value;
  Mat grad;
  Op op = Op::Leaf;
  bool requires_grad = false;
  NodeId a = -1;
  NodeId b = -1;
  std::vector<NodeId> list;  // ConcatRows inputs
  double attr = 0.0;         // Scale factor / AddScalar constant
  int i0 = 0;                // SliceRows start row, Col index
  std::vector<int> labels;   // NllRows targets
};

// Single-threaded computation tape. Node creation order is a topological
// order, so backward() is one reverse sweep that visits each node once.
// Gradients accumulate (sum) when a node feeds several consumers.
class Tape {
 public:
  // Leaf that never receives gradients (inputs, frozen weights).
  NodeId constant(Mat v);
  // Leaf whose gradient is wanted.
  NodeId param(Mat v);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId div(NodeId a, NodeId b);  // elementwise; b must be nonzero everywhere
  // m (r×c) plus a column bias (r×1) broadcast over all columns.
  NodeId add_col(NodeId m, NodeId bias);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId relu(NodeId a);     // subgradient at 0 is 0
  NodeId sigmoid(NodeId a);
  NodeId abs(NodeId a);      // subgradient at 0 is 0
  // x·ln(x) extended with value 0 and gradient 0 at x <= 0.
  NodeId xlogx(NodeId a);
  NodeId min2(NodeId a, NodeId b);  // elementwise; ties route gradient to a
  NodeId max2(NodeId a, NodeId b);
  NodeId transp(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId log_softmax_rows(NodeId a);
  NodeId slice_rows(NodeId a, int row0, int count);
  NodeId col(NodeId a, int j);
  NodeId concat_rows(const std::vector<NodeId>& parts);
  NodeId col_mean(NodeId a);  // r×c -> r×1
  NodeId sum(NodeId a);       // -> 1×1
  NodeId mean(NodeId a);      // -> 1×1
  // -(1/n)·Σ_i logp(i, labels[i]) for an n×k matrix of log-probabilities.
  NodeId nll_rows(NodeId logp, std::vector<int> labels);

  // Reverse sweep from a scalar (1×1) root; ContractError otherwise.
  void backward(NodeId root);

  const Mat& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Mat& grad(NodeId id) const;
  bool requires_grad(NodeId id) const {
    return nodes_[static_cast<size_t>(id)].requires_grad;
  }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  NodeId push(Node n);
  NodeId unary(Op op, NodeId a, Mat value);
  NodeId binary(Op op, NodeId a, NodeId b, Mat value);
  const Node& at(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  void check_id(NodeId id) const;
  void backprop_into(NodeId parent, const Mat& contribution);
  void step_back(Node& n);

  std::vector<Node> nodes_;
};

// Max over all parameter coordinates of
//   |analytic - central difference| / max(1, |analytic|, |numeric|)
// for the scalar graph produced by `build`. `build` must place the given
// parameter matrices on the tape (in order) and return the loss node.
double grad_check(
    const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build,
    const std::vector<Mat>& params, double h);

}  // namespace oqa
