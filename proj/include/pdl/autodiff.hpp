#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pdl/tensor.hpp"

namespace pdl::ad {

// Reverse-mode autodiff over Tensor values. Graphs are built eagerly per
// evaluation and torn down by backward(); leaves (parameters) survive and
// keep their accumulated gradients until cleared.
//
// Subgradient convention: max-type ops (relu, maximum, abs at 0, linf_norm)
// propagate 0 at ties/kinks.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // undefined until backward touches this node
  const char* op = "leaf";
  bool requires_grad = false;
  bool released = false;  // backward already consumed this graph
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;  // accumulates into parents' grads
};

class Value {
 public:
  Value() = default;

  // Trainable leaf: participates in backward, keeps gradients.
  static Value leaf(Tensor t);
  // Constant: gradients do not flow into or through it.
  static Value constant(Tensor t);

  bool defined() const { return node_ != nullptr; }
  const Tensor& tensor() const { return node_->value; }
  // Parameter update slot; only meaningful on leaves.
  Tensor& mutable_tensor() { return node_->value; }

  bool has_grad() const { return node_ && node_->grad.defined(); }
  // Accumulated gradient; zeros when backward never reached this leaf.
  Tensor grad_or_zero() const;
  const Tensor& grad() const { return node_->grad; }
  void clear_grad() { node_->grad = Tensor(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }

  // Same numeric value, detached from the graph (a fresh constant).
  Value detach() const { return constant(node_->value); }

  double item() const { return node_->value.item(); }

  Node* raw() const { return node_.get(); }
  const NodePtr& ptr() const { return node_; }
  explicit Value(NodePtr n) : node_(std::move(n)) {}

 private:
  NodePtr node_;
};

// Elementwise; shapes must match, except one side may be a 1-element tensor
// (scalar broadcast).
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value maximum(const Value& a, const Value& b);

Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);

Value relu(const Value& a);           // max{x, 0}
inline Value max_with_zero(const Value& a) { return relu(a); }
Value sigmoid(const Value& a);
Value hardsigmoid(const Value& a);    // clamp(x/6 + 1/2, 0, 1)
Value sin(const Value& a);
Value square(const Value& a);
Value abs(const Value& a);

// Reductions to scalar.
Value sum(const Value& a);
Value mean(const Value& a);
Value dot(const Value& a, const Value& b);
Value l1_norm(const Value& a);
Value l2_norm_squared(const Value& a);
Value linf_norm(const Value& a);      // subgradient at first argmax only

// Matrix ops (row-major). matvec: [m x n] * [n] -> [m].
Value matmul(const Value& a, const Value& b);     // [m x k] * [k x n]
Value matmul_nt(const Value& a, const Value& b);  // [m x k] * [n x k]^T
Value matvec(const Value& a, const Value& x);

// Batch helpers: A is [B x n], v is [n], out per-row.
Value rowsum(const Value& a);                     // [B x n] -> [B]
Value add_rowvec(const Value& a, const Value& v);
Value sub_rowvec(const Value& a, const Value& v);
Value mul_rowvec(const Value& a, const Value& v);
Value slice_cols(const Value& a, std::size_t begin, std::size_t count);

// Populates grads of every leaf reachable from root (root must be scalar),
// then releases the interior of the graph. One shot per graph.
void backward(const Value& root);

}  // namespace pdl::ad
