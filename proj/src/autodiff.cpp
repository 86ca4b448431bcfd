#include "pdl/autodiff.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "pdl/kernels.hpp"

namespace pdl::ad {
namespace {

const kernels::Ops& K() { return kernels::active(); }

Tensor& ensure_grad(Node& n) {
  if (!n.grad.defined()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

// out += g
void acc(Node& parent, const Tensor& g) {
  Tensor& dst = ensure_grad(parent);
  K().axpy(1.0, g.data(), dst.data(), g.numel());
}

void acc_scaled(Node& parent, const Tensor& g, double s) {
  Tensor& dst = ensure_grad(parent);
  K().axpy(s, g.data(), dst.data(), g.numel());
}

void acc_broadcast(Node& parent, double s) {
  Tensor& dst = ensure_grad(parent);
  K().add_scalar(dst.data(), s, dst.data(), dst.numel());
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw dim_error(std::string(op) + ": shapes " + a.shape_str() + " and " +
                  b.shape_str() + " do not conform");
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw dim_error(std::string(op) + ": shape " + a.shape_str() +
                  " not supported");
}

Value make_op(const char* op, Tensor value, std::vector<NodePtr> parents,
              std::function<void(Node&)> backprop) {
  if (!value.all_finite()) {
    throw numeric_error(op, "non-finite result");
  }
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  for (const auto& p : parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Value(std::move(n));
}

bool is_scalar(const Tensor& t) { return t.numel() == 1; }

enum class BinKind { same, left_scalar, right_scalar };

BinKind bin_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return BinKind::same;
  if (is_scalar(a) && !is_scalar(b)) return BinKind::left_scalar;
  if (is_scalar(b)) return BinKind::right_scalar;
  shape_fail(op, a, b);
}

void check_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) shape_fail(op, t);
}

}  // namespace

Value Value::leaf(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->op = "leaf";
  n->requires_grad = true;
  return Value(std::move(n));
}

Value Value::constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->op = "constant";
  n->requires_grad = false;
  return Value(std::move(n));
}

Tensor Value::grad_or_zero() const {
  if (has_grad()) return node_->grad;
  return Tensor::zeros_like(node_->value);
}

Value add(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  switch (bin_kind("add", ta, tb)) {
    case BinKind::same: {
      Tensor out = Tensor::zeros_like(ta);
      K().add(ta.data(), tb.data(), out.data(), out.numel());
      return make_op("add", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        acc(*self.parents[0], self.grad);
        acc(*self.parents[1], self.grad);
      });
    }
    case BinKind::left_scalar:
      return add(b, a);
    case BinKind::right_scalar: {
      Tensor out = Tensor::zeros_like(ta);
      K().add_scalar(ta.data(), tb.item(), out.data(), out.numel());
      return make_op("add", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        acc(*self.parents[0], self.grad);
        acc_broadcast(*self.parents[1], K().sum(self.grad.data(), self.grad.numel()));
      });
    }
  }
  shape_fail("add", ta, tb);
}

Value sub(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  switch (bin_kind("sub", ta, tb)) {
    case BinKind::same: {
      Tensor out = Tensor::zeros_like(ta);
      K().sub(ta.data(), tb.data(), out.data(), out.numel());
      return make_op("sub", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        acc(*self.parents[0], self.grad);
        acc_scaled(*self.parents[1], self.grad, -1.0);
      });
    }
    case BinKind::left_scalar: {
      // s - b
      Tensor out = Tensor::zeros_like(tb);
      K().scale(tb.data(), -1.0, out.data(), out.numel());
      K().add_scalar(out.data(), ta.item(), out.data(), out.numel());
      return make_op("sub", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        acc_broadcast(*self.parents[0], K().sum(self.grad.data(), self.grad.numel()));
        acc_scaled(*self.parents[1], self.grad, -1.0);
      });
    }
    case BinKind::right_scalar: {
      Tensor out = Tensor::zeros_like(ta);
      K().add_scalar(ta.data(), -tb.item(), out.data(), out.numel());
      return make_op("sub", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        acc(*self.parents[0], self.grad);
        acc_broadcast(*self.parents[1], -K().sum(self.grad.data(), self.grad.numel()));
      });
    }
  }
  shape_fail("sub", ta, tb);
}

Value mul(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  switch (bin_kind("mul", ta, tb)) {
    case BinKind::same: {
      Tensor out = Tensor::zeros_like(ta);
      K().mul(ta.data(), tb.data(), out.data(), out.numel());
      return make_op("mul", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        Tensor& ga = ensure_grad(pa);
        K().mul_acc(self.grad.data(), pb.value.data(), ga.data(), ga.numel());
        Tensor& gb = ensure_grad(pb);
        K().mul_acc(self.grad.data(), pa.value.data(), gb.data(), gb.numel());
      });
    }
    case BinKind::left_scalar:
      return mul(b, a);
    case BinKind::right_scalar: {
      Tensor out = Tensor::zeros_like(ta);
      K().scale(ta.data(), tb.item(), out.data(), out.numel());
      return make_op("mul", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        acc_scaled(pa, self.grad, pb.value.item());
        acc_broadcast(pb, K().dot(self.grad.data(), pa.value.data(), self.grad.numel()));
      });
    }
  }
  shape_fail("mul", ta, tb);
}

Value maximum(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (!ta.same_shape(tb)) {
    // Scalar sides are materialized as constants, so they must not be
    // trainable; max is rare off the hot path.
    if (is_scalar(tb) && !b.requires_grad()) {
      return maximum(a, Value::constant(Tensor::full(ta.shape(), tb.item())));
    }
    if (is_scalar(ta) && !a.requires_grad()) {
      return maximum(Value::constant(Tensor::full(tb.shape(), ta.item())), b);
    }
    shape_fail("maximum", ta, tb);
  }
  Tensor out = Tensor::zeros_like(ta);
  K().maximum(ta.data(), tb.data(), out.data(), out.numel());
  return make_op("maximum", std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.grad.numel();
    Tensor& ga = ensure_grad(pa);
    K().gt_mask_acc(pa.value.data(), pb.value.data(), self.grad.data(), ga.data(), n);
    Tensor& gb = ensure_grad(pb);
    K().gt_mask_acc(pb.value.data(), pa.value.data(), self.grad.data(), gb.data(), n);
  });
}

Value scale(const Value& a, double s) {
  Tensor out = Tensor::zeros_like(a.tensor());
  K().scale(a.tensor().data(), s, out.data(), out.numel());
  return make_op("scale", std::move(out), {a.ptr()}, [s](Node& self) {
    acc_scaled(*self.parents[0], self.grad, s);
  });
}

Value add_scalar(const Value& a, double s) {
  Tensor out = Tensor::zeros_like(a.tensor());
  K().add_scalar(a.tensor().data(), s, out.data(), out.numel());
  return make_op("add_scalar", std::move(out), {a.ptr()}, [](Node& self) {
    acc(*self.parents[0], self.grad);
  });
}

Value relu(const Value& a) {
  Tensor out = Tensor::zeros_like(a.tensor());
  K().relu(a.tensor().data(), out.data(), out.numel());
  return make_op("relu", std::move(out), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    K().relu_mask_acc(p.value.data(), self.grad.data(), g.data(), g.numel());
  });
}

Value sigmoid(const Value& a) {
  const Tensor& ta = a.tensor();
  Tensor out = Tensor::zeros_like(ta);
  for (std::size_t i = 0; i < ta.numel(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-ta[i]));
  }
  return make_op("sigmoid", std::move(out), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Value hardsigmoid(const Value& a) {
  const Tensor& ta = a.tensor();
  Tensor out = Tensor::zeros_like(ta);
  for (std::size_t i = 0; i < ta.numel(); ++i) {
    const double y = ta[i] / 6.0 + 0.5;
    out[i] = y < 0.0 ? 0.0 : (y > 1.0 ? 1.0 : y);
  }
  return make_op("hardsigmoid", std::move(out), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double x = p.value[i];
      if (x > -3.0 && x < 3.0) g[i] += self.grad[i] / 6.0;
    }
  });
}

Value sin(const Value& a) {
  const Tensor& ta = a.tensor();
  Tensor out = Tensor::zeros_like(ta);
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = std::sin(ta[i]);
  return make_op("sin", std::move(out), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      g[i] += self.grad[i] * std::cos(p.value[i]);
    }
  });
}

Value square(const Value& a) {
  Tensor out = Tensor::zeros_like(a.tensor());
  K().square(a.tensor().data(), out.data(), out.numel());
  return make_op("square", std::move(out), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    Tensor two_x = Tensor::zeros_like(p.value);
    K().scale(p.value.data(), 2.0, two_x.data(), two_x.numel());
    K().mul_acc(self.grad.data(), two_x.data(), g.data(), g.numel());
  });
}

Value abs(const Value& a) {
  Tensor out = Tensor::zeros_like(a.tensor());
  K().abs_val(a.tensor().data(), out.data(), out.numel());
  return make_op("abs", std::move(out), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    K().sign_mul_acc(p.value.data(), self.grad.data(), g.data(), g.numel());
  });
}

Value sum(const Value& a) {
  const double s = K().sum(a.tensor().data(), a.tensor().numel());
  return make_op("sum", Tensor::scalar(s), {a.ptr()}, [](Node& self) {
    acc_broadcast(*self.parents[0], self.grad.item());
  });
}

Value mean(const Value& a) {
  const std::size_t n = a.tensor().numel();
  if (n == 0) throw dim_error("mean: empty tensor");
  const double s = K().sum(a.tensor().data(), n) / static_cast<double>(n);
  return make_op("mean", Tensor::scalar(s), {a.ptr()}, [n](Node& self) {
    acc_broadcast(*self.parents[0], self.grad.item() / static_cast<double>(n));
  });
}

Value dot(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (!ta.same_shape(tb)) shape_fail("dot", ta, tb);
  const double s = K().dot(ta.data(), tb.data(), ta.numel());
  return make_op("dot", Tensor::scalar(s), {a.ptr(), b.ptr()}, [](Node& self) {
    const double g = self.grad.item();
    acc_scaled(*self.parents[0], self.parents[1]->value, g);
    acc_scaled(*self.parents[1], self.parents[0]->value, g);
  });
}

Value l1_norm(const Value& a) {
  const double s = K().abs_sum(a.tensor().data(), a.tensor().numel());
  return make_op("l1_norm", Tensor::scalar(s), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    const double up = self.grad.item();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double x = p.value[i];
      if (x > 0.0) {
        g[i] += up;
      } else if (x < 0.0) {
        g[i] -= up;
      }
    }
  });
}

Value l2_norm_squared(const Value& a) {
  const Tensor& ta = a.tensor();
  const double s = K().dot(ta.data(), ta.data(), ta.numel());
  return make_op("l2_norm_squared", Tensor::scalar(s), {a.ptr()}, [](Node& self) {
    acc_scaled(*self.parents[0], self.parents[0]->value, 2.0 * self.grad.item());
  });
}

Value linf_norm(const Value& a) {
  const Tensor& ta = a.tensor();
  const double s = K().max_abs(ta.data(), ta.numel());
  return make_op("linf_norm", Tensor::scalar(s), {a.ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    // subgradient at the first attaining element only
    const std::size_t n = p.value.numel();
    if (n == 0) return;
    std::size_t best = 0;
    double bv = std::fabs(p.value[0]);
    for (std::size_t i = 1; i < n; ++i) {
      const double v = std::fabs(p.value[i]);
      if (v > bv) {
        bv = v;
        best = i;
      }
    }
    const double x = p.value[best];
    if (x > 0.0) {
      g[best] += self.grad.item();
    } else if (x < 0.0) {
      g[best] -= self.grad.item();
    }
  });
}

Value matmul(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  check_rank2("matmul", ta);
  check_rank2("matmul", tb);
  if (ta.cols() != tb.rows()) shape_fail("matmul", ta, tb);
  const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out = Tensor::zeros({m, n});
  K().gemm_nn(ta.data(), tb.data(), out.data(), m, k, n, false);
  return make_op("matmul", std::move(out), {a.ptr(), b.ptr()},
                 [m, k, n](Node& self) {
                   Node& pa = *self.parents[0];
                   Node& pb = *self.parents[1];
                   Tensor& ga = ensure_grad(pa);
                   K().gemm_nt(self.grad.data(), pb.value.data(), ga.data(), m, n, k, true);
                   Tensor& gb = ensure_grad(pb);
                   K().gemm_tn(pa.value.data(), self.grad.data(), gb.data(), k, m, n, true);
                 });
}

Value matmul_nt(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  check_rank2("matmul_nt", ta);
  check_rank2("matmul_nt", tb);
  if (ta.cols() != tb.cols()) shape_fail("matmul_nt", ta, tb);
  const std::size_t m = ta.rows(), k = ta.cols(), n = tb.rows();
  Tensor out = Tensor::zeros({m, n});
  K().gemm_nt(ta.data(), tb.data(), out.data(), m, k, n, false);
  return make_op("matmul_nt", std::move(out), {a.ptr(), b.ptr()},
                 [m, k, n](Node& self) {
                   Node& pa = *self.parents[0];
                   Node& pb = *self.parents[1];
                   Tensor& ga = ensure_grad(pa);
                   K().gemm_nn(self.grad.data(), pb.value.data(), ga.data(), m, n, k, true);
                   Tensor& gb = ensure_grad(pb);
                   K().gemm_tn(self.grad.data(), pa.value.data(), gb.data(), n, m, k, true);
                 });
}

Value matvec(const Value& a, const Value& x) {
  const Tensor& ta = a.tensor();
  const Tensor& tx = x.tensor();
  check_rank2("matvec", ta);
  if (tx.rank() != 1 || ta.cols() != tx.numel()) shape_fail("matvec", ta, tx);
  const std::size_t m = ta.rows(), n = ta.cols();
  Tensor out = Tensor::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = K().dot(ta.data() + i * n, tx.data(), n);
  }
  return make_op("matvec", std::move(out), {a.ptr(), x.ptr()},
                 [m, n](Node& self) {
                   Node& pa = *self.parents[0];
                   Node& px = *self.parents[1];
                   Tensor& ga = ensure_grad(pa);
                   Tensor& gx = ensure_grad(px);
                   for (std::size_t i = 0; i < m; ++i) {
                     const double gi = self.grad[i];
                     K().axpy(gi, px.value.data(), ga.data() + i * n, n);
                     K().axpy(gi, pa.value.data() + i * n, gx.data(), n);
                   }
                 });
}

Value rowsum(const Value& a) {
  const Tensor& ta = a.tensor();
  check_rank2("rowsum", ta);
  const std::size_t m = ta.rows(), n = ta.cols();
  Tensor out = Tensor::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = K().sum(ta.data() + i * n, n);
  }
  return make_op("rowsum", std::move(out), {a.ptr()}, [m, n](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = ensure_grad(p);
    for (std::size_t i = 0; i < m; ++i) {
      double* row = g.data() + i * n;
      K().add_scalar(row, self.grad[i], row, n);
    }
  });
}

namespace {

Value rowvec_op(const char* tag, const Value& a, const Value& v, bool subtract,
                bool multiply) {
  const Tensor& ta = a.tensor();
  const Tensor& tv = v.tensor();
  check_rank2(tag, ta);
  if (tv.rank() != 1 || tv.numel() != ta.cols()) shape_fail(tag, ta, tv);
  const std::size_t m = ta.rows(), n = ta.cols();
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = ta.data() + i * n;
    double* orow = out.data() + i * n;
    if (multiply) {
      K().mul(arow, tv.data(), orow, n);
    } else if (subtract) {
      K().sub(arow, tv.data(), orow, n);
    } else {
      K().add(arow, tv.data(), orow, n);
    }
  }
  return make_op(tag, std::move(out), {a.ptr(), v.ptr()},
                 [m, n, subtract, multiply](Node& self) {
                   Node& pa = *self.parents[0];
                   Node& pv = *self.parents[1];
                   Tensor& ga = ensure_grad(pa);
                   Tensor& gv = ensure_grad(pv);
                   for (std::size_t i = 0; i < m; ++i) {
                     const double* grow = self.grad.data() + i * n;
                     double* garow = ga.data() + i * n;
                     if (multiply) {
                       K().mul_acc(grow, pv.value.data(), garow, n);
                       K().mul_acc(grow, pa.value.data() + i * n, gv.data(), n);
                     } else {
                       K().axpy(1.0, grow, garow, n);
                       K().axpy(subtract ? -1.0 : 1.0, grow, gv.data(), n);
                     }
                   }
                 });
}

}  // namespace

Value add_rowvec(const Value& a, const Value& v) {
  return rowvec_op("add_rowvec", a, v, false, false);
}

Value sub_rowvec(const Value& a, const Value& v) {
  return rowvec_op("sub_rowvec", a, v, true, false);
}

Value mul_rowvec(const Value& a, const Value& v) {
  return rowvec_op("mul_rowvec", a, v, false, true);
}

Value slice_cols(const Value& a, std::size_t begin, std::size_t count) {
  const Tensor& ta = a.tensor();
  check_rank2("slice_cols", ta);
  const std::size_t m = ta.rows(), n = ta.cols();
  if (begin + count > n) {
    throw dim_error("slice_cols: range [" + std::to_string(begin) + ", " +
                    std::to_string(begin + count) + ") exceeds " +
                    std::to_string(n) + " columns");
  }
  Tensor out = Tensor::zeros({m, count});
  for (std::size_t i = 0; i < m; ++i) {
    const double* src = ta.data() + i * n + begin;
    double* dst = out.data() + i * count;
    for (std::size_t j = 0; j < count; ++j) dst[j] = src[j];
  }
  return make_op("slice_cols", std::move(out), {a.ptr()},
                 [m, n, begin, count](Node& self) {
                   Node& p = *self.parents[0];
                   Tensor& g = ensure_grad(p);
                   for (std::size_t i = 0; i < m; ++i) {
                     K().axpy(1.0, self.grad.data() + i * count,
                              g.data() + i * n + begin, count);
                   }
                 });
}

void backward(const Value& root) {
  Node* r = root.raw();
  if (r == nullptr) throw contract_error("backward: empty value");
  if (r->released) throw contract_error("backward: graph already released");
  if (r->value.numel() != 1) {
    throw contract_error("backward: root must be scalar, got shape " +
                         r->value.shape_str());
  }
  if (!r->requires_grad) return;  // nothing trainable below

  // Post-order over the requires_grad subgraph (leaves first), iterative.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({r, 0});
  visited.insert(r);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  r->grad = Tensor::unchecked(r->value.shape(), {1.0});
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }

  // Tear down the interior; leaves keep their grads, values stay readable.
  for (Node* n : order) {
    if (!n->parents.empty() || n->backprop) {
      n->parents.clear();
      n->backprop = nullptr;
      n->released = true;
    }
  }
}

}  // namespace pdl::ad
