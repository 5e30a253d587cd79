#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ekdc/tensor.hpp"

namespace ekdc::ad {

class Node;
using Var = std::shared_ptr<Node>;

// One value in the computation graph. Graphs are built per forward pass;
// leaves (parameters) persist across graphs and accumulate gradients until
// zeroed explicitly.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on demand during backward
  bool grad_defined = false;
  bool needs_grad = false;
  bool is_leaf = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad_defined) {
      grad = Tensor::zeros(value.shape);
      grad_defined = true;
    }
    return grad;
  }
  void zero_grad() {
    grad = Tensor();
    grad_defined = false;
  }
};

// While grad mode is off, ops produce value-only nodes with no backward
// closures; backward() on such a graph is a no-op.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev); }
};

Var constant(Tensor v);
Var leaf(Tensor v);       // persistent parameter leaf, needs_grad = true
Var detach(const Var& x); // value copy that blocks gradient flow

// Identity that forces gradient collection at this point even when all
// upstream leaves are constants (used for feature-map taps in CAM passes).
Var tap(const Var& x);

// Runs reverse accumulation from a scalar root. `seed` is the upstream
// gradient (used to fold batch averaging into per-sample backward calls).
void backward(const Var& root, double seed = 1.0);

// ---- elementwise / arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var neg(const Var& a);
Var relu(const Var& a);
Var exp_(const Var& a);
// scalar (shape {1}) times arbitrary tensor
Var scalar_mul(const Var& s, const Var& x);

// ---- reductions / shape ----
Var sum(const Var& a);
Var gap(const Var& a);  // (C,H,W) -> (C), spatial mean per channel
Var reshape(const Var& a, std::vector<int> shape);
Var transpose2(const Var& a);                 // (m,n) -> (n,m)
Var concat(const std::vector<Var>& parts);    // 1-D concat
Var gather(const Var& a, std::vector<int> idx);
Var dot(const Var& a, const Var& b);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);                        // (m,k)x(k,n)
Var affine(const Var& w, const Var& x, const Var& b);          // w(m,n), x(n) -> (m)
Var linear_rows(const Var& x, const Var& w, const Var& b);     // x(T,D), w(O,D) -> (T,O)
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// ---- nonlinear heads ----
Var softmax(const Var& a);       // 1-D
Var softmax_rows(const Var& a);  // 2-D, row-wise
Var logsumexp(const Var& a);     // 1-D -> scalar
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

}  // namespace ekdc::ad
