#include "ekdc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ekdc/errors.hpp"

namespace ekdc::ad {

namespace {
thread_local bool g_grad_enabled = true;

bool any_needs_grad(const std::vector<Var>& parents) {
  for (const auto& p : parents) {
    if (p->needs_grad) return true;
  }
  return false;
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled && any_needs_grad(parents)) {
    n->needs_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

void check_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value)) {
    throw InvalidInput(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                       " vs " + b->value.shape_str());
  }
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

Var leaf(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->needs_grad = true;
  n->is_leaf = true;
  return n;
}

Var detach(const Var& x) { return constant(x->value); }

Var tap(const Var& x) {
  auto n = std::make_shared<Node>();
  n->value = x->value;
  if (g_grad_enabled) {
    n->needs_grad = true;
    n->parents = {x};
    n->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      if (!p.needs_grad) return;
      Tensor& g = p.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    };
  }
  return n;
}

void backward(const Var& root, double seed) {
  if (!root->needs_grad) return;
  if (root->value.numel() != 1) {
    throw InvalidInput("backward: root must be scalar, got " + root->value.shape_str());
  }
  // topological order by iterative DFS
  std::vector<Node*> order;
  std::vector<std::pair<Node*, size_t>> stack;
  std::unordered_set<Node*> visited;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // order is already reverse-topological from the DFS post-order... it is
  // post-order (parents first), so iterate from the back (root side) down.
  root->ensure_grad();
  root->grad[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad_defined) n->backward_fn(*n);
  }
  // Interior gradients stay readable until the graph itself is dropped;
  // leaves persist across graphs and accumulate until zeroed by the caller.
}

// ---------------------------------------------------------------------------
// elementwise

Var add(const Var& a, const Var& b) {
  check_shape(a, b, "add");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.needs_grad) continue;
      Tensor& g = p.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_shape(a, b, "sub");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.needs_grad) {
      Tensor& g = pa.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
    Node& pb = *self.parents[1];
    if (pb.needs_grad) {
      Tensor& g = pb.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_shape(a, b, "mul");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.needs_grad) {
      Tensor& g = pa.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.needs_grad) {
      Tensor& g = pb.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var scale(const Var& a, double k) {
  Tensor out = a->value;
  for (auto& v : out.data) v *= k;
  return make_node(std::move(out), {a}, [k](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += k * self.grad[i];
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      if (p.value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Var exp_(const Var& a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = std::exp(v);
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

Var scalar_mul(const Var& s, const Var& x) {
  if (s->value.numel() != 1) throw InvalidInput("scalar_mul: scalar operand must have 1 element");
  Tensor out = x->value;
  double k = s->value[0];
  for (auto& v : out.data) v *= k;
  return make_node(std::move(out), {s, x}, [](Node& self) {
    Node& ps = *self.parents[0];
    Node& px = *self.parents[1];
    if (ps.needs_grad) {
      Tensor& g = ps.ensure_grad();
      double acc = 0.0;
      for (int64_t i = 0; i < px.value.numel(); ++i) acc += self.grad[i] * px.value[i];
      g[0] += acc;
    }
    if (px.needs_grad) {
      Tensor& g = px.ensure_grad();
      double k = ps.value[0];
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * k;
    }
  });
}

// ---------------------------------------------------------------------------
// reductions / shape

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a->value.data) acc += v;
  return make_node(Tensor::scalar(acc), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[0];
  });
}

Var gap(const Var& a) {
  if (a->value.rank() != 3) throw InvalidInput("gap: expected (C,H,W) tensor");
  int c = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  Tensor out({c});
  double inv = 1.0 / (static_cast<double>(h) * w);
  for (int k = 0; k < c; ++k) {
    double acc = 0.0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) acc += a->value.at3(k, i, j);
    out[k] = acc * inv;
  }
  return make_node(std::move(out), {a}, [c, h, w, inv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int k = 0; k < c; ++k) {
      double gv = self.grad[k] * inv;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) g[g.idx3(k, i, j)] += gv;
    }
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  if (Tensor::numel_of(shape) != a->value.numel()) {
    throw InvalidInput("reshape: element count mismatch");
  }
  Tensor out(shape, a->value.data);
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

Var transpose2(const Var& a) {
  if (a->value.rank() != 2) throw InvalidInput("transpose2: expected rank-2 tensor");
  int m = a->value.dim(0), n = a->value.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at2(j, i) = a->value.at2(i, j);
  return make_node(std::move(out), {a}, [m, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) g.at2(i, j) += self.grad.at2(j, i);
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("concat: no inputs");
  int total = 0;
  for (const auto& p : parts) {
    if (p->value.rank() != 1) throw InvalidInput("concat: expected 1-D inputs");
    total += p->value.dim(0);
  }
  Tensor out({total});
  int off = 0;
  for (const auto& p : parts) {
    for (int64_t i = 0; i < p->value.numel(); ++i) out[off + i] = p->value[i];
    off += static_cast<int>(p->value.numel());
  }
  return make_node(std::move(out), parts, [](Node& self) {
    int off = 0;
    for (auto& pv : self.parents) {
      Node& p = *pv;
      int n = static_cast<int>(p.value.numel());
      if (p.needs_grad) {
        Tensor& g = p.ensure_grad();
        for (int i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Var gather(const Var& a, std::vector<int> idx) {
  if (a->value.rank() != 1) throw InvalidInput("gather: expected 1-D tensor");
  int n = a->value.dim(0);
  Tensor out({static_cast<int>(idx.size())});
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n) throw InvalidInput("gather: index out of range");
    out[static_cast<int64_t>(i)] = a->value[idx[i]];
  }
  return make_node(std::move(out), {a}, [idx](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[static_cast<int64_t>(i)];
  });
}

Var dot(const Var& a, const Var& b) {
  check_shape(a, b, "dot");
  double acc = 0.0;
  for (int64_t i = 0; i < a->value.numel(); ++i) acc += a->value[i] * b->value[i];
  return make_node(Tensor::scalar(acc), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    double gv = self.grad[0];
    if (pa.needs_grad) {
      Tensor& g = pa.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += gv * pb.value[i];
    }
    if (pb.needs_grad) {
      Tensor& g = pb.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += gv * pa.value[i];
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(const Var& a, const Var& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(1) != b->value.dim(0)) {
    throw InvalidInput("matmul: incompatible shapes " + a->value.shape_str() + " x " +
                       b->value.shape_str());
  }
  int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double av = a->value.at2(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at2(i, j) += av * b->value.at2(p, j);
    }
  }
  return make_node(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.needs_grad) {
      Tensor& g = pa.ensure_grad();  // dA = dC * B^T
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += self.grad.at2(i, j) * pb.value.at2(p, j);
          g.at2(i, p) += acc;
        }
    }
    if (pb.needs_grad) {
      Tensor& g = pb.ensure_grad();  // dB = A^T * dC
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          double av = pa.value.at2(i, p);
          if (av == 0.0) continue;
          for (int j = 0; j < n; ++j) g.at2(p, j) += av * self.grad.at2(i, j);
        }
    }
  });
}

Var affine(const Var& w, const Var& x, const Var& b) {
  if (w->value.rank() != 2 || x->value.rank() != 1 || b->value.rank() != 1 ||
      w->value.dim(1) != x->value.dim(0) || w->value.dim(0) != b->value.dim(0)) {
    throw InvalidInput("affine: incompatible shapes w" + w->value.shape_str() + " x" +
                       x->value.shape_str() + " b" + b->value.shape_str());
  }
  int m = w->value.dim(0), n = w->value.dim(1);
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    double acc = b->value[i];
    const double* wr = &w->value.data[static_cast<size_t>(i) * n];
    for (int j = 0; j < n; ++j) acc += wr[j] * x->value[j];
    out[i] = acc;
  }
  return make_node(std::move(out), {w, x, b}, [m, n](Node& self) {
    Node& pw = *self.parents[0];
    Node& px = *self.parents[1];
    Node& pb = *self.parents[2];
    if (pw.needs_grad) {
      Tensor& g = pw.ensure_grad();
      for (int i = 0; i < m; ++i) {
        double gv = self.grad[i];
        if (gv == 0.0) continue;
        double* gr = &g.data[static_cast<size_t>(i) * n];
        for (int j = 0; j < n; ++j) gr[j] += gv * px.value[j];
      }
    }
    if (px.needs_grad) {
      Tensor& g = px.ensure_grad();
      for (int i = 0; i < m; ++i) {
        double gv = self.grad[i];
        if (gv == 0.0) continue;
        const double* wr = &pw.value.data[static_cast<size_t>(i) * n];
        for (int j = 0; j < n; ++j) g[j] += gv * wr[j];
      }
    }
    if (pb.needs_grad) {
      Tensor& g = pb.ensure_grad();
      for (int i = 0; i < m; ++i) g[i] += self.grad[i];
    }
  });
}

Var linear_rows(const Var& x, const Var& w, const Var& b) {
  if (x->value.rank() != 2 || w->value.rank() != 2 || x->value.dim(1) != w->value.dim(1) ||
      b->value.dim(0) != w->value.dim(0)) {
    throw InvalidInput("linear_rows: incompatible shapes");
  }
  int t = x->value.dim(0), d = x->value.dim(1), o = w->value.dim(0);
  Tensor out({t, o});
  for (int r = 0; r < t; ++r) {
    const double* xr = &x->value.data[static_cast<size_t>(r) * d];
    for (int i = 0; i < o; ++i) {
      const double* wr = &w->value.data[static_cast<size_t>(i) * d];
      double acc = b->value[i];
      for (int j = 0; j < d; ++j) acc += xr[j] * wr[j];
      out.at2(r, i) = acc;
    }
  }
  return make_node(std::move(out), {x, w, b}, [t, d, o](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    if (px.needs_grad) {
      Tensor& g = px.ensure_grad();
      for (int r = 0; r < t; ++r)
        for (int i = 0; i < o; ++i) {
          double gv = self.grad.at2(r, i);
          if (gv == 0.0) continue;
          const double* wr = &pw.value.data[static_cast<size_t>(i) * d];
          double* gr = &g.data[static_cast<size_t>(r) * d];
          for (int j = 0; j < d; ++j) gr[j] += gv * wr[j];
        }
    }
    if (pw.needs_grad) {
      Tensor& g = pw.ensure_grad();
      for (int r = 0; r < t; ++r) {
        const double* xr = &px.value.data[static_cast<size_t>(r) * d];
        for (int i = 0; i < o; ++i) {
          double gv = self.grad.at2(r, i);
          if (gv == 0.0) continue;
          double* gr = &g.data[static_cast<size_t>(i) * d];
          for (int j = 0; j < d; ++j) gr[j] += gv * xr[j];
        }
      }
    }
    if (pb.needs_grad) {
      Tensor& g = pb.ensure_grad();
      for (int r = 0; r < t; ++r)
        for (int i = 0; i < o; ++i) g[i] += self.grad.at2(r, i);
    }
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  if (x->value.rank() != 3 || w->value.rank() != 4) {
    throw InvalidInput("conv2d: expected x(C,H,W), w(O,C,kh,kw)");
  }
  int ci = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  int co = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
  if (w->value.dim(1) != ci) {
    throw InvalidInput("conv2d: channel mismatch, input has " + std::to_string(ci) +
                       ", kernel expects " + std::to_string(w->value.dim(1)));
  }
  int oh = (h + 2 * pad - kh) / stride + 1;
  int ow = (wd + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw InvalidInput("conv2d: output would be empty");
  Tensor out({co, oh, ow});
  for (int o = 0; o < co; ++o) {
    double bias = b->value[o];
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = bias;
        int ih0 = i * stride - pad, iw0 = j * stride - pad;
        for (int c = 0; c < ci; ++c) {
          for (int ki = 0; ki < kh; ++ki) {
            int ih = ih0 + ki;
            if (ih < 0 || ih >= h) continue;
            for (int kj = 0; kj < kw; ++kj) {
              int iw = iw0 + kj;
              if (iw < 0 || iw >= wd) continue;
              acc += x->value.at3(c, ih, iw) * w->value.data[((static_cast<size_t>(o) * ci + c) * kh + ki) * kw + kj];
            }
          }
        }
        out.at3(o, i, j) = acc;
      }
    }
  }
  return make_node(std::move(out), {x, w, b},
                   [ci, h, wd, co, kh, kw, oh, ow, stride, pad](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    Tensor* gx = px.needs_grad ? &px.ensure_grad() : nullptr;
    Tensor* gw = pw.needs_grad ? &pw.ensure_grad() : nullptr;
    Tensor* gb = pb.needs_grad ? &pb.ensure_grad() : nullptr;
    for (int o = 0; o < co; ++o) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          double gv = self.grad.at3(o, i, j);
          if (gv == 0.0) continue;
          if (gb) gb->data[o] += gv;
          int ih0 = i * stride - pad, iw0 = j * stride - pad;
          for (int c = 0; c < ci; ++c) {
            for (int ki = 0; ki < kh; ++ki) {
              int ih = ih0 + ki;
              if (ih < 0 || ih >= h) continue;
              for (int kj = 0; kj < kw; ++kj) {
                int iw = iw0 + kj;
                if (iw < 0 || iw >= wd) continue;
                size_t widx = ((static_cast<size_t>(o) * ci + c) * kh + ki) * kw + kj;
                if (gx) gx->data[static_cast<size_t>(gx->idx3(c, ih, iw))] += gv * pw.value.data[widx];
                if (gw) gw->data[widx] += gv * px.value.at3(c, ih, iw);
              }
            }
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// nonlinear heads

Var softmax(const Var& a) {
  if (a->value.rank() != 1) throw InvalidInput("softmax: expected 1-D tensor");
  int n = a->value.dim(0);
  Tensor out({n});
  double mx = a->value[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, a->value[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(a->value[i] - mx);
    z += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= z;
  return make_node(std::move(out), {a}, [n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    double inner = 0.0;
    for (int i = 0; i < n; ++i) inner += self.grad[i] * self.value[i];
    for (int i = 0; i < n; ++i) g[i] += self.value[i] * (self.grad[i] - inner);
  });
}

Var softmax_rows(const Var& a) {
  if (a->value.rank() != 2) throw InvalidInput("softmax_rows: expected 2-D tensor");
  int m = a->value.dim(0), n = a->value.dim(1);
  Tensor out({m, n});
  for (int r = 0; r < m; ++r) {
    double mx = a->value.at2(r, 0);
    for (int i = 1; i < n; ++i) mx = std::max(mx, a->value.at2(r, i));
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = std::exp(a->value.at2(r, i) - mx);
      out.at2(r, i) = e;
      z += e;
    }
    for (int i = 0; i < n; ++i) out.at2(r, i) /= z;
  }
  return make_node(std::move(out), {a}, [m, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    for (int r = 0; r < m; ++r) {
      double inner = 0.0;
      for (int i = 0; i < n; ++i) inner += self.grad.at2(r, i) * self.value.at2(r, i);
      for (int i = 0; i < n; ++i)
        g.at2(r, i) += self.value.at2(r, i) * (self.grad.at2(r, i) - inner);
    }
  });
}

Var logsumexp(const Var& a) {
  if (a->value.rank() != 1) throw InvalidInput("logsumexp: expected 1-D tensor");
  int n = a->value.dim(0);
  double mx = a->value[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, a->value[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(a->value[i] - mx);
  double lse = mx + std::log(z);
  return make_node(Tensor::scalar(lse), {a}, [n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.needs_grad) return;
    Tensor& g = p.ensure_grad();
    double gv = self.grad[0];
    double lse = self.value[0];
    for (int i = 0; i < n; ++i) g[i] += gv * std::exp(p.value[i] - lse);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  if (x->value.rank() != 2) throw InvalidInput("layer_norm_rows: expected 2-D tensor");
  int t = x->value.dim(0), d = x->value.dim(1);
  if (gamma->value.dim(0) != d || beta->value.dim(0) != d) {
    throw InvalidInput("layer_norm_rows: gamma/beta dimension mismatch");
  }
  Tensor out({t, d});
  Tensor xhat({t, d});
  Tensor inv_sigma({t});
  for (int r = 0; r < t; ++r) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x->value.at2(r, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = x->value.at2(r, j) - mu;
      var += c * c;
    }
    var /= d;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (int j = 0; j < d; ++j) {
      double xh = (x->value.at2(r, j) - mu) * is;
      xhat.at2(r, j) = xh;
      out.at2(r, j) = gamma->value[j] * xh + beta->value[j];
    }
  }
  auto xh = std::make_shared<Tensor>(std::move(xhat));
  auto is = std::make_shared<Tensor>(std::move(inv_sigma));
  return make_node(std::move(out), {x, gamma, beta}, [t, d, xh, is](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    if (pg.needs_grad) {
      Tensor& g = pg.ensure_grad();
      for (int r = 0; r < t; ++r)
        for (int j = 0; j < d; ++j) g[j] += self.grad.at2(r, j) * xh->at2(r, j);
    }
    if (pb.needs_grad) {
      Tensor& g = pb.ensure_grad();
      for (int r = 0; r < t; ++r)
        for (int j = 0; j < d; ++j) g[j] += self.grad.at2(r, j);
    }
    if (px.needs_grad) {
      Tensor& g = px.ensure_grad();
      for (int r = 0; r < t; ++r) {
        double m1 = 0.0, m2 = 0.0;  // mean(dyg), mean(dyg * xhat)
        for (int j = 0; j < d; ++j) {
          double dyg = self.grad.at2(r, j) * pg.value[j];
          m1 += dyg;
          m2 += dyg * xh->at2(r, j);
        }
        m1 /= d;
        m2 /= d;
        for (int j = 0; j < d; ++j) {
          double dyg = self.grad.at2(r, j) * pg.value[j];
          g.at2(r, j) += (dyg - m1 - xh->at2(r, j) * m2) * (*is)[r];
        }
      }
    }
  });
}

}  // namespace ekdc::ad
