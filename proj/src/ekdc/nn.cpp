#include "ekdc/nn.hpp"

#include <cmath>
#include <cstring>

#include "ekdc/errors.hpp"

namespace ekdc::nn {

Var ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw StateError("duplicate parameter name: " + name);
  Var v = ad::leaf(std::move(init));
  index_[name] = items_.size();
  items_.emplace_back(name, v);
  return v;
}

Var ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("unknown parameter: " + name);
  return items_[it->second].second;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) != 0; }

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (const auto& [name, v] : items_) n += v->value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : items_) v->zero_grad();
}

uint64_t ParamStore::checksum() const {
  uint64_t h = 1469598103934665603ull;  // FNV offset basis
  auto mix_bytes = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, v] : items_) {
    mix_bytes(name.data(), name.size());
    for (int d : v->value.shape) mix_bytes(&d, sizeof(d));
    for (double x : v->value.data) {
      uint64_t bits;
      std::memcpy(&bits, &x, sizeof(bits));
      mix_bytes(&bits, sizeof(bits));
    }
  }
  return h;
}

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  double std = std::sqrt(2.0 / fan_in);
  for (auto& v : t.data) v = rng.gauss(0.0, std);
  return t;
}

Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  double lim = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-lim, lim);
  return t;
}

Sgd::Sgd(std::vector<Var> params, SgdConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.push_back(Tensor::zeros(p->value.shape));
}

void Sgd::step() {
  for (size_t k = 0; k < params_.size(); ++k) {
    ad::Node& p = *params_[k];
    Tensor& v = velocity_[k];
    bool has_g = p.grad_defined;
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      double g = has_g ? p.grad[i] : 0.0;
      g += cfg_.weight_decay * p.value[i];
      v[i] = cfg_.momentum * v[i] + g;
      p.value[i] -= cfg_.lr * v[i];
    }
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

// ---------------------------------------------------------------------------

Linear Linear::create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
  Linear l;
  l.w = ps.add(prefix + ".w", he_normal({out, in}, in, rng));
  l.b = ps.add(prefix + ".b", Tensor::zeros({out}));
  return l;
}

Var Linear::operator()(const Var& x, bool live) const {
  if (live) return ad::affine(w, x, b);
  return ad::affine(ad::detach(w), x, ad::detach(b));
}

Var Linear::rows(const Var& x, bool live) const {
  if (live) return ad::linear_rows(x, w, b);
  return ad::linear_rows(x, ad::detach(w), ad::detach(b));
}

Conv2d Conv2d::create(ParamStore& ps, const std::string& prefix, int in_ch, int out_ch,
                      int k, int stride, int pad, Rng& rng) {
  Conv2d c;
  c.w = ps.add(prefix + ".w", he_normal({out_ch, in_ch, k, k}, in_ch * k * k, rng));
  c.b = ps.add(prefix + ".b", Tensor::zeros({out_ch}));
  c.stride = stride;
  c.pad = pad;
  return c;
}

Var Conv2d::operator()(const Var& x, bool live) const {
  if (live) return ad::conv2d(x, w, b, stride, pad);
  return ad::conv2d(x, ad::detach(w), ad::detach(b), stride, pad);
}

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& prefix, int dim) {
  LayerNorm ln;
  ln.gamma = ps.add(prefix + ".gamma", Tensor::full({dim}, 1.0));
  ln.beta = ps.add(prefix + ".beta", Tensor::zeros({dim}));
  return ln;
}

Var LayerNorm::rows(const Var& x, bool live) const {
  if (live) return ad::layer_norm_rows(x, gamma, beta);
  return ad::layer_norm_rows(x, ad::detach(gamma), ad::detach(beta));
}

}  // namespace ekdc::nn
