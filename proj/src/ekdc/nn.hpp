#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ekdc/autodiff.hpp"
#include "ekdc/rng.hpp"
#include "ekdc/tensor.hpp"

namespace ekdc::nn {

using ad::Var;

// Named collection of trainable leaves. Registration order is stable and is
// the serialization order for checkpoints.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init);
  Var get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, Var>>& entries() const { return items_; }
  int64_t param_count() const;
  void zero_grad();
  // Hash of names, shapes, and value bit patterns; used to prove a module's
  // weights never moved.
  uint64_t checksum() const;

 private:
  std::vector<std::pair<std::string, Var>> items_;
  std::unordered_map<std::string, size_t> index_;
};

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng);
Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng);

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// SGD with classical momentum: v = mu*v + (g + wd*p); p -= lr*v.
class Sgd {
 public:
  Sgd(std::vector<Var> params, SgdConfig cfg);
  void step();
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> velocity_;
  SgdConfig cfg_;
};

// ---------------------------------------------------------------------------
// Small layer wrappers. `live` selects the real parameter leaves; passing
// false substitutes detached copies so the pass contributes nothing to
// parameter gradients (used by the attribution side pass).

struct Linear {
  Var w, b;  // w (out,in), b (out)
  static Linear create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng);
  Var operator()(const Var& x, bool live = true) const;  // x (in) -> (out)
  Var rows(const Var& x, bool live = true) const;        // x (T,in) -> (T,out)
};

struct Conv2d {
  Var w, b;  // w (out,in,k,k), b (out)
  int stride = 1;
  int pad = 0;
  static Conv2d create(ParamStore& ps, const std::string& prefix, int in_ch, int out_ch,
                       int k, int stride, int pad, Rng& rng);
  Var operator()(const Var& x, bool live = true) const;  // x (C,H,W)
};

struct LayerNorm {
  Var gamma, beta;
  static LayerNorm create(ParamStore& ps, const std::string& prefix, int dim);
  Var rows(const Var& x, bool live = true) const;  // x (T,D)
};

}  // namespace ekdc::nn
