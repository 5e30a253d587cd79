#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "ekdc/autodiff.hpp"
#include "ekdc/errors.hpp"
#include "ekdc/rng.hpp"
#include "ekdc/tensor.hpp"

using ekdc::Rng;
using ekdc::Tensor;
using namespace ekdc::ad;

namespace {

double rel_err(double got, double want) {
  double m = std::max(std::fabs(got), std::fabs(want));
  return std::fabs(got - want) / std::max(m, 1e-6);
}

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Largest relative gap between tape gradients and central differences, over
// every element of every leaf. `build` must rebuild the graph from the same
// leaves so value perturbations take effect.
double max_fd_gap(const std::vector<Var>& leaves, const std::function<Var()>& build,
                  double eps = 1e-5) {
  for (const auto& l : leaves) l->zero_grad();
  Var root = build();
  backward(root);
  std::vector<Tensor> grads;
  for (const auto& l : leaves) {
    REQUIRE(l->grad_defined);
    grads.push_back(l->grad);
  }
  double worst = 0.0;
  NoGradGuard ng;
  for (size_t k = 0; k < leaves.size(); ++k) {
    for (int64_t i = 0; i < leaves[k]->value.numel(); ++i) {
      double orig = leaves[k]->value[i];
      leaves[k]->value[i] = orig + eps;
      double fp = build()->value[0];
      leaves[k]->value[i] = orig - eps;
      double fm = build()->value[0];
      leaves[k]->value[i] = orig;
      double fd = (fp - fm) / (2.0 * eps);
      worst = std::max(worst, rel_err(grads[k][i], fd));
    }
  }
  return worst;
}

// Weighted sum against a fixed random tensor, so every output element gets a
// distinct upstream gradient.
Var pin(const Var& x, const Tensor& weights) {
  return sum(mul(x, constant(weights)));
}

}  // namespace

TEST_CASE("elementwise ops match central differences") {
  Rng rng(41);
  auto a = leaf(rand_tensor({2, 3}, rng, 0.2, 1.0));  // keep relu away from its kink
  auto b = leaf(rand_tensor({2, 3}, rng, 0.2, 1.0));
  auto c = leaf(rand_tensor({2, 3}, rng, -1.0, -0.2));
  Tensor w = rand_tensor({2, 3}, rng);
  auto build = [&]() {
    Var lhs = relu(add(a, b));
    Var rhs = exp_(scale(sub(a, c), 0.5));
    return pin(mul(lhs, neg(rhs)), w);
  };
  CHECK(max_fd_gap({a, b, c}, build) < 1e-6);
}

TEST_CASE("scalar broadcast multiply") {
  Rng rng(42);
  auto s = leaf(Tensor::scalar(0.7));
  auto x = leaf(rand_tensor({5}, rng));
  Tensor w = rand_tensor({5}, rng);
  auto build = [&]() { return pin(scalar_mul(s, x), w); };
  CHECK(max_fd_gap({s, x}, build) < 1e-6);
}

TEST_CASE("shape ops match central differences") {
  Rng rng(43);
  auto m = leaf(rand_tensor({2, 3}, rng));
  auto u = leaf(rand_tensor({3}, rng));
  auto v = leaf(rand_tensor({4}, rng));
  Tensor w = rand_tensor({5}, rng);
  std::vector<int> idx = {0, 2, 2, 6, 1};  // duplicates exercise scatter-add
  auto build = [&]() {
    Var flat = reshape(transpose2(m), {6});
    Var joined = concat({flat, u, v});  // 13 entries
    return pin(gather(joined, idx), w);
  };
  CHECK(max_fd_gap({m, u, v}, build) < 1e-6);
}

TEST_CASE("dot and gap match central differences") {
  Rng rng(44);
  auto a = leaf(rand_tensor({6}, rng));
  auto b = leaf(rand_tensor({6}, rng));
  auto fm = leaf(rand_tensor({3, 4, 5}, rng));
  Tensor w = rand_tensor({3}, rng);
  auto build = [&]() { return add(dot(a, b), pin(gap(fm), w)); };
  CHECK(max_fd_gap({a, b, fm}, build) < 1e-6);
}

TEST_CASE("matrix products match central differences") {
  Rng rng(45);
  auto A = leaf(rand_tensor({3, 4}, rng));
  auto B = leaf(rand_tensor({4, 2}, rng));
  Tensor wm = rand_tensor({3, 2}, rng);
  auto build_mm = [&]() { return pin(matmul(A, B), wm); };
  CHECK(max_fd_gap({A, B}, build_mm) < 1e-6);

  auto W = leaf(rand_tensor({4, 3}, rng));
  auto x = leaf(rand_tensor({3}, rng));
  auto b = leaf(rand_tensor({4}, rng));
  Tensor wa = rand_tensor({4}, rng);
  auto build_aff = [&]() { return pin(affine(W, x, b), wa); };
  CHECK(max_fd_gap({W, x, b}, build_aff) < 1e-6);

  auto X = leaf(rand_tensor({5, 3}, rng));
  Tensor wr = rand_tensor({5, 4}, rng);
  auto build_rows = [&]() { return pin(linear_rows(X, W, b), wr); };
  CHECK(max_fd_gap({X, W, b}, build_rows) < 1e-6);
}

TEST_CASE("conv2d matches central differences") {
  Rng rng(46);
  auto x = leaf(rand_tensor({2, 5, 5}, rng));
  auto w = leaf(rand_tensor({3, 2, 3, 3}, rng));
  auto b = leaf(rand_tensor({3}, rng));

  SUBCASE("stride 1, no padding") {
    Tensor pinw = rand_tensor({3, 3, 3}, rng);
    auto build = [&]() { return pin(conv2d(x, w, b, 1, 0), pinw); };
    CHECK(max_fd_gap({x, w, b}, build) < 1e-6);
  }
  SUBCASE("stride 2 with padding") {
    Tensor pinw = rand_tensor({3, 3, 3}, rng);
    auto build = [&]() { return pin(conv2d(x, w, b, 2, 1), pinw); };
    CHECK(max_fd_gap({x, w, b}, build) < 1e-6);
  }
}

TEST_CASE("softmax heads match central differences") {
  Rng rng(47);
  auto z = leaf(rand_tensor({7}, rng, -2.0, 2.0));
  Tensor w = rand_tensor({7}, rng);
  auto build_sm = [&]() { return pin(softmax(z), w); };
  CHECK(max_fd_gap({z}, build_sm) < 1e-6);

  auto build_lse = [&]() { return logsumexp(z); };
  CHECK(max_fd_gap({z}, build_lse) < 1e-6);

  auto Z = leaf(rand_tensor({3, 5}, rng, -2.0, 2.0));
  Tensor wr = rand_tensor({3, 5}, rng);
  auto build_rows = [&]() { return pin(softmax_rows(Z), wr); };
  CHECK(max_fd_gap({Z}, build_rows) < 1e-6);
}

TEST_CASE("layer norm matches central differences") {
  Rng rng(48);
  auto x = leaf(rand_tensor({4, 6}, rng));
  auto gamma = leaf(rand_tensor({6}, rng, 0.5, 1.5));
  auto beta = leaf(rand_tensor({6}, rng));
  Tensor w = rand_tensor({4, 6}, rng);
  auto build = [&]() { return pin(layer_norm_rows(x, gamma, beta), w); };
  CHECK(max_fd_gap({x, gamma, beta}, build) < 1e-5);
}

TEST_CASE("tap exposes intermediate gradients") {
  Rng rng(49);
  Tensor v = rand_tensor({4}, rng);
  Tensor r = rand_tensor({4}, rng);

  SUBCASE("below a gradient-free constant") {
    auto c = constant(v);
    auto t = tap(c);
    Var y = dot(t, constant(r));
    backward(y);
    REQUIRE(t->grad_defined);
    for (int i = 0; i < 4; ++i) CHECK(t->grad[i] == doctest::Approx(r[i]).epsilon(1e-12));
    CHECK_FALSE(c->grad_defined);
  }
  SUBCASE("pass-through above a leaf") {
    auto l = leaf(v);
    auto t = tap(l);
    Var y = dot(t, constant(r));
    backward(y);
    REQUIRE(t->grad_defined);
    REQUIRE(l->grad_defined);
    for (int i = 0; i < 4; ++i) {
      CHECK(t->grad[i] == doctest::Approx(r[i]).epsilon(1e-12));
      CHECK(l->grad[i] == doctest::Approx(r[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("detach blocks gradient flow") {
  Rng rng(50);
  Tensor v = rand_tensor({4}, rng);
  Tensor r1 = rand_tensor({4}, rng);
  Tensor r2 = rand_tensor({4}, rng);
  auto l = leaf(v);
  Var y = add(dot(detach(l), constant(r1)), dot(l, constant(r2)));
  backward(y);
  REQUIRE(l->grad_defined);
  for (int i = 0; i < 4; ++i) CHECK(l->grad[i] == doctest::Approx(r2[i]).epsilon(1e-12));
}

TEST_CASE("detached scalar weight freezes its own path") {
  // y = sg(lam) * lam with lam = <l, r>: the gradient must be lam * r,
  // not the 2 * lam * r a fully live product would give.
  Rng rng(51);
  Tensor v = rand_tensor({4}, rng);
  Tensor r = rand_tensor({4}, rng);
  auto l = leaf(v);
  Var lam = dot(l, constant(r));
  double lam_val = lam->value[0];
  Var y = scalar_mul(detach(lam), lam);
  backward(y);
  REQUIRE(l->grad_defined);
  for (int i = 0; i < 4; ++i) {
    CHECK(l->grad[i] == doctest::Approx(lam_val * r[i]).epsilon(1e-10));
  }
}

TEST_CASE("backward seed scales and repeated calls accumulate") {
  auto l = leaf(Tensor::from_vector({1.0, 2.0, 3.0}));
  Var y1 = sum(l);
  backward(y1, 0.25);
  Var y2 = sum(l);  // fresh graph, same leaf
  backward(y2, 0.25);
  REQUIRE(l->grad_defined);
  for (int i = 0; i < 3; ++i) CHECK(l->grad[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("grad mode off builds value-only graphs") {
  auto l = leaf(Tensor::from_vector({1.0, -2.0}));
  {
    NoGradGuard ng;
    Var y = sum(relu(l));
    CHECK(y->value[0] == doctest::Approx(1.0));
    CHECK_FALSE(y->needs_grad);
    backward(y);  // no-op
  }
  CHECK_FALSE(l->grad_defined);
  CHECK(grad_enabled());
}

TEST_CASE("backward rejects non-scalar roots") {
  auto l = leaf(Tensor::from_vector({1.0, 2.0}));
  Var y = relu(l);
  CHECK_THROWS_AS(backward(y), ekdc::InvalidInput);
}

TEST_CASE("shape mismatches are rejected") {
  auto a = leaf(Tensor::zeros({2, 3}));
  auto b = leaf(Tensor::zeros({3, 2}));
  CHECK_THROWS_AS(add(a, b), ekdc::InvalidInput);
  CHECK_THROWS_AS(matmul(a, a), ekdc::InvalidInput);
  std::vector<int> bad_idx = {3};
  CHECK_THROWS_AS(gather(leaf(Tensor::zeros({3})), bad_idx), ekdc::InvalidInput);
}
