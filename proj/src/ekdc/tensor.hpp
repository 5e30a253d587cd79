#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace ekdc {

// Dense row-major tensor of doubles. Rank is the size of `shape`; scalars are
// stored as shape {1}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor from_vector(const std::vector<double>& v) {
    return Tensor({static_cast<int>(v.size())}, v);
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // Flat index helpers for the common ranks.
  int64_t idx2(int i, int j) const { return static_cast<int64_t>(i) * shape[1] + j; }
  int64_t idx3(int c, int h, int w) const {
    return (static_cast<int64_t>(c) * shape[1] + h) * shape[2] + w;
  }

  double& at2(int i, int j) { return data[static_cast<size_t>(idx2(i, j))]; }
  double at2(int i, int j) const { return data[static_cast<size_t>(idx2(i, j))]; }
  double& at3(int c, int h, int w) { return data[static_cast<size_t>(idx3(c, h, w))]; }
  double at3(int c, int h, int w) const { return data[static_cast<size_t>(idx3(c, h, w))]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const;
};

bool all_finite(const Tensor& t);

}  // namespace ekdc
