#pragma once

// Fixed-capacity vectors and matrices for 1- and 2-dimensional geometry.

#include <array>
#include <cmath>
#include <stdexcept>

namespace entropy_decay {

inline constexpr int kMaxDim = 2;

struct VecN {
  int dim = 1;
  std::array<double, kMaxDim> v{0.0, 0.0};

  VecN() = default;
  explicit VecN(double x) : dim(1), v{x, 0.0} {}
  VecN(double x, double y) : dim(2), v{x, y} {}
  static VecN zero(int dim) {
    VecN z;
    z.dim = dim;
    return z;
  }

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }

  VecN operator+(const VecN& o) const {
    VecN r = *this;
    for (int i = 0; i < dim; ++i) r.v[i] += o.v[i];
    return r;
  }
  VecN operator-(const VecN& o) const {
    VecN r = *this;
    for (int i = 0; i < dim; ++i) r.v[i] -= o.v[i];
    return r;
  }
  VecN operator*(double s) const {
    VecN r = *this;
    for (int i = 0; i < dim; ++i) r.v[i] *= s;
    return r;
  }

  double dot(const VecN& o) const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += v[i] * o.v[i];
    return s;
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  double norm_inf() const {
    double m = 0.0;
    for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(v[i]));
    return m;
  }
};

inline VecN operator*(double s, const VecN& x) { return x * s; }

// Column-major square matrix of dimension 1 or 2.
struct MatN {
  int dim = 1;
  std::array<double, kMaxDim * kMaxDim> m{1.0, 0.0, 0.0, 0.0};

  static MatN identity(int dim) {
    MatN a;
    a.dim = dim;
    a.m = {1.0, 0.0, 0.0, 0.0};
    if (dim == 2) a.m[3] = 1.0;
    return a;
  }

  double& at(int i, int j) { return m[j * kMaxDim + i]; }
  double at(int i, int j) const { return m[j * kMaxDim + i]; }

  VecN column(int j) const {
    VecN c = VecN::zero(dim);
    for (int i = 0; i < dim; ++i) c[i] = at(i, j);
    return c;
  }
  void set_column(int j, const VecN& c) {
    for (int i = 0; i < dim; ++i) at(i, j) = c[i];
  }

  VecN apply(const VecN& x) const {
    VecN y = VecN::zero(dim);
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) y[i] += at(i, j) * x[j];
    return y;
  }

  double det() const {
    if (dim == 1) return at(0, 0);
    return at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
  }

  MatN transpose() const {
    MatN t = *this;
    if (dim == 2) std::swap(t.at(0, 1), t.at(1, 0));
    return t;
  }

  MatN inverse() const {
    const double d = det();
    if (d == 0.0) throw std::domain_error("MatN::inverse: singular matrix");
    MatN r;
    r.dim = dim;
    if (dim == 1) {
      r.at(0, 0) = 1.0 / d;
      return r;
    }
    r.at(0, 0) = at(1, 1) / d;
    r.at(1, 1) = at(0, 0) / d;
    r.at(0, 1) = -at(0, 1) / d;
    r.at(1, 0) = -at(1, 0) / d;
    return r;
  }

  MatN scaled(double s) const {
    MatN r = *this;
    for (auto& x : r.m) x *= s;
    return r;
  }
};

}  // namespace entropy_decay
