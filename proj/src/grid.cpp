#include "entropy_decay/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace entropy_decay {

namespace {

// Largest integer k >= -1 with k*h strictly below w.
int strict_reach(double w, double h) {
  if (!(w > 0.0)) return -1;
  int k = static_cast<int>(std::floor(w / h));
  while (k >= 0 && k * h >= w) --k;
  while ((k + 1) * h < w) ++k;
  return k;
}

// Index range [a, b] of cells whose centers lie strictly inside (lo, hi).
void center_range(double origin, double h, double lo, double hi, int& a, int& b) {
  a = static_cast<int>(std::floor((lo - origin) / h));
  while (origin + (a + 0.5) * h <= lo) ++a;
  while (origin + (a - 0.5) * h > lo) --a;
  b = static_cast<int>(std::floor((hi - origin) / h));
  while (origin + (b + 0.5) * h >= hi) --b;
  while (origin + (b + 1.5) * h < hi) ++b;
}

}  // namespace

GridFunction GridFunction::zeros(int dim, const VecN& origin, double h,
                                 std::array<int, 2> extents) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("GridFunction: dim must be 1 or 2");
  if (!(h > 0.0)) throw std::invalid_argument("GridFunction: h must be positive");
  GridFunction g;
  g.dim = dim;
  g.origin = origin;
  g.h = h;
  g.extents = extents;
  if (dim == 1) g.extents[1] = 1;
  if (g.extents[0] < 0 || g.extents[1] < 0)
    throw std::invalid_argument("GridFunction: negative extent");
  g.values.assign(size_t(g.extents[0]) * g.extents[1], 0.0);
  return g;
}

VecN GridFunction::cell_center(int i0, int i1) const {
  VecN c = VecN::zero(dim);
  c[0] = origin[0] + (i0 + 0.5) * h;
  if (dim == 2) c[1] = origin[1] + (i1 + 0.5) * h;
  return c;
}

double GridFunction::cell_volume() const { return dim == 1 ? h : h * h; }

double GridFunction::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double GridFunction::mass() const {
  double s = 0.0, c = 0.0;
  for (double v : values) {
    double y = v - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s * cell_volume();
}

double GridFunction::l1() const {
  double s = 0.0, c = 0.0;
  for (double v : values) {
    double y = std::abs(v) - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s * cell_volume();
}

IndexBox GridFunction::support_box() const {
  IndexBox b;
  b.lo = {extents[0], extents[1]};
  b.hi = {-1, -1};
  for (int i1 = 0; i1 < extents[1]; ++i1)
    for (int i0 = 0; i0 < extents[0]; ++i0)
      if (at(i0, i1) != 0.0) {
        b.lo[0] = std::min(b.lo[0], i0);
        b.lo[1] = std::min(b.lo[1], i1);
        b.hi[0] = std::max(b.hi[0], i0);
        b.hi[1] = std::max(b.hi[1], i1);
      }
  return b;
}

WindowShape WindowShape::ball(double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("WindowShape: ball radius must be positive");
  WindowShape w;
  w.kind = Kind::kBall;
  w.radius = rho;
  return w;
}

WindowShape WindowShape::box(const VecN& lo, const VecN& hi) {
  WindowShape w;
  w.kind = Kind::kBox;
  w.box_lo = lo;
  w.box_hi = hi;
  if (lo.dim != hi.dim) throw std::invalid_argument("WindowShape: corner dims differ");
  for (int d = 0; d < lo.dim; ++d)
    if (!(hi[d] > lo[d])) throw std::invalid_argument("WindowShape: empty box");
  for (int d = lo.dim; d < kMaxDim; ++d) {
    w.box_lo.v[d] = lo[lo.dim - 1];
    w.box_hi.v[d] = hi[hi.dim - 1];
  }
  return w;
}

double WindowShape::inradius(int dim) const {
  if (kind == Kind::kBall) return radius;
  double r = std::numeric_limits<double>::infinity();
  for (int d = 0; d < dim; ++d) r = std::min(r, 0.5 * (box_hi[d] - box_lo[d]));
  return r;
}

double WindowShape::circumradius(int dim) const {
  if (kind == Kind::kBall) return radius;
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    double e = std::max(std::abs(box_lo[d]), std::abs(box_hi[d]));
    s += e * e;
  }
  return std::sqrt(s);
}

double WindowShape::volume(int dim) const {
  if (kind == Kind::kBall)
    return dim == 1 ? 2.0 * radius : 3.14159265358979323846 * radius * radius;
  double v = 1.0;
  for (int d = 0; d < dim; ++d) v *= box_hi[d] - box_lo[d];
  return v;
}

bool WindowShape::contains(const VecN& p, int dim, double shrink) const {
  if (kind == Kind::kBall) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += p[d] * p[d];
    double r = radius - shrink;
    return r > 0.0 && s < r * r;
  }
  for (int d = 0; d < dim; ++d)
    if (!(p[d] > box_lo[d] + shrink && p[d] < box_hi[d] - shrink)) return false;
  return true;
}

double l1_over(const GridFunction& u, const WindowShape& window, const VecN& center) {
  if (u.values.empty()) return 0.0;
  const int n0 = u.extents[0], n1 = u.extents[1];
  double sum = 0.0;
  for (int i1 = 0; i1 < n1; ++i1) {
    double lo = 0.0, hi = 0.0;
    if (window.kind == WindowShape::Kind::kBall) {
      double half = window.radius;
      if (u.dim == 2) {
        const double dy = u.origin[1] + (i1 + 0.5) * u.h - center[1];
        const double rem = window.radius * window.radius - dy * dy;
        if (rem <= 0.0) continue;
        half = std::sqrt(rem);
      }
      lo = center[0] - half;
      hi = center[0] + half;
    } else {
      if (u.dim == 2) {
        const double y = u.origin[1] + (i1 + 0.5) * u.h;
        if (!(y > center[1] + window.box_lo[1] && y < center[1] + window.box_hi[1]))
          continue;
      }
      lo = center[0] + window.box_lo[0];
      hi = center[0] + window.box_hi[0];
    }
    int a, b;
    center_range(u.origin[0], u.h, lo, hi, a, b);
    a = std::max(a, 0);
    b = std::min(b, n0 - 1);
    for (int i0 = a; i0 <= b; ++i0) sum += std::abs(u.at(i0, i1));
  }
  return sum * u.cell_volume();
}

namespace {

// Aligned scan: centers at cell centers shifted by frac*h per axis.  Every
// cell/center offset is (integer + frac) * h, evaluated in index space, so
// the result is invariant under translations of the whole grid.
double v_norm_aligned(const GridFunction& u, const WindowShape& window,
                      const std::array<double, 2>& frac) {
  const int n0 = u.extents[0], n1 = u.extents[1];
  const IndexBox sup = u.support_box();
  if (sup.empty()) return 0.0;

  const int pad0 = static_cast<int>(std::ceil(window.circumradius(u.dim) / u.h)) + 2;
  const int pad1 = u.dim == 2 ? pad0 : 0;
  const double h = u.h;

  std::vector<double> prefix(size_t(n1) * (n0 + 1), 0.0);
  for (int i1 = 0; i1 < n1; ++i1) {
    double acc = 0.0;
    for (int i0 = 0; i0 < n0; ++i0) {
      acc += std::abs(u.at(i0, i1));
      prefix[size_t(i1) * (n0 + 1) + i0 + 1] = acc;
    }
  }
  auto row_sum = [&](int i1, int a, int b) -> double {  // inclusive [a, b]
    a = std::max(a, 0);
    b = std::min(b, n0 - 1);
    if (b < a) return 0.0;
    return prefix[size_t(i1) * (n0 + 1) + b + 1] - prefix[size_t(i1) * (n0 + 1) + a];
  };

  // Cell j is admissible along axis 0 iff (j - c0 - frac0)*h lies in the
  // window section: left reach uses width - frac0*h, right reach width +
  // frac0*h (strictly, in exact index arithmetic).
  double best = 0.0;
  for (int c1 = sup.lo[1] - pad1; c1 <= sup.hi[1] + pad1; ++c1) {
    for (int c0 = sup.lo[0] - pad0; c0 <= sup.hi[0] + pad0; ++c0) {
      double total = 0.0;
      if (window.kind == WindowShape::Kind::kBall) {
        if (u.dim == 1) {
          const int kl = strict_reach(window.radius - frac[0] * h, h);
          const int kr = strict_reach(window.radius + frac[0] * h, h);
          total = row_sum(0, c0 - kl, c0 + kr);
        } else {
          const int kspan = static_cast<int>(std::ceil(window.radius / h)) + 2;
          for (int dj = -kspan; dj <= kspan; ++dj) {
            const int i1 = c1 + dj;
            if (i1 < 0 || i1 >= n1) continue;
            const double dy = (dj - frac[1]) * h;
            const double rem = window.radius * window.radius - dy * dy;
            if (rem <= 0.0) continue;
            const double half = std::sqrt(rem);
            const int kl = strict_reach(half - frac[0] * h, h);
            const int kr = strict_reach(half + frac[0] * h, h);
            total += row_sum(i1, c0 - kl, c0 + kr);
          }
        }
      } else {
        int j1lo = 0, j1hi = 0;
        if (u.dim == 2) {
          j1lo = -strict_reach(-window.box_lo[1] - frac[1] * h, h);
          j1hi = strict_reach(window.box_hi[1] + frac[1] * h, h);
        }
        const int kl = strict_reach(-window.box_lo[0] - frac[0] * h, h);
        const int kr = strict_reach(window.box_hi[0] + frac[0] * h, h);
        for (int dj = j1lo; dj <= j1hi; ++dj) {
          const int i1 = c1 + dj;
          if (i1 < 0 || i1 >= n1) continue;
          total += row_sum(i1, c0 - kl, c0 + kr);
        }
      }
      best = std::max(best, total);
    }
  }
  return best * u.cell_volume();
}

}  // namespace

double v_norm(const GridFunction& u, const WindowShape& window, double stride) {
  if (u.values.empty()) return 0.0;
  if (stride <= 0.0 || stride == u.h)
    return v_norm_aligned(u, window, {0.0, 0.0});

  const double sub = u.h / stride;
  const int k = static_cast<int>(std::lround(sub));
  if (k >= 1 && std::abs(sub - k) < 1e-9) {
    double best = 0.0;
    for (int a0 = 0; a0 < k; ++a0) {
      const double f0 = double(a0) / k;
      if (u.dim == 1) {
        best = std::max(best, v_norm_aligned(u, window, {f0, 0.0}));
      } else {
        for (int a1 = 0; a1 < k; ++a1)
          best = std::max(best, v_norm_aligned(u, window, {f0, double(a1) / k}));
      }
    }
    return best;
  }

  const IndexBox sup = u.support_box();
  if (sup.empty()) return 0.0;
  const double pad = window.circumradius(u.dim) + stride;
  const double lo0 = u.origin[0] + sup.lo[0] * u.h - pad;
  const double hi0 = u.origin[0] + (sup.hi[0] + 1) * u.h + pad;
  double best = 0.0;
  if (u.dim == 1) {
    for (double y = lo0; y <= hi0; y += stride)
      best = std::max(best, l1_over(u, window, VecN(y)));
  } else {
    const double lo1 = u.origin[1] + sup.lo[1] * u.h - pad;
    const double hi1 = u.origin[1] + (sup.hi[1] + 1) * u.h + pad;
    for (double y1 = lo1; y1 <= hi1; y1 += stride)
      for (double y0 = lo0; y0 <= hi0; y0 += stride)
        best = std::max(best, l1_over(u, window, VecN(y0, y1)));
  }
  return best;
}

double x_norm(const GridFunction& u, double stride) {
  return v_norm(u, WindowShape::ball(1.0), stride);
}

}  // namespace entropy_decay
