// Cell-centered grid functions on uniform boxes and the sliding-window norm
// family: ||u||_V = sup over centers y of the L1 integral of |u| over the
// window V translated to y.  The X-norm is the V-norm with the unit ball.
//
// Window overlap uses cell-center membership (a cell is in or out, no partial
// volumes), so every sum is an exact h^n-weighted prefix sum.  Scan centers
// default to the cell centers themselves; all center/cell offsets are then
// integer multiples of h and the computed norm is invariant under
// grid-commensurate shifts bit for bit.

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "entropy_decay/small_linalg.hpp"

namespace entropy_decay {

struct IndexBox {
  std::array<int, 2> lo{0, 0};
  std::array<int, 2> hi{-1, -1};  // inclusive; lo > hi means empty
  bool empty() const { return hi[0] < lo[0] || hi[1] < lo[1]; }
};

struct GridFunction {
  int dim = 1;
  VecN origin = VecN::zero(1);  // corner of cell (0,0)
  double h = 1.0;
  std::array<int, 2> extents{0, 1};  // cells per axis; extents[1] == 1 in 1D
  std::vector<double> values;        // row-major: index = i1*extents[0] + i0

  static GridFunction zeros(int dim, const VecN& origin, double h,
                            std::array<int, 2> extents);

  double& at(int i0, int i1 = 0) { return values[size_t(i1) * extents[0] + i0]; }
  double at(int i0, int i1 = 0) const { return values[size_t(i1) * extents[0] + i0]; }
  VecN cell_center(int i0, int i1 = 0) const;
  size_t size() const { return values.size(); }
  double cell_volume() const;

  double max_abs() const;
  double mass() const;  // h^n * sum of values
  double l1() const;    // h^n * sum of |values|
  IndexBox support_box() const;
};

struct WindowShape {
  enum class Kind { kBall, kBox };
  Kind kind = Kind::kBall;
  double radius = 1.0;             // ball
  VecN box_lo = VecN::zero(2);     // box: open product interval (lo, hi)
  VecN box_hi = VecN::zero(2);

  static WindowShape ball(double rho);
  static WindowShape box(const VecN& lo, const VecN& hi);

  double inradius(int dim) const;
  double circumradius(int dim) const;
  double volume(int dim) const;
  // Open membership of the offset p relative to the window center, with the
  // window shrunk inward by `shrink` (used for net-based covering proofs).
  bool contains(const VecN& p, int dim, double shrink = 0.0) const;
};

// L1 integral of |u| over the window placed at `center`; cell-center
// membership, arbitrary real center.
double l1_over(const GridFunction& u, const WindowShape& window, const VecN& center);

// Sliding-window norm.  stride == 0 selects the aligned fast path (centers at
// cell centers, exact integer offset arithmetic).  A positive stride scans a
// center grid of that pitch; stride = h/k with integer k keeps the exact
// offset arithmetic through sub-cell offset classes.
double v_norm(const GridFunction& u, const WindowShape& window, double stride = 0.0);

double x_norm(const GridFunction& u, double stride = 0.0);

}  // namespace entropy_decay
