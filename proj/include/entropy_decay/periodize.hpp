// Periodization of compactly supported initial data over a scaled lattice rL:
// the envelope functions v_r^+/v_r^- (sup/inf over lattice shifts), their
// majorant V_r and means, the mean bound M_r <= C0*p/|P_r| + eps, and the
// shifted periodic data u_r^+/u_r^- whose means are moved onto the flux
// nonlinearity set.

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "entropy_decay/flux.hpp"
#include "entropy_decay/grid.hpp"
#include "entropy_decay/lattice.hpp"

namespace entropy_decay {

// Values on the unit torus in lattice coordinates: x = r * A * y, y in [0,1)^n,
// stored cell-centered on an n_cells^dim grid.  Physical cells all share the
// same volume r^n |det A| / N, so the P_r mean is the plain value average.
struct PeriodicGridFunction {
  Lattice lattice;
  double r = 1.0;
  int dim = 1;
  std::array<int, 2> n_cells{0, 1};
  std::vector<double> values;

  static PeriodicGridFunction zeros(const Lattice& L, double r,
                                    std::array<int, 2> n_cells);

  double& at(int i0, int i1 = 0) { return values[size_t(i1) * n_cells[0] + i0]; }
  double at(int i0, int i1 = 0) const {
    return values[size_t(i1) * n_cells[0] + i0];
  }
  VecN torus_center(int i0, int i1 = 0) const;     // y in [0,1)^n
  VecN physical_center(int i0, int i1 = 0) const;  // x = r A y
  // Nearest-cell lookup after reduction to the fundamental cell.
  double eval_physical(const VecN& x) const;
  double mean() const;
  double max_abs() const;
};

struct SuperlevelTable {
  std::vector<double> lambdas;   // ascending
  std::vector<double> measures;  // meas{|u0| > lambda}, exact cell counting
  double at(double lambda) const;  // measure at the nearest tabulated lambda
};

// Superlevel-set measures of |u0| on the given lambda grid.
SuperlevelTable admissibility(const GridFunction& u0,
                              const std::vector<double>& lambda_grid);

struct EnvelopeReport {
  PeriodicGridFunction v_plus, v_minus, v_abs;  // v_abs = max(v_plus, -v_minus)
  double M_r = 0.0;        // mean of v_abs
  double M_r_plus = 0.0;   // mean of v_plus
  double M_r_minus = 0.0;  // mean of v_minus
  double C0 = 0.0;         // max |u0|
  double cell_volume = 0.0;  // |P_r|
  double eps = 0.0;        // superlevel threshold used for the mean bound
  double p = 0.0;          // meas{|u0| > eps}
};

// Build the lattice-shift envelopes of u0 on the torus grid for rL.  The
// torus resolution is chosen so the physical cell diameter does not exceed
// the h of u0 (override with n_cells_hint > 0); u0 is sampled by containing
// cell, so envelope values at shared sample points dominate u0 exactly.
// eps defaults to 0.05 * C0 rounded to the lambda grid used for p.
EnvelopeReport envelopes(const GridFunction& u0, const Lattice& L, double r,
                         int n_cells_hint = 0, double eps = -1.0);

struct MrBoundVerdict {
  bool ok = false;
  double m_r = 0.0;
  double bound = 0.0;  // C0 * p / |P_r| + eps + tolerance
  double tolerance = 0.0;
};

// Check M_r <= C0*p/|P_r| + eps + grid tolerance for a single report.
MrBoundVerdict mr_bound_check(const EnvelopeReport& report, double grid_tol = 0.0);

// Means along a doubling r-schedule must be nonincreasing (within tol) and
// head toward 0; returns the means in schedule order.
std::vector<double> mr_chain(const GridFunction& u0, const Lattice& L,
                             const std::vector<double>& r_schedule);

struct ShiftedData {
  PeriodicGridFunction u_plus, u_minus;
  double B_plus = 0.0;
  double B_minus = 0.0;
};

// u_r^+ = v_r^+ - M_r^+ + B_r^+ and mirrored for minus, with B_r^+/- chosen
// from the nonlinearity set at or beyond the means.  Fails (nullopt) exactly
// when select_B finds no admissible value on either side.
std::optional<ShiftedData> shifted_periodic_data(const EnvelopeReport& report,
                                                 const std::vector<Interval>& F,
                                                 double eps_floor = kEpsFloor);

// Drop cells with |value| <= threshold outside the given radius around the
// origin; bridges decaying tails to the compact-support requirement.
GridFunction truncate_tails(const GridFunction& u, double threshold, double radius);

}  // namespace entropy_decay
