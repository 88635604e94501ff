// Monotone finite-volume evolution for scalar conservation laws in 1D/2D on
// outflow boxes and lattice tori, driven by piecewise-linear flux tables.
//
// The update is evaluated in monotone form: per axis, the numerical flux is
// split into nondecreasing one-sided parts tabulated at the flux nodes, every
// table lookup is clamped into its segment's value range, and the updated
// cell is clamped into the hull of its stencil.  Together these make the
// discrete maximum principle, comparison of ordered runs, and constant
// preservation hold exactly in floating point, not just up to rounding.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "entropy_decay/flux.hpp"
#include "entropy_decay/grid.hpp"
#include "entropy_decay/lattice.hpp"
#include "entropy_decay/periodize.hpp"

namespace entropy_decay {

// Raised on CFL violations and solver aborts; mapped to exit code 4 by the CLI.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FluxTable {
  std::vector<double> nodes;   // ascending, span the data range
  std::vector<double> vals;    // flux at nodes, shifted so the value at u=0 is 0
  std::vector<double> slopes;  // chord slopes, size nodes-1
  double max_abs_slope = 0.0;
  double max_interp_error = 0.0;  // sampled against the exact flux

  double eval(double u) const;  // clamped to the end nodes outside the range
  int segment(double u) const;
};

// Tabulate one flux component over [u_min, u_max]: nodes are the affine
// structure points inside the range, 0, and a uniform refinement of n_points
// nodes.  The interpolation error is sampled at interior points per segment.
FluxTable tabulate_flux(const FluxSpec& phi, int component, double u_min,
                        double u_max, int n_points);

enum class NumericalFlux { kLaxFriedrichs, kEngquistOsher };

struct SchemeConfig {
  NumericalFlux flux = NumericalFlux::kLaxFriedrichs;
  double cfl = 0.45;      // in (0, 0.5]
  int table_points = 1025;
  // Optional shared tabulation range (used when lo < hi); auto-sized from the
  // data and 0 otherwise.  Runs that must compare exactly share this range.
  double range_lo = 0.0;
  double range_hi = 0.0;
  void validate() const;
};

// One evolution problem: a grid state plus the per-axis tables and step size.
// Box domains use copy (outflow) boundaries and track the active support
// window; torus domains wrap.  dt is fixed from the CFL condition at
// construction; advance_to lands exactly on the requested time with one
// shorter final step.
class FvRun {
 public:
  // Box problem in physical coordinates.
  FvRun(const FluxSpec& phi, const GridFunction& u0, const SchemeConfig& scheme);
  // Torus problem in lattice coordinates y on [0,1)^n (x = r A y): evolves
  // the transformed flux psi = (1/r) A^{-1} phi with physical time steps.
  FvRun(const FluxSpec& phi, const PeriodicGridFunction& u0,
        const SchemeConfig& scheme);

  void advance_to(double t);
  void step(double dt_step);

  double time() const { return time_; }
  double dt() const { return dt_; }
  const GridFunction& state() const { return state_; }
  GridFunction box_state() const;  // box runs: the state as stored
  PeriodicGridFunction torus_state() const;  // torus runs: wrap the grid back
  bool periodic() const { return periodic_; }
  // Index bounds of the possibly nonzero cells (the whole grid on tori).
  IndexBox window() const { return window_; }
  double mass() const;
  const std::vector<FluxTable>& tables() const { return tables_; }

  // Numerical flux F_d(a, b) across a face along axis d, as used by step().
  double numerical_flux(int axis, double a, double b) const;

 private:
  void init(const FluxSpec& phi, const SchemeConfig& scheme, double u_lo,
            double u_hi);
  void rebuild_step_tables(double dt_step);

  GridFunction state_;
  double time_ = 0.0;
  double dt_ = 0.0;
  bool periodic_ = false;
  SchemeConfig scheme_;
  std::vector<FluxTable> tables_;  // one per axis

  // Monotone split tables at the flux nodes (Lax-Friedrichs: alpha*u +/- f;
  // Engquist-Osher: cumulative slope-sign splits and the diagonal part).
  struct AxisTables {
    double alpha = 0.0;
    double lambda = 0.0;      // dt_step / h
    size_t zero_node = 0;     // index of the exact u=0 node
    std::vector<double> g_plus, g_minus;   // LF
    std::vector<double> f_plus, f_minus;   // EO splits
    std::vector<double> diag;              // EO: u - lambda*(f_plus - f_minus)
  };
  std::vector<AxisTables> axes_;
  double diag_coef_ = 0.0;  // LF: 1 - sum_d lambda_d alpha_d
  double tables_dt_ = -1.0;

  // Torus bookkeeping.
  Lattice lattice_;
  double r_ = 1.0;

  // Box active window (index bounds of possibly nonzero cells).
  IndexBox window_;
  std::vector<double> scratch_;  // next-state buffer, zero outside the window
};

// Order-preservation check: evolve both states with the same scheme and
// grid, asserting cellwise u <= v after every step.
struct ComparisonVerdict {
  bool ok = true;
  int first_step = -1;
  std::array<int, 2> first_cell{-1, -1};
};
ComparisonVerdict compare_runs(const FluxSpec& phi, const GridFunction& u0,
                               const GridFunction& v0, const SchemeConfig& scheme,
                               double T);

// Max over cells of the discrete entropy production
//   |next - k| - |prev - k| + sum_d lambda_d (Q_d(right face) - Q_d(left face))
// with Q the numerical entropy flux Q(a,b) = F(a max k, b max k) - F(a min k,
// b min k); nonpositive (up to roundoff) when next = step(prev).
double entropy_residual(const FvRun& run, const GridFunction& prev,
                        const GridFunction& next, double k, double dt_step);

// Exact variational solution for convex 1D fluxes, used as an oracle.  The
// candidate minimizers are the kinks of the piecewise-linear objective, so
// the minimization is exact for the tabulated flux; affine tables take the
// pure transport path.  Throws std::invalid_argument for nonconvex tables.
double hopf_lax_1d(const FluxTable& f, const GridFunction& u0, double t, double x);
GridFunction hopf_lax_grid(const FluxTable& f, const GridFunction& u0, double t,
                           const GridFunction& layout);

// u(t, x) = u0(x - t c): exact shifted evaluation (the grid origin moves, the
// values do not), so grid norms are preserved bit for bit.
GridFunction traveling_wave(const GridFunction& u0, const VecN& c, double t);

// Transformed flux for rL-periodic problems: psi = (1/r) A^{-1} phi, built
// symbolically so its affine structure stays available.
FluxSpec torus_flux(const FluxSpec& phi, const Lattice& L, double r);

}  // namespace entropy_decay
