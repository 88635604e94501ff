#pragma once

// Flux models for scalar conservation laws u_t + div phi(u) = 0 with
// continuous, piecewise-structured flux phi : R -> R^n, n in {1, 2}.
//
// A flux component is built from a small expression grammar:
//   * affine maps            c*u + d
//   * signed powers          c*|u|^p*sign(u)   (parity "odd", p > 0)
//   * unsigned powers        c*|u|^p           (parity "even", p > 0)
//   * finite sums of the above
//   * piecewise combinations over strictly increasing breakpoints
//   * a dyadic piecewise-linear family with slope changes at +-2^(-k)
//
// The grammar is closed under the analysis performed here, so the set of
// maximal intervals on which the flux vector is affine (and its complement,
// the nonlinearity set) is computed exactly rather than by search.

#include <optional>
#include <variant>
#include <vector>

#include "entropy_decay/small_linalg.hpp"

namespace entropy_decay {

// Default tolerances.  tol values are relative to the local flux magnitude.
inline constexpr double kTolAffine = 1e-10;
inline constexpr double kTolCont = 1e-12;
inline constexpr double kEpsFloor = 1e-6;
inline constexpr int kSecondDifferenceSamples = 1000;
inline constexpr double kRankTol = 1e-9;

// Ladder of scales 2^-1 .. 2^-20 used by the degeneracy check.
std::vector<double> default_eps_ladder();

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  bool contains(double u) const { return u >= lo && u <= hi; }
};

enum class Parity { kOdd, kEven };

// c * |u|^p * sign(u)  (odd)  or  c * |u|^p  (even), p > 0.
struct PowerTerm {
  double coeff = 0.0;
  double exponent = 1.0;
  Parity parity = Parity::kOdd;
};

// slope*u + offset + sum of power terms.
struct SumExpr {
  double slope = 0.0;
  double offset = 0.0;
  std::vector<PowerTerm> powers;

  double eval(double u) const;
  // Merges like terms, folds odd first powers into the slope, drops
  // coefficients that cancel.
  SumExpr canonical() const;
};

// Half-open pieces [b_i, b_{i+1}) over strictly increasing breakpoints;
// pieces.size() == breakpoints.size() + 1.  Components must be continuous.
struct PiecewiseExpr {
  std::vector<double> breakpoints;
  std::vector<SumExpr> pieces;

  double eval(double u) const;
};

// Odd, continuous, piecewise-linear map with g(0) = 0 and slope
// amplitude*(-1)^k on (2^-(k+1), 2^-k) for k = 0..k_max-1, slope
// amplitude*(-1)^k_max on (0, 2^-k_max), and slope -amplitude beyond |u| = 1.
// Every +-2^-k with 0 <= k <= k_max is a genuine slope change.
struct DyadicExpr {
  int k_max = 20;
  double amplitude = 1.0;

  double eval(double u) const;
};

using ComponentExpr = std::variant<SumExpr, PiecewiseExpr, DyadicExpr>;

struct FluxSpec {
  int dim = 1;
  Interval u_range{-1.0, 1.0};  // symmetric interval of validity [-U, U]
  std::vector<ComponentExpr> components;

  // Throws std::invalid_argument on grammar violations (dimension mismatch,
  // non-increasing breakpoints, discontinuities, non-positive exponents,
  // asymmetric range).
  void validate() const;

  double eval_component(int c, double u) const;
  VecN eval(double u) const;
};

// Maximal open interval on which every component is affine, with the affine
// map phi(u) = slope*u + offset on it.
struct AffineInterval {
  Interval span;
  VecN slope;
  VecN offset;
};

// Exact affine/nonlinear decomposition of the flux over u_range.
struct AffineStructure {
  Interval u_range;
  std::vector<AffineInterval> affine;  // disjoint, sorted, maximal
  // Complement of the affine intervals: closed components, sorted; a
  // component with lo == hi is an isolated kink.  Range endpoints adjacent
  // to an affine interval are not counted as nonlinear.
  std::vector<Interval> nonlinearity;

  bool is_nonlinear_at(double u) const;
  // True when the open interval meets the nonlinearity set, i.e. the flux is
  // not affine on it.
  bool meets_nonlinearity(double lo, double hi) const;
  // Sorted distinct endpoints of affine intervals and nonlinearity
  // components, plus the range endpoints and 0.
  std::vector<double> structure_points() const;
};

AffineStructure affine_structure(const FluxSpec& phi);

// Genuine-nonlinearity verdict: the flux must not be affine on any interval
// (0, eps] or [-eps, 0) down to the smallest ladder scale.  Equivalently the
// strictly positive and negative parts of the nonlinearity set must reach
// within eps_min of zero.
struct GnVerdict {
  bool holds = false;
  double inf_f_plus = 0.0;   // +inf when the positive part is empty
  double sup_f_minus = 0.0;  // -inf when the negative part is empty
  double eps_min = 0.0;
  // On failure: a maximal affine interval flanking 0 on the failing side,
  // whose slope is the traveling-wave speed of the counterexample.
  std::optional<AffineInterval> witness;
};

GnVerdict check_gn(const AffineStructure& s,
                   const std::vector<double>& eps_ladder = default_eps_ladder());

// Directions xi such that xi . phi is affine on the interval.  Computed as
// the null space of sampled centered second differences augmented with exact
// slope-jump rows at interior kinks, using a relative rank tolerance.
struct NonlinearitySubspace {
  Interval span;
  std::vector<VecN> basis;  // orthonormal; size is the subspace dimension
  double rank_tol = kRankTol;
  int dim() const { return static_cast<int>(basis.size()); }
};

NonlinearitySubspace nonlinearity_subspace(const FluxSpec& phi,
                                           const AffineStructure& s, Interval I,
                                           int n_samples = kSecondDifferenceSamples,
                                           double rank_tol = kRankTol);

enum class Side { kPlus, kMinus };

// Smallest element of F intersected with [max(mean, eps_floor), +inf) for
// side plus, and the mirror image for side minus.  Empty when no such
// element exists (in particular when the degeneracy check fails near 0 and
// the mean is small).
std::optional<double> select_B(const std::vector<Interval>& nonlinearity,
                               double mean, Side side,
                               double eps_floor = kEpsFloor);

// Finite family of proper subspaces whose avoidance guarantees that for every
// nonzero lattice direction xi, xi . phi is affine on no interval meeting the
// nonlinearity set.  One subspace per nonlinear atom between structure
// points, plus one per isolated kink separating two affine intervals.
std::vector<NonlinearitySubspace> avoidance_family(const FluxSpec& phi,
                                                   const AffineStructure& s);

// Scalar flux u -> xi . phi(u) lowered to the same grammar (dim 1).
FluxSpec scalar_projection(const FluxSpec& phi, const VecN& xi);

// True when xi . phi is affine on no vicinity of m, tested on the open
// interval (m - eps, m + eps) clipped to the range.
bool direction_nonaffine_near(const FluxSpec& phi, const VecN& xi, double m,
                              double eps);

}  // namespace entropy_decay
