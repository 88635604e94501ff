// Lattices L = A(Z^n), dual lattices, half-open fundamental parallelepipeds
// with point reduction, greedy window coverings (the norm-equivalence
// multiplicity), and randomized generation of lattices whose nonzero points
// keep an angular margin from a finite family of proper subspaces.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "entropy_decay/flux.hpp"
#include "entropy_decay/grid.hpp"
#include "entropy_decay/small_linalg.hpp"

namespace entropy_decay {

struct Lattice {
  int dim = 1;
  MatN basis = MatN::identity(1);  // columns are the generators
  double det = 1.0;

  // Validates the nonsingularity margin |det| > 1e-9 * product of column norms.
  static Lattice from_basis(int dim, const MatN& basis);

  VecN point(const std::array<int, 2>& m) const;  // basis * m
};

Lattice dual(const Lattice& L);                // inverse-transpose basis
Lattice scaled(const Lattice& L, double r);    // rL

struct Parallelepiped {
  Lattice lattice;
  double r = 1.0;

  double volume() const;
  // Half-open membership: lattice coordinates of x all in [-r/2, r/2).
  bool contains(const VecN& x) const;
};

struct ReduceResult {
  VecN point = VecN::zero(1);     // representative inside P_r
  std::array<int, 2> shift{0, 0};  // x = point + r * basis * shift
};

ReduceResult reduce(const VecN& x, const Parallelepiped& P);

struct CoveringResult {
  int m = 0;
  std::vector<VecN> offsets;  // Cl(V1) is covered by union of (offset + V2)
};

// Greedy covering of Cl(V1) by translates of V2 over a shift grid of pitch
// inradius(V2)/2.  The discrete certificate uses a net of Cl(V1) and
// margin-shrunk windows, so the returned translates cover the closed set
// exactly, not just the net.
CoveringResult covering_multiplicity(const WindowShape& v1, const WindowShape& v2,
                                     int dim);

struct AvoidanceCertificate {
  bool ok = false;
  std::uint64_t seed = 0;
  int radius = 0;       // integer coefficients checked up to this sup-norm
  double delta = 0.0;   // required margin: dist(A xi, X) >= delta * |A xi|
  double min_ratio = 0.0;
  std::array<int, 2> worst_xi{0, 0};
  int attempts = 0;
};

struct AvoidingLatticeResult {
  Lattice l1;
  AvoidanceCertificate certificate;
};

// Exhaustive check of the avoidance margin for all integer xi with
// 0 < ||xi||_inf <= R against every subspace in the family.
bool verify_avoidance(int dim, const MatN& A,
                      const std::vector<NonlinearitySubspace>& subspaces, int R,
                      double delta, AvoidanceCertificate* cert = nullptr);

// Draw A = I + uniform[-1,1] entries from the seeded generator, verify the
// margin certificate, retry on failure.  The accepted basis is normalized to
// |det| = 1 (the margin is scale-invariant).  An empty family returns the
// identity lattice without drawing.
AvoidingLatticeResult random_avoiding_lattice(
    int dim, const std::vector<NonlinearitySubspace>& subspaces, int R, double delta,
    std::uint64_t seed, int max_attempts = 64);

}  // namespace entropy_decay
