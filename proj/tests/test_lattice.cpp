#include "entropy_decay/lattice.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace entropy_decay;

namespace {

MatN mat2(double a00, double a01, double a10, double a11) {
  MatN m = MatN::identity(2);
  m.at(0, 0) = a00;
  m.at(0, 1) = a01;
  m.at(1, 0) = a10;
  m.at(1, 1) = a11;
  return m;
}

NonlinearitySubspace line_subspace(double x, double y) {
  NonlinearitySubspace s;
  s.span = {-1.0, 1.0};
  VecN b(x, y);
  s.basis = {b * (1.0 / b.norm())};
  return s;
}

// Independent cover check: random points of Cl(V1) must each land inside
// some translate offset + V2.
bool random_points_covered(const WindowShape& v1, const WindowShape& v2, int dim,
                           const CoveringResult& cover, int n_points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double R = v1.circumradius(dim) + 0.5;
  std::uniform_real_distribution<double> U(-R, R);
  int tested = 0;
  for (int it = 0; tested < n_points && it < 50 * n_points; ++it) {
    VecN p = VecN::zero(dim);
    for (int a = 0; a < dim; ++a) p[a] = U(rng);
    if (!v1.contains(p, dim)) continue;
    ++tested;
    bool hit = false;
    for (const auto& o : cover.offsets)
      if (v2.contains(p - o, dim)) {
        hit = true;
        break;
      }
    if (!hit) return false;
  }
  return tested == n_points;
}

}  // namespace

TEST_CASE("dual lattice hand values") {
  SUBCASE("1d scaling") {
    MatN a = MatN::identity(1);
    a.at(0, 0) = 2.0;
    Lattice L = Lattice::from_basis(1, a);
    Lattice D = dual(L);
    CHECK(D.basis.at(0, 0) == doctest::Approx(0.5));
    CHECK(D.det == doctest::Approx(0.5));
  }
  SUBCASE("2d diagonal") {
    Lattice L = Lattice::from_basis(2, mat2(2, 0, 0, 0.5));
    Lattice D = dual(L);
    CHECK(D.basis.at(0, 0) == doctest::Approx(0.5));
    CHECK(D.basis.at(1, 1) == doctest::Approx(2.0));
    CHECK(D.basis.at(0, 1) == doctest::Approx(0.0));
    CHECK(D.basis.at(1, 0) == doctest::Approx(0.0));
  }
  SUBCASE("2d shear pairs to integers") {
    Lattice L = Lattice::from_basis(2, mat2(1, 0.5, 0, 1));
    Lattice D = dual(L);
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j) {
        VecN x = L.point({i, j});
        for (int k = -2; k <= 2; ++k)
          for (int l = -2; l <= 2; ++l) {
            double ip = D.point({k, l}).dot(x);
            CHECK(std::abs(ip - std::round(ip)) < 1e-12);
          }
      }
  }
  SUBCASE("dual of dual is the original") {
    Lattice L = Lattice::from_basis(2, mat2(1.3, -0.4, 0.2, 0.9));
    Lattice DD = dual(dual(L));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(DD.basis.at(i, j) == doctest::Approx(L.basis.at(i, j)).epsilon(1e-12));
  }
}

TEST_CASE("reduction into the fundamental parallelepiped") {
  SUBCASE("identity lattice hand values") {
    Parallelepiped P{Lattice::from_basis(2, MatN::identity(2)), 1.0};
    ReduceResult r = reduce(VecN(3.7, -1.2), P);
    CHECK(r.point[0] == doctest::Approx(-0.3));
    CHECK(r.point[1] == doctest::Approx(-0.2));
    CHECK(r.shift[0] == 4);
    CHECK(r.shift[1] == -1);
    CHECK(P.contains(r.point));
  }
  SUBCASE("scaled cell") {
    Parallelepiped P{Lattice::from_basis(2, MatN::identity(2)), 2.0};
    ReduceResult r = reduce(VecN(3.7, -1.2), P);
    CHECK(r.point[0] == doctest::Approx(-0.3));
    CHECK(r.point[1] == doctest::Approx(0.8));
    CHECK(r.shift[0] == 2);
    CHECK(r.shift[1] == -1);
  }
  SUBCASE("half-open boundary convention") {
    Parallelepiped P{Lattice::from_basis(1, MatN::identity(1)), 1.0};
    CHECK(P.contains(VecN(-0.5)));
    CHECK_FALSE(P.contains(VecN(0.5)));
    ReduceResult r = reduce(VecN(0.5), P);
    CHECK(r.point[0] == doctest::Approx(-0.5));
    CHECK(r.shift[0] == 1);
  }
  SUBCASE("random round trips") {
    Lattice L = Lattice::from_basis(2, mat2(1.1, 0.3, -0.2, 0.8));
    Parallelepiped P{L, 3.0};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-20.0, 20.0);
    for (int it = 0; it < 500; ++it) {
      VecN x(U(rng), U(rng));
      ReduceResult r = reduce(x, P);
      CHECK(P.contains(r.point));
      VecN back = r.point + P.r * L.point(r.shift);
      CHECK(back[0] == doctest::Approx(x[0]).epsilon(1e-11));
      CHECK(back[1] == doctest::Approx(x[1]).epsilon(1e-11));
    }
  }
  SUBCASE("volume") {
    Parallelepiped P{Lattice::from_basis(2, mat2(2, 0, 0, 0.5)), 3.0};
    CHECK(P.volume() == doctest::Approx(9.0));
  }
}

TEST_CASE("covering multiplicity matches hand counts and covers random points") {
  SUBCASE("unit ball by unit ball in 1d") {
    CoveringResult c = covering_multiplicity(WindowShape::ball(1.0), WindowShape::ball(1.0), 1);
    CHECK(c.m == 2);
    CHECK(random_points_covered(WindowShape::ball(1.0), WindowShape::ball(1.0), 1, c, 20000, 5));
  }
  SUBCASE("ball(2) by ball(1) in 1d") {
    CoveringResult c = covering_multiplicity(WindowShape::ball(2.0), WindowShape::ball(1.0), 1);
    CHECK(c.m == 3);
    CHECK(random_points_covered(WindowShape::ball(2.0), WindowShape::ball(1.0), 1, c, 20000, 6));
  }
  SUBCASE("2d unit ball by unit ball") {
    CoveringResult c = covering_multiplicity(WindowShape::ball(1.0), WindowShape::ball(1.0), 2);
    CHECK(c.m >= 3);  // two open unit disks cannot cover the closed disk
    CHECK(c.m <= 7);
    CHECK(random_points_covered(WindowShape::ball(1.0), WindowShape::ball(1.0), 2, c, 20000, 7));
  }
  SUBCASE("box windows") {
    WindowShape big = WindowShape::box(VecN(-2.0, -1.0), VecN(2.0, 1.0));
    WindowShape small = WindowShape::box(VecN(-1.0, -1.0), VecN(1.0, 1.0));
    CoveringResult c = covering_multiplicity(big, small, 2);
    CHECK(c.m >= 3);
    CHECK(random_points_covered(big, small, 2, c, 20000, 8));
  }
}

TEST_CASE("avoidance margin verification") {
  std::vector<NonlinearitySubspace> fam = {line_subspace(1.0, -1.0)};
  SUBCASE("identity basis hits the diagonal subspace") {
    AvoidanceCertificate cert;
    CHECK_FALSE(verify_avoidance(2, MatN::identity(2), fam, 10, 1e-6, &cert));
    CHECK_FALSE(cert.ok);
    CHECK(cert.min_ratio < 1e-6);
    // The offending direction is on the diagonal.
    CHECK(cert.worst_xi[0] == -cert.worst_xi[1]);
  }
  SUBCASE("irrational shear passes") {
    MatN a = mat2(1.0, std::sqrt(2.0), std::sqrt(2.0), 1.0);
    AvoidanceCertificate cert;
    CHECK(verify_avoidance(2, a, {line_subspace(0.0, 1.0)}, 30, 1e-6, &cert));
    CHECK(cert.ok);
    CHECK(cert.min_ratio >= 1e-6);
  }
  SUBCASE("random draws produce certified bases") {
    AvoidingLatticeResult res = random_avoiding_lattice(2, fam, 50, 1e-6, 42);
    CHECK(res.certificate.ok);
    CHECK(std::abs(std::abs(res.l1.det) - 1.0) < 1e-12);
    AvoidanceCertificate check;
    CHECK(verify_avoidance(2, res.l1.basis, fam, 50, 1e-6, &check));
  }
  SUBCASE("empty family returns the identity without drawing") {
    AvoidingLatticeResult res = random_avoiding_lattice(2, {}, 50, 1e-6, 7);
    CHECK(res.certificate.ok);
    CHECK(res.l1.basis.at(0, 0) == 1.0);
    CHECK(res.l1.basis.at(0, 1) == 0.0);
    CHECK(res.certificate.attempts == 0);
  }
  SUBCASE("1d avoidance is trivial") {
    AvoidingLatticeResult res = random_avoiding_lattice(1, {}, 50, 1e-6, 3);
    CHECK(res.certificate.ok);
  }
}

TEST_CASE("scaled lattice") {
  Lattice L = Lattice::from_basis(2, mat2(1.0, 0.0, 0.0, 1.0));
  Lattice S = scaled(L, 3.0);
  CHECK(S.basis.at(0, 0) == doctest::Approx(3.0));
  CHECK(S.det == doctest::Approx(9.0));
}

TEST_CASE("degenerate basis is rejected") {
  CHECK_THROWS_AS(Lattice::from_basis(2, mat2(1.0, 2.0, 1.0, 2.0)), std::invalid_argument);
}
