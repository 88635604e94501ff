#include "entropy_decay/flux.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace entropy_decay;

namespace {

FluxSpec burgers_1d(double U = 2.0) {
  SumExpr s;
  s.powers.push_back({0.5, 2.0, Parity::kEven});
  FluxSpec phi;
  phi.dim = 1;
  phi.u_range = {-U, U};
  phi.components = {s};
  return phi;
}

// Flux that is affine exactly on [-1, -0.25] and [0.25, 1] and quadratic in
// between: phi(u) = u^2/2 on |u| <= 1/4 glued C^0 to affine tails.
FluxSpec plateau_flux() {
  SumExpr mid;
  mid.powers.push_back({0.5, 2.0, Parity::kEven});
  SumExpr left;   // value at -1/4 is 1/32, slope -1/4
  left.slope = -0.25;
  left.offset = 1.0 / 32.0 - 0.25 * 0.25;
  SumExpr right;  // value at 1/4 is 1/32, slope 1/4
  right.slope = 0.25;
  right.offset = 1.0 / 32.0 - 0.25 * 0.25;
  PiecewiseExpr pw;
  pw.breakpoints = {-0.25, 0.25};
  pw.pieces = {left, mid, right};
  FluxSpec phi;
  phi.dim = 1;
  phi.u_range = {-1.0, 1.0};
  phi.components = {pw};
  return phi;
}

// Independent detector: scan centered second differences of every component
// on a fine grid and report whether any interval around u of half-width w is
// affine for all components.  Deliberately brute force; no reuse of the
// library's structure analysis.
bool brute_force_affine_near(const FluxSpec& phi, double u, double w) {
  const int n = 400;
  for (int c = 0; c < static_cast<int>(phi.components.size()); ++c) {
    // Fit an affine map through the endpoints and test every sample.
    double a = u - w, b = u + w;
    double fa = phi.eval_component(c, a), fb = phi.eval_component(c, b);
    double slope = (fb - fa) / (b - a);
    for (int i = 1; i < n; ++i) {
      double x = a + (b - a) * i / n;
      double f = phi.eval_component(c, x);
      double lin = fa + slope * (x - a);
      if (std::abs(f - lin) > 1e-9 * (1.0 + std::abs(f))) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("sum expression evaluation and canonical form") {
  SumExpr s;
  s.slope = 2.0;
  s.offset = -1.0;
  s.powers.push_back({3.0, 2.0, Parity::kEven});
  s.powers.push_back({1.0, 3.0, Parity::kOdd});
  CHECK(s.eval(0.0) == doctest::Approx(-1.0));
  CHECK(s.eval(2.0) == doctest::Approx(2 * 2 - 1 + 3 * 4 + 8));
  CHECK(s.eval(-2.0) == doctest::Approx(-4 - 1 + 12 - 8));

  // Odd first powers fold into the slope.
  SumExpr t;
  t.slope = 1.0;
  t.powers.push_back({2.0, 1.0, Parity::kOdd});
  SumExpr ct = t.canonical();
  CHECK(ct.powers.empty());
  CHECK(ct.slope == doctest::Approx(3.0));

  // Cancelling coefficients drop out.
  SumExpr z;
  z.powers.push_back({1.0, 2.0, Parity::kEven});
  z.powers.push_back({-1.0, 2.0, Parity::kEven});
  CHECK(z.canonical().powers.empty());
}

TEST_CASE("piecewise evaluation and continuity validation") {
  FluxSpec phi = plateau_flux();
  phi.validate();
  CHECK(phi.eval(0.0)[0] == doctest::Approx(0.0));
  CHECK(phi.eval(0.1)[0] == doctest::Approx(0.005));
  CHECK(phi.eval(0.5)[0] == doctest::Approx(1.0 / 32.0 - 0.0625 + 0.125));
  CHECK(phi.eval(-0.5)[0] == doctest::Approx(phi.eval(0.5)[0]));

  // A jump at a breakpoint is rejected.
  FluxSpec bad = phi;
  std::get<PiecewiseExpr>(bad.components[0]).pieces[2].offset += 0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // Non-increasing breakpoints are rejected.
  FluxSpec bad2 = phi;
  std::get<PiecewiseExpr>(bad2.components[0]).breakpoints = {0.25, -0.25};
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}

TEST_CASE("dyadic flux evaluates as advertised") {
  DyadicExpr d;
  d.k_max = 4;
  d.amplitude = 1.0;
  FluxSpec phi;
  phi.dim = 1;
  phi.u_range = {-2.0, 2.0};
  phi.components = {d};
  phi.validate();

  CHECK(phi.eval(0.0)[0] == doctest::Approx(0.0));
  // Slope +1 on (1/2, 1), -1 on (1/4, 1/2), ... alternating.
  double f1 = phi.eval(1.0)[0];
  double fh = phi.eval(0.5)[0];
  CHECK((f1 - fh) / 0.5 == doctest::Approx(1.0));
  double fq = phi.eval(0.25)[0];
  CHECK((fh - fq) / 0.25 == doctest::Approx(-1.0));
  // Odd symmetry.
  CHECK(phi.eval(-0.7)[0] == doctest::Approx(-phi.eval(0.7)[0]));
  // Continuity across every dyadic kink.
  for (int k = 0; k <= 4; ++k) {
    double b = std::ldexp(1.0, -k);
    CHECK(phi.eval(b - 1e-12)[0] == doctest::Approx(phi.eval(b + 1e-12)[0]).epsilon(1e-6));
  }
}

TEST_CASE("affine structure matches a brute-force scan") {
  FluxSpec phi = plateau_flux();
  AffineStructure s = affine_structure(phi);

  REQUIRE(s.affine.size() == 2);
  CHECK(s.affine[0].span.lo == doctest::Approx(-1.0));
  CHECK(s.affine[0].span.hi == doctest::Approx(-0.25));
  CHECK(s.affine[0].slope[0] == doctest::Approx(-0.25));
  CHECK(s.affine[1].span.lo == doctest::Approx(0.25));
  CHECK(s.affine[1].span.hi == doctest::Approx(1.0));
  CHECK(s.affine[1].slope[0] == doctest::Approx(0.25));

  REQUIRE(s.nonlinearity.size() == 1);
  CHECK(s.nonlinearity[0].lo == doctest::Approx(-0.25));
  CHECK(s.nonlinearity[0].hi == doctest::Approx(0.25));

  // Cross-check against the independent affinity detector.
  CHECK(brute_force_affine_near(phi, -0.6, 0.1));
  CHECK(brute_force_affine_near(phi, 0.6, 0.1));
  CHECK_FALSE(brute_force_affine_near(phi, 0.0, 0.1));
  CHECK_FALSE(brute_force_affine_near(phi, 0.25, 0.05));
  CHECK(s.is_nonlinear_at(0.0));
  CHECK(s.is_nonlinear_at(0.2));
  CHECK_FALSE(s.is_nonlinear_at(0.6));
  CHECK(s.meets_nonlinearity(-0.3, -0.2));
  CHECK_FALSE(s.meets_nonlinearity(0.3, 0.9));
}

TEST_CASE("affine structure of a purely nonlinear flux is empty") {
  FluxSpec phi = burgers_1d();
  AffineStructure s = affine_structure(phi);
  CHECK(s.affine.empty());
  REQUIRE(s.nonlinearity.size() == 1);
  CHECK(s.nonlinearity[0].lo == doctest::Approx(-2.0));
  CHECK(s.nonlinearity[0].hi == doctest::Approx(2.0));
}

TEST_CASE("isolated kink between affine pieces is a degenerate component") {
  // phi(u) = |u|: affine on both sides, kink at 0.
  PiecewiseExpr pw;
  pw.breakpoints = {0.0};
  SumExpr l;
  l.slope = -1.0;
  SumExpr r;
  r.slope = 1.0;
  pw.pieces = {l, r};
  FluxSpec phi;
  phi.dim = 1;
  phi.u_range = {-1.0, 1.0};
  phi.components = {pw};
  AffineStructure s = affine_structure(phi);
  REQUIRE(s.affine.size() == 2);
  REQUIRE(s.nonlinearity.size() == 1);
  CHECK(s.nonlinearity[0].lo == 0.0);
  CHECK(s.nonlinearity[0].hi == 0.0);
}

TEST_CASE("genuine nonlinearity verdict on both outcomes") {
  SUBCASE("strictly convex flux holds") {
    GnVerdict gn = check_gn(affine_structure(burgers_1d()));
    CHECK(gn.holds);
    CHECK_FALSE(gn.witness.has_value());
  }
  SUBCASE("affine plateau through zero fails with a witness") {
    GnVerdict gn = check_gn(affine_structure(plateau_flux()));
    // Nonlinearity covers (-1/4, 1/4): reaches 0 on both sides, so GN holds.
    CHECK(gn.holds);
  }
  SUBCASE("flux affine near zero on the positive side fails") {
    // phi = u^2/2 for u < 0.25 glued to an affine tail... mirrored plateau:
    // affine on [0, 1], nonlinear only on [-1, 0).
    PiecewiseExpr pw;
    SumExpr neg;
    neg.powers.push_back({0.5, 2.0, Parity::kEven});
    SumExpr pos;
    pos.slope = 0.0;
    pw.breakpoints = {0.0};
    pw.pieces = {neg, pos};
    FluxSpec phi;
    phi.dim = 1;
    phi.u_range = {-1.0, 1.0};
    phi.components = {pw};
    phi.validate();
    GnVerdict gn = check_gn(affine_structure(phi));
    CHECK_FALSE(gn.holds);
    REQUIRE(gn.witness.has_value());
    CHECK(gn.witness->span.lo == doctest::Approx(0.0));
    CHECK(gn.witness->span.hi == doctest::Approx(1.0));
    CHECK(gn.witness->slope[0] == doctest::Approx(0.0));
  }
  SUBCASE("fully affine flux fails on both sides") {
    SumExpr s;
    s.slope = 2.0;
    FluxSpec phi;
    phi.dim = 1;
    phi.u_range = {-1.0, 1.0};
    phi.components = {s};
    GnVerdict gn = check_gn(affine_structure(phi));
    CHECK_FALSE(gn.holds);
    REQUIRE(gn.witness.has_value());
    CHECK(gn.witness->slope[0] == doctest::Approx(2.0));
  }
  SUBCASE("dyadic flux passes at every ladder scale") {
    DyadicExpr d;
    d.k_max = 25;  // kinks below the smallest ladder scale 2^-20
    FluxSpec phi;
    phi.dim = 1;
    phi.u_range = {-1.0, 1.0};
    phi.components = {d};
    GnVerdict gn = check_gn(affine_structure(phi));
    CHECK(gn.holds);
    CHECK(gn.inf_f_plus <= std::ldexp(1.0, -20));
    CHECK(gn.sup_f_minus >= -std::ldexp(1.0, -20));
  }
}

TEST_CASE("nonlinearity subspace via sampled second differences") {
  // phi = (u^2, u^2): xi = (1, -1) kills the nonlinearity everywhere.
  SumExpr q;
  q.powers.push_back({1.0, 2.0, Parity::kEven});
  FluxSpec phi;
  phi.dim = 2;
  phi.u_range = {-1.0, 1.0};
  phi.components = {q, q};
  AffineStructure s = affine_structure(phi);
  REQUIRE(s.nonlinearity.size() == 1);
  NonlinearitySubspace sub = nonlinearity_subspace(phi, s, s.nonlinearity[0]);
  REQUIRE(sub.dim() == 1);
  double ratio = sub.basis[0][1] / sub.basis[0][0];
  CHECK(ratio == doctest::Approx(-1.0));
  CHECK(sub.basis[0].norm() == doctest::Approx(1.0));

  // Independent fluxes (u^2, u^3): no direction is degenerate.
  SumExpr cu;
  cu.powers.push_back({1.0, 3.0, Parity::kOdd});
  FluxSpec phi2;
  phi2.dim = 2;
  phi2.u_range = {-1.0, 1.0};
  phi2.components = {q, cu};
  AffineStructure s2 = affine_structure(phi2);
  NonlinearitySubspace sub2 = nonlinearity_subspace(phi2, s2, s2.nonlinearity[0]);
  CHECK(sub2.dim() == 0);
}

TEST_CASE("avoidance family lists one subspace per degenerate atom") {
  SumExpr q;
  q.powers.push_back({1.0, 2.0, Parity::kEven});
  FluxSpec phi;
  phi.dim = 2;
  phi.u_range = {-1.0, 1.0};
  phi.components = {q, q};
  AffineStructure s = affine_structure(phi);
  std::vector<NonlinearitySubspace> fam = avoidance_family(phi, s);
  REQUIRE(fam.size() >= 1);
  for (const auto& sub : fam) {
    REQUIRE(sub.dim() == 1);
    CHECK(sub.basis[0][1] / sub.basis[0][0] == doctest::Approx(-1.0));
  }

  // A genuinely 2d-nonlinear flux yields an empty family.
  SumExpr cu;
  cu.powers.push_back({1.0, 3.0, Parity::kOdd});
  FluxSpec phi2;
  phi2.dim = 2;
  phi2.u_range = {-1.0, 1.0};
  phi2.components = {q, cu};
  std::vector<NonlinearitySubspace> fam2 = avoidance_family(phi2, affine_structure(phi2));
  CHECK(fam2.empty());
}

TEST_CASE("scalar projection lowers the flux exactly") {
  SumExpr q;
  q.powers.push_back({1.0, 2.0, Parity::kEven});
  SumExpr cu;
  cu.slope = 0.5;
  cu.powers.push_back({1.0, 3.0, Parity::kOdd});
  FluxSpec phi;
  phi.dim = 2;
  phi.u_range = {-1.0, 1.0};
  phi.components = {q, cu};
  VecN xi(2.0, -1.0);
  FluxSpec proj = scalar_projection(phi, xi);
  REQUIRE(proj.dim == 1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    double u = U(rng);
    CHECK(proj.eval(u)[0] == doctest::Approx(xi.dot(phi.eval(u))).epsilon(1e-12));
  }
}

TEST_CASE("direction nonaffinity near a point") {
  SumExpr q;
  q.powers.push_back({1.0, 2.0, Parity::kEven});
  FluxSpec phi;
  phi.dim = 2;
  phi.u_range = {-1.0, 1.0};
  phi.components = {q, q};
  // (1, -1) projects to zero: affine near every point.
  CHECK_FALSE(direction_nonaffine_near(phi, VecN(1.0, -1.0), 0.0, 1e-3));
  // (1, 1) projects to 2u^2: nonaffine near every interior point.
  CHECK(direction_nonaffine_near(phi, VecN(1.0, 1.0), 0.0, 1e-3));
  CHECK(direction_nonaffine_near(phi, VecN(1.0, 1.0), 0.5, 1e-3));
}

TEST_CASE("select_B picks the smallest admissible constant on each side") {
  std::vector<Interval> F = {{-2.0, -1.0}, {0.5, 0.75}, {1.5, 1.5}};
  SUBCASE("mean below the positive part") {
    auto b = select_B(F, 0.1, Side::kPlus);
    REQUIRE(b.has_value());
    CHECK(*b == doctest::Approx(0.5));
  }
  SUBCASE("mean inside a component") {
    auto b = select_B(F, 0.6, Side::kPlus);
    REQUIRE(b.has_value());
    CHECK(*b == doctest::Approx(0.6));
  }
  SUBCASE("mean between components jumps to the next") {
    auto b = select_B(F, 1.0, Side::kPlus);
    REQUIRE(b.has_value());
    CHECK(*b == doctest::Approx(1.5));
  }
  SUBCASE("mean beyond every component fails") {
    CHECK_FALSE(select_B(F, 1.6, Side::kPlus).has_value());
  }
  SUBCASE("minus side mirrors") {
    auto b = select_B(F, -0.5, Side::kMinus);
    REQUIRE(b.has_value());
    CHECK(*b == doctest::Approx(-1.0));
    CHECK_FALSE(select_B(F, -2.5, Side::kMinus).has_value());
  }
  SUBCASE("floor keeps the constant away from zero") {
    std::vector<Interval> G = {{-1.0, 1.0}};
    auto b = select_B(G, 0.0, Side::kPlus, 1e-6);
    REQUIRE(b.has_value());
    CHECK(*b == doctest::Approx(1e-6));
    auto bm = select_B(G, 0.0, Side::kMinus, 1e-6);
    REQUIRE(bm.has_value());
    CHECK(*bm == doctest::Approx(-1e-6));
  }
}

TEST_CASE("flux grammar rejections") {
  FluxSpec phi = burgers_1d();
  phi.dim = 2;  // one component, dim 2
  CHECK_THROWS_AS(phi.validate(), std::invalid_argument);

  FluxSpec asym = burgers_1d();
  asym.u_range = {-1.0, 2.0};
  CHECK_THROWS_AS(asym.validate(), std::invalid_argument);

  FluxSpec neg = burgers_1d();
  std::get<SumExpr>(neg.components[0]).powers[0].exponent = 0.5;
  neg.validate();  // exponent 1/2 is allowed (p > 0)
  std::get<SumExpr>(neg.components[0]).powers[0].exponent = -1.0;
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}
