#include "entropy_decay/periodize.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

using namespace entropy_decay;

namespace {

GridFunction unit_square(double h) {
  const int n = static_cast<int>(std::llround(1.0 / h));
  GridFunction g = GridFunction::zeros(2, VecN(0.0, 0.0), h, {n, n});
  for (auto& v : g.values) v = 1.0;
  return g;
}

GridFunction box_1d(double h, double lo, double hi, double amp) {
  const double pad = 1.0;
  const int pad_cells = static_cast<int>(std::ceil(pad / h));
  const int n = static_cast<int>(std::llround((hi - lo) / h)) + 2 * pad_cells;
  GridFunction g = GridFunction::zeros(1, VecN(lo - pad_cells * h), h, {n, 1});
  for (int i = 0; i < n; ++i) {
    double c = g.cell_center(i, 0)[0];
    if (c > lo && c < hi) g.at(i) = amp;
  }
  return g;
}

}  // namespace

TEST_CASE("periodic grid basics") {
  Lattice L = Lattice::from_basis(1, MatN::identity(1));
  PeriodicGridFunction p = PeriodicGridFunction::zeros(L, 2.0, {8, 1});
  REQUIRE(p.values.size() == 8);
  for (int i = 0; i < 8; ++i) p.at(i) = i;
  CHECK(p.mean() == doctest::Approx(3.5));
  CHECK(p.max_abs() == doctest::Approx(7.0));
  // Periodic lookup: shifting by a full period returns the same cell.
  VecN x = p.physical_center(3);
  CHECK(p.eval_physical(x) == doctest::Approx(3.0));
  VecN shifted = x;
  shifted[0] += 2.0;
  CHECK(p.eval_physical(shifted) == doctest::Approx(3.0));
  shifted[0] -= 6.0;
  CHECK(p.eval_physical(shifted) == doctest::Approx(3.0));
}

TEST_CASE("superlevel measures by cell counting") {
  GridFunction g = box_1d(0.25, 0.0, 1.0, 2.0);
  SuperlevelTable t = admissibility(g, {0.5, 1.0, 2.0, 3.0});
  CHECK(t.at(0.5) == doctest::Approx(1.0));   // four cells of width 1/4
  CHECK(t.at(1.0) == doctest::Approx(1.0));   // strict threshold keeps them
  CHECK(t.at(3.0) == doctest::Approx(0.0));
  CHECK(t.at(2.0) == doctest::Approx(0.0));   // meas{|u| > 2} = 0
}

TEST_CASE("envelopes dominate the data and the mean bound holds") {
  GridFunction u0 = box_1d(1.0 / 64, 0.0, 1.0, 1.0);
  Lattice L = Lattice::from_basis(1, MatN::identity(1));
  for (double r : {2.0, 4.0, 8.0}) {
    EnvelopeReport env = envelopes(u0, L, r);
    CHECK(env.C0 == doctest::Approx(1.0));
    CHECK(env.cell_volume == doctest::Approx(r));
    // v_plus >= 0 >= v_minus and v_abs consistency.
    for (size_t i = 0; i < env.v_plus.values.size(); ++i) {
      CHECK(env.v_plus.values[i] >= -1e-15);
      CHECK(env.v_minus.values[i] <= 1e-15);
      CHECK(env.v_abs.values[i] ==
            doctest::Approx(std::max(env.v_plus.values[i], -env.v_minus.values[i])));
    }
    // The envelope dominates the data where both are sampled.
    for (int i = 0; i < u0.extents[0]; ++i) {
      VecN x = u0.cell_center(i, 0);
      CHECK(env.v_plus.eval_physical(x) >= u0.at(i) - 1e-12);
      CHECK(env.v_minus.eval_physical(x) <= u0.at(i) + 1e-12);
    }
    // Unit mass spread over a cell of volume r.
    CHECK(env.M_r == doctest::Approx(1.0 / r));
    MrBoundVerdict mr = mr_bound_check(env);
    CHECK(mr.ok);
    CHECK(mr.m_r <= mr.bound);
  }
}

TEST_CASE("mean chain decreases along a doubling schedule") {
  GridFunction u0 = box_1d(1.0 / 32, 0.0, 1.0, 1.0);
  Lattice L = Lattice::from_basis(1, MatN::identity(1));
  std::vector<double> means = mr_chain(u0, L, {2.0, 4.0, 8.0, 16.0});
  REQUIRE(means.size() == 4);
  for (size_t i = 1; i < means.size(); ++i) CHECK(means[i] <= means[i - 1] + 1e-12);
  CHECK(means.back() <= 0.5 * means.front());
}

TEST_CASE("unit square periodization counts cells exactly") {
  GridFunction u0 = unit_square(1.0 / 16);
  Lattice L = Lattice::from_basis(2, MatN::identity(2));
  for (double r : {2.0, 4.0, 8.0}) {
    EnvelopeReport env = envelopes(u0, L, r);
    // The data occupies exactly a 1/r^2 fraction of the fundamental cell.
    CHECK(env.M_r == 1.0 / (r * r));
    CHECK(mr_bound_check(env).ok);
  }
}

TEST_CASE("shifted data lands means on the nonlinearity set") {
  GridFunction u0 = box_1d(1.0 / 64, 0.0, 1.0, 1.0);
  Lattice L = Lattice::from_basis(1, MatN::identity(1));
  EnvelopeReport env = envelopes(u0, L, 4.0);
  SUBCASE("full nonlinearity set keeps the means") {
    std::vector<Interval> F = {{-2.0, 2.0}};
    auto sd = shifted_periodic_data(env, F);
    REQUIRE(sd.has_value());
    CHECK(sd->B_plus == doctest::Approx(env.M_r_plus));
    CHECK(sd->B_minus == doctest::Approx(std::min(env.M_r_minus, -kEpsFloor)));
    CHECK(sd->u_plus.mean() == doctest::Approx(sd->B_plus).epsilon(1e-12));
    CHECK(sd->u_minus.mean() == doctest::Approx(sd->B_minus).epsilon(1e-12));
    // Shifting preserves domination at the sample points.
    for (int i = 0; i < u0.extents[0]; ++i) {
      VecN x = u0.cell_center(i, 0);
      CHECK(sd->u_plus.eval_physical(x) >= u0.at(i) - 1e-12);
      CHECK(sd->u_minus.eval_physical(x) <= u0.at(i) + 1e-12);
    }
  }
  SUBCASE("gap above the mean pushes B upward") {
    std::vector<Interval> F = {{-2.0, -1.0}, {1.0, 2.0}};
    auto sd = shifted_periodic_data(env, F);
    REQUIRE(sd.has_value());
    CHECK(sd->B_plus == doctest::Approx(1.0));
    CHECK(sd->B_minus == doctest::Approx(-1.0));
  }
  SUBCASE("no admissible constant fails") {
    std::vector<Interval> F = {{-2.0, -1.0}};
    CHECK_FALSE(shifted_periodic_data(env, F).has_value());
  }
}

TEST_CASE("tail truncation clears small values away from the origin") {
  GridFunction g = box_1d(0.1, -2.0, 2.0, 1.0);
  for (int i = 0; i < g.extents[0]; ++i) {
    double c = g.cell_center(i, 0)[0];
    if (std::abs(c) > 1.0 && g.at(i) != 0.0) g.at(i) = 1e-9;
  }
  GridFunction t = truncate_tails(g, 1e-6, 1.0);
  for (int i = 0; i < t.extents[0]; ++i) {
    double c = t.cell_center(i, 0)[0];
    if (std::abs(c) > 1.0) CHECK(t.at(i) == 0.0);
    else CHECK(t.at(i) == g.at(i));
  }
}

TEST_CASE("random data stays sandwiched by its envelopes") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> V(-1.0, 1.0);
  Lattice L = Lattice::from_basis(2, MatN::identity(2));
  for (int it = 0; it < 5; ++it) {
    GridFunction u0 = GridFunction::zeros(2, VecN(-0.5, -0.5), 1.0 / 16, {16, 16});
    for (auto& v : u0.values) v = V(rng);
    EnvelopeReport env = envelopes(u0, L, 4.0);
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        VecN x = u0.cell_center(i, j);
        CHECK(env.v_plus.eval_physical(x) >= u0.at(i, j) - 1e-12);
        CHECK(env.v_minus.eval_physical(x) <= u0.at(i, j) + 1e-12);
      }
    CHECK(env.M_r_plus >= 0.0);
    CHECK(env.M_r_minus <= 0.0);
    CHECK(env.M_r >= std::max(env.M_r_plus, -env.M_r_minus) - 1e-12);
  }
}
