#include "entropy_decay/periodize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace entropy_decay {

namespace {

constexpr std::int64_t kMaxTorusCells = std::int64_t(1) << 24;
constexpr std::int64_t kMaxShiftCandidates = std::int64_t(1) << 20;

double kahan_sum(const std::vector<double>& xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

// Value of the cell containing x (piecewise-constant reading of u), 0 outside.
double sample_containing_cell(const GridFunction& u, const VecN& x) {
  int idx[2] = {0, 0};
  for (int a = 0; a < u.dim; ++a) {
    double t = std::floor((x[a] - u.origin[a]) / u.h);
    if (t < 0.0 || t >= double(u.extents[a])) return 0.0;
    idx[a] = int(t);
  }
  return u.at(idx[0], idx[1]);
}

// Diameter of one physical torus cell per unit of 1/N: |sum of +-columns|.
double cell_diameter_factor(const Lattice& L) {
  if (L.dim == 1) return std::abs(L.basis.at(0, 0));
  const VecN a = L.basis.column(0), b = L.basis.column(1);
  return std::max((a + b).norm(), (a - b).norm());
}

double superlevel_measure(const GridFunction& u, double lambda) {
  std::int64_t count = 0;
  for (double v : u.values)
    if (std::abs(v) > lambda) ++count;
  return double(count) * u.cell_volume();
}

struct ShiftSet {
  std::vector<std::array<int, 2>> shifts;
};

// All integer m for which some point of the fundamental cell r*A*[0,1)^n,
// shifted by r*A*m, can meet the support box of u.
ShiftSet enumerate_shifts(const GridFunction& u, const Lattice& L, double r) {
  const IndexBox sup = u.support_box();
  ShiftSet out;
  if (sup.empty()) return out;

  VecN lo = VecN::zero(u.dim), hi = VecN::zero(u.dim);
  for (int a = 0; a < u.dim; ++a) {
    lo[a] = u.origin[a] + sup.lo[a] * u.h;
    hi[a] = u.origin[a] + (sup.hi[a] + 1) * u.h;
  }

  const MatN inv = L.basis.inverse();
  double cmin[2] = {0.0, 0.0}, cmax[2] = {0.0, 0.0};
  bool first = true;
  const int corners = (u.dim == 1) ? 2 : 4;
  for (int c = 0; c < corners; ++c) {
    VecN s = VecN::zero(u.dim);
    s[0] = (c & 1) ? hi[0] : lo[0];
    if (u.dim == 2) s[1] = (c & 2) ? hi[1] : lo[1];
    const VecN b = inv.apply(s * (1.0 / r));
    for (int a = 0; a < u.dim; ++a) {
      cmin[a] = first ? b[a] : std::min(cmin[a], b[a]);
      cmax[a] = first ? b[a] : std::max(cmax[a], b[a]);
    }
    first = false;
  }

  // m = b - y with y in [0,1)^n, so m ranges over (bmin - 1, bmax].
  int mlo[2] = {0, 0}, mhi[2] = {0, 0};
  std::int64_t total = 1;
  for (int a = 0; a < u.dim; ++a) {
    mlo[a] = int(std::floor(cmin[a])) - 1;
    mhi[a] = int(std::ceil(cmax[a]));
    total *= std::int64_t(mhi[a] - mlo[a] + 1);
  }
  if (total > kMaxShiftCandidates)
    throw std::runtime_error(
        "periodization: lattice shift enumeration exceeds cap; scale r is too "
        "small for this support");

  const int j_hi = (u.dim == 2) ? mhi[1] : 0;
  const int j_lo = (u.dim == 2) ? mlo[1] : 0;
  for (int j = j_lo; j <= j_hi; ++j)
    for (int i = mlo[0]; i <= mhi[0]; ++i) out.shifts.push_back({i, j});
  return out;
}

}  // namespace

PeriodicGridFunction PeriodicGridFunction::zeros(const Lattice& L, double r,
                                                 std::array<int, 2> n_cells) {
  PeriodicGridFunction g;
  g.lattice = L;
  g.r = r;
  g.dim = L.dim;
  g.n_cells = n_cells;
  if (L.dim == 1) g.n_cells[1] = 1;
  g.values.assign(size_t(g.n_cells[0]) * g.n_cells[1], 0.0);
  return g;
}

VecN PeriodicGridFunction::torus_center(int i0, int i1) const {
  VecN y = VecN::zero(dim);
  y[0] = (i0 + 0.5) / n_cells[0];
  if (dim == 2) y[1] = (i1 + 0.5) / n_cells[1];
  return y;
}

VecN PeriodicGridFunction::physical_center(int i0, int i1) const {
  return lattice.basis.apply(torus_center(i0, i1)) * r;
}

double PeriodicGridFunction::eval_physical(const VecN& x) const {
  const VecN y = lattice.basis.inverse().apply(x * (1.0 / r));
  int idx[2] = {0, 0};
  for (int a = 0; a < dim; ++a) {
    double f = y[a] - std::floor(y[a]);
    if (f >= 1.0) f = 0.0;
    idx[a] = std::min(n_cells[a] - 1, int(f * n_cells[a]));
  }
  return at(idx[0], idx[1]);
}

double PeriodicGridFunction::mean() const {
  if (values.empty()) return 0.0;
  return kahan_sum(values) / double(values.size());
}

double PeriodicGridFunction::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double SuperlevelTable::at(double lambda) const {
  if (lambdas.empty()) return 0.0;
  size_t best = 0;
  double bd = std::abs(lambdas[0] - lambda);
  for (size_t i = 1; i < lambdas.size(); ++i) {
    const double d = std::abs(lambdas[i] - lambda);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return measures[best];
}

SuperlevelTable admissibility(const GridFunction& u0,
                              const std::vector<double>& lambda_grid) {
  SuperlevelTable t;
  t.lambdas = lambda_grid;
  std::sort(t.lambdas.begin(), t.lambdas.end());
  t.measures.reserve(t.lambdas.size());
  for (double lam : t.lambdas) t.measures.push_back(superlevel_measure(u0, lam));
  return t;
}

EnvelopeReport envelopes(const GridFunction& u0, const Lattice& L, double r,
                         int n_cells_hint, double eps) {
  if (r <= 0.0) throw std::invalid_argument("envelopes: r must be positive");
  if (L.dim != u0.dim)
    throw std::invalid_argument("envelopes: lattice/grid dimension mismatch");

  EnvelopeReport rep;
  rep.C0 = u0.max_abs();
  rep.cell_volume = std::pow(r, L.dim) * std::abs(L.det);

  int n = n_cells_hint;
  if (n <= 0) {
    const double raw = r * cell_diameter_factor(L) / u0.h;
    n = 1;
    while (double(n) < raw) n *= 2;
  }
  std::array<int, 2> cells{n, L.dim == 2 ? n : 1};
  if (std::int64_t(cells[0]) * cells[1] > kMaxTorusCells)
    throw std::runtime_error("envelopes: torus resolution exceeds cell cap");

  rep.v_plus = PeriodicGridFunction::zeros(L, r, cells);
  rep.v_minus = PeriodicGridFunction::zeros(L, r, cells);
  rep.v_abs = PeriodicGridFunction::zeros(L, r, cells);

  const ShiftSet shifts = enumerate_shifts(u0, L, r);
  for (int i1 = 0; i1 < cells[1]; ++i1) {
    for (int i0 = 0; i0 < cells[0]; ++i0) {
      const VecN x = rep.v_plus.physical_center(i0, i1);
      double vp = 0.0, vm = 0.0;
      for (const auto& m : shifts.shifts) {
        VecN mm = VecN::zero(L.dim);
        mm[0] = m[0];
        if (L.dim == 2) mm[1] = m[1];
        const double val =
            sample_containing_cell(u0, x + L.basis.apply(mm) * r);
        vp = std::max(vp, val);
        vm = std::min(vm, val);
      }
      rep.v_plus.at(i0, i1) = vp;
      rep.v_minus.at(i0, i1) = vm;
      rep.v_abs.at(i0, i1) = std::max(vp, -vm);
    }
  }

  rep.M_r = rep.v_abs.mean();
  rep.M_r_plus = rep.v_plus.mean();
  rep.M_r_minus = rep.v_minus.mean();

  if (eps < 0.0) {
    // Nearest point of the default superlevel grid {k*C0/100} to 0.05*C0.
    eps = 0.05 * rep.C0;
  }
  rep.eps = eps;
  rep.p = superlevel_measure(u0, eps);
  return rep;
}

MrBoundVerdict mr_bound_check(const EnvelopeReport& report, double grid_tol) {
  MrBoundVerdict v;
  v.m_r = report.M_r;
  v.tolerance = grid_tol;
  v.bound = report.C0 * report.p / report.cell_volume + report.eps + grid_tol;
  v.ok = v.m_r <= v.bound;
  return v;
}

std::vector<double> mr_chain(const GridFunction& u0, const Lattice& L,
                             const std::vector<double>& r_schedule) {
  std::vector<double> means;
  means.reserve(r_schedule.size());
  for (double r : r_schedule) means.push_back(envelopes(u0, L, r).M_r);
  return means;
}

std::optional<ShiftedData> shifted_periodic_data(const EnvelopeReport& report,
                                                 const std::vector<Interval>& F,
                                                 double eps_floor) {
  const auto bp = select_B(F, report.M_r_plus, Side::kPlus, eps_floor);
  const auto bm = select_B(F, report.M_r_minus, Side::kMinus, eps_floor);
  if (!bp || !bm) return std::nullopt;

  ShiftedData d;
  d.B_plus = *bp;
  d.B_minus = *bm;
  d.u_plus = report.v_plus;
  d.u_minus = report.v_minus;
  const double dp = d.B_plus - report.M_r_plus;    // >= 0 by selection
  const double dm = d.B_minus - report.M_r_minus;  // <= 0 by selection
  for (double& v : d.u_plus.values) v += dp;
  for (double& v : d.u_minus.values) v += dm;
  return d;
}

GridFunction truncate_tails(const GridFunction& u, double threshold,
                            double radius) {
  GridFunction out = u;
  for (int i1 = 0; i1 < u.extents[1]; ++i1)
    for (int i0 = 0; i0 < u.extents[0]; ++i0)
      if (u.cell_center(i0, i1).norm() > radius &&
          std::abs(u.at(i0, i1)) <= threshold)
        out.at(i0, i1) = 0.0;
  return out;
}

}  // namespace entropy_decay
