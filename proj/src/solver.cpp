#include "entropy_decay/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace entropy_decay {

namespace {

constexpr double kAlphaFloor = 1e-12;
constexpr int kErrorSamplesPerSegment = 9;

// Linear interpolation clamped into the segment's value range.  With
// monotone node values this makes evaluation monotone in u exactly in
// floating point: within a segment the weight form is rounding-monotone, and
// across segments both sides are clamped to the shared node value.
double interp_clamped(const std::vector<double>& nodes,
                      const std::vector<double>& vals, double u) {
  if (u <= nodes.front()) return vals.front();
  if (u >= nodes.back()) return vals.back();
  size_t k = size_t(std::upper_bound(nodes.begin(), nodes.end(), u) -
                    nodes.begin()) -
             1;
  if (k + 1 >= nodes.size()) k = nodes.size() - 2;
  const double w = (u - nodes[k]) / (nodes[k + 1] - nodes[k]);
  const double y = vals[k] + w * (vals[k + 1] - vals[k]);
  const double lo = std::min(vals[k], vals[k + 1]);
  const double hi = std::max(vals[k], vals[k + 1]);
  return std::min(hi, std::max(lo, y));
}

// Nondecreasing envelope pinned at index z: cumulative max rightward,
// cumulative min leftward.  Corrections are ulp-sized; the pin keeps the
// u=0 node exactly zero so unreached cells never activate.
std::vector<double> anchored_monotone(std::vector<double> raw, size_t z) {
  for (size_t i = z + 1; i < raw.size(); ++i) raw[i] = std::max(raw[i], raw[i - 1]);
  for (size_t i = z; i-- > 0;) raw[i] = std::min(raw[i], raw[i + 1]);
  return raw;
}

std::vector<double> anchored_antitone(std::vector<double> raw, size_t z) {
  for (size_t i = z + 1; i < raw.size(); ++i) raw[i] = std::min(raw[i], raw[i - 1]);
  for (size_t i = z; i-- > 0;) raw[i] = std::max(raw[i], raw[i + 1]);
  return raw;
}

double sample_containing(const GridFunction& u, const VecN& x) {
  int idx[2] = {0, 0};
  for (int a = 0; a < u.dim; ++a) {
    const double t = std::floor((x[a] - u.origin[a]) / u.h);
    if (t < 0.0 || t >= double(u.extents[a])) return 0.0;
    idx[a] = int(t);
  }
  return u.at(idx[0], idx[1]);
}

double clamp3(double x, double lo, double hi) {
  return std::max(lo, std::min(hi, x));
}

}  // namespace

double FluxTable::eval(double u) const {
  if (u <= nodes.front()) return vals.front();
  if (u >= nodes.back()) return vals.back();
  const int k = segment(u);
  const double y = vals[k] + slopes[k] * (u - nodes[k]);
  const double lo = std::min(vals[k], vals[k + 1]);
  const double hi = std::max(vals[k], vals[k + 1]);
  return std::min(hi, std::max(lo, y));
}

int FluxTable::segment(double u) const {
  int k = int(std::upper_bound(nodes.begin(), nodes.end(), u) - nodes.begin()) - 1;
  return std::max(0, std::min(k, int(nodes.size()) - 2));
}

FluxTable tabulate_flux(const FluxSpec& phi, int component, double u_min,
                        double u_max, int n_points) {
  if (!(u_min < u_max))
    throw std::invalid_argument("tabulate_flux: empty range");
  if (component < 0 || component >= int(phi.components.size()))
    throw std::invalid_argument("tabulate_flux: component out of range");
  const double span = u_max - u_min;
  const double slack = 1e-12 * (span + std::abs(u_min) + std::abs(u_max));
  if (u_min < phi.u_range.lo - slack || u_max > phi.u_range.hi + slack)
    throw std::invalid_argument("tabulate_flux: range outside flux validity");
  if (n_points < 2) throw std::invalid_argument("tabulate_flux: n_points < 2");

  FluxTable t;
  const AffineStructure s = affine_structure(phi);
  for (double p : s.structure_points())
    if (p >= u_min && p <= u_max) t.nodes.push_back(p);
  t.nodes.push_back(u_min);
  t.nodes.push_back(u_max);
  if (u_min <= 0.0 && 0.0 <= u_max) t.nodes.push_back(0.0);
  std::sort(t.nodes.begin(), t.nodes.end());
  t.nodes.erase(std::unique(t.nodes.begin(), t.nodes.end()), t.nodes.end());

  const double min_gap = span * 1e-12;
  std::vector<double> merged;
  merged.reserve(t.nodes.size() + n_points);
  for (int i = 0; i < n_points; ++i) {
    const double c = u_min + span * (double(i) / (n_points - 1));
    auto it = std::lower_bound(t.nodes.begin(), t.nodes.end(), c);
    double d = std::numeric_limits<double>::infinity();
    if (it != t.nodes.end()) d = std::min(d, *it - c);
    if (it != t.nodes.begin()) d = std::min(d, c - *(it - 1));
    if (d > min_gap) merged.push_back(c);
  }
  t.nodes.insert(t.nodes.end(), merged.begin(), merged.end());
  std::sort(t.nodes.begin(), t.nodes.end());

  const size_t n = t.nodes.size();
  t.vals.resize(n);
  for (size_t i = 0; i < n; ++i)
    t.vals[i] = phi.eval_component(component, t.nodes[i]);
  double f0 = 0.0;
  {
    auto it = std::lower_bound(t.nodes.begin(), t.nodes.end(), 0.0);
    if (it != t.nodes.end() && *it == 0.0) f0 = t.vals[it - t.nodes.begin()];
  }
  if (f0 != 0.0)
    for (double& v : t.vals) v -= f0;

  t.slopes.resize(n - 1);
  for (size_t k = 0; k + 1 < n; ++k) {
    t.slopes[k] = (t.vals[k + 1] - t.vals[k]) / (t.nodes[k + 1] - t.nodes[k]);
    t.max_abs_slope = std::max(t.max_abs_slope, std::abs(t.slopes[k]));
  }
  for (size_t k = 0; k + 1 < n; ++k) {
    for (int j = 1; j <= kErrorSamplesPerSegment; ++j) {
      const double frac = double(j) / (kErrorSamplesPerSegment + 1);
      const double u = t.nodes[k] + frac * (t.nodes[k + 1] - t.nodes[k]);
      const double exact = phi.eval_component(component, u) - f0;
      const double lin = t.vals[k] + t.slopes[k] * (u - t.nodes[k]);
      t.max_interp_error = std::max(t.max_interp_error, std::abs(exact - lin));
    }
  }
  return t;
}

void SchemeConfig::validate() const {
  if (!(cfl > 0.0) || cfl > 0.5)
    throw std::invalid_argument("scheme: cfl must lie in (0, 0.5]");
  if (table_points < 2)
    throw std::invalid_argument("scheme: table_points must be at least 2");
}

FvRun::FvRun(const FluxSpec& phi, const GridFunction& u0,
             const SchemeConfig& scheme)
    : state_(u0) {
  periodic_ = false;
  lattice_ = Lattice::from_basis(u0.dim, MatN::identity(u0.dim));
  r_ = 1.0;
  double lo = 0.0, hi = 0.0;
  for (double v : u0.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  init(phi, scheme, lo, hi);
  window_ = state_.support_box();
  scratch_.assign(state_.values.size(), 0.0);
}

FvRun::FvRun(const FluxSpec& phi, const PeriodicGridFunction& u0,
             const SchemeConfig& scheme) {
  if (u0.dim == 2 && u0.n_cells[0] != u0.n_cells[1])
    throw std::invalid_argument("FvRun: torus grid must be square");
  periodic_ = true;
  lattice_ = u0.lattice;
  r_ = u0.r;
  state_ = GridFunction::zeros(u0.dim, VecN::zero(u0.dim), 1.0 / u0.n_cells[0],
                               u0.n_cells);
  state_.values = u0.values;
  double lo = 0.0, hi = 0.0;
  for (double v : state_.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  init(torus_flux(phi, lattice_, r_), scheme, lo, hi);
  window_ = IndexBox{{0, 0}, {state_.extents[0] - 1, state_.extents[1] - 1}};
  scratch_.assign(state_.values.size(), 0.0);
}

void FvRun::init(const FluxSpec& phi, const SchemeConfig& scheme, double u_lo,
                 double u_hi) {
  scheme.validate();
  scheme_ = scheme;
  if (scheme.flux == NumericalFlux::kEngquistOsher && state_.dim != 1)
    throw std::invalid_argument("Engquist-Osher scheme is one-dimensional");
  if (scheme.range_lo < scheme.range_hi) {
    u_lo = scheme.range_lo;
    u_hi = scheme.range_hi;
  }
  u_lo = std::min(u_lo, 0.0);
  u_hi = std::max(u_hi, 0.0);
  if (u_hi - u_lo < 1e-9) {
    u_lo -= 1e-9;
    u_hi += 1e-9;
  }

  tables_.clear();
  axes_.clear();
  double denom = 0.0;
  for (int d = 0; d < state_.dim; ++d) {
    tables_.push_back(
        tabulate_flux(phi, d, u_lo, u_hi, scheme.table_points));
    const FluxTable& t = tables_.back();
    AxisTables ax;
    ax.alpha = std::max(t.max_abs_slope, kAlphaFloor);
    auto it = std::lower_bound(t.nodes.begin(), t.nodes.end(), 0.0);
    ax.zero_node = (it != t.nodes.end() && *it == 0.0)
                       ? size_t(it - t.nodes.begin())
                       : 0;
    const size_t n = t.nodes.size();
    std::vector<double> gp(n), gm(n);
    for (size_t i = 0; i < n; ++i) {
      const double au = ax.alpha * t.nodes[i];
      gp[i] = au + t.vals[i];
      gm[i] = au - t.vals[i];
    }
    ax.g_plus = anchored_monotone(std::move(gp), ax.zero_node);
    ax.g_minus = anchored_monotone(std::move(gm), ax.zero_node);
    if (scheme.flux == NumericalFlux::kEngquistOsher) {
      std::vector<double> fp(n, 0.0), fm(n, 0.0);
      for (size_t i = 1; i < n; ++i) {
        const double dv = t.vals[i] - t.vals[i - 1];
        fp[i] = fp[i - 1] + std::max(dv, 0.0);
        fm[i] = fm[i - 1] + std::min(dv, 0.0);
      }
      const double fpz = fp[ax.zero_node], fmz = fm[ax.zero_node];
      for (size_t i = 0; i < n; ++i) {
        fp[i] -= fpz;
        fm[i] -= fmz;
      }
      ax.f_plus = anchored_monotone(std::move(fp), ax.zero_node);
      ax.f_minus = anchored_antitone(std::move(fm), ax.zero_node);
    }
    denom += ax.alpha;
    axes_.push_back(std::move(ax));
  }
  dt_ = scheme.cfl * state_.h / denom;
  tables_dt_ = -1.0;
}

void FvRun::rebuild_step_tables(double dt_step) {
  double sum = 0.0;
  for (int d = 0; d < state_.dim; ++d) {
    axes_[d].lambda = dt_step / state_.h;
    sum += axes_[d].lambda * axes_[d].alpha;
  }
  diag_coef_ = 1.0 - sum;
  if (diag_coef_ < 0.0)
    throw NumericalError("CFL violation: step size exceeds the stable bound");
  if (scheme_.flux == NumericalFlux::kEngquistOsher) {
    AxisTables& ax = axes_[0];
    const FluxTable& t = tables_[0];
    const size_t n = t.nodes.size();
    std::vector<double> diag(n);
    for (size_t i = 0; i < n; ++i)
      diag[i] = t.nodes[i] - ax.lambda * (ax.f_plus[i] - ax.f_minus[i]);
    ax.diag = anchored_monotone(std::move(diag), ax.zero_node);
  }
  tables_dt_ = dt_step;
}

void FvRun::advance_to(double t) {
  const double slack = 1e-9 * dt_;
  if (t <= time_ + slack) {
    time_ = std::max(time_, t);
    return;
  }
  while (t - time_ > dt_ + slack) step(dt_);
  const double rem = t - time_;
  if (rem > slack) step(std::min(rem, dt_));
  time_ = t;
}

void FvRun::step(double dt_step) {
  if (!(dt_step > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (dt_step > dt_ * (1.0 + 1e-9))
    throw NumericalError("step: dt exceeds the CFL step size");
  if (dt_step != tables_dt_) rebuild_step_tables(dt_step);

  const int n0 = state_.extents[0];
  const int n1 = state_.extents[1];
  const std::vector<double>& u = state_.values;
  const bool eo = scheme_.flux == NumericalFlux::kEngquistOsher;

  IndexBox w = window_;
  if (!periodic_) {
    if (w.empty()) {
      time_ += dt_step;
      return;
    }
    w.lo[0] = std::max(0, w.lo[0] - 1);
    w.hi[0] = std::min(n0 - 1, w.hi[0] + 1);
    if (state_.dim == 2) {
      w.lo[1] = std::max(0, w.lo[1] - 1);
      w.hi[1] = std::min(n1 - 1, w.hi[1] + 1);
    }
  }

  if (state_.dim == 1) {
    const AxisTables& ax = axes_[0];
    const std::vector<double>& nodes = tables_[0].nodes;
    const double lam = ax.lambda;
    for (int i = w.lo[0]; i <= w.hi[0]; ++i) {
      const double uc = u[i];
      double uw, ue;
      if (periodic_) {
        uw = u[(i + n0 - 1) % n0];
        ue = u[(i + 1) % n0];
      } else {
        uw = (i > 0) ? u[i - 1] : uc;
        ue = (i + 1 < n0) ? u[i + 1] : uc;
      }
      double raw;
      if (eo) {
        raw = interp_clamped(nodes, ax.diag, uc) +
              lam * interp_clamped(nodes, ax.f_plus, uw) -
              lam * interp_clamped(nodes, ax.f_minus, ue);
      } else {
        raw = diag_coef_ * uc +
              0.5 * lam *
                  (interp_clamped(nodes, ax.g_minus, ue) +
                   interp_clamped(nodes, ax.g_plus, uw));
      }
      const double lo = std::min(uc, std::min(uw, ue));
      const double hi = std::max(uc, std::max(uw, ue));
      scratch_[i] = clamp3(raw, lo, hi);
    }
  } else {
    const AxisTables& ax0 = axes_[0];
    const AxisTables& ax1 = axes_[1];
    const std::vector<double>& nd0 = tables_[0].nodes;
    const std::vector<double>& nd1 = tables_[1].nodes;
    for (int j = w.lo[1]; j <= w.hi[1]; ++j) {
      for (int i = w.lo[0]; i <= w.hi[0]; ++i) {
        const size_t c = size_t(j) * n0 + i;
        const double uc = u[c];
        double uw0, ue0, uw1, ue1;
        if (periodic_) {
          uw0 = u[size_t(j) * n0 + (i + n0 - 1) % n0];
          ue0 = u[size_t(j) * n0 + (i + 1) % n0];
          uw1 = u[size_t((j + n1 - 1) % n1) * n0 + i];
          ue1 = u[size_t((j + 1) % n1) * n0 + i];
        } else {
          uw0 = (i > 0) ? u[c - 1] : uc;
          ue0 = (i + 1 < n0) ? u[c + 1] : uc;
          uw1 = (j > 0) ? u[c - n0] : uc;
          ue1 = (j + 1 < n1) ? u[c + n0] : uc;
        }
        const double raw =
            diag_coef_ * uc +
            0.5 * ax0.lambda *
                (interp_clamped(nd0, ax0.g_minus, ue0) +
                 interp_clamped(nd0, ax0.g_plus, uw0)) +
            0.5 * ax1.lambda *
                (interp_clamped(nd1, ax1.g_minus, ue1) +
                 interp_clamped(nd1, ax1.g_plus, uw1));
        const double lo =
            std::min({uc, uw0, ue0, uw1, ue1});
        const double hi =
            std::max({uc, uw0, ue0, uw1, ue1});
        scratch_[c] = clamp3(raw, lo, hi);
      }
    }
  }

  if (periodic_) {
    std::swap(state_.values, scratch_);
  } else {
    std::swap(state_.values, scratch_);
    // The swapped-out buffer holds the previous state; clear its nonzero
    // region so the scratch invariant (all zero) is restored.
    for (int j = w.lo[1]; j <= w.hi[1]; ++j)
      for (int i = w.lo[0]; i <= w.hi[0]; ++i)
        scratch_[size_t(j) * n0 + i] = 0.0;
    // Trim the window back to the actual support.
    const std::vector<double>& v = state_.values;
    auto row_zero = [&](int j) {
      for (int i = w.lo[0]; i <= w.hi[0]; ++i)
        if (v[size_t(j) * n0 + i] != 0.0) return false;
      return true;
    };
    auto col_zero = [&](int i) {
      for (int j = w.lo[1]; j <= w.hi[1]; ++j)
        if (v[size_t(j) * n0 + i] != 0.0) return false;
      return true;
    };
    while (w.lo[1] <= w.hi[1] && row_zero(w.lo[1])) ++w.lo[1];
    while (w.lo[1] <= w.hi[1] && row_zero(w.hi[1])) --w.hi[1];
    while (w.lo[0] <= w.hi[0] && w.lo[1] <= w.hi[1] && col_zero(w.lo[0]))
      ++w.lo[0];
    while (w.lo[0] <= w.hi[0] && w.lo[1] <= w.hi[1] && col_zero(w.hi[0]))
      --w.hi[0];
    window_ = w;
  }
  time_ += dt_step;
}

GridFunction FvRun::box_state() const { return state_; }

PeriodicGridFunction FvRun::torus_state() const {
  if (!periodic_)
    throw std::logic_error("torus_state: run is not periodic");
  PeriodicGridFunction out =
      PeriodicGridFunction::zeros(lattice_, r_, state_.extents);
  out.values = state_.values;
  return out;
}

double FvRun::mass() const {
  if (!periodic_) return state_.mass();
  return state_.mass() * std::pow(r_, state_.dim) * std::abs(lattice_.det);
}

double FvRun::numerical_flux(int axis, double a, double b) const {
  const AxisTables& ax = axes_[axis];
  const std::vector<double>& nodes = tables_[axis].nodes;
  if (scheme_.flux == NumericalFlux::kEngquistOsher)
    return interp_clamped(nodes, ax.f_plus, a) +
           interp_clamped(nodes, ax.f_minus, b);
  return 0.5 * (interp_clamped(nodes, ax.g_plus, a) -
                interp_clamped(nodes, ax.g_minus, b));
}

ComparisonVerdict compare_runs(const FluxSpec& phi, const GridFunction& u0,
                               const GridFunction& v0,
                               const SchemeConfig& scheme, double T) {
  if (u0.dim != v0.dim || u0.extents != v0.extents || u0.h != v0.h ||
      u0.origin[0] != v0.origin[0] ||
      (u0.dim == 2 && u0.origin[1] != v0.origin[1]))
    throw std::invalid_argument("compare_runs: grids must match");

  ComparisonVerdict verdict;
  for (size_t c = 0; c < u0.values.size(); ++c) {
    if (u0.values[c] > v0.values[c]) {
      verdict.ok = false;
      verdict.first_step = 0;
      verdict.first_cell = {int(c % u0.extents[0]), int(c / u0.extents[0])};
      return verdict;
    }
  }

  SchemeConfig shared = scheme;
  if (!(shared.range_lo < shared.range_hi)) {
    double lo = 0.0, hi = 0.0;
    for (double v : u0.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (double v : v0.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo < hi) {
      shared.range_lo = lo;
      shared.range_hi = hi;
    }
  }

  FvRun a(phi, u0, shared);
  FvRun b(phi, v0, shared);
  const double slack = 1e-9 * a.dt();
  int step_count = 0;
  while (T - a.time() > slack) {
    const double d = std::min(a.dt(), T - a.time());
    a.step(d);
    b.step(d);
    ++step_count;
    const auto& ua = a.state().values;
    const auto& ub = b.state().values;
    for (size_t c = 0; c < ua.size(); ++c) {
      if (ua[c] > ub[c]) {
        verdict.ok = false;
        verdict.first_step = step_count;
        verdict.first_cell = {int(c % u0.extents[0]), int(c / u0.extents[0])};
        return verdict;
      }
    }
  }
  return verdict;
}

double entropy_residual(const FvRun& run, const GridFunction& prev,
                        const GridFunction& next, double k, double dt_step) {
  const GridFunction& g = prev;
  const int n0 = g.extents[0], n1 = g.extents[1];
  const bool wrap = run.periodic();
  double lam[2] = {dt_step / g.h, dt_step / g.h};

  auto fetch = [&](int i, int j) {
    if (wrap) {
      i = (i % n0 + n0) % n0;
      j = (j % n1 + n1) % n1;
    } else {
      i = std::max(0, std::min(n0 - 1, i));
      j = std::max(0, std::min(n1 - 1, j));
    }
    return g.at(i, j);
  };
  auto q = [&](int axis, double a, double b) {
    return run.numerical_flux(axis, std::max(a, k), std::max(b, k)) -
           run.numerical_flux(axis, std::min(a, k), std::min(b, k));
  };

  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n1; ++j) {
    for (int i = 0; i < n0; ++i) {
      const double uc = g.at(i, j);
      double flux_div = 0.0;
      {
        const double uw = fetch(i - 1, j), ue = fetch(i + 1, j);
        flux_div += lam[0] * (q(0, uc, ue) - q(0, uw, uc));
      }
      if (g.dim == 2) {
        const double uw = fetch(i, j - 1), ue = fetch(i, j + 1);
        flux_div += lam[1] * (q(1, uc, ue) - q(1, uw, uc));
      }
      const double res =
          std::abs(next.at(i, j) - k) - std::abs(uc - k) + flux_div;
      worst = std::max(worst, res);
    }
  }
  return worst;
}

double hopf_lax_1d(const FluxTable& f, const GridFunction& u0, double t,
                   double x) {
  if (u0.dim != 1)
    throw std::invalid_argument("hopf_lax_1d: one-dimensional data required");
  if (t < 0.0) throw std::invalid_argument("hopf_lax_1d: negative time");

  const double stol = 1e-12 * std::max(1.0, f.max_abs_slope);
  for (size_t kk = 0; kk + 1 < f.slopes.size(); ++kk)
    if (f.slopes[kk + 1] < f.slopes[kk] - stol)
      throw std::invalid_argument("hopf_lax_1d: flux table is not convex");

  VecN xv = VecN::zero(1);
  if (t == 0.0) {
    xv[0] = x;
    return sample_containing(u0, xv);
  }
  if (f.slopes.back() - f.slopes.front() <= stol) {
    const double c =
        (f.vals.back() - f.vals.front()) / (f.nodes.back() - f.nodes.front());
    xv[0] = x - t * c;
    return sample_containing(u0, xv);
  }

  // Prefix integral of u0 at cell edges over the support.
  const IndexBox sup = u0.support_box();
  std::vector<double> cum;
  double e0 = 0.0;
  int cells = 0;
  if (!sup.empty()) {
    cells = sup.hi[0] - sup.lo[0] + 1;
    e0 = u0.origin[0] + sup.lo[0] * u0.h;
    cum.resize(cells + 1, 0.0);
    double s = 0.0, comp = 0.0;
    for (int i = 0; i < cells; ++i) {
      const double term = u0.h * u0.at(sup.lo[0] + i) - comp;
      const double tt = s + term;
      comp = (tt - s) - term;
      s = tt;
      cum[i + 1] = s;
    }
  }
  auto U0 = [&](double y) {
    if (cum.empty()) return 0.0;
    if (y <= e0) return 0.0;
    const double last = e0 + cells * u0.h;
    if (y >= last) return cum[cells];
    int ci = int(std::floor((y - e0) / u0.h));
    ci = std::max(0, std::min(cells - 1, ci));
    return cum[ci] + u0.at(sup.lo[0] + ci) * (y - (e0 + ci * u0.h));
  };
  // Legendre transform of the table: upper envelope over nodes, with the
  // active node found from the sorted chord slopes.
  auto fstar = [&](double v, int* active) {
    const int j = int(std::upper_bound(f.slopes.begin(), f.slopes.end(), v) -
                      f.slopes.begin());
    if (active) *active = j;
    return f.nodes[j] * v - f.vals[j];
  };

  std::vector<double> candidates;
  candidates.reserve(cells + 1 + f.slopes.size());
  for (int i = 0; i <= cells; ++i) candidates.push_back(e0 + i * u0.h);
  for (double s : f.slopes) candidates.push_back(x - t * s);

  double best = std::numeric_limits<double>::infinity();
  double y_star = x - t * f.slopes.front();
  for (double y : candidates) {
    const double g = U0(y) + t * fstar((x - y) / t, nullptr);
    if (g < best) {
      best = g;
      y_star = y;
    }
  }

  const double v_star = (x - y_star) / t;
  // Maximizer node range at v_star; ties widen it to the flat interval.
  const double vtol = 1e-12 * (1.0 + std::abs(v_star)) +
                      1e-12 * std::max(1.0, f.max_abs_slope);
  int jlo = int(std::lower_bound(f.slopes.begin(), f.slopes.end(),
                                 v_star - vtol) -
                f.slopes.begin());
  int jhi = int(std::upper_bound(f.slopes.begin(), f.slopes.end(),
                                 v_star + vtol) -
                f.slopes.begin());
  xv[0] = y_star;
  const double transported = sample_containing(u0, xv);
  return clamp3(transported, f.nodes[jlo], f.nodes[jhi]);
}

GridFunction hopf_lax_grid(const FluxTable& f, const GridFunction& u0, double t,
                           const GridFunction& layout) {
  GridFunction out = GridFunction::zeros(layout.dim, layout.origin, layout.h,
                                         layout.extents);
  for (int i = 0; i < layout.extents[0]; ++i)
    out.at(i) = hopf_lax_1d(f, u0, t, out.cell_center(i)[0]);
  return out;
}

GridFunction traveling_wave(const GridFunction& u0, const VecN& c, double t) {
  GridFunction out = u0;
  for (int a = 0; a < u0.dim; ++a) out.origin[a] = u0.origin[a] + t * c[a];
  return out;
}

FluxSpec torus_flux(const FluxSpec& phi, const Lattice& L, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("torus_flux: r must be positive");
  const MatN inv = L.basis.inverse();
  FluxSpec psi;
  psi.dim = phi.dim;
  psi.u_range = phi.u_range;
  for (int i = 0; i < phi.dim; ++i) {
    VecN row = VecN::zero(phi.dim);
    for (int j = 0; j < phi.dim; ++j) row[j] = inv.at(i, j) / r;
    FluxSpec proj = scalar_projection(phi, row);
    psi.components.push_back(proj.components[0]);
  }
  return psi;
}

}  // namespace entropy_decay
