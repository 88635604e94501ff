#include "entropy_decay/flux.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace entropy_decay {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCoeffTol = 1e-14;   // relative cancellation threshold
constexpr double kSlopeTol = 1e-12;   // relative slope comparison

double pow2(int e) { return std::ldexp(1.0, e); }

// Affine restriction of one flux component: the map slope*u + offset on span.
struct ScalarPiece {
  Interval span;
  double slope = 0.0;
  double offset = 0.0;
  double eval(double u) const { return slope * u + offset; }
};

// Exact lowering of a component to (interval, sum) pieces covering the range.
using LoweredPiece = std::pair<Interval, SumExpr>;

std::vector<LoweredPiece> lower_component(const ComponentExpr& e, Interval range);

std::vector<LoweredPiece> lower_sum(const SumExpr& s, Interval range) {
  return {{range, s}};
}

std::vector<LoweredPiece> lower_piecewise(const PiecewiseExpr& p, Interval range) {
  std::vector<LoweredPiece> out;
  const size_t nb = p.breakpoints.size();
  for (size_t i = 0; i <= nb; ++i) {
    double lo = (i == 0) ? -kInf : p.breakpoints[i - 1];
    double hi = (i == nb) ? kInf : p.breakpoints[i];
    lo = std::max(lo, range.lo);
    hi = std::min(hi, range.hi);
    if (hi > lo) out.push_back({{lo, hi}, p.pieces[i]});
  }
  return out;
}

std::vector<LoweredPiece> lower_dyadic(const DyadicExpr& d, Interval range) {
  const int K = d.k_max;
  const double a = d.amplitude;
  // Node values v[k] = g(2^-k), accumulated outward from the center band.
  std::vector<double> v(K + 1);
  v[K] = a * ((K % 2 == 0) ? 1.0 : -1.0) * pow2(-K);
  for (int k = K - 1; k >= 0; --k) {
    double sk = a * ((k % 2 == 0) ? 1.0 : -1.0);
    v[k] = v[k + 1] + sk * pow2(-k - 1);
  }

  // Segments of the positive half, inner to outer, as (lo, hi, slope, value at lo).
  struct Seg {
    double lo, hi, slope, vlo;
  };
  std::vector<Seg> segs;
  double sc = a * ((K % 2 == 0) ? 1.0 : -1.0);
  segs.push_back({0.0, pow2(-K), sc, 0.0});
  for (int k = K - 1; k >= 0; --k) {
    double sk = a * ((k % 2 == 0) ? 1.0 : -1.0);
    segs.push_back({pow2(-k - 1), pow2(-k), sk, v[k + 1]});
  }
  segs.push_back({1.0, kInf, -a, v[0]});

  std::vector<LoweredPiece> out;
  // Negative side, odd extension: g(u) = -g(-u), slope is even in u.
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
    double lo = std::max(-it->hi, range.lo);
    double hi = std::min(-it->lo, range.hi);
    if (hi <= lo) continue;
    // value at -it->lo is -it->vlo; affine with slope it->slope
    SumExpr s;
    s.slope = it->slope;
    s.offset = -it->vlo + it->slope * it->lo;
    out.push_back({{lo, hi}, s});
  }
  for (const Seg& g : segs) {
    double lo = std::max(g.lo, range.lo);
    double hi = std::min(g.hi, range.hi);
    if (hi <= lo) continue;
    SumExpr s;
    s.slope = g.slope;
    s.offset = g.vlo - g.slope * g.lo;
    out.push_back({{lo, hi}, s});
  }
  // The two bands flanking 0 share one linear map; merge so the center is a
  // single affine piece.
  std::vector<LoweredPiece> merged;
  for (auto& lp : out) {
    if (!merged.empty() && merged.back().first.hi == lp.first.lo &&
        merged.back().second.slope == lp.second.slope &&
        merged.back().second.offset == lp.second.offset) {
      merged.back().first.hi = lp.first.hi;
    } else {
      merged.push_back(lp);
    }
  }
  return merged;
}

std::vector<LoweredPiece> lower_component(const ComponentExpr& e, Interval range) {
  if (std::holds_alternative<SumExpr>(e)) return lower_sum(std::get<SumExpr>(e), range);
  if (std::holds_alternative<PiecewiseExpr>(e))
    return lower_piecewise(std::get<PiecewiseExpr>(e), range);
  return lower_dyadic(std::get<DyadicExpr>(e), range);
}

// Maximal affine sub-pieces of a canonical sum on the given span.  A sum is
// affine on one side of 0 exactly when the power coefficients cancel there;
// an even first power contributes a kink at 0 only.
std::vector<ScalarPiece> sum_affine_on(const SumExpr& raw, Interval span) {
  SumExpr s = raw.canonical();
  double kink = 0.0;
  struct Group {
    double odd = 0.0, even = 0.0, mass = 0.0;
  };
  std::map<double, Group> groups;
  for (const PowerTerm& t : s.powers) {
    if (t.exponent == 1.0 && t.parity == Parity::kEven) {
      kink += t.coeff;
      continue;
    }
    Group& g = groups[t.exponent];
    (t.parity == Parity::kOdd ? g.odd : g.even) += t.coeff;
    g.mass += std::abs(t.coeff);
  }
  bool right_affine = true, left_affine = true;
  for (const auto& [p, g] : groups) {
    if (std::abs(g.odd + g.even) > kCoeffTol * g.mass) right_affine = false;
    if (std::abs(g.even - g.odd) > kCoeffTol * g.mass) left_affine = false;
  }
  const double slope_r = s.slope + kink;
  const double slope_l = s.slope - kink;

  std::vector<ScalarPiece> out;
  if (span.lo >= 0.0) {
    if (right_affine) out.push_back({span, slope_r, s.offset});
  } else if (span.hi <= 0.0) {
    if (left_affine) out.push_back({span, slope_l, s.offset});
  } else {
    const bool no_kink = std::abs(kink) <= kCoeffTol * (std::abs(s.slope) + std::abs(kink));
    if (left_affine && right_affine && no_kink) {
      out.push_back({span, s.slope, s.offset});
    } else {
      if (left_affine) out.push_back({{span.lo, 0.0}, slope_l, s.offset});
      if (right_affine) out.push_back({{0.0, span.hi}, slope_r, s.offset});
    }
  }
  return out;
}

void merge_scalar_pieces(std::vector<ScalarPiece>& pieces) {
  std::sort(pieces.begin(), pieces.end(),
            [](const ScalarPiece& a, const ScalarPiece& b) { return a.span.lo < b.span.lo; });
  std::vector<ScalarPiece> merged;
  for (const ScalarPiece& p : pieces) {
    if (!merged.empty() && merged.back().span.hi == p.span.lo) {
      ScalarPiece& m = merged.back();
      const double x = p.span.lo;
      const double va = m.eval(x), vb = p.eval(x);
      const double vtol = kTolCont * std::max({1.0, std::abs(va), std::abs(vb)});
      const double stol = kSlopeTol * std::max({1.0, std::abs(m.slope), std::abs(p.slope)});
      if (std::abs(m.slope - p.slope) <= stol && std::abs(va - vb) <= vtol) {
        m.span.hi = p.span.hi;
        continue;
      }
    }
    merged.push_back(p);
  }
  pieces = std::move(merged);
}

std::vector<ScalarPiece> component_affine(const ComponentExpr& e, Interval range) {
  std::vector<ScalarPiece> pieces;
  for (const auto& [iv, sum] : lower_component(e, range)) {
    auto sub = sum_affine_on(sum, iv);
    pieces.insert(pieces.end(), sub.begin(), sub.end());
  }
  merge_scalar_pieces(pieces);
  return pieces;
}

void add_scaled(SumExpr& acc, const SumExpr& s, double c) {
  acc.slope += c * s.slope;
  acc.offset += c * s.offset;
  for (PowerTerm t : s.powers) {
    t.coeff *= c;
    acc.powers.push_back(t);
  }
}

// 2x2 symmetric eigen-decomposition; returns (lmin, lmax, unit eigenvector of lmin).
void sym_eigen2(double a, double b, double c, double& lmin, double& lmax, VecN& vmin) {
  const double tr = a + c;
  const double disc = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4.0 * b * b));
  lmin = 0.5 * (tr - disc);
  lmax = 0.5 * (tr + disc);
  VecN c1(b, lmin - a), c2(lmin - c, b);
  VecN v = c1.norm2() >= c2.norm2() ? c1 : c2;
  if (v.norm2() == 0.0) v = (a <= c) ? VecN(1.0, 0.0) : VecN(0.0, 1.0);
  vmin = v * (1.0 / v.norm());
}

bool same_span(const std::vector<VecN>& a, const std::vector<VecN>& b) {
  if (a.size() != b.size()) return false;
  for (const VecN& x : a) {
    double best = 0.0;
    for (const VecN& y : b) best = std::max(best, std::abs(x.dot(y)));
    if (best < 1.0 - 1e-9) return false;
  }
  return true;
}

}  // namespace

std::vector<double> default_eps_ladder() {
  std::vector<double> l;
  for (int k = 1; k <= 20; ++k) l.push_back(pow2(-k));
  return l;
}

double SumExpr::eval(double u) const {
  double y = offset + slope * u;
  const double au = std::abs(u);
  const double sgn = (u > 0.0) ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
  for (const PowerTerm& t : powers) {
    const double m = std::pow(au, t.exponent);
    y += t.coeff * (t.parity == Parity::kOdd ? sgn * m : m);
  }
  return y;
}

SumExpr SumExpr::canonical() const {
  SumExpr r;
  r.slope = slope;
  r.offset = offset;
  double scale = std::abs(slope) + std::abs(offset);
  for (const PowerTerm& t : powers) scale += std::abs(t.coeff);
  scale = std::max(scale, 1e-300);

  std::vector<PowerTerm> merged;
  for (const PowerTerm& t : powers) {
    bool found = false;
    for (PowerTerm& m : merged) {
      if (m.exponent == t.exponent && m.parity == t.parity) {
        m.coeff += t.coeff;
        found = true;
        break;
      }
    }
    if (!found) merged.push_back(t);
  }
  for (const PowerTerm& m : merged) {
    if (std::abs(m.coeff) <= kCoeffTol * scale) continue;
    if (m.exponent == 1.0 && m.parity == Parity::kOdd) {
      r.slope += m.coeff;
    } else {
      r.powers.push_back(m);
    }
  }
  return r;
}

double PiecewiseExpr::eval(double u) const {
  size_t i = std::upper_bound(breakpoints.begin(), breakpoints.end(), u) - breakpoints.begin();
  return pieces[i].eval(u);
}

double DyadicExpr::eval(double u) const {
  if (u == 0.0) return 0.0;
  const double au = std::abs(u);
  const double sgn = (u > 0.0) ? 1.0 : -1.0;
  const int K = k_max;
  std::vector<double> v(K + 1);
  v[K] = amplitude * ((K % 2 == 0) ? 1.0 : -1.0) * pow2(-K);
  for (int k = K - 1; k >= 0; --k) {
    double sk = amplitude * ((k % 2 == 0) ? 1.0 : -1.0);
    v[k] = v[k + 1] + sk * pow2(-k - 1);
  }
  if (au >= 1.0) return sgn * (v[0] - amplitude * (au - 1.0));
  if (au <= pow2(-K)) {
    double sc = amplitude * ((K % 2 == 0) ? 1.0 : -1.0);
    return sgn * sc * au;
  }
  int k = 0;
  while (au <= pow2(-k - 1)) ++k;  // band (2^-(k+1), 2^-k]
  double sk = amplitude * ((k % 2 == 0) ? 1.0 : -1.0);
  return sgn * (v[k + 1] + sk * (au - pow2(-k - 1)));
}

void FluxSpec::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("FluxSpec: dim must be 1 or 2");
  if (static_cast<int>(components.size()) != dim)
    throw std::invalid_argument("FluxSpec: one component expression per dimension required");
  if (!(u_range.hi > 0.0) || !std::isfinite(u_range.hi))
    throw std::invalid_argument("FluxSpec: u_range must be a bounded interval [-U, U], U > 0");
  if (std::abs(u_range.lo + u_range.hi) > 1e-12 * u_range.hi)
    throw std::invalid_argument("FluxSpec: u_range must be symmetric about 0");

  auto check_sum = [](const SumExpr& s) {
    if (!std::isfinite(s.slope) || !std::isfinite(s.offset))
      throw std::invalid_argument("FluxSpec: non-finite affine coefficients");
    for (const PowerTerm& t : s.powers) {
      if (!(t.exponent > 0.0) || !std::isfinite(t.exponent) || !std::isfinite(t.coeff))
        throw std::invalid_argument("FluxSpec: power terms need finite coeff and exponent > 0");
    }
  };

  for (const ComponentExpr& e : components) {
    if (std::holds_alternative<SumExpr>(e)) {
      check_sum(std::get<SumExpr>(e));
    } else if (std::holds_alternative<PiecewiseExpr>(e)) {
      const auto& p = std::get<PiecewiseExpr>(e);
      if (p.pieces.size() != p.breakpoints.size() + 1)
        throw std::invalid_argument("FluxSpec: piecewise needs breakpoints.size()+1 pieces");
      for (size_t i = 1; i < p.breakpoints.size(); ++i)
        if (!(p.breakpoints[i] > p.breakpoints[i - 1]))
          throw std::invalid_argument("FluxSpec: breakpoints must be strictly increasing");
      for (const SumExpr& s : p.pieces) check_sum(s);
      for (size_t i = 0; i < p.breakpoints.size(); ++i) {
        const double b = p.breakpoints[i];
        if (b <= u_range.lo || b >= u_range.hi) continue;
        const double vl = p.pieces[i].eval(b);
        const double vr = p.pieces[i + 1].eval(b);
        if (std::abs(vl - vr) > kTolCont * std::max({1.0, std::abs(vl), std::abs(vr)}))
          throw std::invalid_argument("FluxSpec: discontinuity at breakpoint " + std::to_string(b));
      }
    } else {
      const auto& d = std::get<DyadicExpr>(e);
      if (d.k_max < 0 || d.k_max > 60)
        throw std::invalid_argument("FluxSpec: dyadic k_max must lie in [0, 60]");
      if (!std::isfinite(d.amplitude))
        throw std::invalid_argument("FluxSpec: dyadic amplitude must be finite");
    }
  }
}

double FluxSpec::eval_component(int c, double u) const {
  const ComponentExpr& e = components[c];
  if (std::holds_alternative<SumExpr>(e)) return std::get<SumExpr>(e).eval(u);
  if (std::holds_alternative<PiecewiseExpr>(e)) return std::get<PiecewiseExpr>(e).eval(u);
  return std::get<DyadicExpr>(e).eval(u);
}

VecN FluxSpec::eval(double u) const {
  VecN y = VecN::zero(dim);
  for (int c = 0; c < dim; ++c) y[c] = eval_component(c, u);
  return y;
}

bool AffineStructure::is_nonlinear_at(double u) const {
  for (const Interval& c : nonlinearity)
    if (c.contains(u)) return true;
  return false;
}

bool AffineStructure::meets_nonlinearity(double lo, double hi) const {
  for (const Interval& c : nonlinearity)
    if (c.lo < hi && c.hi > lo) return true;
  return false;
}

std::vector<double> AffineStructure::structure_points() const {
  std::vector<double> pts{u_range.lo, u_range.hi};
  if (u_range.lo < 0.0 && u_range.hi > 0.0) pts.push_back(0.0);
  for (const AffineInterval& a : affine) {
    pts.push_back(a.span.lo);
    pts.push_back(a.span.hi);
  }
  for (const Interval& c : nonlinearity) {
    pts.push_back(c.lo);
    pts.push_back(c.hi);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

AffineStructure affine_structure(const FluxSpec& phi) {
  phi.validate();
  AffineStructure out;
  out.u_range = phi.u_range;

  std::vector<std::vector<ScalarPiece>> comp(phi.dim);
  std::vector<double> endpoints{phi.u_range.lo, phi.u_range.hi};
  for (int c = 0; c < phi.dim; ++c) {
    comp[c] = component_affine(phi.components[c], phi.u_range);
    for (const ScalarPiece& p : comp[c]) {
      endpoints.push_back(p.span.lo);
      endpoints.push_back(p.span.hi);
    }
  }
  std::sort(endpoints.begin(), endpoints.end());
  endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());

  std::vector<size_t> cursor(phi.dim, 0);
  for (size_t i = 0; i + 1 < endpoints.size(); ++i) {
    const double a = endpoints[i], b = endpoints[i + 1];
    if (!(b > a) || b <= phi.u_range.lo || a >= phi.u_range.hi) continue;
    bool covered = true;
    AffineInterval iv;
    iv.span = {a, b};
    iv.slope = VecN::zero(phi.dim);
    iv.offset = VecN::zero(phi.dim);
    for (int c = 0; c < phi.dim && covered; ++c) {
      auto& pieces = comp[c];
      size_t& k = cursor[c];
      while (k < pieces.size() && pieces[k].span.hi <= a) ++k;
      if (k < pieces.size() && pieces[k].span.lo <= a && pieces[k].span.hi >= b) {
        iv.slope[c] = pieces[k].slope;
        iv.offset[c] = pieces[k].offset;
      } else {
        covered = false;
      }
    }
    if (covered) out.affine.push_back(iv);
  }

  // Complement within [-U, U].  Affine intervals reaching a range endpoint
  // absorb it; affine intervals merely touching each other leave an isolated
  // kink behind.
  double pos = phi.u_range.lo;
  bool after_affine = false;
  for (const AffineInterval& iv : out.affine) {
    if (iv.span.lo > pos) {
      out.nonlinearity.push_back({pos, iv.span.lo});
    } else if (after_affine && iv.span.lo == pos) {
      out.nonlinearity.push_back({pos, pos});
    }
    pos = iv.span.hi;
    after_affine = true;
  }
  if (pos < phi.u_range.hi) out.nonlinearity.push_back({pos, phi.u_range.hi});
  return out;
}

GnVerdict check_gn(const AffineStructure& s, const std::vector<double>& eps_ladder) {
  GnVerdict v;
  v.eps_min = kInf;
  for (double e : eps_ladder) v.eps_min = std::min(v.eps_min, e);
  if (eps_ladder.empty()) v.eps_min = pow2(-20);

  v.inf_f_plus = kInf;
  v.sup_f_minus = -kInf;
  for (const Interval& c : s.nonlinearity) {
    if (c.hi > 0.0) v.inf_f_plus = std::min(v.inf_f_plus, std::max(c.lo, 0.0));
    if (c.lo < 0.0) v.sup_f_minus = std::max(v.sup_f_minus, std::min(c.hi, 0.0));
  }
  const bool plus_ok = v.inf_f_plus <= v.eps_min;
  const bool minus_ok = v.sup_f_minus >= -v.eps_min;
  v.holds = plus_ok && minus_ok;
  if (!v.holds) {
    for (const AffineInterval& iv : s.affine) {
      const bool plus_witness = !plus_ok && iv.span.lo <= 0.0 && iv.span.hi > 0.0;
      const bool minus_witness = !minus_ok && iv.span.lo < 0.0 && iv.span.hi >= 0.0;
      if (plus_witness || minus_witness) {
        v.witness = iv;
        break;
      }
    }
  }
  return v;
}

NonlinearitySubspace nonlinearity_subspace(const FluxSpec& phi, const AffineStructure& s,
                                           Interval I, int n_samples, double rank_tol) {
  Interval ic{std::max(I.lo, phi.u_range.lo), std::min(I.hi, phi.u_range.hi)};
  if (!(ic.hi > ic.lo))
    throw std::invalid_argument("nonlinearity_subspace: interval does not meet u_range");
  const int n = phi.dim;
  const double step = ic.length() / n_samples;
  const double hfd = 0.45 * step;

  std::vector<VecN> rows;
  double scale = 1.0;
  for (int j = 0; j < n_samples; ++j) {
    const double u = ic.lo + (j + 0.5) * step;
    const VecN f0 = phi.eval(u);
    const VecN fp = phi.eval(u + hfd);
    const VecN fm = phi.eval(u - hfd);
    scale = std::max(scale, f0.norm_inf());
    rows.push_back(fp - f0 * 2.0 + fm);
  }
  // Exact slope jumps where two affine intervals meet inside I; second
  // differences see those kinks only at O(h) strength.
  for (size_t i = 0; i + 1 < s.affine.size(); ++i) {
    const AffineInterval& l = s.affine[i];
    const AffineInterval& r = s.affine[i + 1];
    if (l.span.hi == r.span.lo && l.span.hi > ic.lo && l.span.hi < ic.hi)
      rows.push_back(r.slope - l.slope);
  }

  const double tau = kTolAffine * scale;
  NonlinearitySubspace out;
  out.span = ic;
  out.rank_tol = rank_tol;

  if (n == 1) {
    for (const VecN& r : rows)
      if (std::abs(r[0]) > tau) return out;  // X = {0}
    out.basis = {VecN(1.0)};
    return out;
  }

  double ga = 0.0, gb = 0.0, gc = 0.0;
  int m = 0;
  for (const VecN& r : rows) {
    const double nr = r.norm();
    if (nr <= tau) continue;
    const double x = r[0] / nr, y = r[1] / nr;
    ga += x * x;
    gb += x * y;
    gc += y * y;
    ++m;
  }
  if (m == 0) {
    out.basis = {VecN(1.0, 0.0), VecN(0.0, 1.0)};
    return out;
  }
  double lmin, lmax;
  VecN vmin;
  sym_eigen2(ga, gb, gc, lmin, lmax, vmin);
  if (lmin <= rank_tol * std::max(lmax, 1e-300)) out.basis = {vmin};
  return out;
}

std::optional<double> select_B(const std::vector<Interval>& nonlinearity, double mean,
                               Side side, double eps_floor) {
  if (side == Side::kPlus) {
    const double thr = std::max(mean, eps_floor);
    for (const Interval& c : nonlinearity)
      if (c.hi >= thr) return std::max(c.lo, thr);
    return std::nullopt;
  }
  const double thr = std::min(mean, -eps_floor);
  for (auto it = nonlinearity.rbegin(); it != nonlinearity.rend(); ++it)
    if (it->lo <= thr) return std::min(it->hi, thr);
  return std::nullopt;
}

std::vector<NonlinearitySubspace> avoidance_family(const FluxSpec& phi,
                                                   const AffineStructure& s) {
  std::vector<NonlinearitySubspace> out;
  auto push_unique = [&](const NonlinearitySubspace& x) {
    for (const NonlinearitySubspace& y : out)
      if (same_span(x.basis, y.basis)) return;
    out.push_back(x);
  };

  const std::vector<double> pts = s.structure_points();
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    if (!s.meets_nonlinearity(pts[i], pts[i + 1])) continue;
    NonlinearitySubspace x = nonlinearity_subspace(phi, s, {pts[i], pts[i + 1]});
    // A zero-dimensional span constrains nothing: every nonzero direction
    // already avoids it.
    if (0 < x.dim() && x.dim() < phi.dim) push_unique(x);
  }
  // Isolated kinks separating two affine intervals constrain directions
  // through the slope jump rather than through curvature.
  for (const Interval& c : s.nonlinearity) {
    if (c.lo != c.hi) continue;
    const AffineInterval* left = nullptr;
    const AffineInterval* right = nullptr;
    for (const AffineInterval& iv : s.affine) {
      if (iv.span.hi == c.lo) left = &iv;
      if (iv.span.lo == c.lo) right = &iv;
    }
    if (!left || !right) continue;
    const VecN jump = right->slope - left->slope;
    if (jump.norm() == 0.0) continue;
    NonlinearitySubspace x;
    x.span = {c.lo, c.hi};
    if (phi.dim == 2) {
      VecN perp(-jump[1], jump[0]);
      x.basis = {perp * (1.0 / perp.norm())};
    }
    push_unique(x);
  }
  return out;
}

FluxSpec scalar_projection(const FluxSpec& phi, const VecN& xi) {
  phi.validate();
  std::vector<std::vector<LoweredPiece>> lowered;
  std::vector<double> bks;
  for (int c = 0; c < phi.dim; ++c) {
    lowered.push_back(lower_component(phi.components[c], phi.u_range));
    for (const auto& [iv, sum] : lowered.back()) {
      if (iv.lo > phi.u_range.lo) bks.push_back(iv.lo);
    }
  }
  std::sort(bks.begin(), bks.end());
  bks.erase(std::unique(bks.begin(), bks.end()), bks.end());

  PiecewiseExpr pw;
  pw.breakpoints = bks;
  for (size_t i = 0; i <= bks.size(); ++i) {
    const double lo = (i == 0) ? phi.u_range.lo : bks[i - 1];
    const double hi = (i == bks.size()) ? phi.u_range.hi : bks[i];
    const double mid = 0.5 * (lo + hi);
    SumExpr acc;
    for (int c = 0; c < phi.dim; ++c) {
      for (const auto& [iv, sum] : lowered[c]) {
        if (iv.lo <= mid && mid < iv.hi) {
          add_scaled(acc, sum, xi[c]);
          break;
        }
      }
    }
    pw.pieces.push_back(acc.canonical());
  }

  FluxSpec out;
  out.dim = 1;
  out.u_range = phi.u_range;
  if (pw.breakpoints.empty()) {
    out.components = {pw.pieces[0]};
  } else {
    out.components = {pw};
  }
  return out;
}

bool direction_nonaffine_near(const FluxSpec& phi, const VecN& xi, double m, double eps) {
  const FluxSpec proj = scalar_projection(phi, xi);
  const AffineStructure s = affine_structure(proj);
  const double lo = std::max(m - eps, phi.u_range.lo);
  const double hi = std::min(m + eps, phi.u_range.hi);
  if (!(hi > lo)) return false;
  return s.meets_nonlinearity(lo, hi);
}

}  // namespace entropy_decay
