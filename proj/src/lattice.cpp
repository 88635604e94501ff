#include "entropy_decay/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace entropy_decay {

namespace {

double uniform_pm1(std::mt19937_64& eng) {
  // 53-bit mantissa mapping to [0,1), then stretched to [-1,1).
  const double u = (eng() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

}  // namespace

Lattice Lattice::from_basis(int dim, const MatN& basis) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("Lattice: dim must be 1 or 2");
  Lattice L;
  L.dim = dim;
  L.basis = basis;
  L.det = basis.det();
  double colprod = 1.0;
  for (int j = 0; j < dim; ++j) {
    double n2 = 0.0;
    for (int i = 0; i < dim; ++i) n2 += basis.at(i, j) * basis.at(i, j);
    colprod *= std::sqrt(n2);
  }
  if (!(std::abs(L.det) > 1e-9 * colprod))
    throw std::invalid_argument("Lattice: basis is singular within margin");
  return L;
}

VecN Lattice::point(const std::array<int, 2>& m) const {
  VecN x = VecN::zero(dim);
  for (int i = 0; i < dim; ++i) {
    x[i] = basis.at(i, 0) * m[0];
    if (dim == 2) x[i] += basis.at(i, 1) * m[1];
  }
  return x;
}

Lattice dual(const Lattice& L) {
  Lattice D;
  D.dim = L.dim;
  if (L.dim == 1) {
    D.basis = MatN::identity(1);
    D.basis.at(0, 0) = 1.0 / L.basis.at(0, 0);
    D.det = 1.0 / L.det;
    return D;
  }
  const double a = L.basis.at(0, 0), c = L.basis.at(1, 0);
  const double b = L.basis.at(0, 1), d = L.basis.at(1, 1);
  D.basis = MatN::identity(2);
  D.basis.at(0, 0) = d / L.det;
  D.basis.at(1, 0) = -b / L.det;
  D.basis.at(0, 1) = -c / L.det;
  D.basis.at(1, 1) = a / L.det;
  D.det = 1.0 / L.det;
  return D;
}

Lattice scaled(const Lattice& L, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("scaled: r must be positive");
  Lattice S = L;
  for (int j = 0; j < L.dim; ++j)
    for (int i = 0; i < L.dim; ++i) S.basis.at(i, j) = L.basis.at(i, j) * r;
  S.det = L.det * (L.dim == 1 ? r : r * r);
  return S;
}

double Parallelepiped::volume() const {
  const double rn = lattice.dim == 1 ? r : r * r;
  return rn * std::abs(lattice.det);
}

bool Parallelepiped::contains(const VecN& x) const {
  const MatN inv = lattice.basis.inverse();
  const VecN t = inv.apply(x);
  for (int k = 0; k < lattice.dim; ++k)
    if (!(t[k] >= -0.5 * r && t[k] < 0.5 * r)) return false;
  return true;
}

ReduceResult reduce(const VecN& x, const Parallelepiped& P) {
  const int n = P.lattice.dim;
  const MatN inv = P.lattice.basis.inverse();
  ReduceResult res;
  res.shift = {0, 0};
  VecN t = inv.apply(x);
  for (int k = 0; k < n; ++k)
    res.shift[k] = static_cast<int>(std::floor(t[k] / P.r + 0.5));

  auto rebuild = [&]() {
    VecN shift_x = P.lattice.point(res.shift);
    res.point = VecN::zero(n);
    for (int k = 0; k < n; ++k) res.point[k] = x[k] - P.r * shift_x[k];
  };
  rebuild();
  // Rounding at cell faces can land the representative a hair outside the
  // half-open cell; nudge the integer shift until membership holds.
  for (int pass = 0; pass < 4; ++pass) {
    const VecN tt = inv.apply(res.point);
    bool ok = true;
    for (int k = 0; k < n; ++k) {
      if (tt[k] < -0.5 * P.r) {
        res.shift[k] -= 1;
        ok = false;
      } else if (tt[k] >= 0.5 * P.r) {
        res.shift[k] += 1;
        ok = false;
      }
    }
    if (ok) break;
    rebuild();
  }
  return res;
}

namespace {

struct NetPoint {
  VecN p;
};

// Nearest point of Cl(V1) (both catalogue shapes are convex).
VecN project_onto(const WindowShape& v1, const VecN& g, int dim) {
  if (v1.kind == WindowShape::Kind::kBall) {
    double n2 = 0.0;
    for (int d = 0; d < dim; ++d) n2 += g[d] * g[d];
    const double n = std::sqrt(n2);
    if (n <= v1.radius || n == 0.0) return g;
    VecN q = VecN::zero(dim);
    for (int d = 0; d < dim; ++d) q[d] = g[d] * (v1.radius / n);
    return q;
  }
  VecN q = VecN::zero(dim);
  for (int d = 0; d < dim; ++d) q[d] = std::clamp(g[d], v1.box_lo[d], v1.box_hi[d]);
  return q;
}

void bounding_box(const WindowShape& w, int dim, VecN& lo, VecN& hi) {
  lo = VecN::zero(dim);
  hi = VecN::zero(dim);
  for (int d = 0; d < dim; ++d) {
    if (w.kind == WindowShape::Kind::kBall) {
      lo[d] = -w.radius;
      hi[d] = w.radius;
    } else {
      lo[d] = w.box_lo[d];
      hi[d] = w.box_hi[d];
    }
  }
}

}  // namespace

CoveringResult covering_multiplicity(const WindowShape& v1, const WindowShape& v2,
                                     int dim) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("covering_multiplicity: dim must be 1 or 2");
  const double inr2 = v2.inradius(dim);
  if (!(inr2 > 0.0) || !(v1.inradius(dim) > 0.0))
    throw std::invalid_argument("covering_multiplicity: degenerate shape");

  const double pitch = inr2 / 2.0;
  const double sigma = inr2 / 16.0;
  // Net points within sigma*sqrt(dim)/2 of any point of Cl(V1); checking them
  // against windows shrunk by that radius certifies the continuous cover.
  const double shrink = 0.5 * sigma * std::sqrt(double(dim)) * (1.0 + 1e-9) + 1e-12;

  VecN lo1, hi1;
  bounding_box(v1, dim, lo1, hi1);

  std::vector<VecN> net;
  {
    const int m0 = static_cast<int>(std::floor((hi1[0] - lo1[0]) / sigma)) + 2;
    const int m1 = dim == 2 ? static_cast<int>(std::floor((hi1[1] - lo1[1]) / sigma)) + 2 : 0;
    for (int i1 = -1; i1 <= m1; ++i1) {
      for (int i0 = -1; i0 <= m0; ++i0) {
        VecN g = VecN::zero(dim);
        g[0] = lo1[0] + i0 * sigma;
        if (dim == 2) g[1] = lo1[1] + i1 * sigma;
        net.push_back(project_onto(v1, g, dim));
      }
      if (dim == 1) break;
    }
  }

  std::vector<VecN> candidates;
  {
    const double reach = v2.circumradius(dim);
    const int c0lo = static_cast<int>(std::floor((lo1[0] - reach) / pitch)) - 1;
    const int c0hi = static_cast<int>(std::ceil((hi1[0] + reach) / pitch)) + 1;
    int c1lo = 0, c1hi = 0;
    if (dim == 2) {
      c1lo = static_cast<int>(std::floor((lo1[1] - reach) / pitch)) - 1;
      c1hi = static_cast<int>(std::ceil((hi1[1] + reach) / pitch)) + 1;
    }
    for (int i1 = c1lo; i1 <= c1hi; ++i1)
      for (int i0 = c0lo; i0 <= c0hi; ++i0) {
        VecN y = VecN::zero(dim);
        y[0] = i0 * pitch;
        if (dim == 2) y[1] = i1 * pitch;
        candidates.push_back(y);
      }
  }

  auto member = [&](const VecN& y, const VecN& p) {
    VecN d = VecN::zero(dim);
    for (int k = 0; k < dim; ++k) d[k] = p[k] - y[k];
    return v2.contains(d, dim, shrink);
  };

  std::vector<char> covered(net.size(), 0);
  size_t remaining = net.size();
  CoveringResult result;

  auto norm2 = [&](const VecN& y) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += y[d] * y[d];
    return s;
  };
  auto lex_less = [&](const VecN& a, const VecN& b) {
    for (int d = 0; d < dim; ++d) {
      if (a[d] < b[d]) return true;
      if (a[d] > b[d]) return false;
    }
    return false;
  };

  while (remaining > 0) {
    // Finisher rule: if one translate covers everything left, take the one
    // closest to the origin.
    const VecN* finisher = nullptr;
    for (const VecN& y : candidates) {
      bool all = true;
      for (size_t i = 0; i < net.size() && all; ++i)
        if (!covered[i] && !member(y, net[i])) all = false;
      if (all && (!finisher || norm2(y) < norm2(*finisher) ||
                  (norm2(y) == norm2(*finisher) && lex_less(y, *finisher))))
        finisher = &y;
    }
    const VecN* pick = finisher;

    if (!pick && dim == 1) {
      // Sweep: extend coverage as far right as possible from the leftmost
      // uncovered point.
      size_t target = net.size();
      for (size_t i = 0; i < net.size(); ++i)
        if (!covered[i] && (target == net.size() || net[i][0] < net[target][0]))
          target = i;
      for (const VecN& y : candidates)
        if (member(y, net[target]) && (!pick || y[0] > (*pick)[0])) pick = &y;
    } else if (!pick) {
      size_t best_gain = 0;
      for (const VecN& y : candidates) {
        size_t gain = 0;
        for (size_t i = 0; i < net.size(); ++i)
          if (!covered[i] && member(y, net[i])) ++gain;
        if (gain > best_gain ||
            (gain == best_gain && gain > 0 && pick &&
             (norm2(y) < norm2(*pick) ||
              (norm2(y) == norm2(*pick) && lex_less(y, *pick))))) {
          best_gain = gain;
          pick = &y;
        }
      }
    }
    if (!pick)
      throw std::logic_error("covering_multiplicity: no candidate makes progress");

    for (size_t i = 0; i < net.size(); ++i)
      if (!covered[i] && member(*pick, net[i])) {
        covered[i] = 1;
        --remaining;
      }
    result.offsets.push_back(*pick);
  }
  result.m = static_cast<int>(result.offsets.size());
  return result;
}

bool verify_avoidance(int dim, const MatN& A,
                      const std::vector<NonlinearitySubspace>& subspaces, int R,
                      double delta, AvoidanceCertificate* cert) {
  double min_ratio = std::numeric_limits<double>::infinity();
  std::array<int, 2> worst{0, 0};
  bool ok = true;

  const int lo1 = dim == 2 ? -R : 0;
  const int hi1 = dim == 2 ? R : 0;
  for (int m1 = lo1; m1 <= hi1; ++m1) {
    for (int m0 = -R; m0 <= R; ++m0) {
      if (m0 == 0 && m1 == 0) continue;
      VecN v = VecN::zero(dim);
      for (int i = 0; i < dim; ++i) {
        v[i] = A.at(i, 0) * m0;
        if (dim == 2) v[i] += A.at(i, 1) * m1;
      }
      const double n2 = v.norm2();
      for (const NonlinearitySubspace& s : subspaces) {
        double proj2 = 0.0;
        for (const VecN& b : s.basis) {
          const double p = v.dot(b);
          proj2 += p * p;
        }
        const double dist2 = std::max(0.0, n2 - proj2);
        const double ratio = std::sqrt(dist2 / n2);
        if (ratio < min_ratio) {
          min_ratio = ratio;
          worst = {m0, m1};
        }
        if (ratio < delta) ok = false;
      }
    }
  }
  if (subspaces.empty()) min_ratio = 1.0;
  if (cert) {
    cert->ok = ok;
    cert->radius = R;
    cert->delta = delta;
    cert->min_ratio = min_ratio;
    cert->worst_xi = worst;
  }
  return ok;
}

AvoidingLatticeResult random_avoiding_lattice(
    int dim, const std::vector<NonlinearitySubspace>& subspaces, int R, double delta,
    std::uint64_t seed, int max_attempts) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("random_avoiding_lattice: dim must be 1 or 2");
  for (const NonlinearitySubspace& s : subspaces)
    if (s.dim() >= dim)
      throw std::invalid_argument("random_avoiding_lattice: subspace is not proper");

  AvoidingLatticeResult res;
  if (subspaces.empty()) {
    res.l1 = Lattice::from_basis(dim, MatN::identity(dim));
    res.certificate.ok = true;
    res.certificate.seed = seed;
    res.certificate.radius = R;
    res.certificate.delta = delta;
    res.certificate.min_ratio = 1.0;
    res.certificate.attempts = 0;
    return res;
  }

  std::mt19937_64 eng(seed);
  AvoidanceCertificate last;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    MatN A = MatN::identity(dim);
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) A.at(i, j) += uniform_pm1(eng);
    if (std::abs(A.det()) < 1e-6) continue;

    if (verify_avoidance(dim, A, subspaces, R, delta, &last)) {
      // Normalize to a unimodular cell; the margin ratio is scale-invariant.
      const double s = std::pow(std::abs(A.det()), 1.0 / dim);
      MatN N = A;
      for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i) N.at(i, j) = A.at(i, j) / s;
      AvoidanceCertificate cert;
      if (!verify_avoidance(dim, N, subspaces, R, delta, &cert)) continue;
      cert.seed = seed;
      cert.attempts = attempt;
      res.l1 = Lattice::from_basis(dim, N);
      res.certificate = cert;
      return res;
    }
  }
  throw std::runtime_error(
      "random_avoiding_lattice: retry cap exceeded; worst xi = (" +
      std::to_string(last.worst_xi[0]) + "," + std::to_string(last.worst_xi[1]) +
      "), min ratio = " + std::to_string(last.min_ratio));
}

}  // namespace entropy_decay
