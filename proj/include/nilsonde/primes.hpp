#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "nilsonde/diophantine.hpp"
#include "nilsonde/group.hpp"
#include "nilsonde/linalg.hpp"
#include "nilsonde/rational.hpp"

namespace nilsonde {

// --- elementary prime utilities ---

inline std::vector<long> primes_upto(long n) {
  std::vector<long> out;
  if (n < 2) return out;
  std::vector<bool> comp(static_cast<std::size_t>(n) + 1, false);
  for (long p = 2; p <= n; ++p) {
    if (comp[p]) continue;
    out.push_back(p);
    for (long m = p * p; m >= 0 && m <= n; m += p) comp[m] = true;
  }
  return out;
}

inline bool is_prime_long(long n) {
  if (n < 2) return false;
  for (long p = 2; p * p <= n; ++p)
    if (n % p == 0) return false;
  return true;
}

// --- von Mangoldt and its sieve model ---

struct LambdaModels {
  std::vector<double> lambda;    // log p at prime powers, else 0
  std::vector<double> lambda_q;  // P(Q)/phi(P(Q)) 1_{(n, P(Q)) = 1}
  Rat scale;                     // the exact rational P(Q)/phi(P(Q))
  Int pq;                        // P(Q) = prod_{p < Q} p
};

/**
 * Lambda by sieve and the Q-smooth model Lambda_Q on {0..N}.  The Siegel
 * branch is out of scope here: the model equals the plain coprimality
 * weight (trivial twist).
 */
inline LambdaModels lambda_models(long n, long q) {
  if (n < 1 || n > 100000000)
    throw std::invalid_argument("lambda_models: N out of range");
  if (q < 1 || q > 50) throw std::invalid_argument("lambda_models: Q > 50");
  LambdaModels out;
  out.lambda.assign(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<long> ps = primes_upto(n);
  for (long p : ps) {
    double lp = std::log(static_cast<double>(p));
    for (long pk = p; pk <= n && pk > 0; pk *= p) {
      out.lambda[pk] = lp;
      if (pk > n / p) break;  // overflow guard on pk *= p
    }
  }
  out.pq = 1;
  out.scale = 1;
  std::vector<bool> hit(static_cast<std::size_t>(n) + 1, false);
  for (long p : primes_upto(q - 1)) {
    out.pq *= p;
    out.scale *= rat(p, p - 1);
    for (long m = p; m <= n; m += p) hit[m] = true;
  }
  double s = to_double(out.scale);
  out.lambda_q.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (long m = 1; m <= n; ++m)
    if (!hit[m]) out.lambda_q[m] = s;
  return out;
}

// --- affine systems and local densities ---

struct AffineForm {
  IntVec v;
  Int c = 0;
};

struct AffineSystem {
  std::size_t d = 0;
  std::vector<AffineForm> forms;

  Int coeff_bound() const {
    Int l = 1;
    for (const AffineForm& f : forms)
      for (const Int& x : f.v) l = std::max(l, Int(abs(x)));
    return l;
  }

  Int apply(std::size_t i, const IntVec& n) const {
    Int out = forms[i].c;
    for (std::size_t j = 0; j < d; ++j) out += forms[i].v[j] * n[j];
    return out;
  }

  void validate() const {
    if (d == 0 || forms.empty())
      throw SpecError("affine system needs variables and forms");
    for (const AffineForm& f : forms) {
      if (f.v.size() != d) throw SpecError("affine form width mismatch");
      bool nz = false;
      for (const Int& x : f.v)
        if (x != 0) nz = true;
      if (!nz) throw SpecError("affine form with zero linear part");
    }
    // Pairwise linear independence of the v_i.
    for (std::size_t i = 0; i < forms.size(); ++i)
      for (std::size_t j = i + 1; j < forms.size(); ++j) {
        RatMat pair;
        RatVec a(d), b(d);
        for (std::size_t k = 0; k < d; ++k) {
          a[k] = Rat(forms[i].v[k]);
          b[k] = Rat(forms[j].v[k]);
        }
        pair.push_back(a);
        pair.push_back(b);
        if (rank(pair) != 2)
          throw SpecError("affine forms " + std::to_string(i) + " and " +
                          std::to_string(j) + " are parallel");
      }
  }
};

struct LocalDensity {
  long p = 0;
  Rat value;
};

// beta_p = (p/(p-1))^t E_{n in (Z/p)^d} prod 1_{psi_i(n) != 0}, exact.
inline LocalDensity local_density_p(const AffineSystem& sys, long p) {
  sys.validate();
  double cells = std::pow(static_cast<double>(p),
                          static_cast<double>(sys.d));
  if (cells > 1e8)
    throw std::invalid_argument("local_density_p: p^d exceeds the cap");
  long total = 1;
  for (std::size_t j = 0; j < sys.d; ++j) total *= p;
  long good = 0;
  std::vector<long> n(sys.d, 0);
  IntVec ni(sys.d, Int(0));
  for (long idx = 0; idx < total; ++idx) {
    bool ok = true;
    for (std::size_t i = 0; i < sys.forms.size() && ok; ++i) {
      Int val = sys.apply(i, ni) % p;
      if (val == 0) ok = false;
    }
    if (ok) good += 1;
    std::size_t j = 0;
    while (j < sys.d) {
      n[j] += 1;
      ni[j] = n[j];
      if (n[j] < p) break;
      n[j] = 0;
      ni[j] = 0;
      ++j;
    }
  }
  LocalDensity out;
  out.p = p;
  out.value = rat_pow(rat(p, p - 1),
                      static_cast<unsigned>(sys.forms.size())) *
              rat(good, total);
  return out;
}

// --- archimedean factor: exact polytope volume, d <= 3 ---

struct Box {
  IntVec lo, hi;  // real box [lo, hi]^d

  bool empty() const {
    for (std::size_t j = 0; j < lo.size(); ++j)
      if (hi[j] <= lo[j]) return true;
    return lo.empty();
  }
};

namespace detail {

// Halfspace a . x <= b, normalized to coprime integers (positive scale).
struct Halfspace {
  IntVec a;
  Int b;
};

inline Halfspace normalize_halfspace(RatVec a, Rat b) {
  a.push_back(b);
  IntVec cl = clear_denominators(a).first;
  Int g = 0;
  for (const Int& x : cl) g = gcd(g, x);
  if (g > 1)
    for (Int& x : cl) x /= g;
  Halfspace h;
  h.b = cl.back();
  cl.pop_back();
  h.a = std::move(cl);
  return h;
}

inline Rat volume_1d(const std::vector<Halfspace>& hs) {
  // a x <= b intervals
  bool lo_set = false, hi_set = false;
  Rat lo = 0, hi = 0;
  for (const Halfspace& h : hs) {
    if (h.a[0] == 0) {
      if (h.b < 0) return 0;
      continue;
    }
    Rat bound = Rat(h.b) / Rat(h.a[0]);
    if (h.a[0] > 0) {
      if (!hi_set || bound < hi) hi = bound;
      hi_set = true;
    } else {
      if (!lo_set || bound > lo) lo = bound;
      lo_set = true;
    }
  }
  if (!lo_set || !hi_set) throw std::invalid_argument("unbounded interval");
  return hi > lo ? hi - lo : Rat(0);
}

inline Rat volume_2d(std::vector<RatVec> poly,
                     const std::vector<Halfspace>& hs) {
  for (const Halfspace& h : hs) {
    std::vector<RatVec> next;
    std::size_t m = poly.size();
    auto val = [&](const RatVec& p) -> Rat {
      return Rat(Rat(h.a[0]) * p[0] + Rat(h.a[1]) * p[1] - Rat(h.b));
    };
    for (std::size_t i = 0; i < m; ++i) {
      const RatVec& cur = poly[i];
      const RatVec& nxt = poly[(i + 1) % m];
      Rat vc = val(cur), vn = val(nxt);
      if (vc <= 0) next.push_back(cur);
      if ((vc < 0 && vn > 0) || (vc > 0 && vn < 0)) {
        Rat t = vc / (vc - vn);
        next.push_back(RatVec{cur[0] + t * (nxt[0] - cur[0]),
                              cur[1] + t * (nxt[1] - cur[1])});
      }
    }
    poly = std::move(next);
    if (poly.size() < 3) return 0;
  }
  Rat twice = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const RatVec& p = poly[i];
    const RatVec& q = poly[(i + 1) % poly.size()];
    twice += p[0] * q[1] - q[0] * p[1];
  }
  return abs(twice) / 2;
}

inline Rat volume_3d(const std::vector<Halfspace>& hs) {
  // Vertex enumeration over plane triples, then per-face fan triangulation
  // against the vertex centroid; everything in exact rationals.
  std::set<RatVec> vset;
  std::size_t m = hs.size();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) {
        RatMat a(3, RatVec(3));
        RatVec b(3);
        const Halfspace* tri[3] = {&hs[i], &hs[j], &hs[k]};
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) a[r][c] = Rat(tri[r]->a[c]);
          b[r] = Rat(tri[r]->b);
        }
        if (rank(a) != 3) continue;
        auto x = solve_linear(a, b);
        if (!x) continue;
        bool inside = true;
        for (const Halfspace& h : hs) {
          Rat v = -Rat(h.b);
          for (int c = 0; c < 3; ++c) v += Rat(h.a[c]) * (*x)[c];
          if (v > 0) { inside = false; break; }
        }
        if (inside) vset.insert(*x);
      }
  if (vset.size() < 4) return 0;
  std::vector<RatVec> verts(vset.begin(), vset.end());
  RatVec q(3, Rat(0));
  for (const RatVec& v : verts)
    for (int c = 0; c < 3; ++c) q[c] += v[c];
  for (int c = 0; c < 3; ++c) q[c] /= Rat(static_cast<long>(verts.size()));
  Rat six = 0;
  for (const Halfspace& h : hs) {
    std::vector<RatVec> face;
    for (const RatVec& v : verts) {
      Rat val = -Rat(h.b);
      for (int c = 0; c < 3; ++c) val += Rat(h.a[c]) * v[c];
      if (val == 0) face.push_back(v);
    }
    if (face.size() < 3) continue;
    // Order the face by a 2D convex hull after dropping the axis where the
    // normal is largest.
    int drop = 0;
    Int best = abs(h.a[0]);
    for (int c = 1; c < 3; ++c)
      if (abs(h.a[c]) > best) { best = abs(h.a[c]); drop = c; }
    int u = (drop + 1) % 3, w = (drop + 2) % 3;
    std::sort(face.begin(), face.end(),
              [&](const RatVec& p1, const RatVec& p2) {
                if (p1[u] != p2[u]) return p1[u] < p2[u];
                return p1[w] < p2[w];
              });
    auto cross = [&](const RatVec& o, const RatVec& p1, const RatVec& p2) -> Rat {
      return Rat((p1[u] - o[u]) * (p2[w] - o[w]) -
                 (p1[w] - o[w]) * (p2[u] - o[u]));
    };
    std::vector<RatVec> hull;  // monotone chain
    for (const RatVec& p : face) {
      while (hull.size() >= 2 &&
             cross(hull[hull.size() - 2], hull.back(), p) <= 0)
        hull.pop_back();
      hull.push_back(p);
    }
    std::size_t lower = hull.size() + 1;
    for (std::size_t t = face.size(); t-- > 0;) {
      const RatVec& p = face[t];
      while (hull.size() >= lower &&
             cross(hull[hull.size() - 2], hull.back(), p) <= 0)
        hull.pop_back();
      hull.push_back(p);
    }
    hull.pop_back();
    if (hull.size() < 3) continue;
    for (std::size_t t = 1; t + 1 < hull.size(); ++t) {
      RatMat e(3, RatVec(3));
      for (int c = 0; c < 3; ++c) {
        e[0][c] = hull[0][c] - q[c];
        e[1][c] = hull[t][c] - q[c];
        e[2][c] = hull[t + 1][c] - q[c];
      }
      Rat det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) -
                e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0]) +
                e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
      six += abs(det);
    }
  }
  return six / 6;
}

}  // namespace detail

// beta_infty = vol(Omega intersect {psi_i > 0 for all i}), exact (d <= 3).
inline Rat beta_infinity(const AffineSystem& sys, const Box& omega) {
  sys.validate();
  if (sys.d > 3)
    throw std::invalid_argument("beta_infinity: unsupported dimension");
  if (omega.lo.size() != sys.d || omega.hi.size() != sys.d)
    throw std::invalid_argument("beta_infinity: box rank mismatch");
  if (omega.empty()) return 0;
  std::vector<detail::Halfspace> hs;
  std::set<std::pair<IntVec, Int>> seen;
  auto add = [&](const RatVec& a, const Rat& b) {
    detail::Halfspace h = detail::normalize_halfspace(a, b);
    if (seen.insert({h.a, h.b}).second) hs.push_back(std::move(h));
  };
  for (std::size_t j = 0; j < sys.d; ++j) {
    RatVec up(sys.d, Rat(0)), dn(sys.d, Rat(0));
    up[j] = 1;
    dn[j] = -1;
    add(up, Rat(omega.hi[j]));
    add(dn, Rat(-omega.lo[j]));
  }
  for (const AffineForm& f : sys.forms) {
    RatVec a(sys.d);
    for (std::size_t j = 0; j < sys.d; ++j) a[j] = Rat(-f.v[j]);
    add(a, Rat(f.c));  // psi >= 0 (the boundary has measure zero)
  }
  if (sys.d == 1) return detail::volume_1d(hs);
  if (sys.d == 2) {
    std::vector<RatVec> rect{
        RatVec{Rat(omega.lo[0]), Rat(omega.lo[1])},
        RatVec{Rat(omega.hi[0]), Rat(omega.lo[1])},
        RatVec{Rat(omega.hi[0]), Rat(omega.hi[1])},
        RatVec{Rat(omega.lo[0]), Rat(omega.hi[1])}};
    return detail::volume_2d(std::move(rect), hs);
  }
  return detail::volume_3d(hs);
}

// --- count versus main term ---

struct CountCompare {
  double lhs = 0;             // sum over the box of prod Lambda(psi_i)
  double main_term = 0;       // beta_infty * prod_{p <= p_cap} beta_p
  double relative_error = 0;  // |lhs - main| / |main| (0 when both vanish)
  Rat beta_inf;
  std::vector<LocalDensity> densities;
  double tail_factor = 1;  // crude Euler tail bound exp(t^2 / p_cap)
};

inline CountCompare count_compare(const AffineSystem& sys, const Box& omega,
                                  long p_cap) {
  sys.validate();
  if (p_cap < 2) throw std::invalid_argument("count_compare: p_cap < 2");
  CountCompare out;
  out.beta_inf = beta_infinity(sys, omega);
  out.main_term = to_double(out.beta_inf);
  for (long p : primes_upto(p_cap)) {
    out.densities.push_back(local_density_p(sys, p));
    out.main_term *= to_double(out.densities.back().value);
  }
  double t2 = static_cast<double>(sys.forms.size());
  out.tail_factor = std::exp(t2 * t2 / static_cast<double>(p_cap));
  if (omega.empty()) return out;

  double cells = 1;
  long vmax = 1;
  std::vector<long> width(sys.d);
  for (std::size_t j = 0; j < sys.d; ++j) {
    width[j] = omega.hi[j].get_si() - omega.lo[j].get_si() + 1;
    cells *= static_cast<double>(width[j]);
  }
  if (cells > 1e8)
    throw std::invalid_argument("count_compare: box exceeds the cap");
  for (std::size_t i = 0; i < sys.forms.size(); ++i) {
    Int m = abs(sys.forms[i].c);
    for (std::size_t j = 0; j < sys.d; ++j)
      m += abs(sys.forms[i].v[j]) *
           std::max(abs(omega.lo[j]), abs(omega.hi[j]));
    vmax = std::max(vmax, m.get_si());
  }
  LambdaModels lm = lambda_models(vmax, 2);  // only the sieve array is used

  std::vector<long> n(sys.d);
  for (std::size_t j = 0; j < sys.d; ++j) n[j] = omega.lo[j].get_si();
  std::vector<std::vector<long>> vv(sys.forms.size(),
                                    std::vector<long>(sys.d));
  std::vector<long> base(sys.forms.size());
  for (std::size_t i = 0; i < sys.forms.size(); ++i) {
    base[i] = sys.forms[i].c.get_si();
    for (std::size_t j = 0; j < sys.d; ++j) {
      vv[i][j] = sys.forms[i].v[j].get_si();
      base[i] += vv[i][j] * n[j];
    }
  }
  // Deterministic sequential accumulation: bitwise-reproducible lhs.
  double lhs = 0;
  for (;;) {
    double prod = 1;
    for (std::size_t i = 0; i < sys.forms.size(); ++i) {
      long v = base[i];
      if (v < 2) { prod = 0; break; }
      prod *= lm.lambda[v];
      if (prod == 0) break;
    }
    lhs += prod;
    std::size_t j = 0;
    while (j < sys.d) {
      n[j] += 1;
      for (std::size_t i = 0; i < sys.forms.size(); ++i) base[i] += vv[i][j];
      if (n[j] <= omega.hi[j].get_si()) break;
      for (std::size_t i = 0; i < sys.forms.size(); ++i)
        base[i] -= vv[i][j] * width[j];
      n[j] = omega.lo[j].get_si();
      ++j;
    }
    if (j == sys.d) break;
  }
  out.lhs = lhs;
  if (out.main_term != 0)
    out.relative_error = std::abs(out.lhs - out.main_term) /
                         std::abs(out.main_term);
  else
    out.relative_error = out.lhs == 0 ? 0 : 1;
  return out;
}

// --- Gowers uniformity norms ---

namespace detail {

inline std::vector<std::complex<double>> mult_derivative(
    const std::vector<std::complex<double>>& f, long h) {
  std::size_t n = f.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t x = 0; x < n; ++x)
    out[x] = f[(x + h) % n] * std::conj(f[x]);
  return out;
}

// ||g||_{U^2}^4 = sum_xi |ghat(xi)|^4 with ghat(xi) = E_x g(x) e(-x xi / N).
inline double u2_fourth_dft(const std::vector<std::complex<double>>& f) {
  std::size_t n = f.size();
  double acc = 0;
  for (std::size_t xi = 0; xi < n; ++xi) {
    std::complex<double> hat{0, 0};
    for (std::size_t x = 0; x < n; ++x) {
      double t = -2.0 * M_PI * static_cast<double>(x * xi % n) /
                 static_cast<double>(n);
      hat += f[x] * std::complex<double>{std::cos(t), std::sin(t)};
    }
    hat /= static_cast<double>(n);
    double m = std::norm(hat);
    acc += m * m;
  }
  return acc;
}

inline double u2_fourth_direct(const std::vector<std::complex<double>>& f) {
  std::size_t n = f.size();
  double acc = 0;
  for (std::size_t h = 0; h < n; ++h) {
    std::complex<double> s{0, 0};
    for (std::size_t x = 0; x < n; ++x) s += f[(x + h) % n] * std::conj(f[x]);
    acc += std::norm(s / static_cast<double>(n));
  }
  return acc / static_cast<double>(n);
}

}  // namespace detail

/**
 * U^k norm on Z/NZ, k = 2 or 3, via the recursion
 * ||f||_{U^k}^{2^k} = E_h ||Delta_h f||_{U^{k-1}}^{2^{k-1}} with the U^2
 * base evaluated through the Fourier identity (plain DFT).
 */
inline double gowers_norm(const std::vector<std::complex<double>>& f,
                          unsigned k) {
  std::size_t n = f.size();
  if (n == 0 || k < 2 || k > 3)
    throw std::invalid_argument("gowers_norm: need k in {2, 3}");
  if (k == 3 && n > 2048)
    throw std::invalid_argument("gowers_norm: N too large for k = 3");
  if (k == 2) return std::pow(std::max(0.0, detail::u2_fourth_dft(f)), 0.25);
  double acc = 0;
  for (std::size_t h = 0; h < n; ++h)
    acc += detail::u2_fourth_dft(detail::mult_derivative(f, h));
  return std::pow(std::max(0.0, acc / static_cast<double>(n)), 0.125);
}

// Independent evaluator: nested sums over the derivative cube, no Fourier.
inline double gowers_norm_direct(const std::vector<std::complex<double>>& f,
                                 unsigned k) {
  std::size_t n = f.size();
  if (n == 0 || k < 2 || k > 3)
    throw std::invalid_argument("gowers_norm_direct: need k in {2, 3}");
  if (k == 3 && n > 2048)
    throw std::invalid_argument("gowers_norm_direct: N too large for k = 3");
  if (k == 2)
    return std::pow(std::max(0.0, detail::u2_fourth_direct(f)), 0.25);
  double acc = 0;
  for (std::size_t h = 0; h < n; ++h)
    acc += detail::u2_fourth_direct(detail::mult_derivative(f, h));
  return std::pow(std::max(0.0, acc / static_cast<double>(n)), 0.125);
}

struct IntervalGowers {
  double value = 0;
  long n_prime = 0;  // cyclic embedding modulus (prime >= 4N)
};

// U^k[N] by the standard embedding: ||f 1_[N]||_{U^k(Z/N')} normalized by
// ||1_[N]||_{U^k(Z/N')} with N' the smallest prime >= 4N.
inline IntervalGowers gowers_norm_interval(
    const std::vector<std::complex<double>>& f, unsigned k) {
  long n = static_cast<long>(f.size());
  if (n == 0) throw std::invalid_argument("gowers_norm_interval: empty");
  long np = 4 * n;
  while (!is_prime_long(np)) ++np;
  std::vector<std::complex<double>> pad(static_cast<std::size_t>(np),
                                        {0.0, 0.0});
  std::vector<std::complex<double>> ind(static_cast<std::size_t>(np),
                                        {0.0, 0.0});
  for (long x = 0; x < n; ++x) {
    pad[x] = f[x];
    ind[x] = {1.0, 0.0};
  }
  IntervalGowers out;
  out.n_prime = np;
  double den = gowers_norm(ind, k);
  out.value = den == 0 ? 0 : gowers_norm(pad, k) / den;
  return out;
}

}  // namespace nilsonde
