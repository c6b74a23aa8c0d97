#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "nilsonde/polyseq.hpp"
#include "nilsonde/rational.hpp"

namespace nilsonde {

inline Rat rat_pow(const Rat& base, unsigned long e) {
  Rat r = 1;
  Rat b = base;
  unsigned long k = e;
  while (k) {
    if (k & 1) r *= b;
    b *= b;
    k >>= 1;
  }
  return r;
}

/** Explicit hit set inside the box [1, N_1] x ... x [1, N_l]. */
struct HitSet {
  IntVec box;
  std::vector<IntVec> members;

  Int box_size() const {
    Int t = 1;
    for (const Int& n : box) t *= n;
    return t;
  }
  Rat density() const {
    return rat(Int(static_cast<long>(members.size())), box_size());
  }
};

inline HitSet scan_hits(const IntVec& box,
                        const std::function<bool(const IntVec&)>& pred) {
  HitSet h;
  h.box = box;
  IntVec n(box.size(), Int(1));
  for (;;) {
    if (pred(n)) h.members.push_back(n);
    std::size_t j = 0;
    while (j < box.size()) {
      ++n[j];
      if (n[j] <= box[j]) break;
      n[j] = 1;
      ++j;
    }
    if (j == box.size()) break;
  }
  return h;
}

/** Knobs for the implicit delta^{-O(1)} constants. */
struct DioConfig {
  unsigned long exponent = 8;  // C
  Rat multiplier = 1;
  long enum_cap = 4096;  // dense-scan ceiling for candidate q
};

// Denominators of the continued-fraction convergents of x.
inline std::vector<Int> cf_denominators(const Rat& x) {
  Int p = x.get_num(), q = x.get_den();
  std::vector<Int> out;
  Int km1 = 1, k = 0;  // k_{-2} = 1, k_{-1} = 0
  while (q != 0) {
    Int a = rat_floor(rat(p, q));
    Int knext = a * k + km1;
    km1 = k;
    k = knext;
    out.push_back(k);
    Int r = p - a * q;
    p = q;
    q = r;
  }
  return out;
}

namespace detail {

// Merged ascending candidate list for a dilate search: a dense initial
// segment, coefficient denominators and their lcms, and continued-fraction
// convergent denominators of every coefficient.
inline std::vector<Int> dilate_candidates(const TorusPolynomial& p,
                                          const Int& budget,
                                          const DioConfig& cfg) {
  std::set<Int> cand;
  Int dense = budget < cfg.enum_cap ? budget : Int(cfg.enum_cap);
  for (Int q = 1; q <= dense; ++q) cand.insert(q);
  std::vector<Int> dens;
  for (const auto& [i, v] : p.coeffs) {
    dens.push_back(v.get_den());
    for (const Int& k : cf_denominators(v))
      if (k >= 1 && k <= budget) cand.insert(k);
  }
  Int all = 1;
  for (const Int& d : dens) {
    if (d >= 1 && d <= budget) cand.insert(d);
    all = lcm(all, d);
  }
  if (all >= 1 && all <= budget) cand.insert(all);
  for (std::size_t a = 0; a < dens.size(); ++a)
    for (std::size_t b = a + 1; b < dens.size(); ++b) {
      Int l = lcm(dens[a], dens[b]);
      if (l >= 1 && l <= budget) cand.insert(l);
    }
  return std::vector<Int>(cand.begin(), cand.end());
}

}  // namespace detail

struct VinogradovResult {
  bool ok = false;
  Int q = 0;
  Rat smooth;     // ||q p||_{C_infty[N]}
  Rat constant;   // ||q p(0)||_{R/Z}
  Rat threshold;  // certified bound both values satisfy when ok
  Rat density;
};

/**
 * From many pointwise-small values to a small integer dilate: finds the
 * least Q <= Q_budget with ||Q p||_{C_infty[N]} and ||Q p(0)|| below
 * multiplier * delta^{-C} * eps (exactly zero when eps = 0). The search
 * path is heuristic; acceptance is exact re-verification.
 */
inline VinogradovResult vinogradov_solve(const TorusPolynomial& p,
                                         const HitSet& hits, const Rat& eps,
                                         const Int& q_budget,
                                         const DioConfig& cfg = {}) {
  if (eps < 0) throw std::invalid_argument("vinogradov_solve: eps < 0");
  for (const IntVec& n : hits.members)
    if (torus_norm(p.eval(n)) > eps)
      throw std::invalid_argument(
          "vinogradov_solve: hypothesis fails on a hit");
  Rat delta = hits.density();
  if (delta <= Rat(10) * eps)
    throw std::invalid_argument("vinogradov_solve: density <= 10 eps");

  VinogradovResult res;
  res.density = delta;
  res.threshold = cfg.multiplier * rat_pow(Rat(1) / delta, cfg.exponent) * eps;
  IntVec zero(p.nparams, Int(0));
  Rat best = -1;
  for (const Int& q : detail::dilate_candidates(p, q_budget, cfg)) {
    Rat s = smoothness_norm(p.scaled(q), hits.box);
    Rat c = torus_norm(Rat(q) * p.eval(zero));
    Rat worst = std::max(s, c);
    if (best < 0 || worst < best) {
      best = worst;
      res.q = q;
      res.smooth = s;
      res.constant = c;
    }
    if (s <= res.threshold && c <= res.threshold) {
      res.ok = true;
      res.q = q;
      res.smooth = s;
      res.constant = c;
      return res;
    }
  }
  return res;  // failure carries the best candidate
}

// --- binomial <-> monomial basis ---

struct MonomialPoly {
  std::size_t nparams = 1;
  std::map<MultiIndex, Rat, GradedLex> coeffs;

  Rat coeff(const MultiIndex& i) const {
    auto it = coeffs.find(i);
    return it == coeffs.end() ? Rat(0) : it->second;
  }
  void add_coeff(const MultiIndex& i, const Rat& v) {
    if (v == 0) return;
    Rat s = coeff(i) + v;
    if (s == 0)
      coeffs.erase(i);
    else
      coeffs[i] = s;
  }
  Rat eval(const IntVec& n) const {
    Rat s = 0;
    for (const auto& [i, v] : coeffs) {
      Rat m = v;
      for (std::size_t j = 0; j < i.size(); ++j)
        for (unsigned t = 0; t < i[j]; ++t) m *= Rat(n[j]);
      s += m;
    }
    return s;
  }
};

namespace detail {

inline Int stirling1(unsigned n, unsigned m) {  // signed, first kind
  if (m > n) return 0;
  std::vector<std::vector<Int>> s(n + 1, std::vector<Int>(n + 1, Int(0)));
  s[0][0] = 1;
  for (unsigned i = 1; i <= n; ++i)
    for (unsigned j = 1; j <= i; ++j)
      s[i][j] = s[i - 1][j - 1] - Int(i - 1) * s[i - 1][j];
  return s[n][m];
}

inline Int stirling2(unsigned n, unsigned m) {
  if (m > n) return 0;
  if (n == 0) return m == 0 ? 1 : 0;
  std::vector<std::vector<Int>> s(n + 1, std::vector<Int>(n + 1, Int(0)));
  s[0][0] = 1;
  for (unsigned i = 1; i <= n; ++i)
    for (unsigned j = 1; j <= i; ++j)
      s[i][j] = Int(j) * s[i - 1][j] + s[i - 1][j - 1];
  return s[n][m];
}

}  // namespace detail

// binom(n, i) = (1/i!) sum_m s1(i, m) n^m, per variable.
inline MonomialPoly to_monomial(const TorusPolynomial& p) {
  MonomialPoly out;
  out.nparams = p.nparams;
  for (const auto& [i, alpha] : p.coeffs) {
    std::vector<std::pair<MultiIndex, Rat>> terms{{MultiIndex(p.nparams, 0),
                                                   alpha}};
    for (std::size_t v = 0; v < p.nparams; ++v) {
      if (i[v] == 0) continue;
      std::vector<std::pair<MultiIndex, Rat>> next;
      Rat inv_fact = Rat(1) / Rat(factorial(i[v]));
      for (unsigned m = 1; m <= i[v]; ++m) {
        Int s = detail::stirling1(i[v], m);
        if (s == 0) continue;
        for (const auto& [e, c] : terms) {
          MultiIndex e2 = e;
          e2[v] += m;
          next.emplace_back(e2, c * Rat(s) * inv_fact);
        }
      }
      terms = std::move(next);
    }
    for (const auto& [e, c] : terms) out.add_coeff(e, c);
  }
  return out;
}

// n^m = sum_j S2(m, j) j! binom(n, j), per variable.
inline TorusPolynomial to_binomial(const MonomialPoly& p) {
  TorusPolynomial out;
  out.nparams = p.nparams;
  std::map<MultiIndex, Rat, GradedLex> acc;
  for (const auto& [i, beta] : p.coeffs) {
    std::vector<std::pair<MultiIndex, Rat>> terms{{MultiIndex(p.nparams, 0),
                                                   beta}};
    for (std::size_t v = 0; v < p.nparams; ++v) {
      if (i[v] == 0) continue;
      std::vector<std::pair<MultiIndex, Rat>> next;
      for (unsigned j = 1; j <= i[v]; ++j) {
        Int s = detail::stirling2(i[v], j);
        if (s == 0) continue;
        for (const auto& [e, c] : terms) {
          MultiIndex e2 = e;
          e2[v] += j;
          next.emplace_back(e2, c * Rat(s * factorial(j)));
        }
      }
      terms = std::move(next);
    }
    for (const auto& [e, c] : terms) acc[e] += c;
  }
  for (const auto& [e, c] : acc)
    if (c != 0) out.coeffs[e] = c;
  return out;
}

struct MonomialBounds {
  Int q = 1;
  MonomialPoly beta;
  // per-monomial: index, ||q beta_j||, allowed C_k N^{-j} ||p||
  std::vector<std::tuple<MultiIndex, Rat, Rat>> rows;
  bool ok = true;
};

/**
 * Representation change for the C_infty norm: q = lcm over supported
 * binomial indices of prod_v i_v! clears the basis-change denominators;
 * reported bounds certify ||q beta_j|| <= C_k N^{-j} ||p||_{C_infty[N]}.
 */
inline MonomialBounds monomial_bounds(const TorusPolynomial& p,
                                      const IntVec& nvec) {
  MonomialBounds out;
  unsigned k = p.degree();
  for (const auto& [i, v] : p.coeffs) {
    Int f = 1;
    for (std::size_t v2 = 0; v2 < i.size(); ++v2) f *= factorial(i[v2]);
    out.q = lcm(out.q, f);
  }
  out.beta = to_monomial(p);
  Rat norm = smoothness_norm(p, nvec);
  Rat ck = rat_pow(Rat(factorial(k)) * rat_pow(Rat(2), k),
                   static_cast<unsigned long>(p.nparams) + 1);
  for (const auto& [i, b] : out.beta.coeffs) {
    if (mi_degree(i) == 0) continue;
    Rat scale = 1;
    for (std::size_t v = 0; v < i.size(); ++v)
      for (unsigned t = 0; t < i[v]; ++t) scale /= Rat(nvec[v]);
    Rat achieved = torus_norm(Rat(out.q) * b);
    Rat allowed = ck * scale * norm;
    out.rows.emplace_back(i, achieved, allowed);
    if (achieved > allowed) out.ok = false;
  }
  return out;
}

struct ExtrapolateResult {
  bool ok = false;
  Int q = 0;
  Rat achieved;  // ||q p||_{C_infty[N]}
  Rat allowed;   // multiplier * Q^C * ||p~||_{C_infty[N]}
  TorusPolynomial p;  // recovered original polynomial
};

/**
 * Multiparameter extrapolation: given p~(n) = p(a + b n) with b_i != 0,
 * |b_i| <= Q, |a_i| <= Q N_i, recover p exactly (Vandermonde / affine
 * inversion in the monomial basis) and certify a dilate q <= Q^C with
 * ||q p||_{C_infty[N]} <= multiplier * Q^C * ||p~||_{C_infty[N]}.
 */
inline ExtrapolateResult extrapolate(const TorusPolynomial& ptilde,
                                     const IntVec& a, const IntVec& b,
                                     const Int& bigq, const IntVec& nvec,
                                     const DioConfig& cfg = {}) {
  std::size_t l = ptilde.nparams;
  for (std::size_t v = 0; v < l; ++v) {
    if (b[v] == 0) throw std::invalid_argument("extrapolate: b_i = 0");
    if (abs(b[v]) > bigq)
      throw std::invalid_argument("extrapolate: |b_i| > Q");
    if (abs(a[v]) > bigq * nvec[v])
      throw std::invalid_argument("extrapolate: |a_i| > Q N_i");
  }
  // p(m) = p~((m - a) / b), expanded in the monomial basis
  MonomialPoly mono = to_monomial(ptilde);
  MonomialPoly rec;
  rec.nparams = l;
  for (const auto& [e, c] : mono.coeffs) {
    std::vector<std::pair<MultiIndex, Rat>> terms{{MultiIndex(l, 0), c}};
    for (std::size_t v = 0; v < l; ++v) {
      if (e[v] == 0) continue;
      std::vector<std::pair<MultiIndex, Rat>> next;
      // ((m - a)/b)^e = sum_t C(e,t) m^t (-a)^{e-t} / b^e
      Rat invb = rat(Int(1), Int(1));
      for (unsigned t2 = 0; t2 < e[v]; ++t2) invb /= Rat(b[v]);
      for (unsigned t = 0; t <= e[v]; ++t) {
        Rat co = Rat(binomial(Int(e[v]), t)) * invb;
        for (unsigned t2 = 0; t2 < e[v] - t; ++t2) co *= Rat(-a[v]);
        if (co == 0) continue;
        for (const auto& [idx, cc] : terms) {
          MultiIndex i2 = idx;
          i2[v] += t;
          next.emplace_back(i2, cc * co);
        }
      }
      terms = std::move(next);
    }
    for (const auto& [idx, cc] : terms) rec.add_coeff(idx, cc);
  }
  ExtrapolateResult res;
  res.p = to_binomial(rec);
  Rat qc = rat_pow(Rat(bigq), cfg.exponent);
  res.allowed = cfg.multiplier * qc * smoothness_norm(ptilde, nvec);
  Int budget = rat_floor(qc);
  if (budget < 1) budget = 1;
  std::set<Int> cand;
  for (const Int& q : detail::dilate_candidates(res.p, budget, cfg))
    cand.insert(q);
  Int bprod = 1;
  for (std::size_t v = 0; v < l; ++v)
    for (unsigned t = 0; t < ptilde.degree(); ++t) {
      bprod *= abs(b[v]);
      if (bprod >= 1 && bprod <= budget) cand.insert(bprod);
    }
  for (const Int& q : cand) {
    Rat s = smoothness_norm(res.p.scaled(q), nvec);
    if (s <= res.allowed) {
      res.ok = true;
      res.q = q;
      res.achieved = s;
      return res;
    }
  }
  return res;
}

// --- polynomial separation (the differencing cascade) ---

using SigmaMap = std::function<RatVec(const IntVec&)>;

struct SeparationResult {
  bool ok = false;
  Int q = 0;
  Rat budget;      // multiplier * rho^{-C} * hyp_eps
  Rat hyp_eps;     // max pointwise value over the hit set (exact)
  Rat fraction_a;  // fraction of hits where conclusion (a) holds at q
  Rat achieved_p;  // ||q P||_{C_infty[N]} (sigma == 0 branch)
  Rat achieved_q;  // ||q Q||_{C_infty[N]} (sigma == 0 branch)
  bool sigma_zero = false;
};

namespace detail {

// The polynomial n -> P(n) + Q(n+h) - Q(n) + sigma(h).n
inline TorusPolynomial separation_poly(const TorusPolynomial& bp,
                                       const TorusPolynomial& bq,
                                       const RatVec& sh, const IntVec& h) {
  std::size_t l = bp.nparams;
  TorusPolynomial r;
  r.nparams = l;
  for (const auto& [i, v] : bp.coeffs) r.set_coeff(i, r.coeff(i) + v);
  // Q(n+h) - Q(n) via Vandermonde: C(n+h, m) = sum_{a+b=m} C(n,a) C(h,b)
  for (const auto& [m, v] : bq.coeffs) {
    std::vector<std::pair<MultiIndex, Rat>> terms{{MultiIndex(l, 0), v}};
    for (std::size_t var = 0; var < l; ++var) {
      std::vector<std::pair<MultiIndex, Rat>> next;
      for (unsigned a = 0; a <= m[var]; ++a) {
        Rat hb = Rat(binomial(h[var], m[var] - a));
        if (hb == 0) continue;
        for (const auto& [e, c] : terms) {
          MultiIndex e2 = e;
          e2[var] += a;
          next.emplace_back(e2, c * hb);
        }
      }
      terms = std::move(next);
    }
    for (const auto& [e, c] : terms) r.set_coeff(e, r.coeff(e) + c);
    r.set_coeff(m, r.coeff(m) - v);  // subtract Q(n)
  }
  for (std::size_t var = 0; var < l; ++var) {
    MultiIndex e(l, 0);
    e[var] = 1;
    r.set_coeff(e, r.coeff(e) + sh[var]);
  }
  return r;
}

// Conclusion (a) linear form: sigma(h).n + sum P(e_i) n_i + sum Q(e_i+e_j) n_i h_j
inline TorusPolynomial separation_linear(const TorusPolynomial& bp,
                                         const TorusPolynomial& bq,
                                         const RatVec& sh, const IntVec& h) {
  std::size_t l = bp.nparams;
  TorusPolynomial r;
  r.nparams = l;
  for (std::size_t i = 0; i < l; ++i) {
    MultiIndex ei(l, 0);
    ei[i] = 1;
    Rat c = sh[i] + bp.coeff(ei);
    for (std::size_t j = 0; j < l; ++j) {
      MultiIndex eij(l, 0);
      eij[i] += 1;
      eij[j] += 1;
      c += bq.coeff(eij) * Rat(h[j]);
    }
    r.set_coeff(ei, c);
  }
  return r;
}

}  // namespace detail

/**
 * Separation of the h-linear part: from pointwise smallness of
 * P(n) + Q(n+h) - Q(n) + sigma(h).n on a rho-dense set of (n, h) pairs,
 * produce q <= rho^{-C} with (a) the bracket-linearized form q-smooth for
 * a rho-fraction of hits, and (b) ||qP||, ||qQ|| small when sigma == 0.
 * Candidates come from per-h Vinogradov solves (the differencing cascade);
 * acceptance is exact verification of both conclusions.
 */
inline SeparationResult poly_separation(const TorusPolynomial& bp,
                                        const TorusPolynomial& bq,
                                        const SigmaMap& sigma, bool sigma_zero,
                                        const HitSet& hits, const Rat& rho,
                                        const DioConfig& cfg = {}) {
  std::size_t l = bp.nparams;
  if (bp.coeff(MultiIndex(l, 0)) != 0)
    throw std::invalid_argument("poly_separation: P(0) != 0");
  if (bq.coeff(MultiIndex(l, 0)) != 0)
    throw std::invalid_argument("poly_separation: Q(0) != 0");
  for (std::size_t i = 0; i < l; ++i) {
    IntVec ei(l, Int(0));
    ei[i] = 1;
    if (bq.eval(ei) != 0)
      throw std::invalid_argument("poly_separation: Q(e_i) != 0");
  }
  if (hits.density() < rho)
    throw std::invalid_argument("poly_separation: density below rho");

  // group hits (n, h) by h; cache sigma and the separation polynomial
  std::map<IntVec, std::vector<IntVec>> by_h;
  for (const IntVec& m : hits.members) {
    IntVec n(m.begin(), m.begin() + l), h(m.begin() + l, m.end());
    by_h[h].push_back(n);
  }
  IntVec nbox(hits.box.begin(), hits.box.begin() + l);
  Int nbox_size = 1;
  for (const Int& v : nbox) nbox_size *= v;

  SeparationResult res;
  res.sigma_zero = sigma_zero;
  res.hyp_eps = 0;
  std::map<IntVec, std::pair<RatVec, TorusPolynomial>> cache;
  for (const auto& [h, ns] : by_h) {
    RatVec sh = sigma_zero ? RatVec(l, Rat(0)) : sigma(h);
    TorusPolynomial rh = detail::separation_poly(bp, bq, sh, h);
    for (const IntVec& n : ns)
      res.hyp_eps = std::max(res.hyp_eps, torus_norm(rh.eval(n)));
    cache.emplace(h, std::make_pair(std::move(sh), std::move(rh)));
  }
  Rat rho_c = rat_pow(Rat(1) / rho, cfg.exponent);
  res.budget = cfg.multiplier * rho_c * res.hyp_eps;
  Int q_budget = rat_floor(rho_c);
  if (q_budget < 1) q_budget = 1;

  // cascade: per-h Vinogradov solves seed the candidate dilates
  std::set<Int> cand;
  Int dense = q_budget < cfg.enum_cap ? q_budget : Int(cfg.enum_cap);
  for (Int q = 1; q <= dense; ++q) cand.insert(q);
  for (const auto& [h, ns] : by_h) {
    HitSet hh;
    hh.box = nbox;
    hh.members = ns;
    if (hh.density() <= Rat(10) * res.hyp_eps) continue;
    VinogradovResult vr =
        vinogradov_solve(cache.at(h).second, hh, res.hyp_eps, q_budget, cfg);
    if (vr.q >= 1 && vr.q <= q_budget) {
      std::vector<Int> lcms;
      for (const Int& c : cand) {
        Int m = lcm(c, vr.q);
        if (m <= q_budget) lcms.push_back(m);
      }
      cand.insert(lcms.begin(), lcms.end());
      cand.insert(vr.q);
    }
  }
  Int total = Int(static_cast<long>(hits.members.size()));
  for (const Int& q : cand) {
    if (res.sigma_zero) {
      if (smoothness_norm(bp.scaled(q), nbox) > res.budget) continue;
      if (smoothness_norm(bq.scaled(q), nbox) > res.budget) continue;
    }
    Int pass = 0;
    for (const auto& [h, ns] : by_h) {
      TorusPolynomial lin =
          detail::separation_linear(bp, bq, cache.at(h).first, h);
      if (smoothness_norm(lin.scaled(q), nbox) <= res.budget)
        pass += Int(static_cast<long>(ns.size()));
    }
    Rat frac = rat(pass, total);
    if (frac >= rho) {
      res.ok = true;
      res.q = q;
      res.fraction_a = frac;
      if (res.sigma_zero) {
        res.achieved_p = smoothness_norm(bp.scaled(q), nbox);
        res.achieved_q = smoothness_norm(bq.scaled(q), nbox);
      }
      return res;
    }
    if (res.q == 0 || frac > res.fraction_a) {
      res.q = q;
      res.fraction_a = frac;
    }
  }
  return res;
}

}  // namespace nilsonde
