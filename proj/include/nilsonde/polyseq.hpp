#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nilsonde/group.hpp"
#include "nilsonde/subgroup.hpp"

namespace nilsonde {

using MultiIndex = std::vector<unsigned>;

inline unsigned mi_degree(const MultiIndex& i) {
  unsigned s = 0;
  for (unsigned x : i) s += x;
  return s;
}

// Graded-lexicographic order: by total degree, then lexicographic.
struct GradedLex {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const {
    unsigned da = mi_degree(a), db = mi_degree(b);
    if (da != db) return da < db;
    return a < b;
  }
};

// binom(n, i) = prod_j binom(n_j, i_j).
inline Int mi_binomial(const IntVec& n, const MultiIndex& i) {
  Int b = 1;
  for (std::size_t j = 0; j < i.size(); ++j) {
    b *= binomial(n[j], i[j]);
    if (b == 0) return b;
  }
  return b;
}

// All multi-indices of length l with degree <= k, graded-lex sorted.
inline std::vector<MultiIndex> multi_indices(std::size_t l, unsigned k) {
  std::vector<MultiIndex> out;
  MultiIndex cur(l, 0);
  std::function<void(std::size_t, unsigned)> rec = [&](std::size_t pos,
                                                       unsigned left) {
    if (pos == l) {
      out.push_back(cur);
      return;
    }
    for (unsigned v = 0; v <= left; ++v) {
      cur[pos] = v;
      rec(pos + 1, left - v);
    }
    cur[pos] = 0;
  };
  rec(0, k);
  std::sort(out.begin(), out.end(), GradedLex{});
  return out;
}

/**
 * Polynomial sequence g(n) = prod_{i} g_i^{binom(n, i)}, product taken in
 * graded-lexicographic multi-index order, with g_i in G_{|i|}.
 */
struct PolySeq {
  const GroupSpec* spec = nullptr;
  std::size_t nparams = 1;
  std::map<MultiIndex, GroupElement, GradedLex> coeffs;  // identity omitted

  GroupElement coeff(const MultiIndex& i) const {
    auto it = coeffs.find(i);
    return it == coeffs.end() ? spec->identity() : it->second;
  }

  void set_coeff(const MultiIndex& i, GroupElement g) {
    if (g == spec->identity())
      coeffs.erase(i);
    else
      coeffs[i] = std::move(g);
  }

  unsigned degree() const {
    unsigned k = 0;
    for (const auto& [i, g] : coeffs) k = std::max(k, mi_degree(i));
    return k;
  }

  GroupElement eval(const IntVec& n) const {
    GroupElement acc = spec->identity();
    for (const auto& [i, g] : coeffs) {
      Int b = mi_binomial(n, i);
      if (b == 0) continue;
      acc = spec->multiply(acc, spec->power(g, b));
    }
    return acc;
  }

  GroupElement eval(long n) const { return eval(IntVec{Int(n)}); }

  // Coefficient filtration: g_i in G_{|i|} (trailing-coordinate support).
  void validate() const {
    for (const auto& [i, g] : coeffs) {
      unsigned deg = mi_degree(i);
      if (deg > spec->degree)
        throw SpecError("polynomial sequence exceeds the filtration degree");
      if (deg >= 1 && !spec->in_filtration_block(g, deg))
        throw SpecError("Taylor coefficient escapes its filtration group");
    }
  }
};

// Taylor reconstruction from values: coefficients recovered in graded-lex
// order via g_i = (prefix product at n = i)^{-1} * value(i).
inline PolySeq taylor_from(
    const GroupSpec& spec, std::size_t nparams, unsigned degree,
    const std::function<GroupElement(const IntVec&)>& value) {
  PolySeq g;
  g.spec = &spec;
  g.nparams = nparams;
  for (const MultiIndex& i : multi_indices(nparams, degree)) {
    IntVec n(nparams);
    for (std::size_t j = 0; j < nparams; ++j) n[j] = static_cast<long>(i[j]);
    GroupElement prefix = spec.identity();
    for (const auto& [j, gj] : g.coeffs) {
      Int b = mi_binomial(n, j);
      if (b != 0) prefix = spec.multiply(prefix, spec.power(gj, b));
    }
    GroupElement gi = spec.multiply(spec.invert(prefix), value(n));
    g.set_coeff(i, std::move(gi));
  }
  return g;
}

// Exactness check of a reconstruction on the verification grid
// {0..degree+1}^l (sufficient for degree <= k).
inline bool agrees_on_grid(const PolySeq& a,
                           const std::function<GroupElement(const IntVec&)>& b,
                           unsigned grid_max) {
  std::vector<MultiIndex> pts = multi_indices(a.nparams, grid_max * a.nparams);
  for (const MultiIndex& p : pts) {
    bool ok = true;
    for (unsigned x : p)
      if (x > grid_max) { ok = false; break; }
    if (!ok) continue;
    IntVec n(a.nparams);
    for (std::size_t j = 0; j < a.nparams; ++j) n[j] = static_cast<long>(p[j]);
    if (a.eval(n) != b(n)) return false;
  }
  return true;
}

/**
 * Polynomial with rational coefficients in the binomial basis, read
 * modulo 1 where torus norms are involved.
 */
struct TorusPolynomial {
  std::size_t nparams = 1;
  std::map<MultiIndex, Rat, GradedLex> coeffs;

  Rat coeff(const MultiIndex& i) const {
    auto it = coeffs.find(i);
    return it == coeffs.end() ? Rat(0) : it->second;
  }
  void set_coeff(const MultiIndex& i, Rat v) {
    if (v == 0)
      coeffs.erase(i);
    else
      coeffs[i] = std::move(v);
  }
  unsigned degree() const {
    unsigned k = 0;
    for (const auto& [i, v] : coeffs) k = std::max(k, mi_degree(i));
    return k;
  }
  Rat eval(const IntVec& n) const {
    Rat s = 0;
    for (const auto& [i, v] : coeffs) s += Rat(mi_binomial(n, i)) * v;
    return s;
  }
  Rat eval(long n) const { return eval(IntVec{Int(n)}); }

  TorusPolynomial scaled(const Int& q) const {
    TorusPolynomial p;
    p.nparams = nparams;
    for (const auto& [i, v] : coeffs) p.set_coeff(i, Rat(q) * v);
    return p;
  }
};

// ||p||_{C_infty[N]} = sup_{i != 0} N^i ||alpha_i||_{R/Z}.
inline Rat smoothness_norm(const TorusPolynomial& p, const IntVec& nvec) {
  Rat best = 0;
  for (const auto& [i, v] : p.coeffs) {
    if (mi_degree(i) == 0) continue;
    Rat scale = 1;
    for (std::size_t j = 0; j < i.size(); ++j)
      for (unsigned t = 0; t < i[j]; ++t) scale *= Rat(nvec[j]);
    best = std::max(best, Rat(scale * torus_norm(v)));
  }
  return best;
}

// eta composed with g: binomial coefficients eta(g_i), since eta is a
// homomorphism and binomial products expand additively under eta.
inline TorusPolynomial char_compose(const HorizontalCharacter& eta,
                                    const PolySeq& g) {
  TorusPolynomial p;
  p.nparams = g.nparams;
  for (const auto& [i, gi] : g.coeffs) p.set_coeff(i, eta.apply(gi));
  return p;
}

// --- structural transforms ---

struct LinSplit {
  PolySeq lin;  // g_lin(n) = g(e_1)^{n_1} ... g(e_l)^{n_l}
  PolySeq g2;   // g_2 = g * g_lin^{-1}
};

inline LinSplit lin_split(const PolySeq& g) {
  const GroupSpec& spec = *g.spec;
  if (g.coeff(MultiIndex(g.nparams, 0)) != spec.identity())
    throw SpecError("lin_split requires g(0) = id (run normalize_base)");
  LinSplit out;
  out.lin.spec = &spec;
  out.lin.nparams = g.nparams;
  for (std::size_t j = 0; j < g.nparams; ++j) {
    MultiIndex e(g.nparams, 0);
    e[j] = 1;
    IntVec n(g.nparams, Int(0));
    n[j] = 1;
    out.lin.set_coeff(e, g.eval(n));
  }
  // products raise coefficient-support degree up to the filtration degree
  unsigned k = static_cast<unsigned>(spec.degree);
  out.g2 = taylor_from(spec, g.nparams, k, [&](const IntVec& n) {
    return spec.multiply(g.eval(n), spec.invert(out.lin.eval(n)));
  });
  out.g2.validate();
  return out;
}

/**
 * Van der Corput differenced sequence on G_square:
 *   g_h(n) = ({g_lin(h)}^{-1} g_2(n+h) g_lin(n+h) [g_lin(h)]^{-1}, g(n)).
 * Fractional parts use I = [-1/2, 1/2).
 */
inline PolySeq vdc_sequence(const PolySeq& g, const SquareGroupSpec& sq,
                            const IntVec& h) {
  const GroupSpec& spec = *g.spec;
  LinSplit split = lin_split(g);
  UnitInterval iv{Rat(-1, 2), false};
  auto fd = spec.frac_decompose(split.lin.eval(h), iv);
  GroupElement frac_inv = spec.invert(fd.fractional);
  GroupElement int_inv = spec.invert(fd.integral);
  unsigned k = static_cast<unsigned>(sq.adapted.spec.degree);
  auto value = [&](const IntVec& n) {
    IntVec nh(n.size());
    for (std::size_t j = 0; j < n.size(); ++j) nh[j] = n[j] + h[j];
    GroupElement first = spec.multiply(
        spec.multiply(frac_inv, split.g2.eval(nh)),
        spec.multiply(split.lin.eval(nh), int_inv));
    GroupElement second = g.eval(n);
    return sq.embed(first, second);  // membership enforced here
  };
  PolySeq out = taylor_from(sq.adapted.spec, g.nparams, k, value);
  out.validate();  // Taylor coefficients respect the (G_sq)_i filtration
  return out;
}

struct NormalizeRecord {
  PolySeq normalized;            // g~ with g~(0) = id, |psi(g~(e_i))| <= 1/2
  GroupElement left;             // {g(0)}
  GroupElement right_const;      // [g(0)]
  std::vector<GroupElement> right_powers;  // [g_1(e_i)] (lattice elements)
};

// Reduction of Lemma-"trick1" type: conjugate away g(0) and damp the
// linear coefficients into [-1/2, 1/2) by lattice factors.
inline NormalizeRecord normalize_base(const PolySeq& g) {
  const GroupSpec& spec = *g.spec;
  UnitInterval iv{Rat(-1, 2), false};
  GroupElement g0 = g.eval(IntVec(g.nparams, Int(0)));
  auto fd = spec.frac_decompose(g0, iv);
  GroupElement li = spec.invert(fd.fractional);
  GroupElement ri = spec.invert(fd.integral);
  unsigned k = static_cast<unsigned>(spec.degree);
  PolySeq g1 = taylor_from(spec, g.nparams, k, [&](const IntVec& n) {
    return spec.multiply(spec.multiply(li, g.eval(n)), ri);
  });
  NormalizeRecord rec;
  rec.left = fd.fractional;
  rec.right_const = fd.integral;
  for (std::size_t j = 0; j < g.nparams; ++j) {
    IntVec e(g.nparams, Int(0));
    e[j] = 1;
    auto fe = spec.frac_decompose(g1.eval(e), iv);
    rec.right_powers.push_back(fe.integral);
  }
  rec.normalized = taylor_from(spec, g.nparams, k, [&](const IntVec& n) {
    GroupElement acc = g1.eval(n);
    for (std::size_t j = g.nparams; j-- > 0;)
      acc = spec.multiply(acc, spec.power(spec.invert(rec.right_powers[j]),
                                          n[j]));
    return acc;
  });
  rec.normalized.validate();
  return rec;
}

// --- vertical quotient (G~ = G / ker xi) ---

struct QuotientVertical {
  GroupSpec spec;          // reduced group
  std::size_t vert_dim;    // size of the source vertical block (trailing)
  Int xi_gcd;              // new frequency is this scalar
  const GroupSpec* parent = nullptr;
  IntVec xi;               // on the vertical block

  GroupElement project(const GroupElement& g) const {
    std::size_t dh = parent->d - vert_dim;
    GroupElement out(dh + 1, Rat(0));
    for (std::size_t i = 0; i < dh; ++i) out[i] = g[i];
    Rat v = 0;
    for (std::size_t t = 0; t < vert_dim; ++t)
      v += Rat(xi[t]) * g[dh + t];
    out[dh] = v / Rat(xi_gcd);
    return out;
  }

  PolySeq project(const PolySeq& g) const {
    PolySeq out;
    out.spec = &spec;
    out.nparams = g.nparams;
    for (const auto& [i, gi] : g.coeffs) out.set_coeff(i, project(gi));
    return out;
  }
};

// The vertical block is the last filtration block (trailing d_k
// coordinates), central by nesting.
inline QuotientVertical quotient_vertical(const GroupSpec& spec,
                                          const IntVec& xi) {
  std::size_t m = spec.filt_dims.back();
  if (xi.size() != m)
    throw SpecError("quotient_vertical: xi length must match the vertical "
                    "dimension");
  bool nonzero = false;
  for (const Int& x : xi)
    if (x != 0) nonzero = true;
  if (!nonzero) throw SpecError("quotient_vertical: xi = 0");
  QuotientVertical out;
  out.parent = &spec;
  out.vert_dim = m;
  out.xi = xi;
  Int g = 0;
  for (const Int& x : xi) g = gcd(g, x);
  out.xi_gcd = g;
  std::size_t dh = spec.d - m, nd = dh + 1;
  std::size_t deg = spec.degree;
  std::vector<std::size_t> filt;
  for (std::size_t i = 1; i <= deg; ++i)
    filt.push_back(spec.filt_dims[i - 1] - m + 1);
  GroupSpec q(nd, deg, 1, filt, spec.complexity);
  for (std::size_t a = 0; a < dh; ++a) {
    for (std::size_t b = a + 1; b < dh; ++b) {
      for (std::size_t l = 0; l < dh; ++l) {
        Rat c = spec.bracket_c(a, b, l);
        if (c != 0) q.set_bracket(a, b, l, c);
      }
      Rat cv = 0;
      for (std::size_t t = 0; t < m; ++t)
        cv += Rat(xi[t]) * spec.bracket_c(a, b, dh + t);
      if (cv != 0) q.set_bracket(a, b, dh, cv / Rat(g));
    }
  }
  q.step = q.lower_central_series().size();
  q.validate();
  out.spec = std::move(q);
  return out;
}

// Least P <= P_max with gamma(n + P e_j) Gamma = gamma(n) Gamma on the
// verification grid {0..grid_max}^l.
inline std::optional<unsigned long> rational_period(const PolySeq& gamma,
                                                    unsigned long p_max,
                                                    unsigned grid_max = 0) {
  const GroupSpec& spec = *gamma.spec;
  if (grid_max == 0) grid_max = gamma.degree() + 1;
  std::vector<IntVec> grid;
  for (const MultiIndex& p :
       multi_indices(gamma.nparams, grid_max * gamma.nparams)) {
    bool ok = true;
    for (unsigned x : p)
      if (x > grid_max) { ok = false; break; }
    if (!ok) continue;
    IntVec n(gamma.nparams);
    for (std::size_t j = 0; j < gamma.nparams; ++j)
      n[j] = static_cast<long>(p[j]);
    grid.push_back(std::move(n));
  }
  for (unsigned long P = 1; P <= p_max; ++P) {
    bool ok = true;
    for (std::size_t j = 0; j < gamma.nparams && ok; ++j) {
      for (const IntVec& n : grid) {
        IntVec np = n;
        np[j] += static_cast<long>(P);
        GroupElement diff =
            spec.multiply(spec.invert(gamma.eval(n)), gamma.eval(np));
        if (!is_integral(diff)) { ok = false; break; }
      }
    }
    if (ok) return P;
  }
  return std::nullopt;
}

}  // namespace nilsonde
