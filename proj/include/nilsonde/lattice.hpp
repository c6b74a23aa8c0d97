#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "nilsonde/linalg.hpp"
#include "nilsonde/rational.hpp"

namespace nilsonde {

// --- lattices ---

// Integer lattice given by a generating set (one generator per entry).
struct IntLattice {
  IntMat gens;

  std::size_t ambient() const { return gens.empty() ? 0 : gens[0].size(); }
  std::size_t count() const { return gens.size(); }
};

inline IntLattice lattice_from(IntMat gens) { return IntLattice{std::move(gens)}; }

namespace detail {

// Gram-Schmidt data for the rows of b: mu (lower triangular) and the
// squared lengths of the orthogonalized rows.
inline void gso(const IntMat& b, RatMat& mu, RatVec& bnorm) {
  std::size_t n = b.size();
  RatMat star(n);
  mu.assign(n, RatVec(n, Rat(0)));
  bnorm.assign(n, Rat(0));
  for (std::size_t i = 0; i < n; ++i) {
    mu[i][i] = 1;
    RatVec v;
    v.reserve(b[i].size());
    for (const Int& x : b[i]) v.push_back(Rat(x));
    for (std::size_t j = 0; j < i; ++j) {
      if (bnorm[j] == 0) continue;
      mu[i][j] = dot(b[i], star[j]) / bnorm[j];
      for (std::size_t c = 0; c < v.size(); ++c) v[c] -= mu[i][j] * star[j][c];
    }
    bnorm[i] = dot(v, v);
    star[i] = std::move(v);
  }
}

}  // namespace detail

// Exact Lovász check (factor delta, default 3/4) plus size reduction bound.
inline bool lovasz_ok(const IntMat& rows, const Rat& delta = Rat(3, 4)) {
  RatMat mu;
  RatVec bnorm;
  detail::gso(rows, mu, bnorm);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (abs(mu[i][j]) > Rat(1, 2)) return false;
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (bnorm[k] < (delta - mu[k][k - 1] * mu[k][k - 1]) * bnorm[k - 1])
      return false;
  return true;
}

// Exact LLL on the rows (independent generators required).
inline IntMat lll_rows(IntMat b, const Rat& delta = Rat(3, 4)) {
  std::size_t n = b.size();
  if (n == 0) return b;
  if (rank(b) != n) throw std::invalid_argument("lll_rows: rank deficiency");
  RatMat mu;
  RatVec bnorm;
  std::size_t k = 1;
  while (k < n) {
    detail::gso(b, mu, bnorm);
    for (std::size_t j = k; j-- > 0;) {
      Int q = rat_round_half_down(mu[k][j]);
      if (q != 0) {
        for (std::size_t c = 0; c < b[k].size(); ++c) b[k][c] -= q * b[j][c];
        for (std::size_t t = 0; t <= j; ++t) mu[k][t] -= Rat(q) * mu[j][t];
      }
    }
    if (bnorm[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * bnorm[k - 1]) {
      ++k;
    } else {
      std::swap(b[k], b[k - 1]);
      k = (k > 1) ? k - 1 : 1;
    }
  }
  return b;
}

inline IntLattice lll_reduce(const IntLattice& l, const Rat& delta = Rat(3, 4)) {
  IntMat out = lll_rows(l.gens, delta);
  if (!lovasz_ok(out, delta))
    throw std::runtime_error("lll_reduce: Lovász verification failed");
  if (!same_lattice(out, l.gens))
    throw std::runtime_error("lll_reduce: lattice changed");
  return IntLattice{std::move(out)};
}

// --- bodies ---

// Symmetric convex body |a_j . x| <= c_j intersected with the box
// |x_i| <= box (box = 0 means no box constraint).  The gauge is the
// closed Minkowski functional: x lies in t*B iff gauge(x) <= t.
struct BodySpec {
  RatMat forms;
  RatVec thresholds;
  Rat box = 0;

  static BodySpec sup_ball(const Rat& r) {
    BodySpec b;
    b.box = r;
    return b;
  }

  Rat gauge(const RatVec& x) const {
    Rat g = 0;
    for (std::size_t j = 0; j < forms.size(); ++j) {
      if (thresholds[j] <= 0)
        throw std::invalid_argument("BodySpec: nonpositive threshold");
      g = std::max(g, Rat(abs(dot(forms[j], x)) / thresholds[j]));
    }
    if (box > 0)
      for (const Rat& c : x) g = std::max(g, Rat(abs(c) / box));
    return g;
  }

  Rat gauge(const IntVec& x) const {
    RatVec v;
    v.reserve(x.size());
    for (const Int& c : x) v.push_back(Rat(c));
    return gauge(v);
  }

  // Volume when the body is a pure box; 0 when not computable exactly.
  Rat volume(std::size_t dim) const {
    if (!forms.empty() || box <= 0) return Rat(0);
    Rat v = 1;
    for (std::size_t i = 0; i < dim; ++i) v *= 2 * box;
    return v;
  }
};

// --- successive minima ---

struct MinimaResult {
  RatVec lambda;    // ascending gauges
  IntMat vectors;   // attaining lattice vectors, rows
  bool complete = false;
  bool minkowski_checked = false;
  Rat minkowski_product = 0;  // lambda_1..lambda_d vol(B) / covol(L)
};

namespace detail {

inline bool extends_rank(RatMat& echelon, const IntVec& v) {
  RatVec row;
  row.reserve(v.size());
  for (const Int& x : v) row.push_back(Rat(x));
  for (const RatVec& e : echelon) {
    std::size_t p = 0;
    while (p < e.size() && e[p] == 0) ++p;
    if (p < e.size() && row[p] != 0) {
      Rat f = row[p] / e[p];
      for (std::size_t c = p; c < row.size(); ++c) row[c] -= f * e[c];
    }
  }
  for (const Rat& x : row)
    if (x != 0) {
      echelon.push_back(std::move(row));
      return true;
    }
  return false;
}

// Odometer over coefficient vectors in [-bound, bound]^m, skipping zero.
template <typename F>
inline void enumerate_coeffs(std::size_t m, long bound, F&& f) {
  std::vector<long> c(m, -bound);
  while (true) {
    bool zero = true;
    for (long x : c)
      if (x != 0) { zero = false; break; }
    if (!zero) f(c);
    std::size_t i = 0;
    while (i < m && c[i] == bound) c[i++] = -bound;
    if (i == m) break;
    ++c[i];
  }
}

}  // namespace detail

inline MinimaResult successive_minima(const IntLattice& l, const BodySpec& body,
                                      long enum_bound = 8) {
  std::size_t d = l.ambient();
  if (d > 8) throw std::invalid_argument("successive_minima: dim > 8");
  IntMat basis = hnf_columns(l.gens).basis;
  std::size_t m = basis.size();
  MinimaResult res;
  if (m == 0) return res;
  basis = lll_rows(std::move(basis));
  std::vector<std::pair<Rat, IntVec>> cands;
  detail::enumerate_coeffs(m, enum_bound, [&](const std::vector<long>& c) {
    IntVec x(d, Int(0));
    for (std::size_t i = 0; i < m; ++i)
      if (c[i] != 0)
        for (std::size_t j = 0; j < d; ++j) x[j] += c[i] * basis[i][j];
    cands.emplace_back(body.gauge(x), std::move(x));
  });
  std::sort(cands.begin(), cands.end());
  RatMat echelon;
  for (auto& [g, x] : cands) {
    if (res.vectors.size() == m) break;
    if (detail::extends_rank(echelon, x)) {
      res.lambda.push_back(g);
      res.vectors.push_back(std::move(x));
    }
  }
  res.complete = (res.vectors.size() == m);
  Rat vol = body.volume(d);
  if (res.complete && m == d && vol > 0) {
    Int det = determinant(basis);
    Rat prod = vol / abs(det);
    for (const Rat& lam : res.lambda) prod *= lam;
    res.minkowski_checked = true;
    res.minkowski_product = prod;
  }
  return res;
}

// --- generalized arithmetic progressions ---

struct GAPData {
  IntMat generators;
  IntVec sides;          // N_j per generator
  bool proper = false;
  Int size = 0;          // |P|
  Int body_count = 0;    // |B ∩ L| within the enumeration window
  Rat ratio = 0;         // size / body_count
  Rat threshold = 0;     // required c(d)
  bool ok = false;
};

inline GAPData gap_extract(const IntLattice& l, const BodySpec& body,
                           long enum_bound = 16) {
  std::size_t d = l.ambient();
  IntMat basis = hnf_columns(l.gens).basis;
  std::size_t m = basis.size();
  auto minima = successive_minima(l, body, enum_bound);
  if (!minima.complete)
    throw std::runtime_error("gap_extract: enumeration incomplete");
  GAPData gap;
  for (std::size_t j = 0; j < m; ++j) {
    if (minima.lambda[j] <= 0)
      throw std::invalid_argument("gap_extract: body unbounded on lattice");
    Int side = rat_floor(Rat(1) / (Rat(static_cast<long>(m)) * minima.lambda[j]));
    if (side >= 1) {
      gap.generators.push_back(minima.vectors[j]);
      gap.sides.push_back(side);
    }
  }
  Int expected = 1;
  for (const Int& s : gap.sides) expected *= 2 * s + 1;
  if (expected > 1000000)
    throw std::runtime_error("gap_extract: enumeration blow-up");
  std::set<IntVec> points;
  std::size_t g = gap.generators.size();
  std::vector<long> bounds(g);
  for (std::size_t j = 0; j < g; ++j) bounds[j] = static_cast<long>(gap.sides[j].get_si());
  std::vector<long> c(g, 0);
  for (std::size_t j = 0; j < g; ++j) c[j] = -bounds[j];
  while (true) {
    IntVec x(d, Int(0));
    for (std::size_t j = 0; j < g; ++j)
      for (std::size_t t = 0; t < d; ++t) x[t] += c[j] * gap.generators[j][t];
    if (body.gauge(x) > 1)
      throw std::runtime_error("gap_extract: progression escapes the body");
    points.insert(std::move(x));
    std::size_t i = 0;
    while (i < g && c[i] == bounds[i]) c[i] = -bounds[i], ++i;
    if (i == g) break;
    ++c[i];
  }
  gap.size = static_cast<long>(points.size());
  gap.proper = (gap.size == expected);
  // |B ∩ L| within the same coefficient window as the minima search.
  IntMat red = lll_rows(basis);
  Int in_body = 1;  // the origin
  detail::enumerate_coeffs(m, enum_bound, [&](const std::vector<long>& cf) {
    IntVec x(d, Int(0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) x[j] += cf[i] * red[i][j];
    if (body.gauge(x) <= 1) in_body += 1;
  });
  gap.body_count = in_body;
  gap.ratio = rat(gap.size, gap.body_count);
  unsigned long expo = (7 * static_cast<unsigned long>(m) + 1) / 2;
  Rat thr = 1;
  for (unsigned long i = 0; i < expo; ++i) thr /= static_cast<long>(m);
  gap.threshold = thr;
  gap.ok = (gap.ratio >= gap.threshold);
  return gap;
}

// --- refined bracket witnesses ---

struct WitnessConfig {
  long c1 = 8;             // exponent on M/delta in the budget
  long c2 = 2;             // budget carries d^(c2*d)
  long small_n = 50;       // SmallN cutoff
  long enum_bound = 3;     // minima enumeration radius
  std::size_t pair_cap = 20000;  // max collected differences
};

enum class WitnessExit { None, SmallN, LargeK };

struct BracketWitness {
  IntMat w_list;        // |w . a_j| small (torus norm for the corollary)
  IntMat eta_list;      // ||eta . alpha_j|| small
  RatMat w_vals;        // w_vals[i][j] per pair
  RatMat eta_vals;      // eta_vals[i][j] per pair
  RatVec allowed;       // budget * K / N_j per axis
  std::size_t ambient = 0;  // augmented dimension used internally
};

struct WitnessResult {
  WitnessExit exit = WitnessExit::None;
  BracketWitness witness;

  bool has_witness() const { return exit == WitnessExit::None; }
};

namespace detail {

inline Rat rat_power(Rat base, long e) {
  Rat out = 1;
  for (long i = 0; i < e; ++i) out *= base;
  return out;
}

// Nearest integer with ties toward zero.
inline Int round_ties_to_zero(const Rat& q) {
  Int n = rat_round_half_down(abs(q));
  return q < 0 ? Int(-n) : n;
}

inline Int next_prime(const Int& n) {
  Int p;
  mpz_nextprime(p.get_mpz_t(), n.get_mpz_t());
  return p;
}

// Saturated lattice of integer vectors orthogonal to every row.
inline IntMat orth_lattice(const IntMat& rows, std::size_t dim) {
  if (rows.empty()) {
    IntMat id(dim, IntVec(dim, Int(0)));
    for (std::size_t i = 0; i < dim; ++i) id[i][i] = 1;
    return id;
  }
  return integer_kernel(rows);
}

// Maximal independent subset.  No content reduction: dividing a stripped
// vector by its content would change the torus values it witnesses.
inline IntMat independent_subset(const IntMat& rows) {
  IntMat out;
  RatMat echelon;
  for (const IntVec& v : rows)
    if (extends_rank(echelon, v)) out.push_back(v);
  return out;
}

// Evaluation matrices plus budget filtering for one family of vectors.
// value(vec, axis) must return the exact achieved quantity.
template <typename F>
inline void verify_family(IntMat& vecs, RatMat& vals, const RatVec& allowed,
                          F&& value) {
  IntMat kept;
  RatMat kept_vals;
  for (const IntVec& v : vecs) {
    RatVec row;
    bool ok = true;
    for (std::size_t j = 0; j < allowed.size(); ++j) {
      Rat x = value(v, j);
      if (x > allowed[j]) ok = false;
      row.push_back(std::move(x));
    }
    if (ok) {
      kept.push_back(v);
      kept_vals.push_back(std::move(row));
    }
  }
  vecs = std::move(kept);
  vals = std::move(kept_vals);
}

// Shared engine for the refined witness lemmas.  a_list, alpha_list have r
// rows of dimension d; hypothesis per axis j: ||beta_j + a_j . {sum_i
// alpha_i h_i}|| < K / N_j on a delta fraction of h in [1,N_1]x...x[1,N_r].
// The witness is stripped to the first strip_dim coordinates and verified
// against a_out / alpha_out (rows of dimension strip_dim); torus_w selects
// the torus norm for the w-family values (corollary form).
inline WitnessResult witness_core(const RatMat& a_list, const RatMat& alpha_list,
                                  const RatVec& beta, const std::vector<long>& nvec,
                                  const Rat& delta, const Rat& k_param,
                                  const WitnessConfig& cfg, std::size_t strip_dim,
                                  const RatMat& a_out, const RatMat& alpha_out,
                                  bool torus_w) {
  std::size_t r = a_list.size();
  std::size_t d = a_list.empty() ? 0 : a_list[0].size();
  if (alpha_list.size() != r || beta.size() != r || nvec.size() != r)
    throw std::invalid_argument("witness_core: shape mismatch");
  for (std::size_t i = 0; i < r; ++i)
    if (alpha_list[i].size() != d)
      throw std::invalid_argument("witness_core: shape mismatch");
  if (delta <= 0 || k_param < 0)
    throw std::invalid_argument("witness_core: bad delta or K");
  WitnessResult res;
  for (long n : nvec)
    if (n <= cfg.small_n) {
      res.exit = WitnessExit::SmallN;
      return res;
    }
  for (std::size_t j = 0; j < r; ++j)
    if (k_param / nvec[j] > rat(1, 100 * static_cast<long>(r))) {
      res.exit = WitnessExit::LargeK;
      return res;
    }

  // Exhaustive hit scan.
  std::vector<std::vector<long>> hits;
  Int total = 1;
  for (long n : nvec) total *= n;
  {
    std::vector<long> h(r, 1);
    while (true) {
      RatVec y(d, Rat(0));
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t c = 0; c < d; ++c) y[c] += alpha_list[i][c] * h[i];
      for (Rat& x : y) x = signed_frac(x);
      bool hit = true;
      for (std::size_t j = 0; j < r; ++j)
        if (!(torus_norm(beta[j] + dot(a_list[j], y)) * nvec[j] < k_param)) {
          hit = false;
          break;
        }
      if (hit) hits.push_back(h);
      std::size_t i = 0;
      while (i < r && h[i] == nvec[i]) h[i++] = 1;
      if (i == r) break;
      ++h[i];
    }
  }
  if (rat(static_cast<long>(hits.size()), 1) < delta * Rat(total))
    throw std::invalid_argument("witness_core: hit density below delta");

  // Budget.
  Rat m_bound = 2;
  for (const RatVec& a : a_list) m_bound = std::max(m_bound, abs_max(a));
  Rat budget = rat_power(m_bound / delta, cfg.c1);
  budget *= rat_power(Rat(static_cast<long>(d)), cfg.c2 * static_cast<long>(d));
  RatVec allowed(r);
  for (std::size_t j = 0; j < r; ++j) allowed[j] = budget * k_param / nvec[j];

  // Prime replacement N_i -> distinct odd prime N'_i in [10 r N_i, 20 r N_i].
  std::vector<Int> nprime(r);
  Int prev = 2;
  for (std::size_t i = 0; i < r; ++i) {
    Int lo = Int(10 * static_cast<long>(r)) * nvec[i];
    Int p = next_prime(lo - 1);
    while (p <= prev) p = next_prime(p);
    nprime[i] = p;
    prev = p;
  }

  // Nearest denominator-N' approximants, ties toward zero.
  std::size_t big = d + r;
  RatMat alpha2(r, RatVec(d)), vcorr(r, RatVec(d));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      alpha2[i][c] = rat(round_ties_to_zero(alpha_list[i][c] * nprime[i]), nprime[i]);
      vcorr[i][c] = alpha_list[i][c] - alpha2[i][c];
    }
  // Augmented frequency and coefficient vectors.
  RatMat albar(r, RatVec(big, Rat(0))), abar(r, RatVec(big, Rat(0)));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t c = 0; c < d; ++c) albar[i][c] = alpha2[i][c];
    albar[i][d + i] = rat(Int(1), nprime[i]);
  }
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t c = 0; c < d; ++c) abar[j][c] = a_list[j][c];
    for (std::size_t i = 0; i < r; ++i)
      abar[j][d + i] = Rat(nprime[i]) * dot(a_list[j], vcorr[i]);
  }

  // Bucket hits by (integer correction, nearest integers, sign pattern),
  // then collect within-bucket differences against a bucket anchor.
  using Key = std::tuple<std::vector<Int>, std::vector<Int>, std::vector<int>>;
  std::map<Key, RatVec> anchors;
  RatMat zs;
  for (const auto& h : hits) {
    if (zs.size() >= cfg.pair_cap) break;
    RatVec yorig(d, Rat(0)), ynew(d, Rat(0));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        yorig[c] += alpha_list[i][c] * h[i];
        ynew[c] += alpha2[i][c] * h[i];
      }
    std::vector<Int> corr(d);
    for (std::size_t c = 0; c < d; ++c) {
      Rat cc = signed_frac(yorig[c]) - signed_frac(ynew[c]);
      for (std::size_t i = 0; i < r; ++i) cc -= vcorr[i][c] * h[i];
      if (!is_integer(cc))
        throw std::runtime_error("witness_core: correction not integral");
      corr[c] = cc.get_num();
    }
    RatVec ybar(big);
    for (std::size_t c = 0; c < d; ++c) ybar[c] = signed_frac(ynew[c]);
    for (std::size_t i = 0; i < r; ++i) ybar[d + i] = rat(Int(h[i]), nprime[i]);
    std::vector<Int> nearest(r);
    for (std::size_t j = 0; j < r; ++j)
      nearest[j] = rat_round_half_down(beta[j] + dot(abar[j], ybar));
    std::vector<int> signs(big);
    for (std::size_t c = 0; c < big; ++c)
      signs[c] = ybar[c] > 0 ? 1 : (ybar[c] < 0 ? -1 : 0);
    Key key{std::move(corr), std::move(nearest), std::move(signs)};
    auto [it, fresh] = anchors.emplace(std::move(key), ybar);
    if (!fresh) {
      RatVec z(big);
      bool zero = true;
      for (std::size_t c = 0; c < big; ++c) {
        z[c] = ybar[c] - it->second[c];
        if (z[c] != 0) zero = false;
      }
      if (!zero) zs.push_back(std::move(z));
    }
  }
  if (zs.empty()) {
    // No collisions to difference: too few hits at this scale.
    res.exit = WitnessExit::SmallN;
    return res;
  }

  // V = span of differences; W = V ∩ Z^big; w's = minima of W; eta's =
  // saturated orthogonal lattice of the w's.
  IntMat zrows;
  for (const RatVec& z : zs) {
    IntVec row = clear_denominators(z).first;
    divide_by_content(row);  // only the direction matters for the span
    zrows.push_back(std::move(row));
  }
  std::sort(zrows.begin(), zrows.end());
  zrows.erase(std::unique(zrows.begin(), zrows.end()), zrows.end());
  IntMat eta_v = orth_lattice(zrows, big);
  IntMat w_lat = orth_lattice(eta_v, big);
  IntMat w_core;
  if (!w_lat.empty()) {
    auto minima = successive_minima(IntLattice{w_lat}, BodySpec::sup_ball(1),
                                    cfg.enum_bound);
    w_core = minima.vectors;
  }
  IntMat eta_core = orth_lattice(w_core, big);
  if (!eta_core.empty()) eta_core = lll_rows(eta_core);

  // Strip the augmented coordinates: keep the leading parts of the eta's,
  // then take the integer vectors orthogonal to them as the w family.
  IntMat eta_first;
  for (const IntVec& e : eta_core)
    eta_first.push_back(IntVec(e.begin(), e.begin() + strip_dim));
  IntMat eta_final = independent_subset(eta_first);
  IntMat w_final = orth_lattice(eta_final, strip_dim);
  if (!w_final.empty()) w_final = lll_rows(w_final);

  BracketWitness wit;
  wit.ambient = big;
  wit.allowed = allowed;
  wit.eta_list = std::move(eta_final);
  wit.w_list = std::move(w_final);
  verify_family(wit.eta_list, wit.eta_vals, allowed,
                [&](const IntVec& e, std::size_t j) {
                  return torus_norm(dot(e, alpha_out[j]));
                });
  verify_family(wit.w_list, wit.w_vals, allowed,
                [&](const IntVec& w, std::size_t j) {
                  return torus_w ? torus_norm(dot(w, a_out[j]))
                                 : Rat(abs(dot(w, a_out[j])));
                });
  // Re-verify the structural invariants from scratch.
  for (const IntVec& w : wit.w_list)
    for (const IntVec& e : wit.eta_list)
      if (dot(w, e) != 0)
        throw std::runtime_error("witness_core: orthogonality lost");
  if (rank(wit.w_list) != wit.w_list.size() ||
      rank(wit.eta_list) != wit.eta_list.size())
    throw std::runtime_error("witness_core: dependent witness family");
  res.witness = std::move(wit);
  return res;
}

}  // namespace detail

// Single-parameter refined witness: hypothesis ||beta + a . {alpha h}|| < K/N
// on a delta fraction of h in [N].
inline WitnessResult refined_witness_single(const RatVec& a, const RatVec& alpha,
                                            const Rat& beta, long n,
                                            const Rat& delta, const Rat& k_param,
                                            const WitnessConfig& cfg = {}) {
  if (a.size() != alpha.size())
    throw std::invalid_argument("refined_witness_single: shape mismatch");
  return detail::witness_core({a}, {alpha}, {beta}, {n}, delta, k_param, cfg,
                              a.size(), {a}, {alpha}, false);
}

// Multiparameter refined witness (r axes, per-axis bounds budget*K/N_j).
inline WitnessResult refined_witness_multi(const RatMat& a_list,
                                           const RatMat& alpha_list,
                                           const RatVec& beta,
                                           const std::vector<long>& nvec,
                                           const Rat& delta, const Rat& k_param,
                                           const WitnessConfig& cfg = {}) {
  std::size_t d = a_list.empty() ? 0 : a_list[0].size();
  return detail::witness_core(a_list, alpha_list, beta, nvec, delta, k_param, cfg,
                              d, a_list, alpha_list, false);
}

// Corollary form with the extra bilinear term sum_{i,j} gamma_ij n_i h_j:
// augment to dimension d + r with unit coefficient coordinates, run the
// multiparameter lemma, then strip.  The w-family bound is a torus norm here.
inline WitnessResult witness_corollary(const RatMat& a_list, const RatMat& alpha_list,
                                       const RatVec& beta, const RatMat& gamma,
                                       const std::vector<long>& nvec,
                                       const Rat& delta, const Rat& k_param,
                                       const WitnessConfig& cfg = {}) {
  std::size_t r = a_list.size();
  std::size_t d = a_list.empty() ? 0 : a_list[0].size();
  if (gamma.size() != r)
    throw std::invalid_argument("witness_corollary: gamma must be r x r");
  RatMat a_aug(r, RatVec(d + r, Rat(0))), al_aug(r, RatVec(d + r, Rat(0)));
  for (std::size_t j = 0; j < r; ++j) {
    if (gamma[j].size() != r)
      throw std::invalid_argument("witness_corollary: gamma must be r x r");
    for (std::size_t c = 0; c < d; ++c) a_aug[j][c] = a_list[j][c];
    a_aug[j][d + j] = 1;
  }
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t c = 0; c < d; ++c) al_aug[i][c] = alpha_list[i][c];
    for (std::size_t k = 0; k < r; ++k) al_aug[i][d + k] = gamma[k][i];
  }
  WitnessResult res = detail::witness_core(a_aug, al_aug, beta, nvec, delta,
                                           k_param, cfg, d, a_list, alpha_list,
                                           /*torus_w=*/true);
  if (res.has_witness()) res.witness.ambient = d + r;
  return res;
}

}  // namespace nilsonde
