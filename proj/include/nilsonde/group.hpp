#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nilsonde/linalg.hpp"
#include "nilsonde/rational.hpp"

namespace nilsonde {

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// First-kind (exp) coordinates of a Lie algebra element.
using AlgebraElement = RatVec;
// Second-kind Mal'cev coordinates of a group element; the lattice is
// exactly the integer-coordinate elements.
using GroupElement = RatVec;

inline bool is_integral(const RatVec& v) {
  for (const Rat& q : v)
    if (!is_integer(q)) return false;
  return true;
}

// Half-open unit interval, either [a, a+1) or (a, a+1].
struct UnitInterval {
  Rat a;
  bool closed_right = false;  // false: [a, a+1); true: (a, a+1]

  bool contains(const Rat& x) const {
    if (closed_right) return x > a && x <= a + 1;
    return x >= a && x < a + 1;
  }
  // The unique integer b with s + b inside the interval.
  Int shift_into(const Rat& s) const {
    if (closed_right) return rat_floor(a - s) + 1;
    return rat_ceil(a - s);
  }
};

/**
 * A connected, simply connected nilpotent Lie group presented by rational
 * structure constants over a Mal'cev basis X_1..X_d adapted to a filtration
 * G = G_1 >= G_2 >= ... >= G_k: log(G_i) is the span of the last d_i basis
 * vectors. Indices are 0-based internally; brackets are stored for i < j
 * only and extended by antisymmetry.
 */
class GroupSpec {
 public:
  std::size_t d = 0;        // dimension
  std::size_t degree = 0;   // filtration length k
  std::size_t step = 0;     // nilpotency class s
  Rat complexity = 1;       // declared height bound M
  std::vector<std::size_t> filt_dims;          // d_1..d_k
  std::map<std::pair<std::size_t, std::size_t>, RatVec> structure;  // i<j

  GroupSpec() = default;
  GroupSpec(std::size_t dim, std::size_t deg, std::size_t stp,
            std::vector<std::size_t> filt, Rat m = 1)
      : d(dim), degree(deg), step(stp), complexity(std::move(m)),
        filt_dims(std::move(filt)) {}

  void set_bracket(std::size_t i, std::size_t j, std::size_t l, Rat c) {
    if (i == j) throw SpecError("bracket with i == j must be zero");
    if (i > j) { std::swap(i, j); c = -c; }
    auto& v = structure[{i, j}];
    if (v.empty()) v.assign(d, Rat(0));
    v[l] = std::move(c);
  }

  Rat bracket_c(std::size_t i, std::size_t j, std::size_t l) const {
    if (i == j) return 0;
    bool flip = i > j;
    if (flip) std::swap(i, j);
    auto it = structure.find({i, j});
    if (it == structure.end()) return 0;
    return flip ? Rat(-it->second[l]) : it->second[l];
  }

  // Lie bracket of first-kind coordinate vectors.
  AlgebraElement bracket(const AlgebraElement& x,
                         const AlgebraElement& y) const {
    check_dim(x);
    check_dim(y);
    AlgebraElement r(d, Rat(0));
    for (const auto& [ij, c] : structure) {
      auto [i, j] = ij;
      Rat coef = x[i] * y[j] - x[j] * y[i];
      if (coef == 0) continue;
      for (std::size_t l = 0; l < d; ++l)
        if (c[l] != 0) r[l] += coef * c[l];
    }
    return r;
  }

  // Filtration weight of coordinate m (0-based): the largest i with
  // X_m in log(G_i). Requires d_1 = d.
  std::size_t weight(std::size_t m) const {
    std::size_t w = 1;
    for (std::size_t i = 2; i <= degree; ++i)
      if (m >= d - filt_dims[i - 1]) w = i;
    return w;
  }
  // First coordinate index of the G_i block (block = trailing d_i coords).
  std::size_t block_start(std::size_t i) const {
    if (i <= 1) return 0;
    if (i > degree) return d;
    return d - filt_dims[i - 1];
  }

  bool in_filtration_block(const RatVec& v, std::size_t i) const {
    for (std::size_t m = 0; m < block_start(i); ++m)
      if (v[m] != 0) return false;
    return true;
  }

  // --- Baker-Campbell-Hausdorff (Dynkin series, truncated at step) ---

  // log(exp(x) exp(y)), exact: brackets of depth > step vanish.
  AlgebraElement bch(const AlgebraElement& x, const AlgebraElement& y) const {
    check_dim(x);
    check_dim(y);
    AlgebraElement r(d, Rat(0));
    for (const DynkinTerm& t : dynkin_terms()) {
      AlgebraElement v = t.ops.back() ? y : x;
      bool zero = false;
      for (std::size_t p = t.ops.size() - 1; p-- > 0;) {
        v = bracket(t.ops[p] ? y : x, v);
        bool all0 = true;
        for (const Rat& q : v)
          if (q != 0) { all0 = false; break; }
        if (all0) { zero = true; break; }
      }
      if (zero) continue;
      for (std::size_t l = 0; l < d; ++l)
        if (v[l] != 0) r[l] += t.coeff * v[l];
    }
    return r;
  }

  // --- coordinate changes ---

  // psi_exp of the element with second-kind coordinates u:
  // log(exp(u_1 X_1) ... exp(u_d X_d)).
  AlgebraElement second_to_first(const GroupElement& u) const {
    check_dim(u);
    AlgebraElement z(d, Rat(0));
    for (std::size_t i = 0; i < d; ++i) {
      if (u[i] == 0) continue;
      AlgebraElement e(d, Rat(0));
      e[i] = u[i];
      z = bch(z, e);
    }
    return z;
  }

  // Inverse change: peel exp(u_i X_i) factors off the left. Triangularity
  // of the brackets makes each leading coordinate exact at its turn.
  GroupElement first_to_second(const AlgebraElement& t) const {
    check_dim(t);
    AlgebraElement cur = t;
    GroupElement u(d, Rat(0));
    for (std::size_t i = 0; i < d; ++i) {
      u[i] = cur[i];
      if (cur[i] == 0) continue;
      AlgebraElement e(d, Rat(0));
      e[i] = -cur[i];
      cur = bch(e, cur);
    }
    for (const Rat& q : cur)
      if (q != 0) throw SpecError("coordinate peel did not terminate");
    return u;
  }

  // --- group operations (second-kind coordinates) ---

  GroupElement identity() const { return GroupElement(d, Rat(0)); }

  GroupElement multiply(const GroupElement& g, const GroupElement& h) const {
    return first_to_second(bch(second_to_first(g), second_to_first(h)));
  }

  GroupElement invert(const GroupElement& g) const {
    AlgebraElement t = second_to_first(g);
    for (Rat& q : t) q = -q;
    return first_to_second(t);
  }

  // [g, h] = g^{-1} h^{-1} g h.
  GroupElement commutator(const GroupElement& g, const GroupElement& h) const {
    return multiply(multiply(invert(g), invert(h)), multiply(g, h));
  }

  // Iterated commutator [[..[g_1, g_2], g_3].., g_t].
  GroupElement commutator(const std::vector<GroupElement>& gs) const {
    if (gs.empty()) return identity();
    GroupElement acc = gs[0];
    for (std::size_t i = 1; i < gs.size(); ++i) acc = commutator(acc, gs[i]);
    return acc;
  }

  GroupElement power(const GroupElement& g, const Int& n) const {
    if (n == 0) return identity();
    if (n < 0) return power(invert(g), Int(-n));
    GroupElement base = g, acc = identity();
    Int m = n;
    while (m > 0) {
      if (mpz_odd_p(m.get_mpz_t())) acc = multiply(acc, base);
      m >>= 1;
      if (m > 0) base = multiply(base, base);
    }
    return acc;
  }

  GroupElement basis_exp(std::size_t i, const Rat& c = 1) const {
    GroupElement g(d, Rat(0));
    g[i] = c;
    return g;
  }

  // --- fractional decomposition g = {g}[g] ---

  struct FracDecomposition {
    GroupElement fractional;  // psi in I^d
    GroupElement integral;    // in the lattice
  };

  FracDecomposition frac_decompose(const GroupElement& g,
                                   const UnitInterval& iv = {Rat(0), false})
      const {
    GroupElement frac = g;
    for (std::size_t i = 0; i < d; ++i) {
      Int b = iv.shift_into(frac[i]);
      if (b == 0) continue;
      frac = multiply(frac, basis_exp(i, Rat(b)));
    }
    GroupElement integral = multiply(invert(frac), g);
    for (const Rat& q : integral)
      if (!is_integer(q))
        throw SpecError("frac_decompose: integral part not in the lattice "
                        "(lattice closure violated)");
    return {std::move(frac), std::move(integral)};
  }

  // --- metric (certified upper bound only) ---

  // One-hop cost min(|psi(x y^-1)|_inf, |psi(y x^-1)|_inf).
  Rat hop_cost(const GroupElement& x, const GroupElement& y) const {
    Rat a = abs_max(multiply(x, invert(y)));
    Rat b = abs_max(multiply(y, invert(x)));
    return std::min(a, b);
  }

  // Upper bound on d_psi(x, y): best straight-line coordinate path of
  // depth <= path_depth. Monotone nonincreasing in path_depth by taking
  // the minimum over all depths up to the cap.
  Rat metric_upper_bound(const GroupElement& x, const GroupElement& y,
                         std::size_t path_depth) const {
    check_dim(x);
    check_dim(y);
    Rat best = hop_cost(x, y);
    for (std::size_t depth = 2; depth <= path_depth; ++depth) {
      Rat total = 0;
      GroupElement prev = x;
      for (std::size_t j = 1; j <= depth; ++j) {
        GroupElement pt(d);
        for (std::size_t m = 0; m < d; ++m)
          pt[m] = x[m] + rat(static_cast<long>(j), static_cast<long>(depth)) *
                             (y[m] - x[m]);
        total += hop_cost(prev, pt);
        if (total >= best) break;
        prev = std::move(pt);
      }
      best = std::min(best, total);
    }
    return best;
  }

  // Smallest D <= D_max with g^D in the lattice.
  std::optional<unsigned long> element_rationality(const GroupElement& g,
                                                   unsigned long d_max) const {
    GroupElement h = identity();
    for (unsigned long dd = 1; dd <= d_max; ++dd) {
      h = multiply(h, g);
      if (is_integral(h)) return dd;
    }
    return std::nullopt;
  }

  // --- lower central series and derived data ---

  // Bases (first-kind coordinates) of G = L_1 >= L_2 = [G,G] >= ... until 0.
  std::vector<RatMat> lower_central_series() const {
    std::vector<RatMat> series;
    RatMat full;
    for (std::size_t i = 0; i < d; ++i) {
      RatVec e(d, Rat(0));
      e[i] = 1;
      full.push_back(std::move(e));
    }
    series.push_back(full);
    while (true) {
      RatMat next;
      for (std::size_t i = 0; i < d; ++i) {
        RatVec e(d, Rat(0));
        e[i] = 1;
        for (const RatVec& v : series.back()) {
          RatVec b = bracket(e, v);
          bool nz = false;
          for (const Rat& q : b)
            if (q != 0) { nz = true; break; }
          if (nz) next.push_back(std::move(b));
        }
      }
      rref(next);
      while (!next.empty()) {
        bool zero = true;
        for (const Rat& q : next.back())
          if (q != 0) { zero = false; break; }
        if (!zero) break;
        next.pop_back();
      }
      if (next.empty()) break;
      series.push_back(std::move(next));
    }
    return series;
  }

  // Indices of coordinates spanning G_(s) when the last lower-central
  // term is coordinate-aligned; throws otherwise.
  std::vector<std::size_t> vertical_coords() const {
    auto series = lower_central_series();
    const RatMat& last = series.back();
    std::vector<std::size_t> idx;
    for (const RatVec& v : last) {
      std::size_t nz = d;
      for (std::size_t m = 0; m < d; ++m)
        if (v[m] != 0) {
          if (nz != d) throw SpecError("vertical subgroup not axis-aligned");
          nz = m;
        }
      if (v[nz] != 1) throw SpecError("vertical subgroup not axis-aligned");
      idx.push_back(nz);
    }
    std::sort(idx.begin(), idx.end());
    return idx;
  }

  // --- validation ---

  void validate(bool check_lattice_closure = true) const {
    if (d == 0) throw SpecError("dimension must be positive");
    if (degree == 0 || filt_dims.size() != degree)
      throw SpecError("filtration must list d_1..d_k");
    if (filt_dims[0] != d) throw SpecError("d_1 must equal dim (G_1 = G)");
    for (std::size_t i = 1; i < degree; ++i)
      if (filt_dims[i] > filt_dims[i - 1])
        throw SpecError("filtration dims must be nonincreasing");
    for (const auto& [ij, c] : structure) {
      auto [i, j] = ij;
      if (j >= d) throw SpecError("bracket index out of range");
      for (std::size_t l = 0; l < d; ++l) {
        if (c[l] == 0) continue;
        if (l <= std::max(i, j))
          throw SpecError("triangularity violated: c_{" + std::to_string(i) +
                          "," + std::to_string(j) + "," + std::to_string(l) +
                          "} nonzero");
        if (Rat(rat_height(c[l])) > complexity)
          throw SpecError("structure constant height exceeds declared M");
      }
    }
    // Filtration nesting on basis brackets.
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a + 1; b < d; ++b) {
        std::size_t target = weight(a) + weight(b);
        for (std::size_t l = 0; l < d; ++l) {
          if (bracket_c(a, b, l) == 0) continue;
          if (target > degree || weight(l) < target)
            throw SpecError("filtration nesting violated at bracket [" +
                            std::to_string(a) + "," + std::to_string(b) + "]");
        }
      }
    }
    // Jacobi, exactly, on basis triples.
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a + 1; b < d; ++b)
        for (std::size_t c = b + 1; c < d; ++c) {
          RatVec ea(d, Rat(0)), eb(d, Rat(0)), ec(d, Rat(0));
          ea[a] = 1; eb[b] = 1; ec[c] = 1;
          RatVec s = bracket(bracket(ea, eb), ec);
          RatVec t = bracket(bracket(eb, ec), ea);
          RatVec u = bracket(bracket(ec, ea), eb);
          for (std::size_t l = 0; l < d; ++l)
            if (s[l] + t[l] + u[l] != 0)
              throw SpecError("Jacobi identity fails on basis triple (" +
                              std::to_string(a) + "," + std::to_string(b) +
                              "," + std::to_string(c) + ")");
        }
    // Declared step versus the lower central series.
    std::size_t actual = lower_central_series().size();
    if (actual != step)
      throw SpecError("declared step " + std::to_string(step) +
                      " but lower central series has length " +
                      std::to_string(actual));
    if (check_lattice_closure) verify_lattice_closure();
  }

  // Lattice closure spot-check: products and inverses of integer-coordinate
  // elements stay integral (basis exponentials + 64 seeded random vectors).
  void verify_lattice_closure() const {
    std::vector<GroupElement> pts;
    for (std::size_t i = 0; i < d; ++i) pts.push_back(basis_exp(i));
    std::mt19937 rng(0x6e696c73);  // fixed seed: deterministic check
    std::uniform_int_distribution<int> coord(-3, 3);
    for (int r = 0; r < 64; ++r) {
      GroupElement g(d);
      for (std::size_t i = 0; i < d; ++i) g[i] = coord(rng);
      pts.push_back(std::move(g));
    }
    for (const GroupElement& g : pts)
      if (!is_integral(invert(g)))
        throw SpecError("lattice closure fails: non-integral inverse");
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      if (!is_integral(multiply(pts[i], pts[i + 1])))
        throw SpecError("lattice closure fails: non-integral product");
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    for (int r = 0; r < 128; ++r)
      if (!is_integral(multiply(pts[pick(rng)], pts[pick(rng)])))
        throw SpecError("lattice closure fails: non-integral product");
  }

 private:
  struct DynkinTerm {
    std::vector<bool> ops;  // false = X, true = Y, right-normed bracket
    Rat coeff;
  };

  // Dynkin's explicit series for log(exp X exp Y): sum over n >= 1 and
  // exponent blocks (r_1,s_1)..(r_n,s_n), each nonzero, of
  //   (-1)^{n-1} / (n * m * prod r_i! s_i!) * [X^{r_1} Y^{s_1} ... ]
  // with m the total letter count; letters beyond depth `step` vanish.
  const std::vector<DynkinTerm>& dynkin_terms() const {
    if (dynkin_cache_.empty()) {
      std::vector<std::pair<std::size_t, std::size_t>> blocks;
      build_dynkin(blocks, 0, dynkin_cache_);
    }
    return dynkin_cache_;
  }

  void build_dynkin(std::vector<std::pair<std::size_t, std::size_t>>& blocks,
                    std::size_t used, std::vector<DynkinTerm>& out) const {
    if (!blocks.empty()) {
      std::size_t n = blocks.size(), m = used;
      DynkinTerm t;
      Int fact = Int(static_cast<long>(n)) * Int(static_cast<long>(m));
      for (auto& [r, s] : blocks) {
        fact *= factorial(r) * factorial(s);
        for (std::size_t q = 0; q < r; ++q) t.ops.push_back(false);
        for (std::size_t q = 0; q < s; ++q) t.ops.push_back(true);
      }
      // Right-normed brackets with a repeated innermost pair vanish.
      std::size_t mm = t.ops.size();
      if (!(mm >= 2 && t.ops[mm - 1] == t.ops[mm - 2])) {
        t.coeff = Rat((n % 2 == 1) ? 1 : -1, 1) / Rat(fact);
        out.push_back(std::move(t));
      }
    }
    if (used >= step) return;
    for (std::size_t r = 0; r + used <= step; ++r) {
      for (std::size_t s = 0; r + s + used <= step; ++s) {
        if (r + s == 0) continue;
        blocks.push_back({r, s});
        build_dynkin(blocks, used + r + s, out);
        blocks.pop_back();
      }
    }
  }

  void check_dim(const RatVec& v) const {
    if (v.size() != d)
      throw SpecError("dimension mismatch: expected " + std::to_string(d) +
                      " coordinates, got " + std::to_string(v.size()));
  }

  mutable std::vector<DynkinTerm> dynkin_cache_;
};

// Convenience builders used across tests and the CLI.
// Abelian R^d. With degree > 1 the filtration is G_i = G for i <= degree,
// so polynomial sequences of that degree are admissible.
inline GroupSpec abelian_spec(std::size_t d, std::size_t degree = 1) {
  std::vector<std::size_t> filt(degree, d);
  return GroupSpec(d, degree, 1, std::move(filt));
}

// 4-dimensional step-3 filiform group: [X1,X2] = X3, [X1,X3] = 2 X4.
// The factor 2 normalizes the deepest basis vector so that the integer
// points close under multiplication (verified at load).
inline GroupSpec filiform_spec() {
  GroupSpec spec(4, 3, 3, {4, 2, 1}, Rat(2));
  spec.set_bracket(0, 1, 2, Rat(1));
  spec.set_bracket(0, 2, 3, Rat(2));
  return spec;
}

// Heisenberg group: [X1, X2] = X3, degree-2 filtration G_2 = <X3>.
inline GroupSpec heisenberg_spec() {
  GroupSpec spec(3, 2, 2, {3, 1});
  spec.set_bracket(0, 1, 2, Rat(1));
  return spec;
}

}  // namespace nilsonde
