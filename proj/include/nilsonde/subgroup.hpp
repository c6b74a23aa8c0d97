#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nilsonde/group.hpp"
#include "nilsonde/linalg.hpp"
#include "nilsonde/rational.hpp"

namespace nilsonde {

/**
 * Horizontal character eta(g) = coeffs . psi(g): a homomorphism G -> R
 * that is integral on the lattice and annihilates [G, G].
 */
struct HorizontalCharacter {
  IntVec coeffs;

  Int size() const {
    Int m = 0;
    for (const Int& c : coeffs) m = std::max(m, Int(abs(c)));
    return m;
  }
  Rat apply(const GroupElement& g) const { return dot(coeffs, g); }
  bool is_zero() const {
    for (const Int& c : coeffs)
      if (c != 0) return false;
    return true;
  }
};

// Structural character check: integer vector orthogonal to the commutator
// subalgebra is automatically a homomorphism with eta(Gamma) in Z.
inline bool is_character(const GroupSpec& spec, const IntVec& coeffs) {
  auto series = spec.lower_central_series();
  if (series.size() < 2) return true;
  for (const RatVec& v : series[1])
    if (dot(coeffs, v) != 0) return false;
  return true;
}

/**
 * Rational subgroup, carried as a basis of its Lie algebra in first-kind
 * coordinates of the parent.
 */
struct SubgroupSpec {
  const GroupSpec* parent = nullptr;
  RatMat basis;     // first-kind coordinate vectors, linearly independent
  Rat rationality;  // declared height bound Q

  std::size_t dim() const { return basis.size(); }

  bool contains(const AlgebraElement& v) const {
    RatMat rows = basis;
    rows.push_back(v);
    return rank(std::move(rows)) == basis.size();
  }

  void validate() const {
    if (!parent) throw SpecError("subgroup without parent spec");
    if (rank(basis) != basis.size())
      throw SpecError("subgroup basis is linearly dependent");
    for (const RatVec& v : basis)
      for (const Rat& q : v)
        if (Rat(rat_height(q)) > rationality)
          throw SpecError("subgroup basis entry exceeds rationality bound");
    for (std::size_t i = 0; i < basis.size(); ++i)
      for (std::size_t j = i + 1; j < basis.size(); ++j)
        if (!contains(parent->bracket(basis[i], basis[j])))
          throw SpecError("subgroup not closed under bracket");
  }

  // Nilpotency class of the subalgebra.
  std::size_t step() const {
    RatMat cur = basis;
    std::size_t s = 0;
    while (!cur.empty()) {
      ++s;
      RatMat next;
      for (const RatVec& a : basis)
        for (const RatVec& b : cur) {
          RatVec c = parent->bracket(a, b);
          bool nz = false;
          for (const Rat& q : c)
            if (q != 0) { nz = true; break; }
          if (nz) next.push_back(std::move(c));
        }
      rref(next);
      while (!next.empty()) {
        bool zero = true;
        for (const Rat& q : next.back())
          if (q != 0) { zero = false; break; }
        if (!zero) break;
        next.pop_back();
      }
      cur = std::move(next);
    }
    return s;
  }
};

// --- annihilator characters (Cramer-style adjugate construction) ---

// Given r independent integer vectors, produce d - r independent integer
// vectors orthogonal to all of them: extend to a basis by unit vectors,
// take the adjugate columns for the added rows, divide by content.
inline std::vector<HorizontalCharacter> annihilator_characters(
    const std::vector<IntVec>& vectors, std::size_t d) {
  std::size_t r = vectors.size();
  IntMat rows = vectors;
  if (rank(rows) != r)
    throw SpecError("annihilator_characters: input vectors dependent");
  std::vector<std::size_t> added;
  for (std::size_t i = 0; i < d && rows.size() < d; ++i) {
    IntVec e(d, Int(0));
    e[i] = 1;
    IntMat trial = rows;
    trial.push_back(e);
    if (rank(trial) == rows.size() + 1) {
      rows.push_back(std::move(e));
      added.push_back(i);
    }
  }
  if (rows.size() != d)
    throw SpecError("annihilator_characters: could not complete basis");
  IntMat adj = adjugate(rows);
  std::vector<HorizontalCharacter> out;
  for (std::size_t j = r; j < d; ++j) {
    IntVec col(d);
    for (std::size_t i = 0; i < d; ++i) col[i] = adj[i][j];
    divide_by_content(col);
    out.push_back({std::move(col)});
  }
  // Defining property, checked exhaustively.
  for (const auto& eta : out)
    for (const IntVec& w : vectors)
      if (dot(w, eta.coeffs) != 0)
        throw SpecError("annihilator_characters: orthogonality lost");
  return out;
}

// Characters vanishing on the given elements modulo a subgroup containing
// [G, G] (the subgroup's directions are annihilated too).
inline std::vector<HorizontalCharacter> subgroup_annihilators(
    const GroupSpec& spec, const std::vector<GroupElement>& elements,
    const SubgroupSpec& modulo) {
  auto series = spec.lower_central_series();
  if (series.size() >= 2)
    for (const RatVec& v : series[1])
      if (!modulo.contains(v))
        throw SpecError("subgroup_annihilators: modulo must contain [G,G]");
  RatMat rows;
  for (const GroupElement& g : elements) rows.push_back(g);
  for (const RatVec& v : modulo.basis) rows.push_back(v);
  if (rows.empty()) rows.push_back(RatVec(spec.d, Rat(0)));
  IntMat int_rows;
  for (const RatVec& row : rows) int_rows.push_back(clear_denominators(row).first);
  std::vector<HorizontalCharacter> out;
  for (IntVec& k : integer_kernel(int_rows)) {
    divide_by_content(k);
    out.push_back({std::move(k)});
  }
  for (const auto& eta : out) {
    if (!is_character(spec, eta.coeffs))
      throw SpecError("subgroup_annihilators: output is not a character");
    for (const GroupElement& g : elements)
      if (eta.apply(g) != 0)
        throw SpecError("subgroup_annihilators: does not annihilate input");
  }
  return out;
}

// --- adapted Mal'cev basis construction ---

struct AdaptedBasis {
  GroupSpec spec;        // rebuilt group with the adapted basis
  RatMat basis;          // rows: new basis vectors, first-kind parent coords
  RatMat basis_inverse;  // solves parent-first-kind -> new-first-kind
  const GroupSpec* parent = nullptr;

  AlgebraElement to_sub_algebra(const AlgebraElement& parent_first) const {
    AlgebraElement y(spec.d, Rat(0));
    for (std::size_t i = 0; i < spec.d; ++i)
      for (std::size_t j = 0; j < parent->d; ++j)
        y[i] += basis_inverse[i][j] * parent_first[j];
    return y;
  }
  AlgebraElement to_parent_algebra(const AlgebraElement& sub_first) const {
    AlgebraElement t(parent->d, Rat(0));
    for (std::size_t i = 0; i < spec.d; ++i)
      for (std::size_t j = 0; j < parent->d; ++j)
        t[j] += sub_first[i] * basis[i][j];
    return t;
  }
  GroupElement to_sub(const GroupElement& g) const {
    return spec.first_to_second(to_sub_algebra(parent->second_to_first(g)));
  }
  GroupElement to_parent(const GroupElement& g) const {
    return parent->first_to_second(to_parent_algebra(spec.second_to_first(g)));
  }
};

namespace detail {

// Builds a GroupSpec over the given (triangular, chain-adapted) basis rows
// by expressing brackets in that basis. Throws if the result is not
// triangular. filt_dims/degree/step are the caller's responsibility.
inline GroupSpec spec_from_basis(const GroupSpec& parent, const RatMat& basis,
                                 std::size_t degree,
                                 std::vector<std::size_t> filt_dims,
                                 std::size_t step_hint) {
  std::size_t n = basis.size();
  RatMat cols(parent.d, RatVec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < parent.d; ++j) cols[j][i] = basis[i][j];
  GroupSpec sub(n, degree, step_hint, std::move(filt_dims), parent.complexity);
  Rat max_height = 1;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      RatVec br = parent.bracket(basis[a], basis[b]);
      auto coords = solve_linear(cols, br);
      if (!coords) throw SpecError("basis not closed under bracket");
      for (std::size_t l = 0; l < n; ++l) {
        if ((*coords)[l] == 0) continue;
        if (l <= std::max(a, b))
          throw SpecError("adapted basis not triangular under bracket");
        sub.set_bracket(a, b, l, (*coords)[l]);
        max_height = std::max(max_height, Rat(rat_height((*coords)[l])));
      }
    }
  }
  sub.complexity = std::max(parent.complexity, max_height);
  return sub;
}

}  // namespace detail

/**
 * Adapted Mal'cev basis: given a weak (rational) basis whose span is the
 * top of the chain, a nested chain of rational subgroups with
 * [chain_i, chain_1] <= chain_{i+1}, and generators of the lattice, build
 * a basis X' with log(chain_i) spanned by trailing vectors and
 * psi_{X'}(lattice) = Z^{d0}. The lattice adaptation runs a polycyclic
 * Hermite-style reduction on the generators: on elements whose leading
 * coordinates vanish, the next coordinate is additive, so Euclid applies.
 */
inline AdaptedBasis construct_adapted_basis(
    const GroupSpec& parent, const RatMat& weak_basis,
    const std::vector<SubgroupSpec>& chain,
    const std::vector<GroupElement>& lattice_gens) {
  if (chain.empty()) throw SpecError("empty subgroup chain");
  // Chain nesting and bracket closure.
  for (std::size_t i = 0; i < chain.size(); ++i) {
    chain[i].validate();
    if (i + 1 < chain.size()) {
      if (chain[i + 1].dim() > chain[i].dim())
        throw SpecError("chain not nested (dims increase)");
      for (const RatVec& v : chain[i + 1].basis)
        if (!chain[i].contains(v)) throw SpecError("chain not nested");
      for (const RatVec& a : chain[i].basis)
        for (const RatVec& b : chain[0].basis)
          if (!chain[i + 1].contains(parent.bracket(a, b)))
            throw SpecError("chain violates [G_i, G_1] <= G_{i+1}");
    }
  }
  std::size_t d0 = chain[0].dim();
  // Step A: chain-adapt a basis Y (deepest chain members trailing).
  RatMat y;  // built from deepest up, then reversed
  RatMat span_so_far;
  for (std::size_t level = chain.size(); level-- > 0;) {
    // Iterate in reverse so the caller's within-level order survives the
    // final reversal.
    for (auto it = chain[level].basis.rbegin(); it != chain[level].basis.rend();
         ++it) {
      const RatVec& cand = *it;
      RatMat trial = span_so_far;
      trial.push_back(cand);
      if (rank(trial) > span_so_far.size()) {
        span_so_far.push_back(cand);
        y.push_back(cand);
      }
    }
  }
  // Admit weak-basis vectors if the chain tops out below the weak span.
  for (const RatVec& cand : weak_basis) {
    if (y.size() == d0) break;
    RatMat trial = span_so_far;
    trial.push_back(cand);
    if (rank(trial) > span_so_far.size()) {
      span_so_far.push_back(cand);
      y.push_back(cand);
    }
  }
  if (y.size() != d0) throw SpecError("weak basis does not span the chain top");
  std::reverse(y.begin(), y.end());
  // Filtration dims for the new spec read off the chain.
  std::vector<std::size_t> filt;
  filt.push_back(d0);
  for (std::size_t i = 1; i < chain.size(); ++i) filt.push_back(chain[i].dim());
  std::size_t max_step = std::min<std::size_t>(chain[0].step(), parent.step);
  GroupSpec spec_y =
      detail::spec_from_basis(parent, y, filt.size(), filt, max_step);

  AdaptedBasis adapted_y{std::move(spec_y), y, {}, &parent};
  {
    adapted_y.basis_inverse.assign(d0, RatVec(parent.d, Rat(0)));
    // Left inverse via normal equations: (Y Y^T)^{-1} Y, exact.
    RatMat gram(d0, RatVec(d0, Rat(0)));
    for (std::size_t a = 0; a < d0; ++a)
      for (std::size_t b = 0; b < d0; ++b)
        for (std::size_t j = 0; j < parent.d; ++j)
          gram[a][b] += y[a][j] * y[b][j];
    auto gram_inv = invert_matrix(gram);
    if (!gram_inv) throw SpecError("degenerate adapted basis");
    for (std::size_t a = 0; a < d0; ++a)
      for (std::size_t j = 0; j < parent.d; ++j) {
        Rat s = 0;
        for (std::size_t b = 0; b < d0; ++b) s += (*gram_inv)[a][b] * y[b][j];
        adapted_y.basis_inverse[a][j] = s;
      }
  }

  // Step B: polycyclic Hermite reduction of the lattice generators in the
  // Y coordinates.
  std::vector<GroupElement> work;
  for (const GroupElement& g : lattice_gens) {
    GroupElement gy = adapted_y.to_sub(g);
    if (gy != adapted_y.spec.identity()) work.push_back(std::move(gy));
  }
  const GroupSpec& sy = adapted_y.spec;
  auto leading = [&](const GroupElement& g) -> std::size_t {
    for (std::size_t j = 0; j < d0; ++j)
      if (g[j] != 0) return j;
    return d0;
  };
  std::vector<GroupElement> pivots(d0);
  std::vector<bool> have(d0, false);
  // Include pairwise commutators of generators up front; the generated
  // group contains them and reduction needs them to terminate correctly.
  {
    std::size_t n0 = work.size();
    for (std::size_t a = 0; a < n0; ++a)
      for (std::size_t b = a + 1; b < n0; ++b) {
        GroupElement c = sy.commutator(work[a], work[b]);
        if (c != sy.identity()) work.push_back(std::move(c));
      }
  }
  for (int round = 0; round < 64 && !work.empty(); ++round) {
    std::vector<GroupElement> next;
    for (GroupElement g : work) {
      while (true) {
        std::size_t j = leading(g);
        if (j == d0) break;  // reduced to identity
        if (!have[j]) {
          if (g[j] < 0) g = sy.invert(g);
          pivots[j] = g;
          have[j] = true;
          g = sy.identity();
          break;
        }
        // Euclid on coordinate j against the pivot.
        Rat a = g[j], b = pivots[j][j];
        Rat q_rat = a / b;
        if (is_integer(q_rat)) {
          g = sy.multiply(sy.power(pivots[j], Int(-q_rat.get_num())), g);
          // leading coordinate j now zero; continue deeper
        } else {
          // Replace the pivot by the gcd combination.
          Int q = rat_round_half_down(q_rat);
          GroupElement r = sy.multiply(sy.power(pivots[j], Int(-q)), g);
          // r has smaller |coordinate j|; swap roles and iterate.
          GroupElement old = pivots[j];
          have[j] = false;
          next.push_back(old);
          g = std::move(r);
        }
      }
    }
    work = std::move(next);
  }
  if (!work.empty())
    throw SpecError("lattice generator reduction did not terminate");
  for (std::size_t j = 0; j < d0; ++j)
    if (!have[j])
      throw SpecError("lattice generators do not span rank " +
                      std::to_string(d0) + " (missing pivot at " +
                      std::to_string(j) + ")");
  // Closure: products/commutators of pivots must reduce integrally.
  auto reduces_integrally = [&](GroupElement g) {
    for (std::size_t j = 0; j < d0; ++j) {
      if (g[j] == 0) continue;
      Rat q = g[j] / pivots[j][j];
      if (!is_integer(q)) return false;
      g = sy.multiply(sy.power(pivots[j], Int(-q.get_num())), g);
    }
    return g == sy.identity();
  };
  for (std::size_t a = 0; a < d0; ++a)
    for (std::size_t b = 0; b < d0; ++b) {
      if (a != b && !reduces_integrally(sy.multiply(pivots[a], pivots[b])))
        throw SpecError("pivot products escape the generated lattice");
      if (a < b && !reduces_integrally(sy.commutator(pivots[a], pivots[b])))
        throw SpecError("pivot commutators escape the generated lattice");
    }

  // Step C: new basis vectors X'_j = log(pivot_j), back in parent coords.
  RatMat xp;
  for (std::size_t j = 0; j < d0; ++j)
    xp.push_back(
        adapted_y.to_parent_algebra(sy.second_to_first(pivots[j])));
  GroupSpec final_spec =
      detail::spec_from_basis(parent, xp, filt.size(), filt, max_step);
  final_spec.validate();

  AdaptedBasis out{std::move(final_spec), xp, {}, &parent};
  {
    RatMat gram(d0, RatVec(d0, Rat(0)));
    for (std::size_t a = 0; a < d0; ++a)
      for (std::size_t b = 0; b < d0; ++b)
        for (std::size_t j = 0; j < parent.d; ++j)
          gram[a][b] += xp[a][j] * xp[b][j];
    auto gram_inv = invert_matrix(gram);
    if (!gram_inv) throw SpecError("degenerate adapted basis");
    out.basis_inverse.assign(d0, RatVec(parent.d, Rat(0)));
    for (std::size_t a = 0; a < d0; ++a)
      for (std::size_t j = 0; j < parent.d; ++j) {
        Rat s = 0;
        for (std::size_t b = 0; b < d0; ++b) s += (*gram_inv)[a][b] * xp[b][j];
        out.basis_inverse[a][j] = s;
      }
  }
  // Double inclusion on generators: every generator maps into Z^{d0}.
  for (const GroupElement& g : lattice_gens)
    if (!is_integral(out.to_sub(g)))
      throw SpecError("adapted basis: generator not integral in new coords");
  return out;
}

// --- square group G_square = G x_{G_2} G ---

/**
 * Pairs (p, q) with p q^{-1} in G_2; first component carries the offset,
 * matching eta(g', g) = eta_1(g) + eta_2(g' g^{-1}). Realized inside the
 * product group G x G with basis blocks A (first copy) then B (second),
 * so psi_{GxG}(p, q) = (psi(p), psi(q)).
 */
struct SquareGroupSpec {
  const GroupSpec* base = nullptr;
  GroupSpec product;     // ambient G x G (bracket machinery only)
  AdaptedBasis adapted;  // adapted basis of G_square inside the product
  bool has_quotient = false;
  GroupSpec quotient;              // G_square / G_k^triangle when requested
  std::size_t quotient_dropped = 0;  // trailing coords dropped

  GroupElement pair_to_product(const GroupElement& p,
                               const GroupElement& q) const {
    GroupElement g(2 * base->d);
    for (std::size_t i = 0; i < base->d; ++i) {
      g[i] = p[i];
      g[base->d + i] = q[i];
    }
    return g;
  }

  bool member(const GroupElement& p, const GroupElement& q) const {
    GroupElement off = base->multiply(p, base->invert(q));
    return base->in_filtration_block(off, 2);
  }

  // psi-coordinates of (p, q) in the adapted basis of G_square.
  GroupElement embed(const GroupElement& p, const GroupElement& q) const {
    if (!member(p, q))
      throw SpecError("pair is not in G_square (offset leaves G_2)");
    return adapted.to_sub(pair_to_product(p, q));
  }

  // Inverse of embed: recover the pair.
  std::pair<GroupElement, GroupElement> project(const GroupElement& g) const {
    GroupElement prod = adapted.to_parent(g);
    GroupElement p(base->d), q(base->d);
    for (std::size_t i = 0; i < base->d; ++i) {
      p[i] = prod[i];
      q[i] = prod[base->d + i];
    }
    return {std::move(p), std::move(q)};
  }

  // Projection to the central quotient (drop the trailing block).
  GroupElement to_quotient(const GroupElement& g) const {
    if (!has_quotient) throw SpecError("quotient not built");
    return GroupElement(g.begin(), g.begin() + quotient.d);
  }
};

inline GroupSpec product_spec(const GroupSpec& spec) {
  std::size_t d = spec.d;
  GroupSpec prod(2 * d, spec.degree, spec.step,
                 std::vector<std::size_t>(spec.degree, 2 * d),
                 spec.complexity);
  for (const auto& [ij, c] : spec.structure) {
    auto [i, j] = ij;
    for (std::size_t l = 0; l < d; ++l) {
      if (c[l] == 0) continue;
      prod.set_bracket(i, j, l, c[l]);
      prod.set_bracket(d + i, d + j, d + l, c[l]);
    }
  }
  return prod;  // bracket machinery only; filtration list is not adapted
}

inline SquareGroupSpec square_group(const GroupSpec& spec,
                                    bool quotient_diag_center) {
  std::size_t d = spec.d, k = spec.degree;
  GroupSpec prod = product_spec(spec);
  auto diag_vec = [&](std::size_t j) {
    RatVec v(2 * d, Rat(0));
    v[j] = 1;
    v[d + j] = 1;
    return v;
  };
  auto first_vec = [&](std::size_t j) {
    RatVec v(2 * d, Rat(0));
    v[j] = 1;
    return v;
  };
  // Chain (G_square)_i = G_i x_{G_{i+1}} G_i, i = 1..k.
  std::vector<SubgroupSpec> chain;
  for (std::size_t i = 1; i <= k; ++i) {
    SubgroupSpec sub;
    sub.parent = &prod;
    sub.rationality = 1;
    for (std::size_t j = spec.block_start(i); j < d; ++j)
      sub.basis.push_back(diag_vec(j));
    for (std::size_t j = spec.block_start(i + 1); j < d; ++j)
      sub.basis.push_back(first_vec(j));
    chain.push_back(std::move(sub));
  }
  // Lattice generators: diagonal basis exponentials + G_2 offsets.
  std::vector<GroupElement> gens;
  for (std::size_t j = 0; j < d; ++j) {
    GroupElement g(2 * d, Rat(0));
    g[j] = 1;
    g[d + j] = 1;
    gens.push_back(std::move(g));
  }
  for (std::size_t j = spec.block_start(2); j < d; ++j) {
    GroupElement g(2 * d, Rat(0));
    g[j] = 1;
    gens.push_back(std::move(g));
  }
  SquareGroupSpec sq;
  sq.base = &spec;
  sq.adapted =
      construct_adapted_basis(prod, chain[0].basis, chain, gens);
  sq.product = std::move(prod);
  sq.adapted.parent = &sq.product;
  if (quotient_diag_center) {
    // The deepest chain member is exactly G_k^triangle; its coordinates
    // are the trailing block of the adapted basis and are central.
    std::size_t dk = spec.d - spec.block_start(k);
    const GroupSpec& s2 = sq.adapted.spec;
    std::size_t nd = s2.d - dk;
    std::size_t qdeg = 0;
    std::vector<std::size_t> qfilt;
    for (std::size_t i = 0; i < s2.degree; ++i) {
      std::size_t di = s2.filt_dims[i] > dk ? s2.filt_dims[i] - dk : 0;
      if (i == 0 || di > 0) {
        qfilt.push_back(i == 0 ? nd : di);
        qdeg = i + 1;
      }
    }
    qfilt.resize(qdeg);
    GroupSpec q(nd, qdeg, 1, qfilt, s2.complexity);
    for (const auto& [ij, c] : s2.structure) {
      auto [i, j] = ij;
      if (i >= nd || j >= nd) continue;
      for (std::size_t l = 0; l < nd; ++l)
        if (c[l] != 0) q.set_bracket(i, j, l, c[l]);
    }
    // Recompute the quotient's step from its own structure constants.
    q.step = q.lower_central_series().size();
    q.validate();
    sq.quotient = std::move(q);
    sq.has_quotient = true;
    sq.quotient_dropped = dk;
  }
  return sq;
}

// eta on G_square split as eta(p, q) = eta_1(q) + eta_2(p q^{-1}).
struct SplitCharacter {
  HorizontalCharacter eta1;  // on G
  HorizontalCharacter eta2;  // on G, supported on the G_2 block
};

inline SplitCharacter char_split_square(const SquareGroupSpec& sq,
                                        const HorizontalCharacter& eta) {
  const GroupSpec& g = *sq.base;
  SplitCharacter out;
  out.eta1.coeffs.assign(g.d, Int(0));
  out.eta2.coeffs.assign(g.d, Int(0));
  for (std::size_t j = 0; j < g.d; ++j) {
    GroupElement e = g.basis_exp(j);
    Rat v1 = eta.apply(sq.embed(e, e));
    if (!is_integer(v1))
      throw SpecError("char_split_square: eta_1 not integral");
    out.eta1.coeffs[j] = v1.get_num();
    if (j >= g.block_start(2)) {
      Rat v2 = eta.apply(sq.embed(e, g.identity()));
      if (!is_integer(v2))
        throw SpecError("char_split_square: eta_2 not integral");
      out.eta2.coeffs[j] = v2.get_num();
    }
  }
  return out;
}

// --- lower-step annihilators ---

// Characters vanishing on a subgroup of step <= s-1 whose joint kernel has
// vanishing s-fold commutators (certified on a kernel basis).
inline std::vector<HorizontalCharacter> lower_step_annihilators(
    const GroupSpec& spec, const SubgroupSpec& sub) {
  if (sub.step() >= spec.step)
    throw SpecError("lower_step_annihilators: subgroup step not below s");
  RatMat rows = sub.basis;
  auto series = spec.lower_central_series();
  if (series.size() >= 2)
    for (const RatVec& v : series[1]) rows.push_back(v);
  if (rows.empty()) rows.push_back(RatVec(spec.d, Rat(0)));
  IntMat int_rows;
  for (const RatVec& row : rows) int_rows.push_back(clear_denominators(row).first);
  std::vector<HorizontalCharacter> out;
  for (IntVec& k : integer_kernel(int_rows)) {
    divide_by_content(k);
    out.push_back({std::move(k)});
  }
  // Certificate: all s-fold commutators of a joint-kernel basis vanish.
  RatMat ker_rows;
  for (const auto& eta : out) {
    RatVec r(spec.d);
    for (std::size_t i = 0; i < spec.d; ++i) r[i] = Rat(eta.coeffs[i]);
    ker_rows.push_back(std::move(r));
  }
  RatMat kernel = ker_rows.empty()
                      ? RatMat{}
                      : nullspace(ker_rows);
  if (ker_rows.empty()) {
    for (std::size_t i = 0; i < spec.d; ++i) {
      RatVec e(spec.d, Rat(0));
      e[i] = 1;
      kernel.push_back(std::move(e));
    }
  }
  std::vector<GroupElement> kb;
  for (const RatVec& v : kernel) kb.push_back(spec.first_to_second(v));
  std::size_t m = kb.size();
  std::vector<std::size_t> idx(spec.step, 0);
  if (m > 0) {
    while (true) {
      std::vector<GroupElement> tuple;
      for (std::size_t t = 0; t < spec.step; ++t) tuple.push_back(kb[idx[t]]);
      if (spec.commutator(tuple) != spec.identity())
        throw SpecError("lower_step_annihilators: kernel commutator nonzero");
      std::size_t t = 0;
      while (t < spec.step && ++idx[t] == m) idx[t++] = 0;
      if (t == spec.step) break;
    }
  }
  return out;
}

}  // namespace nilsonde
