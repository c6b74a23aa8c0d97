#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "nilsonde/rational.hpp"

namespace nilsonde {

using RatMat = std::vector<RatVec>;  // row-major
using IntMat = std::vector<IntVec>;  // row-major unless stated otherwise

inline RatMat to_rat_mat(const IntMat& a) {
  RatMat r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (const Int& x : a[i]) r[i].push_back(Rat(x));
  return r;
}

// In-place reduced row echelon form; returns pivot column per pivot row.
inline std::vector<std::size_t> rref(RatMat& m) {
  std::vector<std::size_t> pivots;
  if (m.empty()) return pivots;
  std::size_t rows = m.size(), cols = m[0].size(), r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t p = r;
    while (p < rows && m[p][c] == 0) ++p;
    if (p == rows) continue;
    std::swap(m[p], m[r]);
    Rat inv = 1 / m[r][c];
    for (std::size_t j = c; j < cols; ++j) m[r][j] *= inv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || m[i][c] == 0) continue;
      Rat f = m[i][c];
      for (std::size_t j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

inline std::size_t rank(RatMat m) { return rref(m).size(); }

inline std::size_t rank(const IntMat& m) { return rank(to_rat_mat(m)); }

// One solution of A x = b, if any.
inline std::optional<RatVec> solve_linear(const RatMat& a, const RatVec& b) {
  if (a.empty()) return RatVec{};
  std::size_t rows = a.size(), cols = a[0].size();
  RatMat aug(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    aug[i] = a[i];
    aug[i].push_back(b[i]);
  }
  auto pivots = rref(aug);
  for (std::size_t i = 0; i < rows; ++i) {
    bool zero = true;
    for (std::size_t j = 0; j < cols; ++j)
      if (aug[i][j] != 0) { zero = false; break; }
    if (zero && aug[i][cols] != 0) return std::nullopt;
  }
  RatVec x(cols, Rat(0));
  for (std::size_t i = 0; i < pivots.size(); ++i)
    if (pivots[i] < cols) x[pivots[i]] = aug[i][cols];
  return x;
}

// Basis of {x : A x = 0} over the rationals.
inline RatMat nullspace(RatMat a) {
  if (a.empty()) return {};
  std::size_t cols = a[0].size();
  auto pivots = rref(a);
  std::vector<bool> is_pivot(cols, false);
  for (auto p : pivots) is_pivot[p] = true;
  RatMat basis;
  for (std::size_t f = 0; f < cols; ++f) {
    if (is_pivot[f]) continue;
    RatVec v(cols, Rat(0));
    v[f] = 1;
    for (std::size_t i = 0; i < pivots.size(); ++i) v[pivots[i]] = -a[i][f];
    basis.push_back(std::move(v));
  }
  return basis;
}

inline std::optional<RatMat> invert_matrix(const RatMat& a) {
  std::size_t n = a.size();
  RatMat aug(n);
  for (std::size_t i = 0; i < n; ++i) {
    aug[i] = a[i];
    for (std::size_t j = 0; j < n; ++j) aug[i].push_back(i == j ? 1 : 0);
  }
  if (rref(aug).size() != n) return std::nullopt;
  RatMat inv(n, RatVec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv[i][j] = aug[i][n + j];
  return inv;
}

inline Rat determinant(RatMat a) {
  std::size_t n = a.size();
  Rat det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && a[p][c] == 0) ++p;
    if (p == n) return Rat(0);
    if (p != c) { std::swap(a[p], a[c]); det = -det; }
    det *= a[c][c];
    Rat inv = 1 / a[c][c];
    for (std::size_t i = c + 1; i < n; ++i) {
      if (a[i][c] == 0) continue;
      Rat f = a[i][c] * inv;
      for (std::size_t j = c; j < n; ++j) a[i][j] -= f * a[c][j];
    }
  }
  return det;
}

inline Int determinant(const IntMat& a) {
  Rat d = determinant(to_rat_mat(a));
  return d.get_num();  // integer matrix => integer determinant
}

// Adjugate of a square integer matrix: adj(A)[i][j] = (-1)^{i+j} det(M_ji).
inline IntMat adjugate(const IntMat& a) {
  std::size_t n = a.size();
  IntMat adj(n, IntVec(n));
  if (n == 1) { adj[0][0] = 1; return adj; }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      IntMat minor;
      minor.reserve(n - 1);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == j) continue;  // minor of entry (j, i) for the transpose
        IntVec row;
        row.reserve(n - 1);
        for (std::size_t c = 0; c < n; ++c)
          if (c != i) row.push_back(a[r][c]);
        minor.push_back(std::move(row));
      }
      Int d = determinant(minor);
      adj[i][j] = ((i + j) % 2 == 0) ? d : Int(-d);
    }
  }
  return adj;
}

inline Int vec_content(const IntVec& v) {
  Int g = 0;
  for (const Int& x : v) g = gcd(g, x);
  return g;
}

inline void divide_by_content(IntVec& v) {
  Int g = vec_content(v);
  if (g > 1)
    for (Int& x : v) x /= g;
}

// Column-style Hermite normal form of the lattice spanned by `cols`
// (each element of `cols` is a generator vector). Returns a basis of the
// same lattice in column echelon form; optionally tracks the unimodular
// transform and reports which input combinations map to zero (kernel).
struct HnfResult {
  std::vector<IntVec> basis;   // lattice basis (echelon columns)
  std::vector<IntVec> kernel;  // integer kernel of the generator map
};

inline HnfResult hnf_columns(std::vector<IntVec> cols) {
  std::size_t n = cols.empty() ? 0 : cols[0].size();
  std::size_t m = cols.size();
  // Transform tracker: U starts as identity over the generators.
  std::vector<IntVec> u(m, IntVec(m, Int(0)));
  for (std::size_t i = 0; i < m; ++i) u[i][i] = 1;
  std::size_t done = 0;  // number of settled columns
  for (std::size_t row = 0; row < n && done < m; ++row) {
    // Euclid across columns done..m-1 on entry `row`.
    while (true) {
      std::size_t best = m;
      for (std::size_t c = done; c < m; ++c)
        if (cols[c][row] != 0 &&
            (best == m || abs(cols[c][row]) < abs(cols[best][row])))
          best = c;
      if (best == m) break;
      std::swap(cols[done], cols[best]);
      std::swap(u[done], u[best]);
      bool cleared = true;
      for (std::size_t c = done + 1; c < m; ++c) {
        if (cols[c][row] == 0) continue;
        Int q = cols[c][row] / cols[done][row];  // truncated division
        for (std::size_t i = 0; i < n; ++i) cols[c][i] -= q * cols[done][i];
        for (std::size_t i = 0; i < m; ++i) u[c][i] -= q * u[done][i];
        if (cols[c][row] != 0) cleared = false;
      }
      if (cleared) break;
    }
    if (cols[done][row] == 0) continue;
    if (cols[done][row] < 0) {
      for (std::size_t i = 0; i < n; ++i) cols[done][i] = -cols[done][i];
      for (std::size_t i = 0; i < m; ++i) u[done][i] = -u[done][i];
    }
    // Reduce settled columns against the new pivot.
    for (std::size_t c = 0; c < done; ++c) {
      Int q;
      mpz_fdiv_q(q.get_mpz_t(), cols[c][row].get_mpz_t(),
                 cols[done][row].get_mpz_t());
      if (q != 0) {
        for (std::size_t i = 0; i < n; ++i) cols[c][i] -= q * cols[done][i];
        for (std::size_t i = 0; i < m; ++i) u[c][i] -= q * u[done][i];
      }
    }
    ++done;
  }
  HnfResult res;
  for (std::size_t c = 0; c < done; ++c) res.basis.push_back(cols[c]);
  for (std::size_t c = done; c < m; ++c) {
    bool zero = true;
    for (std::size_t i = 0; i < n; ++i)
      if (cols[c][i] != 0) { zero = false; break; }
    if (zero) res.kernel.push_back(u[c]);
  }
  return res;
}

// Basis of the integer solutions of A x = 0 (A with integer entries).
inline std::vector<IntVec> integer_kernel(const IntMat& a) {
  std::size_t ncols = a.empty() ? 0 : a[0].size();
  std::vector<IntVec> cols(ncols);
  for (std::size_t j = 0; j < ncols; ++j) {
    cols[j].resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) cols[j][i] = a[i][j];
  }
  return hnf_columns(std::move(cols)).kernel;
}

// Do two integer generator sets span the same lattice?
inline bool same_lattice(const std::vector<IntVec>& a,
                         const std::vector<IntVec>& b) {
  auto ha = hnf_columns(a).basis;
  auto hb = hnf_columns(b).basis;
  return ha == hb;
}

// Clear denominators: returns (integer vector, common denominator).
inline std::pair<IntVec, Int> clear_denominators(const RatVec& v) {
  Int l = 1;
  for (const Rat& q : v) l = lcm(l, Int(q.get_den()));
  IntVec w;
  w.reserve(v.size());
  for (const Rat& q : v) w.push_back(Int(q.get_num()) * (l / q.get_den()));
  return {w, l};
}

}  // namespace nilsonde
