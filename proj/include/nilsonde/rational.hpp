#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nilsonde {

// Exact rational scalar. mpq_class keeps the canonical form (positive
// denominator, reduced) for us; everything downstream relies on that.
using Rat = mpq_class;
using Int = mpz_class;

using RatVec = std::vector<Rat>;
using IntVec = std::vector<Int>;

// mpq_class(a, b) does not canonicalize; this helper does.
inline Rat rat(long num, long den = 1) {
  Rat q(num, den);
  q.canonicalize();
  return q;
}

inline Rat rat(const Int& num, const Int& den) {
  Rat q(num, den);
  q.canonicalize();
  return q;
}

inline bool is_integer(const Rat& q) { return q.get_den() == 1; }

inline Int rat_floor(const Rat& q) {
  Int f;
  mpz_fdiv_q(f.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return f;
}

inline Int rat_ceil(const Rat& q) {
  Int c;
  mpz_cdiv_q(c.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return c;
}

// Nearest integer with the signed-fraction convention {r} in (-1/2, 1/2]:
// r - round(r) in (-1/2, 1/2], i.e. ties round down.
inline Int rat_round_half_down(const Rat& q) {
  return rat_ceil(q - Rat(1, 2));
}

// Signed fractional part {r} in (-1/2, 1/2].
inline Rat signed_frac(const Rat& q) { return q - Rat(rat_round_half_down(q)); }

// Torus norm ||x||_{R/Z}: distance to the nearest integer, in [0, 1/2].
inline Rat torus_norm(const Rat& q) { return abs(signed_frac(q)); }

inline Rat torus_norm(const RatVec& v) {
  Rat m = 0;
  for (const Rat& x : v) m = std::max(m, torus_norm(x));
  return m;
}

// Height of a rational p/q in lowest terms: max(|p|, q).
inline Int rat_height(const Rat& q) {
  Int n = abs(Int(q.get_num()));
  Int d = q.get_den();
  return n > d ? n : d;
}

inline double to_double(const Rat& q) { return q.get_d(); }

// Parses "p", "p/q" or a decimal like "0.25"; throws std::invalid_argument.
inline Rat parse_rat(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    std::size_t frac_len = s.size() - dot - 1;
    Rat num;
    if (num.get_num().set_str(digits, 10) != 0)
      throw std::invalid_argument("bad rational literal: " + s);
    Int den = 1;
    for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
    return rat(num.get_num(), den);
  }
  Rat q;
  if (q.set_str(s, 10) != 0)
    throw std::invalid_argument("bad rational literal: " + s);
  q.canonicalize();
  if (q.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  return q;
}

// Exact "p/q" rendering (plain "p" when the denominator is 1).
inline std::string rat_str(const Rat& q) {
  if (is_integer(q)) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

inline Rat abs_max(const RatVec& v) {
  Rat m = 0;
  for (const Rat& x : v) m = std::max(m, Rat(abs(x)));
  return m;
}

inline Rat dot(const RatVec& a, const RatVec& b) {
  Rat s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Rat dot(const IntVec& a, const RatVec& b) {
  Rat s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += Rat(a[i]) * b[i];
  return s;
}

inline Int dot(const IntVec& a, const IntVec& b) {
  Int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Int binomial(const Int& n, unsigned long k) {
  Int b;
  mpz_bin_ui(b.get_mpz_t(), n.get_mpz_t(), k);
  return b;
}

inline Int factorial(unsigned long n) {
  Int f;
  mpz_fac_ui(f.get_mpz_t(), n);
  return f;
}

}  // namespace nilsonde
