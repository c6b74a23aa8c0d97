#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nilsonde/diophantine.hpp"
#include "test_util.hpp"

using namespace nilsonde;
using nilsonde::testutil::RatGen;

namespace {

TorusPolynomial poly1(std::initializer_list<std::pair<unsigned, Rat>> cs) {
  TorusPolynomial p;
  p.nparams = 1;
  for (const auto& [deg, v] : cs) p.set_coeff(MultiIndex{deg}, v);
  return p;
}

// p(n + a) via the Vandermonde identity on binomial coefficients.
TorusPolynomial shift_poly(const TorusPolynomial& p, const IntVec& a) {
  TorusPolynomial out;
  out.nparams = p.nparams;
  for (const auto& [m, v] : p.coeffs) {
    std::vector<std::pair<MultiIndex, Rat>> terms{
        {MultiIndex(p.nparams, 0), v}};
    for (std::size_t var = 0; var < p.nparams; ++var) {
      std::vector<std::pair<MultiIndex, Rat>> next;
      for (unsigned t = 0; t <= m[var]; ++t) {
        Rat c = Rat(binomial(a[var], m[var] - t));
        if (c == 0) continue;
        for (const auto& [e, w] : terms) {
          MultiIndex e2 = e;
          e2[var] += t;
          next.emplace_back(e2, w * c);
        }
      }
      terms = std::move(next);
    }
    for (const auto& [e, w] : terms) out.set_coeff(e, out.coeff(e) + w);
  }
  return out;
}

}  // namespace

TEST_CASE("torus_norm worked values") {
  CHECK(torus_norm(rat(1, 2)) == rat(1, 2));
  CHECK(torus_norm(rat(5, 4)) == rat(1, 4));
  CHECK(torus_norm(rat(-1, 10)) == rat(1, 10));
}

TEST_CASE("continued-fraction denominators") {
  auto d = cf_denominators(rat(2584, 4181));  // Fibonacci ratio
  CHECK(!d.empty());
  CHECK(d.back() == 4181);
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] >= d[i - 1]);
  CHECK(cf_denominators(rat(2, 7)) == std::vector<Int>{Int(1), Int(3), Int(7)});
}

TEST_CASE("scan_hits and density") {
  HitSet h = scan_hits(IntVec{Int(10)},
                       [](const IntVec& n) { return n[0] % 2 == 0; });
  CHECK(h.members.size() == 5);
  CHECK(h.density() == rat(1, 2));
}

TEST_CASE("vinogradov_solve worked examples") {
  // p(n) = n/2 on even n <= 1000, eps = 0 -> q = 2 with zero bound
  TorusPolynomial p = poly1({{1, rat(1, 2)}});
  HitSet even = scan_hits(IntVec{Int(1000)},
                          [](const IntVec& n) { return n[0] % 2 == 0; });
  VinogradovResult r = vinogradov_solve(p, even, Rat(0), Int(100));
  REQUIRE(r.ok);
  CHECK(r.q == 2);
  CHECK(r.smooth == 0);
  CHECK(r.constant == 0);
  // brute-force minimality over q <= 100
  for (Int q = 1; q < 2; ++q)
    CHECK(smoothness_norm(p.scaled(q), even.box) > 0);

  // globally tiny slope -> q = 1
  TorusPolynomial tiny = poly1({{1, rat(1, 200000)}});
  HitSet all = scan_hits(IntVec{Int(1000)},
                         [](const IntVec&) { return true; });
  VinogradovResult r1 = vinogradov_solve(tiny, all, rat(1, 100), Int(100));
  REQUIRE(r1.ok);
  CHECK(r1.q == 1);

  // p(n1, n2) = n1 n2 / 5 on {n1 = 0 mod 5} -> q = 5, zero bound
  TorusPolynomial q2;
  q2.nparams = 2;
  q2.set_coeff(MultiIndex{1, 1}, rat(1, 5));
  HitSet fives = scan_hits(IntVec{Int(50), Int(50)}, [](const IntVec& n) {
    return n[0] % 5 == 0;
  });
  VinogradovResult r2 = vinogradov_solve(q2, fives, Rat(0), Int(100));
  REQUIRE(r2.ok);
  CHECK(r2.q == 5);
  CHECK(r2.smooth == 0);

  // budget too small -> explicit failure with best candidate
  TorusPolynomial sevenths = poly1({{1, rat(1, 7)}});
  HitSet mult7 = scan_hits(IntVec{Int(700)},
                           [](const IntVec& n) { return n[0] % 7 == 0; });
  VinogradovResult rf = vinogradov_solve(sevenths, mult7, Rat(0), Int(5));
  CHECK_FALSE(rf.ok);
  CHECK(rf.q >= 1);

  // hypothesis violation is a precondition error
  CHECK_THROWS_AS(vinogradov_solve(p, all, Rat(0), Int(10)),
                  std::invalid_argument);
}

TEST_CASE("vinogradov_solve matches the brute-force oracle") {
  RatGen gen(606);
  int evaluated = 0;
  for (int rep = 0; rep < 200; ++rep) {
    TorusPolynomial p;
    p.nparams = 1;
    unsigned deg = 1 + static_cast<unsigned>(gen.integer(0, 2));
    for (unsigned j = 0; j <= deg; ++j)
      p.set_coeff(MultiIndex{j}, gen.rational(6, 12));
    HitSet hits = scan_hits(IntVec{Int(60)}, [&](const IntVec& n) {
      return torus_norm(p.eval(n)) == 0;
    });
    if (hits.members.empty()) continue;
    ++evaluated;
    VinogradovResult r = vinogradov_solve(p, hits, Rat(0), Int(1000));
    // oracle: minimal q <= 1000 with exactly zero smooth + constant norms
    Int oracle = 0;
    for (Int q = 1; q <= 1000; ++q) {
      if (smoothness_norm(p.scaled(q), hits.box) == 0 &&
          torus_norm(Rat(q) * p.coeff(MultiIndex{0})) == 0) {
        oracle = q;
        break;
      }
    }
    if (oracle != 0) {
      REQUIRE(r.ok);
      CHECK(r.q == oracle);
    } else {
      CHECK_FALSE(r.ok);
    }
  }
  CHECK(evaluated >= 50);
}

TEST_CASE("monomial_bounds worked examples and round trip") {
  IntVec N{Int(100)};
  // degree 1: binomial = monomial, q = 1
  MonomialBounds b1 = monomial_bounds(poly1({{1, rat(3, 7)}}), N);
  CHECK(b1.q == 1);
  CHECK(b1.beta.coeff(MultiIndex{1}) == rat(3, 7));
  CHECK(b1.ok);

  // C(n,2) = (n^2 - n)/2 -> q = 2
  MonomialBounds b2 = monomial_bounds(poly1({{2, Rat(1)}}), N);
  CHECK(b2.q == 2);
  CHECK(b2.beta.coeff(MultiIndex{2}) == rat(1, 2));
  CHECK(b2.beta.coeff(MultiIndex{1}) == rat(-1, 2));
  CHECK(b2.ok);

  // degree 3 -> q = 6
  MonomialBounds b3 =
      monomial_bounds(poly1({{3, rat(1, 5)}, {2, rat(1, 3)}}), N);
  CHECK(b3.q == 6);
  CHECK(b3.ok);

  // round trip binomial -> monomial -> binomial is the identity
  RatGen gen(707);
  for (int rep = 0; rep < 30; ++rep) {
    TorusPolynomial p;
    p.nparams = 2;
    for (const MultiIndex& i : multi_indices(2, 3))
      p.set_coeff(i, gen.rational(5, 7));
    TorusPolynomial back = to_binomial(to_monomial(p));
    CHECK(back.coeffs == p.coeffs);
  }
}

TEST_CASE("extrapolate worked examples") {
  IntVec N{Int(100)};
  DioConfig c3;
  c3.exponent = 3;

  // identity substitution: q = 1 and equality
  TorusPolynomial p = poly1({{2, rat(2, 3)}, {1, rat(1, 7)}});
  ExtrapolateResult r0 =
      extrapolate(p, IntVec{Int(0)}, IntVec{Int(1)}, Int(1), N, c3);
  REQUIRE(r0.ok);
  CHECK(r0.q == 1);
  CHECK(r0.p.coeffs == p.coeffs);
  CHECK(r0.achieved == smoothness_norm(p, N));

  // n -> 2n with alpha near 1/2: q = 2 with ||2p|| = ||p~||
  Rat alpha = rat(501, 1000);
  TorusPolynomial pt = poly1({{1, Rat(2) * alpha}});
  ExtrapolateResult r1 =
      extrapolate(pt, IntVec{Int(0)}, IntVec{Int(2)}, Int(2), N, c3);
  REQUIRE(r1.ok);
  CHECK(r1.q == 2);
  CHECK(r1.p.coeff(MultiIndex{1}) == alpha);
  CHECK(r1.achieved == smoothness_norm(pt, N));

  // shift-only a = 3, b = 1, degree 2: inequality certified with C = 3
  RatGen gen(808);
  for (int rep = 0; rep < 10; ++rep) {
    TorusPolynomial q = poly1({{2, gen.rational(4, 9)},
                               {1, gen.rational(4, 9)},
                               {0, gen.rational(4, 9)}});
    TorusPolynomial qt = shift_poly(q, IntVec{Int(3)});
    ExtrapolateResult r =
        extrapolate(qt, IntVec{Int(3)}, IntVec{Int(1)}, Int(4), N, c3);
    REQUIRE(r.ok);
    CHECK(r.p.coeffs == q.coeffs);  // exact affine inversion
    CHECK(smoothness_norm(r.p.scaled(r.q), N) <= r.allowed);
  }

  CHECK_THROWS_AS(
      extrapolate(p, IntVec{Int(0)}, IntVec{Int(0)}, Int(1), N, c3),
      std::invalid_argument);
}

TEST_CASE("poly_separation: trivial and P-only examples") {
  TorusPolynomial zero;
  zero.nparams = 1;
  HitSet all = scan_hits(IntVec{Int(12), Int(12)},
                         [](const IntVec&) { return true; });
  SeparationResult t =
      poly_separation(zero, zero, nullptr, true, all, rat(1, 2));
  REQUIRE(t.ok);
  CHECK(t.q == 1);
  CHECK(t.budget == 0);
  CHECK(t.hyp_eps == 0);

  // P(n) = n^2/3 = (2 C(n,2) + C(n,1))/3 on multiples of 3
  TorusPolynomial P = poly1({{2, rat(2, 3)}, {1, rat(1, 3)}});
  HitSet hits = scan_hits(IntVec{Int(30), Int(30)}, [](const IntVec& m) {
    return m[0] % 3 == 0;
  });
  SeparationResult s =
      poly_separation(P, zero, nullptr, true, hits, rat(1, 4));
  REQUIRE(s.ok);
  CHECK(s.hyp_eps == 0);
  CHECK((s.q == 1 || s.q == 2 || s.q == 3 || s.q == 6));
  CHECK(s.achieved_p == 0);
  CHECK(smoothness_norm(P.scaled(s.q), IntVec{Int(30)}) == 0);
}

TEST_CASE("poly_separation: planted sigma and preconditions") {
  // Q(n) = -(1/5) C(n,2), sigma(h) = {h/5}: the linearized form is an
  // integer multiple of n on every h, so q = 1 certifies conclusion (a).
  TorusPolynomial zero;
  zero.nparams = 1;
  TorusPolynomial Q = poly1({{2, rat(-1, 5)}});
  SigmaMap sigma = [](const IntVec& h) {
    return RatVec{signed_frac(Rat(h[0]) / 5)};
  };
  HitSet hits = scan_hits(IntVec{Int(20), Int(20)}, [](const IntVec& m) {
    long r = mpz_class(m[1] % 5).get_si();
    return r == 0 || r == 1;
  });
  SeparationResult s =
      poly_separation(zero, Q, sigma, false, hits, rat(1, 3));
  REQUIRE(s.ok);
  CHECK(s.q == 1);
  CHECK(s.hyp_eps == 0);
  CHECK(s.fraction_a == 1);

  // Q(e_i) != 0 is a precondition error
  TorusPolynomial bad = poly1({{1, rat(1, 3)}});
  CHECK_THROWS_AS(
      poly_separation(zero, bad, nullptr, true, hits, rat(1, 3)),
      std::invalid_argument);

  // density shortfall
  HitSet sparse = scan_hits(IntVec{Int(20), Int(20)}, [](const IntVec& m) {
    return m[0] == 1 && m[1] == 1;
  });
  CHECK_THROWS_AS(
      poly_separation(zero, Q, sigma, false, sparse, rat(1, 3)),
      std::invalid_argument);
}
