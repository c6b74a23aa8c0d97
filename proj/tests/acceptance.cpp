// Acceptance harness: one pass/fail line per criterion, exit 0 iff all pass.
#include <chrono>
#include <complex>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nilsonde/diophantine.hpp"
#include "nilsonde/equidist.hpp"
#include "nilsonde/group.hpp"
#include "nilsonde/lattice.hpp"
#include "nilsonde/polyseq.hpp"
#include "nilsonde/primes.hpp"
#include "test_util.hpp"

using namespace nilsonde;
using testutil::RatGen;

namespace {

int failures = 0;

struct Checker {
  bool ok = true;
  std::string why;
  std::vector<std::string> log;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
};

void criterion(int idx, const char* name, double limit_s,
               const std::function<void(Checker&)>& fn) {
  Checker c;
  auto t0 = std::chrono::steady_clock::now();
  try {
    fn(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                  .count();
  if (limit_s > 0 && dt > limit_s && c.ok)
    c.require(false, "time limit exceeded");
  std::printf("[%s] criterion %2d: %s (%.2f s)%s%s\n", c.ok ? "PASS" : "FAIL",
              idx, name, dt, c.ok ? "" : " -- ", c.ok ? "" : c.why.c_str());
  for (const std::string& l : c.log) std::printf("         %s\n", l.c_str());
  if (!c.ok) ++failures;
}

GroupElement random_element(RatGen& gen, std::size_t d) {
  RatVec v(d);
  for (auto& q : v) q = gen.rational(9, 9);
  return v;
}

IntVec iv(std::vector<long> v) {
  IntVec out;
  for (long x : v) out.emplace_back(x);
  return out;
}

PolySeq linear_seq(const GroupSpec& spec, const GroupElement& slope) {
  return taylor_from(spec, 1, spec.degree, [&](const IntVec& n) {
    GroupElement g(spec.d, Rat(0));
    for (std::size_t i = 0; i < spec.d; ++i) g[i] = slope[i] * Rat(n[0]);
    return g;
  });
}

bool in_rational_span(const IntMat& rows, const IntVec& v) {
  RatMat m;
  for (const IntVec& r : rows) {
    RatVec rr;
    for (const Int& x : r) rr.emplace_back(x);
    m.push_back(std::move(rr));
  }
  std::size_t base = rank(m);
  RatVec vv;
  for (const Int& x : v) vv.emplace_back(x);
  m.push_back(std::move(vv));
  return rank(m) == base;
}

// Planted witness instance: alpha_i = c_i / q, hypothesis exact on q | h.
struct Planted {
  RatVec a, alpha;
  long n;
  Rat delta, k;
  IntVec relation;
};

Planted plant_instance(RatGen& gen, std::size_t d, long q, long n) {
  Planted p;
  p.n = n;
  p.alpha.resize(d);
  for (auto& x : p.alpha) x = rat(gen.integer(1, q - 1), q);
  Rat m0 = 0;
  while (m0 == 0) {
    p.a.clear();
    for (std::size_t i = 0; i < d; ++i)
      p.a.push_back(rat(gen.integer(-10, 10), 97));
    m0 = rat(1, 2);
    for (long h = 1; h < q; ++h) {
      RatVec pat(d);
      for (std::size_t i = 0; i < d; ++i) pat[i] = signed_frac(p.alpha[i] * h);
      m0 = std::min(m0, torus_norm(dot(p.a, pat)));
    }
  }
  p.k = Rat(n) * std::min(Rat(m0 / 2), rat(1, 200));
  p.delta = rat(1, 2 * q);
  p.relation = IntVec(d, Int(0));
  p.relation[0] = q;
  return p;
}

void run_criteria() {
  criterion(1, "group laws and vanishing deep commutators", 10, [](Checker& c) {
    RatGen gen(101);
    for (const GroupSpec& spec : {heisenberg_spec(), filiform_spec()}) {
      for (int rep = 0; rep < 500; ++rep) {
        GroupElement g = random_element(gen, spec.d);
        GroupElement h = random_element(gen, spec.d);
        GroupElement k = random_element(gen, spec.d);
        c.require(spec.multiply(spec.multiply(g, h), k) ==
                      spec.multiply(g, spec.multiply(h, k)),
                  "associativity");
        c.require(spec.multiply(g, spec.identity()) == g, "right identity");
        c.require(spec.multiply(spec.identity(), g) == g, "left identity");
        c.require(spec.multiply(g, spec.invert(g)) == spec.identity(),
                  "inverse");
        std::vector<GroupElement> deep(spec.step + 1);
        for (auto& e : deep) e = random_element(gen, spec.d);
        c.require(spec.commutator(deep) == spec.identity(),
                  "(s+1)-fold commutator");
        if (!c.ok) return;
      }
    }
  });

  criterion(2, "frac_decompose membership and uniqueness", 5, [](Checker& c) {
    RatGen gen(202);
    UnitInterval half{rat(-1, 2), false};
    for (const GroupSpec& spec : {heisenberg_spec(), filiform_spec()}) {
      for (int rep = 0; rep < 500; ++rep) {
        GroupElement g = random_element(gen, spec.d);
        auto fd = spec.frac_decompose(g, half);
        for (const Rat& x : fd.fractional)
          c.require(half.contains(x), "fractional coordinate outside I");
        c.require(is_integral(fd.integral), "integral part not in the lattice");
        c.require(spec.multiply(fd.fractional, fd.integral) == g,
                  "decomposition identity");
        if (!c.ok) return;
      }
    }
    // Uniqueness by exhaustion over a small lattice box.
    GroupSpec heis = heisenberg_spec();
    for (int rep = 0; rep < 10; ++rep) {
      GroupElement g = random_element(gen, 3);
      GroupElement z0 = heis.frac_decompose(g, half).integral;
      int count = 0;
      for (long z1 = -3; z1 <= 3; ++z1)
        for (long z2 = -3; z2 <= 3; ++z2)
          for (long z3 = -3; z3 <= 3; ++z3) {
            GroupElement z{z0[0] + z1, z0[1] + z2, z0[2] + z3};
            GroupElement fr = heis.multiply(g, heis.invert(z));
            bool inside = true;
            for (const Rat& x : fr)
              if (!half.contains(x)) inside = false;
            if (inside) ++count;
          }
      c.require(count == 1, "fractional part not unique in the box");
    }
  });

  criterion(3, "vinogradov matches the brute-force minimal q", 30,
            [](Checker& c) {
    RatGen gen(303);
    for (int rep = 0; rep < 200; ++rep) {
      long q = gen.integer(2, 60);
      unsigned deg = 1 + static_cast<unsigned>(rep % 3);
      TorusPolynomial p;
      p.nparams = 1;
      for (unsigned j = 1; j <= deg; ++j)
        p.set_coeff(MultiIndex{j}, rat(gen.integer(1, q - 1), q));
      HitSet hits = scan_hits(iv({1000}), [&](const IntVec& n) {
        return torus_norm(p.eval(n)) == 0;
      });
      c.require(!hits.members.empty(), "planted instance has no hits");
      VinogradovResult r = vinogradov_solve(p, hits, Rat(0), Int(1000));
      c.require(r.ok, "solver failed on a planted instance");
      c.require(r.smooth <= r.threshold && r.constant <= r.threshold,
                "certified bound violated");
      Int oracle = 0;
      for (Int qq = 1; qq <= 1000; ++qq)
        if (smoothness_norm(p.scaled(qq), hits.box) == 0 &&
            torus_norm(Rat(qq) * p.coeff(MultiIndex{0})) == 0) {
          oracle = qq;
          break;
        }
      c.require(oracle != 0, "oracle search failed");
      c.require(r.q <= 10 * oracle, "solver q misses factor 10 of minimal");
      if (!c.ok) return;
    }
  });

  criterion(4, "refined witnesses on 100 planted instances", 120,
            [](Checker& c) {
    RatGen gen(404);
    const long qs[] = {2, 3, 5, 7, 11};
    int recovered = 0;
    for (int rep = 0; rep < 100; ++rep) {
      std::size_t d = 1 + static_cast<std::size_t>(rep % 5);
      long q = qs[(rep / 5) % 5];
      long n = 1000 + 91 * (rep % 99);
      Planted p = plant_instance(gen, d, q, n);
      WitnessResult res =
          refined_witness_single(p.a, p.alpha, rat(0), p.n, p.delta, p.k);
      if (!res.has_witness()) {
        c.require(res.exit == WitnessExit::SmallN ||
                      res.exit == WitnessExit::LargeK,
                  "failure that is not a budget exit");
        continue;
      }
      const BracketWitness& w = res.witness;
      // No false certificates: every value exact and within budget.
      for (std::size_t i = 0; i < w.eta_list.size(); ++i) {
        c.require(torus_norm(dot(w.eta_list[i], p.alpha)) == w.eta_vals[i][0],
                  "eta value mismatch");
        c.require(w.eta_vals[i][0] <= w.allowed[0], "eta out of budget");
      }
      for (std::size_t i = 0; i < w.w_list.size(); ++i) {
        c.require(abs(dot(w.w_list[i], p.a)) == w.w_vals[i][0],
                  "w value mismatch");
        c.require(w.w_vals[i][0] <= w.allowed[0], "w out of budget");
        for (const IntVec& e : w.eta_list)
          c.require(dot(w.w_list[i], e) == 0, "orthogonality violated");
      }
      RatMat ind;
      for (const IntVec& e : w.eta_list) {
        RatVec r;
        for (const Int& x : e) r.emplace_back(x);
        ind.push_back(std::move(r));
      }
      c.require(rank(ind) == w.eta_list.size(), "eta family dependent");
      if (in_rational_span(w.eta_list, p.relation)) ++recovered;
      if (!c.ok) return;
    }
    c.require(recovered >= 95, "planted relation recovered in " +
                                   std::to_string(recovered) + "/100 < 95");
  });

  criterion(5, "abelian equidistribution verdicts", 0, [](Checker& c) {
    GroupSpec line = abelian_spec(1);
    NilFunctionSpec f;
    f.spec = &line;
    f.xi = iv({1});
    PolySeq conv = linear_seq(line, {rat(408, 985)});
    EquidistVerdict small =
        main_driver(f, conv, iv({10000}), rat(1, 100));
    c.require(small.kind == EquidistVerdict::Kind::SumSmall,
              "convergent orbit not SumSmall");
    c.require(small.modulus <= 0.01, "convergent sum above 0.01");

    PolySeq eighth = linear_seq(line, {rat(1, 8)});
    EquidistVerdict obs = main_driver(f, eighth, iv({4}), rat(1, 10));
    c.require(obs.kind == EquidistVerdict::Kind::Obstruction,
              "1/8 orbit not an obstruction");
    c.require(!obs.characters.empty() && obs.characters[0].size() <= 8,
              "character size above 8");
    c.require(!obs.smoothness.empty() && obs.smoothness[0] == 0,
              "character smoothness nonzero");
    c.require(obs.certificate, "obstruction without certificate");
  });

  criterion(6, "Heisenberg desk-scale driver", 600, [](Checker& c) {
    GroupSpec heis = heisenberg_spec();
    NilFunctionSpec f;
    f.spec = &heis;
    f.xi = iv({1});
    f.rho = rat(1, 20);
    PolySeq conv = linear_seq(heis, {rat(408, 985), rat(571, 780), Rat(0)});
    EquidistVerdict small = main_driver(f, conv, iv({10000}), rat(1, 20));
    c.require(small.kind == EquidistVerdict::Kind::SumSmall,
              "convergent orbit not SumSmall");
    c.require(small.modulus < 0.05, "convergent sum above 0.05");

    NilFunctionSpec plain = f;
    plain.rho = 0;
    PolySeq brk = linear_seq(heis, {rat(408, 985), rat(1, 5), Rat(0)});
    EquidistVerdict obs = main_driver(plain, brk, iv({2000}), rat(1, 10));
    c.require(obs.kind == EquidistVerdict::Kind::Obstruction,
              "beta = 1/5 orbit not an obstruction");
    ConclusionReport rep = verify_conclusion(heis, plain.xi, obs.characters,
                                             brk, iv({2000}), obs.budget);
    c.require(rep.ok, "verify_conclusion rejects the certificate");
    for (std::size_t i = 0; i < obs.characters.size(); ++i) {
      c.require(Rat(obs.characters[i].size()) < obs.budget,
                "size budget ratio not below 1");
      c.require(obs.smoothness[i] < obs.budget,
                "smoothness budget ratio not below 1");
    }
  });

  criterion(7, "factorization exactness for driver obstructions", 0,
            [](Checker& c) {
    GroupSpec line = abelian_spec(1);
    GroupSpec heis = heisenberg_spec();
    NilFunctionSpec fl, fh;
    fl.spec = &line;
    fl.xi = iv({1});
    fh.spec = &heis;
    fh.xi = iv({1});
    struct Case {
      const GroupSpec* spec;
      NilFunctionSpec* f;
      PolySeq g;
      IntVec nvec;
      Rat delta;
    };
    std::vector<Case> cases;
    cases.push_back({&line, &fl, linear_seq(line, {rat(1, 8)}), iv({4}),
                     rat(1, 10)});
    cases.push_back({&heis, &fh,
                     linear_seq(heis, {rat(408, 985), rat(1, 5), Rat(0)}),
                     iv({2000}), rat(1, 10)});
    for (Case& cs : cases) {
      EquidistVerdict ver = main_driver(*cs.f, cs.g, cs.nvec, cs.delta);
      c.require(ver.kind == EquidistVerdict::Kind::Obstruction,
                "expected an obstruction");
      if (ver.kind != EquidistVerdict::Kind::Obstruction) return;
      FactorizationTriple tr =
          factorize_by_characters(cs.g, ver.characters, cs.nvec, ver.budget);
      for (long n = 0; n <= 8; ++n) {
        GroupElement lhs = cs.spec->multiply(
            cs.spec->multiply(tr.eps.eval(n), tr.g1.eval(n)),
            tr.gamma.eval(n));
        c.require(lhs == cs.g.eval(n), "reconstruction off the grid");
      }
      auto period = rational_period(tr.gamma, 100000);
      c.require(period.has_value(), "gamma has no period within the cap");
      if (period)
        c.require(Rat(static_cast<long>(*period)) <= ver.budget,
                  "gamma period above budget");
      c.require(tr.smooth_k <= ver.budget, "eps smoothness above budget");
      // The smoothness constant is certified through the metric bound.
      for (long n = 0; n <= 4; ++n) {
        Rat hop = cs.spec->metric_upper_bound(tr.eps.eval(n + 1),
                                              tr.eps.eval(n), 2);
        c.require(Rat(cs.nvec[0]) * hop <= tr.smooth_k,
                  "metric bound exceeds the recorded constant");
      }
    }
  });

  criterion(8, "primes harness at desk scale", 60, [](Checker& c) {
    AffineSystem id1;
    id1.d = 1;
    id1.forms = {{iv({1}), 0}};
    Box b1;
    b1.lo = iv({0});
    b1.hi = iv({1000000});
    CountCompare pnt = count_compare(id1, b1, 100);
    c.require(pnt.relative_error < 0.02, "PNT check misses 2%");

    AffineSystem ap;
    ap.d = 2;
    ap.forms = {{iv({1, 0}), 0}, {iv({1, 1}), 0}, {iv({1, 2}), 0}};
    c.require(local_density_p(ap, 3).value == rat(3, 4),
              "beta_3 is not exactly 3/4");
    Box b2;
    b2.lo = iv({0, 0});
    b2.hi = iv({9999, 9999});
    CountCompare three = count_compare(ap, b2, 100);
    c.require(three.relative_error < 0.05, "3-AP count misses 5%");
  });

  criterion(9, "Gowers norm evaluators", 0, [](Checker& c) {
    std::vector<std::complex<double>> one(64, {1.0, 0.0});
    for (unsigned k : {2u, 3u}) {
      c.require(std::abs(gowers_norm(one, k) - 1.0) < 1e-12,
                "||1||_{U^k} != 1 (recursive)");
      c.require(std::abs(gowers_norm_direct(one, k) - 1.0) < 1e-12,
                "||1||_{U^k} != 1 (direct)");
    }
    std::mt19937 rng(909);
    std::uniform_real_distribution<double> un(0.0, 1.0);
    std::vector<std::complex<double>> f(256);
    for (auto& z : f) {
      double t = 2.0 * M_PI * un(rng);
      z = {std::cos(t), std::sin(t)};
    }
    for (unsigned k : {2u, 3u})
      c.require(std::abs(gowers_norm(f, k) - gowers_norm_direct(f, k)) < 1e-9,
                "evaluators disagree at N = 256");
  });

  criterion(10, "escalating-frequency torus orbit regression", 0,
            [](Checker& c) {
    Rat a = rat(2584, 4181);
    RatVec alpha{a, 10 * a, 100 * a};
    AbelianRatnerResult r = abelian_ratner(alpha, 10000, 2, 10);
    for (std::size_t i = 0; i < alpha.size(); ++i)
      c.require(r.eps[i] + r.alpha_prime[i] + r.gamma[i] == alpha[i],
                "reconstruction not exact");
    c.require(r.rounds == 3, "expected exactly three descents");
    Int rationality = 1;
    for (const Rat& q : r.gamma) rationality = lcm(rationality, Int(q.get_den()));
    for (std::size_t t = 0; t < r.obstructions.size(); ++t) {
      Int h = 0;
      for (const Int& x : r.obstructions[t]) h = std::max(h, Int(abs(x)));
      std::string line = "round " + std::to_string(t + 1) + ": obstruction (";
      for (std::size_t j = 0; j < r.obstructions[t].size(); ++j)
        line += (j ? ", " : "") + r.obstructions[t][j].get_str();
      line += "), height " + h.get_str() + ", subgroup rationality " +
              rationality.get_str();
      c.log.push_back(line);
    }
    Rat inv_delta = Rat(1) / r.delta;
    for (const Rat& q : r.gamma)
      c.require(is_integer(inv_delta * q), "gamma escapes 1/delta rationality");
    c.require(Rat(rationality) <= inv_delta, "rationality above 1/delta");
  });
}

}  // namespace

int main() {
  run_criteria();
  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return 1;
}
