#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "nilsonde/io.hpp"

using namespace nilsonde;
namespace fs = std::filesystem;

namespace {

std::string data_path(const std::string& name) {
  return std::string(NILSONDE_DATA_DIR) + "/" + name;
}

std::string write_temp(const std::string& name, const std::string& body) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << body;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

IntVec iv(std::vector<long> v) {
  IntVec out;
  for (long x : v) out.emplace_back(x);
  return out;
}

}  // namespace

TEST_CASE("group file round trip") {
  GroupSpec spec = parse_group_file(data_path("heisenberg.grp"));
  CHECK(spec.d == 3);
  CHECK(spec.degree == 2);
  CHECK(spec.step == 2);
  CHECK(spec.filt_dims == std::vector<std::size_t>{3, 1});
  CHECK(spec.bracket_c(0, 1, 2) == Rat(1));
  GroupSpec back = group_from_json(group_to_json(spec));
  CHECK(back.d == spec.d);
  CHECK(back.filt_dims == spec.filt_dims);
  CHECK(back.bracket_c(0, 1, 2) == Rat(1));
  GroupElement a{rat(1, 2), rat(1, 3), Rat(0)};
  GroupElement b{rat(2, 5), rat(1, 7), rat(1, 4)};
  CHECK(spec.multiply(a, b) == back.multiply(a, b));
}

TEST_CASE("parse errors carry file and line") {
  std::string bad = write_temp("nil_io_bad.grp",
                               "dim 3\ndegree 2\nstep 2\n"
                               "filtration 3 1\nbracket 1 2 9 1\n");
  CHECK_THROWS_WITH_AS(parse_group_file(bad),
                       doctest::Contains(":5: bracket index out of range"),
                       ParseError);
  std::string junk = write_temp("nil_io_junk.grp", "dim 3\nwobble 1\n");
  CHECK_THROWS_WITH_AS(parse_group_file(junk),
                       doctest::Contains(":2: unknown directive"), ParseError);
  CHECK_THROWS_AS(parse_group_file("/nonexistent/file.grp"), ParseError);
  std::string badrat = write_temp("nil_io_badrat.grp",
                                  "dim 1\ndegree 1\nstep 1\nfiltration x\n");
  CHECK_THROWS_WITH_AS(parse_group_file(badrat), doctest::Contains(":4:"),
                       ParseError);
}

TEST_CASE("sequence file parses Taylor coefficients") {
  GroupSpec spec = parse_group_file(data_path("heisenberg.grp"));
  PolySeq g = parse_sequence_file(data_path("seq_bracket.pol"), spec);
  CHECK(g.nparams == 1);
  GroupElement c = g.coeff(MultiIndex{1});
  CHECK(c == GroupElement{rat(408, 985), rat(1, 5), Rat(0)});
  PolySeq back = sequence_from_json(sequence_to_json(g), spec);
  CHECK(back.eval(7) == g.eval(7));

  std::string wrong = write_temp("nil_io_wrong.pol",
                                 "params 1\ncoeff 1 1/2\n");
  CHECK_THROWS_WITH_AS(parse_sequence_file(wrong, spec),
                       doctest::Contains(":2:"), ParseError);
  // A degree-2 coefficient outside G_2 violates the filtration.
  std::string escape = write_temp("nil_io_escape.pol",
                                  "params 1\ncoeff 2 1/2 0 0\n");
  CHECK_THROWS_AS(parse_sequence_file(escape, spec), ParseError);
}

TEST_CASE("witness and primes files parse") {
  WitnessInput w = parse_witness_file(data_path("witness_planted.wit"));
  CHECK(w.a == RatVec{rat(1, 3)});
  CHECK(w.alpha == RatVec{rat(1, 5)});
  CHECK(w.n == 1000);
  CHECK(w.delta == rat(1, 5));
  CHECK(w.k_param == Rat(1));
  std::string missing = write_temp("nil_io_missing.wit", "a: 1/3\nN: 10\n");
  CHECK_THROWS_AS(parse_witness_file(missing), ParseError);

  PrimesInput p = parse_primes_file(data_path("threeap.pri"));
  CHECK(p.sys.d == 2);
  CHECK(p.sys.forms.size() == 3);
  CHECK(p.box.hi == iv({499, 499}));
  std::string shape = write_temp("nil_io_shape.pri",
                                 "dim 2\nform 1 0\nbox 0 9 0 9\n");
  CHECK_THROWS_WITH_AS(parse_primes_file(shape), doctest::Contains(":2:"),
                       ParseError);
}

TEST_CASE("analyze report closes under re-verification") {
  GroupSpec spec = parse_group_file(data_path("abelian1.grp"));
  PolySeq g = parse_sequence_file(data_path("seq_eighth.pol"), spec);
  NilFunctionSpec f;
  f.spec = &spec;
  f.xi = iv({1});

  IntVec small_n = iv({4});
  EquidistVerdict obs = main_driver(f, g, small_n, rat(1, 10));
  REQUIRE(obs.kind == EquidistVerdict::Kind::Obstruction);
  Json rep = analyze_report(spec, g, f, small_n, rat(1, 10), obs);
  CHECK(rep["verdict"]["kind"] == "obstruction");
  CHECK(rep["verdict"]["characters"][0]["coeffs"][0] == "8");
  CHECK(reverify_analyze(rep));

  IntVec big_n = iv({40});
  EquidistVerdict sm = main_driver(f, g, big_n, rat(1, 10));
  REQUIRE(sm.kind == EquidistVerdict::Kind::SumSmall);
  Json rep2 = analyze_report(spec, g, f, big_n, rat(1, 10), sm);
  CHECK(reverify_analyze(rep2));

  // Tampered certificate must fail the closure check.  (Replacing 8 by
  // another in-budget character would still verify — the conclusion is
  // existential — so tamper to the zero character.)
  Json bad = rep;
  bad["verdict"]["characters"][0]["coeffs"][0] = "0";
  CHECK_FALSE(reverify_analyze(bad));
}

TEST_CASE("factorize and ratner reports certify reconstruction") {
  GroupSpec spec = parse_group_file(data_path("heisenberg.grp"));
  PolySeq g = parse_sequence_file(data_path("seq_bracket.pol"), spec);
  std::vector<HorizontalCharacter> etas{{iv({0, 5, 0})}};
  IntVec nvec = iv({2000});
  FactorizationTriple tr = factorize_by_characters(g, etas, nvec, Rat(100));
  Json rep = factorize_report(spec, g, etas, nvec, Rat(100), tr);
  CHECK(rep["factorization"]["reconstruction_exact"] == true);

  RatVec alpha{rat(2584, 4181), rat(860, 4181), rat(2, 4181)};
  AbelianRatnerResult res = abelian_ratner(alpha, 4181, 2, Rat(10));
  Json rr = ratner_report(alpha, 4181, 2, Rat(10), res);
  CHECK(rr["factorization"]["reconstruction_exact"] == true);
  CHECK(rr["factorization"]["rounds_log"].size() == res.rounds);
  for (const auto& e : rr["factorization"]["rounds_log"])
    CHECK(parse_rat(e["gamma_rationality"].get<std::string>()) >= 1);
}

TEST_CASE("runner exit codes and byte-stable reports") {
  RunConfig cfg;
  cfg.group_path = data_path("abelian1.grp");
  cfg.sequence_path = data_path("seq_eighth.pol");
  cfg.xi = {1};
  cfg.nvec = {4};
  cfg.delta = rat(1, 10);
  fs::path r1 = fs::temp_directory_path() / "nil_io_rep1.json";
  fs::path r2 = fs::temp_directory_path() / "nil_io_rep2.json";
  cfg.report_path = r1.string();
  CHECK(run_analyze(cfg) == 0);
  cfg.report_path = r2.string();
  CHECK(run_analyze(cfg) == 0);
  std::string b1 = slurp(r1.string()), b2 = slurp(r2.string());
  CHECK(!b1.empty());
  CHECK(b1 == b2);
  CHECK(reverify_analyze(Json::parse(b1)));

  cfg.delta = rat(1, 5);  // outside the (0, 1/10] hypothesis
  CHECK_THROWS_AS(run_analyze(cfg), std::invalid_argument);

  RunConfig wc;
  wc.input_path = data_path("witness_planted.wit");
  wc.report_path = (fs::temp_directory_path() / "nil_io_wit.json").string();
  CHECK(run_witness(wc) == 0);
  // Too few shifts: the SmallN escape is inconclusive, exit 3.
  std::string tiny = write_temp("nil_io_tiny.wit",
                                "a: 1/3\nalpha: 1/5\nbeta: 0\nN: 10\n"
                                "delta: 1/5\nK: 1\n");
  wc.input_path = tiny;
  CHECK(run_witness(wc) == 3);

  RunConfig pc;
  pc.input_path = data_path("threeap.pri");
  pc.p_cap = 50;
  pc.report_path = (fs::temp_directory_path() / "nil_io_pri.json").string();
  CHECK(run_primes(pc) == 0);
  Json pj = Json::parse(slurp(pc.report_path));
  CHECK(pj["table"]["relative_error"].get<double>() < 0.2);
}
