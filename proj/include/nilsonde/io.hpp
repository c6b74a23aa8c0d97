#pragma once

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nilsonde/equidist.hpp"
#include "nilsonde/group.hpp"
#include "nilsonde/lattice.hpp"
#include "nilsonde/polyseq.hpp"
#include "nilsonde/primes.hpp"
#include "nilsonde/subgroup.hpp"

namespace nilsonde {

using Json = nlohmann::ordered_json;

struct ParseError : std::runtime_error {
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg) {}
};

namespace detail {

// One input line as whitespace tokens; '#' starts a comment.
inline std::vector<std::string> tokenize(const std::string& line) {
  std::string body = line.substr(0, line.find('#'));
  std::istringstream in(body);
  std::vector<std::string> toks;
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

inline Rat parse_rat_at(const std::string& file, std::size_t line,
                        const std::string& tok) {
  try {
    return parse_rat(tok);
  } catch (const std::exception& e) {
    throw ParseError(file, line, e.what());
  }
}

inline long parse_long_at(const std::string& file, std::size_t line,
                          const std::string& tok) {
  Rat q = parse_rat_at(file, line, tok);
  if (!is_integer(q)) throw ParseError(file, line, "expected an integer: " + tok);
  return q.get_num().get_si();
}

struct LineReader {
  std::string file;
  std::ifstream in;
  std::size_t lineno = 0;

  explicit LineReader(const std::string& path) : file(path), in(path) {
    if (!in) throw ParseError(path, 0, "cannot open file");
  }

  // Next nonempty tokenized line, or nullopt at end of file.
  std::optional<std::vector<std::string>> next() {
    std::string line;
    while (std::getline(in, line)) {
      ++lineno;
      std::vector<std::string> toks = tokenize(line);
      if (!toks.empty()) return toks;
    }
    return std::nullopt;
  }
};

}  // namespace detail

/**
 * Group spec file: "dim D", "degree K", "step S", "filtration d1 .. dk",
 * optional "complexity M", and one "bracket i j l c" line per structure
 * constant (1-based basis indices).  Validated on load.
 */
inline GroupSpec parse_group_file(const std::string& path) {
  detail::LineReader rd(path);
  long dim = 0, degree = 0, step = 0;
  std::vector<std::size_t> filt;
  Rat complexity = 1;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, Rat>> brackets;
  while (auto toks = rd.next()) {
    const auto& t = *toks;
    const std::string& key = t[0];
    auto need = [&](std::size_t n) {
      if (t.size() != n + 1)
        throw ParseError(path, rd.lineno,
                         key + " needs " + std::to_string(n) + " argument(s)");
    };
    if (key == "dim") {
      need(1);
      dim = detail::parse_long_at(path, rd.lineno, t[1]);
    } else if (key == "degree") {
      need(1);
      degree = detail::parse_long_at(path, rd.lineno, t[1]);
    } else if (key == "step") {
      need(1);
      step = detail::parse_long_at(path, rd.lineno, t[1]);
    } else if (key == "complexity") {
      need(1);
      complexity = detail::parse_rat_at(path, rd.lineno, t[1]);
    } else if (key == "filtration") {
      for (std::size_t i = 1; i < t.size(); ++i) {
        long v = detail::parse_long_at(path, rd.lineno, t[i]);
        if (v < 0) throw ParseError(path, rd.lineno, "negative filtration dim");
        filt.push_back(static_cast<std::size_t>(v));
      }
    } else if (key == "bracket") {
      need(4);
      long i = detail::parse_long_at(path, rd.lineno, t[1]);
      long j = detail::parse_long_at(path, rd.lineno, t[2]);
      long l = detail::parse_long_at(path, rd.lineno, t[3]);
      if (i < 1 || j < 1 || l < 1 || i > dim || j > dim || l > dim)
        throw ParseError(path, rd.lineno, "bracket index out of range");
      brackets.emplace_back(i - 1, j - 1, l - 1,
                            detail::parse_rat_at(path, rd.lineno, t[4]));
    } else {
      throw ParseError(path, rd.lineno, "unknown directive: " + key);
    }
  }
  if (dim < 1 || degree < 1 || step < 1)
    throw ParseError(path, rd.lineno, "group file needs dim, degree, step");
  if (filt.size() != static_cast<std::size_t>(degree))
    throw ParseError(path, rd.lineno, "filtration length must equal degree");
  GroupSpec spec(static_cast<std::size_t>(dim),
                 static_cast<std::size_t>(degree),
                 static_cast<std::size_t>(step), filt, complexity);
  for (auto& [i, j, l, c] : brackets) spec.set_bracket(i, j, l, std::move(c));
  try {
    spec.validate();
  } catch (const SpecError& e) {
    throw ParseError(path, rd.lineno, std::string("invalid group: ") + e.what());
  }
  return spec;
}

/**
 * Sequence file: "params p" then one "coeff i1 .. ip c1 .. cd" line per
 * Taylor coefficient (multi-index, then second-kind coordinates).
 */
inline PolySeq parse_sequence_file(const std::string& path,
                                   const GroupSpec& spec) {
  detail::LineReader rd(path);
  PolySeq g;
  g.spec = &spec;
  g.nparams = 1;
  bool params_seen = false;
  while (auto toks = rd.next()) {
    const auto& t = *toks;
    if (t[0] == "params") {
      if (t.size() != 2) throw ParseError(path, rd.lineno, "params needs one argument");
      long p = detail::parse_long_at(path, rd.lineno, t[1]);
      if (p < 1) throw ParseError(path, rd.lineno, "params must be positive");
      g.nparams = static_cast<std::size_t>(p);
      params_seen = true;
    } else if (t[0] == "coeff") {
      if (!params_seen)
        throw ParseError(path, rd.lineno, "params must precede coeff lines");
      if (t.size() != 1 + g.nparams + spec.d)
        throw ParseError(path, rd.lineno,
                         "coeff needs " + std::to_string(g.nparams) +
                             " index entries and " + std::to_string(spec.d) +
                             " coordinates");
      MultiIndex mi(g.nparams);
      for (std::size_t j = 0; j < g.nparams; ++j) {
        long v = detail::parse_long_at(path, rd.lineno, t[1 + j]);
        if (v < 0) throw ParseError(path, rd.lineno, "negative multi-index");
        mi[j] = static_cast<unsigned>(v);
      }
      GroupElement c(spec.d);
      for (std::size_t j = 0; j < spec.d; ++j)
        c[j] = detail::parse_rat_at(path, rd.lineno, t[1 + g.nparams + j]);
      g.set_coeff(mi, std::move(c));
    } else {
      throw ParseError(path, rd.lineno, "unknown directive: " + t[0]);
    }
  }
  try {
    g.validate();
  } catch (const SpecError& e) {
    throw ParseError(path, rd.lineno,
                     std::string("invalid sequence: ") + e.what());
  }
  return g;
}

/**
 * Witness file for the single-parameter refined lemma: "a: ...", "alpha:
 * ...", "beta: q", "N: n", "delta: q", "K: q".
 */
struct WitnessInput {
  RatVec a, alpha;
  Rat beta = 0, delta = 0, k_param = 1;
  long n = 0;
};

inline WitnessInput parse_witness_file(const std::string& path) {
  detail::LineReader rd(path);
  WitnessInput w;
  bool have_a = false, have_alpha = false, have_n = false, have_delta = false;
  while (auto toks = rd.next()) {
    const auto& t = *toks;
    const std::string& key = t[0];
    auto vec = [&]() {
      RatVec v;
      for (std::size_t i = 1; i < t.size(); ++i)
        v.push_back(detail::parse_rat_at(path, rd.lineno, t[i]));
      if (v.empty()) throw ParseError(path, rd.lineno, key + " needs entries");
      return v;
    };
    auto scalar = [&]() {
      if (t.size() != 2) throw ParseError(path, rd.lineno, key + " needs one value");
      return detail::parse_rat_at(path, rd.lineno, t[1]);
    };
    if (key == "a:") {
      w.a = vec();
      have_a = true;
    } else if (key == "alpha:") {
      w.alpha = vec();
      have_alpha = true;
    } else if (key == "beta:") {
      w.beta = scalar();
    } else if (key == "K:") {
      w.k_param = scalar();
    } else if (key == "delta:") {
      w.delta = scalar();
      have_delta = true;
    } else if (key == "N:") {
      w.n = detail::parse_long_at(path, rd.lineno, t[1]);
      have_n = true;
    } else {
      throw ParseError(path, rd.lineno, "unknown field: " + key);
    }
  }
  if (!have_a || !have_alpha || !have_n || !have_delta)
    throw ParseError(path, rd.lineno, "witness file needs a, alpha, N, delta");
  if (w.a.size() != w.alpha.size())
    throw ParseError(path, rd.lineno, "a and alpha must have equal length");
  if (w.n < 1 || w.delta <= 0)
    throw ParseError(path, rd.lineno, "need N >= 1 and delta > 0");
  return w;
}

// Primes file: "dim d", "form v1 .. vd c" per linear form, "box lo1 hi1 ..".
struct PrimesInput {
  AffineSystem sys;
  Box box;
};

inline PrimesInput parse_primes_file(const std::string& path) {
  detail::LineReader rd(path);
  PrimesInput in;
  bool have_box = false;
  while (auto toks = rd.next()) {
    const auto& t = *toks;
    if (t[0] == "dim") {
      if (t.size() != 2) throw ParseError(path, rd.lineno, "dim needs one value");
      long d = detail::parse_long_at(path, rd.lineno, t[1]);
      if (d < 1) throw ParseError(path, rd.lineno, "dim must be positive");
      in.sys.d = static_cast<std::size_t>(d);
    } else if (t[0] == "form") {
      if (in.sys.d == 0) throw ParseError(path, rd.lineno, "dim must precede forms");
      if (t.size() != in.sys.d + 2)
        throw ParseError(path, rd.lineno,
                         "form needs " + std::to_string(in.sys.d) +
                             " coefficients and a constant");
      AffineForm f;
      for (std::size_t j = 0; j < in.sys.d; ++j)
        f.v.emplace_back(detail::parse_long_at(path, rd.lineno, t[1 + j]));
      f.c = detail::parse_long_at(path, rd.lineno, t[1 + in.sys.d]);
      in.sys.forms.push_back(std::move(f));
    } else if (t[0] == "box") {
      if (in.sys.d == 0) throw ParseError(path, rd.lineno, "dim must precede box");
      if (t.size() != 2 * in.sys.d + 1)
        throw ParseError(path, rd.lineno, "box needs lo/hi per variable");
      for (std::size_t j = 0; j < in.sys.d; ++j) {
        in.box.lo.emplace_back(detail::parse_long_at(path, rd.lineno, t[1 + 2 * j]));
        in.box.hi.emplace_back(detail::parse_long_at(path, rd.lineno, t[2 + 2 * j]));
      }
      have_box = true;
    } else {
      throw ParseError(path, rd.lineno, "unknown directive: " + t[0]);
    }
  }
  if (!have_box) throw ParseError(path, rd.lineno, "primes file needs a box");
  try {
    in.sys.validate();
  } catch (const SpecError& e) {
    throw ParseError(path, rd.lineno, std::string("invalid system: ") + e.what());
  }
  return in;
}

// --- report schema (exact rationals as "p/q" strings throughout) ---

namespace detail {

inline Json rat_json(const Rat& q) { return rat_str(q); }

inline Json ratvec_json(const RatVec& v) {
  Json a = Json::array();
  for (const Rat& q : v) a.push_back(rat_str(q));
  return a;
}

inline Json ratmat_json(const RatMat& m) {
  Json a = Json::array();
  for (const RatVec& r : m) a.push_back(ratvec_json(r));
  return a;
}

inline Json intvec_json(const IntVec& v) {
  Json a = Json::array();
  for (const Int& x : v) a.push_back(x.get_str());
  return a;
}

inline RatVec ratvec_from(const Json& a) {
  RatVec v;
  for (const auto& s : a) v.push_back(parse_rat(s.get<std::string>()));
  return v;
}

inline IntVec intvec_from(const Json& a) {
  IntVec v;
  for (const auto& s : a) {
    Rat q = parse_rat(s.get<std::string>());
    v.push_back(q.get_num());
  }
  return v;
}

}  // namespace detail

inline Json group_to_json(const GroupSpec& spec) {
  Json j;
  j["dim"] = spec.d;
  j["degree"] = spec.degree;
  j["step"] = spec.step;
  j["filtration"] = spec.filt_dims;
  j["complexity"] = rat_str(spec.complexity);
  Json br = Json::array();
  for (const auto& [ij, c] : spec.structure)
    for (std::size_t l = 0; l < spec.d; ++l)
      if (c[l] != 0)
        br.push_back(Json::array(
            {ij.first + 1, ij.second + 1, l + 1, rat_str(c[l])}));
  j["brackets"] = br;
  return j;
}

inline GroupSpec group_from_json(const Json& j) {
  GroupSpec spec(j.at("dim").get<std::size_t>(),
                 j.at("degree").get<std::size_t>(),
                 j.at("step").get<std::size_t>(),
                 j.at("filtration").get<std::vector<std::size_t>>(),
                 parse_rat(j.at("complexity").get<std::string>()));
  for (const auto& b : j.at("brackets"))
    spec.set_bracket(b.at(0).get<std::size_t>() - 1,
                     b.at(1).get<std::size_t>() - 1,
                     b.at(2).get<std::size_t>() - 1,
                     parse_rat(b.at(3).get<std::string>()));
  spec.validate();
  return spec;
}

inline Json sequence_to_json(const PolySeq& g) {
  Json j;
  j["params"] = g.nparams;
  Json cs = Json::array();
  for (const auto& [i, c] : g.coeffs) {
    Json e;
    e["index"] = i;
    e["coords"] = detail::ratvec_json(c);
    cs.push_back(std::move(e));
  }
  j["coeffs"] = cs;
  return j;
}

inline PolySeq sequence_from_json(const Json& j, const GroupSpec& spec) {
  PolySeq g;
  g.spec = &spec;
  g.nparams = j.at("params").get<std::size_t>();
  for (const auto& e : j.at("coeffs"))
    g.set_coeff(e.at("index").get<MultiIndex>(),
                detail::ratvec_from(e.at("coords")));
  g.validate();
  return g;
}

namespace detail {

// Every inequality in the report carries an achieved / allowed ratio.
inline Json ratio_json(const Rat& achieved, const Rat& allowed) {
  Json j;
  j["achieved"] = rat_str(achieved);
  j["allowed"] = rat_str(allowed);
  j["ratio"] = allowed == 0 ? std::string("inf")
                            : rat_str(Rat(achieved / allowed));
  return j;
}

}  // namespace detail

inline Json analyze_report(const GroupSpec& spec, const PolySeq& g,
                           const NilFunctionSpec& f, const IntVec& nvec,
                           const Rat& delta, const EquidistVerdict& ver) {
  Json j;
  j["subcommand"] = "analyze";
  Json in;
  in["group"] = group_to_json(spec);
  in["sequence"] = sequence_to_json(g);
  in["xi"] = detail::intvec_json(f.xi);
  in["mollifier"] = rat_str(f.rho);
  in["nvec"] = detail::intvec_json(nvec);
  in["delta"] = rat_str(delta);
  j["inputs"] = in;
  Json v;
  switch (ver.kind) {
    case EquidistVerdict::Kind::SumSmall: v["kind"] = "sum_small"; break;
    case EquidistVerdict::Kind::Obstruction: v["kind"] = "obstruction"; break;
    default: v["kind"] = "inconclusive"; break;
  }
  v["value_re"] = ver.value.real();
  v["value_im"] = ver.value.imag();
  v["modulus"] = ver.modulus;
  v["budget"] = rat_str(ver.budget);
  v["note"] = ver.note;
  if (ver.kind == EquidistVerdict::Kind::SumSmall) {
    Json r;
    r["achieved"] = ver.modulus;
    r["allowed"] = rat_str(delta);
    r["ratio"] = ver.modulus / to_double(delta);
    v["modulus_vs_delta"] = r;
  }
  Json chars = Json::array();
  for (std::size_t i = 0; i < ver.characters.size(); ++i) {
    Json c;
    c["coeffs"] = detail::intvec_json(ver.characters[i].coeffs);
    c["size"] = detail::ratio_json(Rat(ver.characters[i].size()), ver.budget);
    c["smoothness"] = detail::ratio_json(ver.smoothness[i], ver.budget);
    chars.push_back(std::move(c));
  }
  v["characters"] = chars;
  v["kernel"] = detail::ratmat_json(ver.kernel);
  v["certificate"] = ver.certificate;
  j["verdict"] = v;
  return j;
}

/**
 * Closure property of the schema: rebuild every object from the report
 * alone and re-check the verdict (exp_sum for a small sum, the full
 * verify_conclusion for an obstruction).
 */
inline bool reverify_analyze(const Json& report) {
  GroupSpec spec = group_from_json(report.at("inputs").at("group"));
  PolySeq g = sequence_from_json(report.at("inputs").at("sequence"), spec);
  IntVec nvec = detail::intvec_from(report.at("inputs").at("nvec"));
  Rat delta = parse_rat(report.at("inputs").at("delta").get<std::string>());
  const Json& v = report.at("verdict");
  std::string kind = v.at("kind").get<std::string>();
  if (kind == "sum_small") {
    NilFunctionSpec f;
    f.spec = &spec;
    f.xi = detail::intvec_from(report.at("inputs").at("xi"));
    f.rho = parse_rat(report.at("inputs").at("mollifier").get<std::string>());
    std::complex<double> s = exp_sum(f, g, nvec);
    return std::abs(s) < to_double(delta) &&
           std::abs(s - std::complex<double>(v.at("value_re").get<double>(),
                                             v.at("value_im").get<double>())) <
               1e-9;
  }
  if (kind == "obstruction") {
    std::vector<HorizontalCharacter> etas;
    for (const auto& c : v.at("characters"))
      etas.push_back({detail::intvec_from(c.at("coeffs"))});
    Rat budget = parse_rat(v.at("budget").get<std::string>());
    IntVec xi = detail::intvec_from(report.at("inputs").at("xi"));
    ConclusionReport rep = verify_conclusion(spec, xi, etas, g, nvec, budget);
    return rep.ok && !etas.empty();
  }
  return false;  // inconclusive reports carry no certificate
}

inline Json factorize_report(const GroupSpec& spec, const PolySeq& g,
                             const std::vector<HorizontalCharacter>& etas,
                             const IntVec& nvec, const Rat& bound,
                             const FactorizationTriple& tr) {
  Json j;
  j["subcommand"] = "factorize";
  Json in;
  in["group"] = group_to_json(spec);
  in["sequence"] = sequence_to_json(g);
  Json es = Json::array();
  for (const HorizontalCharacter& e : etas)
    es.push_back(detail::intvec_json(e.coeffs));
  in["etas"] = es;
  in["nvec"] = detail::intvec_json(nvec);
  in["bound"] = rat_str(bound);
  j["inputs"] = in;
  Json out;
  out["eps"] = sequence_to_json(tr.eps);
  out["g1"] = sequence_to_json(tr.g1);
  out["gamma"] = sequence_to_json(tr.gamma);
  out["smoothness"] = detail::ratio_json(tr.smooth_k, bound);
  out["rationality"] = detail::ratio_json(tr.rationality, bound);
  // Exact reconstruction on the degree grid, recomputed for the report.
  bool exact = true;
  long grid = static_cast<long>(tr.g1.degree()) + 2;
  for (long n = 0; n <= grid && exact; ++n) {
    GroupElement lhs = spec.multiply(
        spec.multiply(tr.eps.eval(n), tr.g1.eval(n)), tr.gamma.eval(n));
    exact = (lhs == g.eval(n));
  }
  out["reconstruction_exact"] = exact;
  j["factorization"] = out;
  return j;
}

inline Json ratner_report(const RatVec& alpha, long n_param, unsigned a_param,
                          const Rat& m_param, const AbelianRatnerResult& res) {
  Json j;
  j["subcommand"] = "factorize";
  Json in;
  in["alpha"] = detail::ratvec_json(alpha);
  in["N"] = n_param;
  in["A"] = a_param;
  in["M"] = rat_str(m_param);
  j["inputs"] = in;
  Json out;
  out["eps"] = detail::ratvec_json(res.eps);
  out["alpha_prime"] = detail::ratvec_json(res.alpha_prime);
  out["gamma"] = detail::ratvec_json(res.gamma);
  out["delta"] = rat_str(res.delta);
  out["rounds"] = res.rounds;
  out["cert_bound"] = res.cert_bound;
  out["subgroup"] = detail::ratmat_json(res.subgroup);
  // Per-round log: the obstruction frequency, its height, and the running
  // rationality (lcm of gamma denominators split off so far).
  Json log = Json::array();
  Int running = 1;
  for (std::size_t t = 0; t < res.obstructions.size(); ++t) {
    Json e;
    e["round"] = t + 1;
    e["obstruction"] = detail::intvec_json(res.obstructions[t]);
    Int h = 0;
    for (const Int& c : res.obstructions[t]) h = std::max(h, Int(abs(c)));
    e["height"] = h.get_str();
    for (const Rat& q : res.gamma) running = lcm(running, Int(q.get_den()));
    e["gamma_rationality"] = running.get_str();
    log.push_back(std::move(e));
  }
  out["rounds_log"] = log;
  bool exact = true;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (res.eps[i] + res.alpha_prime[i] + res.gamma[i] != alpha[i])
      exact = false;
  out["reconstruction_exact"] = exact;
  j["factorization"] = out;
  return j;
}

inline Json witness_report(const WitnessInput& in, const WitnessResult& res) {
  Json j;
  j["subcommand"] = "witness";
  Json ji;
  ji["a"] = detail::ratvec_json(in.a);
  ji["alpha"] = detail::ratvec_json(in.alpha);
  ji["beta"] = rat_str(in.beta);
  ji["N"] = in.n;
  ji["delta"] = rat_str(in.delta);
  ji["K"] = rat_str(in.k_param);
  j["inputs"] = ji;
  Json out;
  switch (res.exit) {
    case WitnessExit::None: out["exit"] = "witness"; break;
    case WitnessExit::SmallN: out["exit"] = "small_n"; break;
    case WitnessExit::LargeK: out["exit"] = "large_k"; break;
  }
  if (res.has_witness()) {
    const BracketWitness& w = res.witness;
    out["ambient"] = w.ambient;
    out["allowed"] = detail::ratvec_json(w.allowed);
    auto family = [&](const IntMat& vecs, const RatMat& vals) {
      Json fam = Json::array();
      for (std::size_t i = 0; i < vecs.size(); ++i) {
        Json e;
        e["coeffs"] = detail::intvec_json(vecs[i]);
        Json vr = Json::array();
        for (std::size_t k = 0; k < vals[i].size(); ++k)
          vr.push_back(detail::ratio_json(vals[i][k], w.allowed[k]));
        e["values"] = vr;
        fam.push_back(std::move(e));
      }
      return fam;
    };
    out["w_family"] = family(w.w_list, w.w_vals);
    out["eta_family"] = family(w.eta_list, w.eta_vals);
  }
  j["witness"] = out;
  return j;
}

inline Json primes_report(const PrimesInput& in, long p_cap,
                          const CountCompare& cc) {
  Json j;
  j["subcommand"] = "primes";
  Json ji;
  ji["dim"] = in.sys.d;
  Json fs = Json::array();
  for (const AffineForm& f : in.sys.forms) {
    Json e;
    e["v"] = detail::intvec_json(f.v);
    e["c"] = f.c.get_str();
    fs.push_back(std::move(e));
  }
  ji["forms"] = fs;
  ji["box_lo"] = detail::intvec_json(in.box.lo);
  ji["box_hi"] = detail::intvec_json(in.box.hi);
  ji["p_cap"] = p_cap;
  j["inputs"] = ji;
  Json out;
  out["count"] = cc.lhs;
  out["main_term"] = cc.main_term;
  out["relative_error"] = cc.relative_error;
  out["beta_infinity"] = rat_str(cc.beta_inf);
  Json ds = Json::array();
  for (const LocalDensity& ld : cc.densities) {
    Json e;
    e["p"] = ld.p;
    e["beta_p"] = rat_str(ld.value);
    ds.push_back(std::move(e));
  }
  out["local_densities"] = ds;
  out["tail_factor"] = cc.tail_factor;
  j["table"] = out;
  return j;
}

// --- subcommand runners (exit 0 verdict, 2 precondition, 3 inconclusive) ---

struct RunConfig {
  std::string group_path, sequence_path, input_path, report_path;
  Rat delta = rat(1, 10);
  std::vector<long> xi;
  Rat mollifier = 0;
  Rat budget = 0;  // 0 = driver default
  std::vector<long> nvec;
  std::vector<std::vector<long>> etas;  // factorize characters
  std::vector<std::string> alpha;       // ratner mode when nonempty
  long ratner_n = 0;
  long ratner_a = 2;
  Rat ratner_m = 2;
  Rat bound = 0;
  long p_cap = 100;

  void validate() const {
    if (delta <= 0 || delta > rat(1, 10))
      throw std::invalid_argument("delta must lie in (0, 1/10]");
    for (long n : nvec)
      if (n < 1) throw std::invalid_argument("N entries must be positive");
    if (p_cap < 2) throw std::invalid_argument("prime cap must be >= 2");
  }
};

namespace detail {

inline void write_report(const std::string& path, const Json& j) {
  std::string text = j.dump(2) + "\n";
  if (path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << text;
}

inline IntVec to_intvec(const std::vector<long>& v) {
  IntVec out;
  for (long x : v) out.emplace_back(x);
  return out;
}

}  // namespace detail

inline int run_analyze(const RunConfig& cfg) {
  cfg.validate();
  GroupSpec spec = parse_group_file(cfg.group_path);
  PolySeq g = parse_sequence_file(cfg.sequence_path, spec);
  NilFunctionSpec f;
  f.spec = &spec;
  f.xi = detail::to_intvec(cfg.xi);
  f.rho = cfg.mollifier;
  f.validate();
  if (cfg.nvec.size() != g.nparams)
    throw std::invalid_argument("need one N per sequence parameter");
  IntVec nvec = detail::to_intvec(cfg.nvec);
  DriverConfig dc;
  dc.budget = cfg.budget;
  EquidistVerdict ver = main_driver(f, g, nvec, cfg.delta, dc);
  detail::write_report(cfg.report_path,
                       analyze_report(spec, g, f, nvec, cfg.delta, ver));
  return ver.kind == EquidistVerdict::Kind::Inconclusive ? 3 : 0;
}

inline int run_factorize(const RunConfig& cfg) {
  if (!cfg.alpha.empty()) {
    RatVec alpha;
    for (const std::string& s : cfg.alpha) alpha.push_back(parse_rat(s));
    if (cfg.ratner_n < 1) throw std::invalid_argument("ratner mode needs N >= 1");
    AbelianRatnerResult res =
        abelian_ratner(alpha, cfg.ratner_n,
                       static_cast<unsigned>(cfg.ratner_a), cfg.ratner_m);
    detail::write_report(cfg.report_path,
                         ratner_report(alpha, cfg.ratner_n,
                                       static_cast<unsigned>(cfg.ratner_a),
                                       cfg.ratner_m, res));
    return 0;
  }
  GroupSpec spec = parse_group_file(cfg.group_path);
  PolySeq g = parse_sequence_file(cfg.sequence_path, spec);
  if (cfg.etas.empty())
    throw std::invalid_argument("factorize needs --eta or --alpha");
  std::vector<HorizontalCharacter> etas;
  for (const auto& e : cfg.etas) etas.push_back({detail::to_intvec(e)});
  if (cfg.nvec.size() != g.nparams)
    throw std::invalid_argument("need one N per sequence parameter");
  Rat bound = cfg.bound;
  if (bound <= 0) throw std::invalid_argument("factorize needs --bound > 0");
  FactorizationTriple tr =
      factorize_by_characters(g, etas, detail::to_intvec(cfg.nvec), bound);
  detail::write_report(cfg.report_path,
                       factorize_report(spec, g, etas,
                                        detail::to_intvec(cfg.nvec), bound, tr));
  return 0;
}

inline int run_witness(const RunConfig& cfg) {
  WitnessInput in = parse_witness_file(cfg.input_path);
  WitnessResult res = refined_witness_single(in.a, in.alpha, in.beta, in.n,
                                             in.delta, in.k_param);
  detail::write_report(cfg.report_path, witness_report(in, res));
  return res.has_witness() ? 0 : 3;
}

inline int run_primes(const RunConfig& cfg) {
  cfg.validate();
  PrimesInput in = parse_primes_file(cfg.input_path);
  CountCompare cc = count_compare(in.sys, in.box, cfg.p_cap);
  detail::write_report(cfg.report_path, primes_report(in, cfg.p_cap, cc));
  return 0;
}

}  // namespace nilsonde
