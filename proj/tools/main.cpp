#include <CLI11.hpp>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "nilsonde/io.hpp"

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(tok);
  return out;
}

std::vector<long> parse_longs(const std::string& s, const std::string& what) {
  std::vector<long> out;
  for (const std::string& tok : split_commas(s)) {
    nilsonde::Rat q = nilsonde::parse_rat(tok);
    if (!nilsonde::is_integer(q))
      throw std::invalid_argument(what + ": expected integers");
    out.push_back(q.get_num().get_si());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nilsonde: exact nilsequence equidistribution analyses"};
  app.require_subcommand(1);

  nilsonde::RunConfig cfg;
  std::string xi_str, n_str, alpha_str, delta_str = "1/10", rho_str = "0";
  std::string budget_str = "0", bound_str = "0", m_str = "2";
  std::vector<std::string> eta_strs;

  CLI::App* analyze = app.add_subcommand("analyze", "run the main driver");
  analyze->add_option("group", cfg.group_path, "group spec file")->required();
  analyze->add_option("sequence", cfg.sequence_path, "polynomial sequence file")
      ->required();
  analyze->add_option("--delta", delta_str, "threshold delta in (0, 1/10]");
  analyze->add_option("--xi", xi_str, "vertical frequency (comma-separated)")
      ->required();
  analyze->add_option("--mollifier", rho_str, "mollifier width rho");
  analyze->add_option("--budget", budget_str, "budget override (0 = default)");
  analyze->add_option("--N", n_str, "box size per parameter")->required();
  analyze->add_option("--report", cfg.report_path, "report path (default stdout)");

  CLI::App* factorize =
      app.add_subcommand("factorize", "character factorization / torus descent");
  factorize->add_option("group", cfg.group_path, "group spec file");
  factorize->add_option("sequence", cfg.sequence_path, "sequence file");
  factorize->add_option("--eta", eta_strs, "horizontal character (repeatable)");
  factorize->add_option("--N", n_str, "box size per parameter");
  factorize->add_option("--bound", bound_str, "smoothness / rationality bound");
  factorize->add_option("--alpha", alpha_str, "torus point (ratner mode)");
  factorize->add_option("--ratner-N", cfg.ratner_n, "ratner mode N");
  factorize->add_option("--A", cfg.ratner_a, "ratner exponent A");
  factorize->add_option("--M", m_str, "ratner complexity M");
  factorize->add_option("--report", cfg.report_path, "report path");

  CLI::App* witness =
      app.add_subcommand("witness", "refined bracket witness extraction");
  witness->add_option("input", cfg.input_path, "witness input file")->required();
  witness->add_option("--report", cfg.report_path, "report path");

  CLI::App* primes = app.add_subcommand("primes", "count-versus-main-term table");
  primes->add_option("input", cfg.input_path, "affine system file")->required();
  primes->add_option("--pcap", cfg.p_cap, "local density prime cap");
  primes->add_option("--report", cfg.report_path, "report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    cfg.delta = nilsonde::parse_rat(delta_str);
    cfg.mollifier = nilsonde::parse_rat(rho_str);
    cfg.budget = nilsonde::parse_rat(budget_str);
    cfg.bound = nilsonde::parse_rat(bound_str);
    cfg.ratner_m = nilsonde::parse_rat(m_str);
    if (!xi_str.empty()) cfg.xi = parse_longs(xi_str, "--xi");
    if (!n_str.empty()) cfg.nvec = parse_longs(n_str, "--N");
    if (!alpha_str.empty()) cfg.alpha = split_commas(alpha_str);
    for (const std::string& e : eta_strs)
      cfg.etas.push_back(parse_longs(e, "--eta"));

    if (analyze->parsed()) return nilsonde::run_analyze(cfg);
    if (factorize->parsed()) return nilsonde::run_factorize(cfg);
    if (witness->parsed()) return nilsonde::run_witness(cfg);
    if (primes->parsed()) return nilsonde::run_primes(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nilsonde: %s\n", e.what());
    return 2;
  }
  return 2;
}
