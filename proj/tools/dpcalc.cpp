// dpcalc: parse formulas, integrate cell data, compare against the box oracle.
//
// Exit codes: 0 ok, 1 other error, 2 parse, 3 unsupported fragment,
// 4 comparison failure, 5 budget.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dpcalc/compare.hpp"
#include "json.hpp"

using namespace dpcalc;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitCompare = 4;

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Parse: return 2;
    case ErrorCategory::Unsupported: return 3;
    case ErrorCategory::Budget: return 5;
    default: return 1;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::uint32_t> parse_primes(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    unsigned long p = 0;
    try {
      p = std::stoul(item);
    } catch (const std::logic_error&) {
      throw InvalidPrime("not a prime: '" + item + "'");
    }
    if (!is_prime(p)) throw InvalidPrime(item + " is not prime");
    out.push_back(static_cast<std::uint32_t>(p));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// JSON AST

const char* kind_name(fm::TermKind k) {
  static const char* names[] = {"var", "unif", "const", "inf", "add", "sub", "mul", "div", "neg", "pow", "ord", "ac"};
  return names[static_cast<int>(k)];
}

const char* kind_name(fm::FormKind k) {
  static const char* names[] = {"true", "false", "atom", "not", "and", "or", "exists"};
  return names[static_cast<int>(k)];
}

const char* rel_name(fm::Rel r) {
  static const char* names[] = {"==", "!=", "<=", "<", ">=", ">", "mod"};
  return names[static_cast<int>(r)];
}

json span_json(const fm::Span& s) { return {{"line", s.line}, {"column", s.column}}; }

json term_json(const fm::TermPtr& t) {
  json j;
  j["kind"] = kind_name(t->kind);
  j["sort"] = fm::sort_name(t->sort);
  if (t->kind == fm::TermKind::Var) j["name"] = t->name;
  if (t->kind == fm::TermKind::Const) j["value"] = to_string(t->value);
  if (t->kind == fm::TermKind::Pow) j["exponent"] = t->exponent;
  if (!t->args.empty()) {
    j["args"] = json::array();
    for (const auto& a : t->args) j["args"].push_back(term_json(a));
  }
  j["span"] = span_json(t->span);
  return j;
}

json node_json(const fm::NodePtr& n) {
  json j;
  j["kind"] = kind_name(n->kind);
  if (n->kind == fm::FormKind::Atom) {
    j["rel"] = rel_name(n->rel);
    j["lhs"] = term_json(n->lhs);
    j["rhs"] = term_json(n->rhs);
    if (n->rel == fm::Rel::Congruent) j["modulus"] = n->modulus;
  }
  if (n->kind == fm::FormKind::Exists) {
    j["var"] = n->var;
    j["sort"] = fm::sort_name(n->var_sort);
  }
  if (!n->children.empty()) {
    j["children"] = json::array();
    for (const auto& c : n->children) j["children"].push_back(node_json(c));
  }
  j["span"] = span_json(n->span);
  return j;
}

json formula_json(const fm::Formula& f) {
  json vars = json::array();
  for (const auto& v : f.free_vars()) vars.push_back({{"name", v.name}, {"sort", fm::sort_name(v.sort)}});
  return {{"free_vars", vars}, {"root", node_json(f.root())}};
}

json bad_primes_json(const std::map<std::uint64_t, std::vector<std::string>>& bad) {
  json j = json::object();
  for (const auto& [p, why] : bad) j[std::to_string(p)] = why;
  return j;
}

// ---------------------------------------------------------------------------
// integrate

struct ParamSpec {
  std::string case_name;
  pres::Assignment zz;
  std::map<std::string, Rational> rf;
};

// "x:cube,k=0": witness x taken from case "cube", k bound to 0
ParamSpec parse_params(const std::string& text, const mot::CellFile& file) {
  ParamSpec ps;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':'), eq = item.find('=');
    if (colon != std::string::npos) {
      const std::string var = item.substr(0, colon), name = item.substr(colon + 1);
      const auto& c = file.find_case(name);
      if (!c.vf.count(var)) throw CellFormatError("case " + name + " does not fix " + var);
      if (!ps.case_name.empty() && ps.case_name != name) throw CellFormatError("two cases selected");
      ps.case_name = name;
    } else if (eq != std::string::npos) {
      const std::string name = item.substr(0, eq), value = item.substr(eq + 1);
      const auto sort = std::find_if(file.parameters.begin(), file.parameters.end(),
                                     [&](const fm::Variable& v) { return v.name == name; });
      if (sort == file.parameters.end()) throw UnboundParameter("unknown parameter " + name);
      if (sort->sort == fm::Sort::ZZ)
        ps.zz[name] = std::stoll(value);
      else
        ps.rf[name] = parse_rational(value);
    } else {
      throw CellFormatError("bad --param item '" + item + "'");
    }
  }
  return ps;
}

json result_json(const mot::IntegrationResult& r) {
  json j;
  j["value"] = r.value.str();
  if (auto s = r.value.as_symbolic()) j["symbolic"] = s->str();
  j["bad_primes"] = bad_primes_json(r.bad_primes);
  j["derivation"] = json::array();
  for (const auto& c : r.derivation) j["derivation"].push_back({{"cell", c.cell}, {"value", c.value.str()}});
  return j;
}

json congruence_json(const mot::ConstructibleFn& f, const std::map<std::string, Rational>& rf,
                     const std::set<std::uint64_t>& bad) {
  try {
    const auto cases = mot::realize_by_congruence(f, rf, bad);
    if (!cases) return nullptr;
    json j = json::array();
    for (const auto& c : *cases)
      j.push_back({{"modulus", c.modulus}, {"residue", c.residue}, {"value", c.value.str()}});
    return j;
  } catch (const UnboundParameter&) {
    return nullptr;
  }
}

json integrate_case(const mot::CellFile& file, const mot::CellCase& c, const pres::Assignment& zz,
                    std::map<std::string, Rational> rf) {
  const auto r = mot::integrate_cells(file.cells_of(c), file.options());
  json j;
  j["case"] = c.name;
  j["result"] = result_json(r);
  for (const auto& [k, v] : c.rf) rf.emplace(k, v);
  if (!zz.empty()) {
    json b;
    for (const auto& [k, v] : zz) b[k] = v;
    for (const auto& [k, v] : rf) b[k] = to_string(v);
    j["bindings"] = b;
    const auto at = r.value.partial_eval(zz);
    j["value"] = at.str();
    if (auto s = at.as_symbolic()) j["symbolic"] = s->str();
  }
  j["cases"] = congruence_json(zz.empty() ? r.value : r.value.partial_eval(zz), rf, r.bad_prime_set());
  return j;
}

int cmd_integrate(const std::string& path, const std::string& linear, const std::string& params) {
  json out;
  if (!linear.empty() || ends_with(path, ".linprod.json")) {
    const auto lp = linear.empty() ? cmp::read_linear_product(read_file(path)) : cmp::parse_linear_product(linear);
    out = result_json(mot::integrate_linear_product(lp.centers, lp.multiplicities, lp.exponent));
  } else if (path.empty()) {
    throw CellFormatError("integrate needs a cell file or --linear-product");
  } else if (!ends_with(path, ".json")) {
    throw UnsupportedFormula("only cell files and linear products can be integrated; " + path +
                             " is a formula (try parse or oracle)");
  } else {
    const auto file = mot::read_cell_file(read_file(path));
    if (!params.empty()) {
      const auto ps = parse_params(params, file);
      if (ps.case_name.empty()) throw CellFormatError("--param must select a case (var:case)");
      out = integrate_case(file, file.find_case(ps.case_name), ps.zz, ps.rf);
    } else if (file.cases.empty()) {
      out = result_json(mot::integrate_cells(file.cells, file.options()));
    } else {
      out["cases"] = json::array();
      for (const auto& c : file.cases) out["cases"].push_back(integrate_case(file, c, {}, {}));
    }
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare

json interval_json(const std::optional<oracle::VolumeInterval>& iv) {
  if (!iv) return nullptr;
  return {{"lower", to_string(iv->lower)}, {"upper", to_string(iv->upper)}, {"precision", iv->precision}};
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& linear, const cmp::CompareOptions& opts,
                bool table) {
  std::vector<std::pair<std::string, std::vector<cmp::Row>>> reports;
  if (!linear.empty()) reports.emplace_back(linear, cmp::compare_linear_product(cmp::parse_linear_product(linear), opts));
  for (const auto& path : paths) {
    const std::string text = read_file(path);
    if (ends_with(path, ".linprod.json"))
      reports.emplace_back(path, cmp::compare_linear_product(cmp::read_linear_product(text), opts));
    else
      reports.emplace_back(path, cmp::compare_cell_file(mot::read_cell_file(text), opts));
  }
  if (reports.empty()) throw CellFormatError("compare needs an input");

  json out;
  out["inputs"] = json::array();
  json failing = json::array();
  for (const auto& [name, rows] : reports) {
    json in;
    in["input"] = name;
    in["rows"] = json::array();
    for (const auto& r : rows) {
      json row{{"label", r.label}, {"prime", r.prime}, {"precision", r.precision}};
      if (r.skipped) {
        row["status"] = "skipped (bad prime)";
      } else {
        row["symbolic"] = to_string(r.symbolic);
        row["qp"] = interval_json(r.qp);
        row["fpt"] = interval_json(r.fpt);
        row["contained"] = r.contained;
        row["status"] = r.contained ? "contained" : "NOT contained";
        if (!r.contained) failing.push_back({{"input", name}, {"label", r.label}, {"prime", r.prime}});
      }
      in["rows"].push_back(row);
    }
    out["inputs"].push_back(in);
  }
  out["ok"] = failing.empty();
  out["failing"] = failing;

  if (table) {
    for (const auto& [name, rows] : reports) {
      std::cout << name << "\n";
      for (const auto& r : rows) {
        std::cout << "  " << r.label << "  p=" << r.prime << "  ";
        if (r.skipped) {
          std::cout << "skipped (bad prime)\n";
          continue;
        }
        std::cout << to_string(r.symbolic) << "  Qp [" << to_string(r.qp->lower) << ", " << to_string(r.qp->upper) << "]";
        if (r.fpt) std::cout << "  Fp((t)) [" << to_string(r.fpt->lower) << ", " << to_string(r.fpt->upper) << "]";
        std::cout << "  " << (r.contained ? "ok" : "FAIL") << "\n";
      }
    }
  } else {
    std::cout << out.dump(2) << "\n";
  }
  if (!failing.empty()) {
    std::cerr << "comparison failed at:";
    for (const auto& f : failing) std::cerr << " " << f["label"].get<std::string>() << "@" << f["prime"];
    std::cerr << "\n";
    return kExitCompare;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// appendix2, oracle

int cmd_appendix2(const std::vector<std::uint32_t>& primes) {
  using namespace mot;
  const auto s = appendix2_steps();
  json out;
  out["symbolic"] = appendix2_symbolic().str();
  out["steps"] = {{"cone", s.cone.str()},         {"split", s.split.str()},
                  {"nonsplit", s.nonsplit.str()}, {"m1", s.m1.str()},
                  {"unit_b_total", s.unit_b_total.str()}, {"unit_b_per_eta", s.unit_b_per_eta.str()},
                  {"nonunit_b", s.nonunit_b.str()}, {"total", s.total.str()}};
  bool ok = true;
  out["primes"] = json::array();
  for (auto q : primes) {
    const std::uint64_t expected = static_cast<std::uint64_t>(q) * (q - 1) * (q + 1) / 2;
    json row{{"q", q}, {"expected", expected}};
    json per = json::object(), swapped = json::object();
    std::set<std::uint64_t> counts, swapped_counts;
    for (auto eta : nonsquares(q)) {
      const auto n = appendix2_count(EtaMode::PerEta, q, eta);
      const auto m = appendix2_count(EtaMode::PerEta, q, eta, true);
      per[std::to_string(eta)] = n;
      swapped[std::to_string(eta)] = m;
      counts.insert(n);
      swapped_counts.insert(m);
    }
    row["per_eta"] = per;
    row["swapped"] = swapped;
    row["summed"] = appendix2_count(EtaMode::SummedOverNonsquares, q);
    row["eta_independent"] = counts.size() == 1;
    row["swapped_agrees"] = swapped_counts == counts;
    row["symbolic_at_q"] = to_string(nu_q(appendix2_symbolic(), Rational(q)));
    const bool good = counts == std::set<std::uint64_t>{expected};
    row["ok"] = good;
    ok = ok && good;
    out["primes"].push_back(row);
  }
  out["ok"] = ok;
  std::cout << out.dump(2) << "\n";
  return ok ? 0 : kExitCompare;
}

int cmd_oracle(const std::string& path, std::uint32_t prime, int precision, const std::string& field,
               const std::string& integrand, unsigned exponent, const oracle::OracleOptions& opts) {
  const fm::Formula phi = fm::parse(read_file(path));
  oracle::Integrand g;
  if (!integrand.empty()) {
    fm::ParseOptions po;
    for (const auto& v : phi.free_vars()) po.predeclared.push_back(v);
    g.f = fm::parse_vf_term(integrand, po);
    g.e = exponent;
  }
  json out;
  auto run = [&](const lf::LocalFieldSpec& f) { return json::parse(oracle::integrate(g, phi, f, opts).to_json()); };
  if (field == "qp") {
    out = run(lf::LocalFieldSpec::qp(prime, precision));
  } else if (field == "fpt") {
    out = run(lf::LocalFieldSpec::fpt(prime, precision));
  } else {
    out["qp"] = run(lf::LocalFieldSpec::qp(prime, precision));
    out["fpt"] = run(lf::LocalFieldSpec::fpt(prime, precision));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motivic integration calculator"};
  app.require_subcommand(1);

  std::string file, emit = "json", linear, params, primes_text, field = "qp", integrand;
  std::vector<std::string> files;
  int precision = 6;
  std::uint32_t prime = 0;
  unsigned exponent = 1, threads = 0;
  std::uint64_t budget = oracle::default_box_budget();
  bool both = false, table = false;

  auto* parse = app.add_subcommand("parse", "Parse a formula file and print its AST");
  parse->add_option("file", file, "formula file")->required()->check(CLI::ExistingFile);
  parse->add_option("--emit", emit, "json or pretty")->check(CLI::IsMember({"json", "pretty"}));

  auto* integrate = app.add_subcommand("integrate", "Integrate cell data or a product of linear factors");
  integrate->add_option("file", file, "cell file or .linprod.json")->check(CLI::ExistingFile);
  integrate->add_option("--linear-product", linear, "centers and multiplicities, e.g. 0:1,1:1,3:1");
  integrate->add_option("--param", params, "case selection and bindings, e.g. x:cube,k=0");

  auto* compare = app.add_subcommand("compare", "Check symbolic results against the oracle prime by prime");
  compare->add_option("files", files, "cell files and .linprod.json files")->check(CLI::ExistingFile);
  compare->add_option("--linear-product", linear, "centers and multiplicities");
  compare->add_option("--primes", primes_text, "comma-separated primes")->default_val("5,7,11,13");
  compare->add_option("--precision", precision, "oracle precision N")->check(CLI::PositiveNumber);
  compare->add_flag("--both-characteristics", both, "also run the F_p((t)) oracle");
  compare->add_flag("--table", table, "print a text table instead of JSON");

  auto* appendix2 = app.add_subcommand("appendix2", "Point counts for the SL2 volume computation");
  appendix2->add_option("--primes", primes_text, "comma-separated odd primes >= 5")->default_val("5,7,11,13,17");

  auto* orc = app.add_subcommand("oracle", "Volume or integral of a formula by box refinement");
  orc->add_option("file", file, "formula file")->required()->check(CLI::ExistingFile);
  orc->add_option("--prime", prime, "p")->required();
  orc->add_option("--precision", precision, "N")->check(CLI::PositiveNumber);
  orc->add_option("--field", field, "qp, fpt or both")->check(CLI::IsMember({"qp", "fpt", "both"}));
  orc->add_option("--integrand", integrand, "VF term f to integrate |f|^e");
  orc->add_option("--exponent", exponent, "e");

  for (auto* sub : {compare, orc}) {
    sub->add_option("--box-budget", budget, "maximum boxes per oracle run (default DPCALC_BOX_BUDGET or 1e8)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "oracle worker threads, 0 for all");
  }

  CLI11_PARSE(app, argc, argv);

  oracle::OracleOptions oo;
  oo.box_budget = budget;
  oo.threads = threads;
  try {
    if (*parse) {
      const fm::Formula f = fm::parse(read_file(file));
      if (emit == "pretty") {
        std::cout << fm::pretty_print(f) << "\n";
      } else {
        const json j{{"pretty", fm::pretty_print(f)}, {"ast", formula_json(f)}};
        std::cout << j.dump(2) << "\n";
      }
      return 0;
    }
    if (*integrate) return cmd_integrate(file, linear, params);
    if (*compare) {
      cmp::CompareOptions co;
      co.primes = parse_primes(primes_text);
      co.precision = precision;
      co.both_characteristics = both;
      co.oracle = oo;
      return cmd_compare(files, linear, co, table);
    }
    if (*appendix2) return cmd_appendix2(parse_primes(primes_text));
    if (*orc) {
      if (!is_prime(prime)) throw InvalidPrime(std::to_string(prime) + " is not prime");
      return cmd_oracle(file, prime, precision, field, integrand, exponent, oo);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
