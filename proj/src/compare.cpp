#include "dpcalc/compare.hpp"

#include <functional>
#include <sstream>

#include "json.hpp"

namespace dpcalc::cmp {

LinearProduct parse_linear_product(const std::string& spec) {
  LinearProduct lp;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    try {
      lp.centers.push_back(parse_rational(item.substr(0, colon)));
      lp.multiplicities.push_back(colon == std::string::npos ? 1u
                                                             : static_cast<unsigned>(std::stoul(item.substr(colon + 1))));
    } catch (const std::logic_error&) {
      throw SyntaxError("bad linear factor '" + item + "' (expected center:multiplicity)", 1, 1);
    }
  }
  if (lp.centers.empty()) throw SyntaxError("empty linear product", 1, 1);
  return lp;
}

LinearProduct read_linear_product(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CellFormatError(std::string("invalid JSON: ") + e.what());
  }
  LinearProduct lp;
  try {
    for (const auto& c : j.at("centers"))
      lp.centers.push_back(parse_rational(c.is_string() ? c.get<std::string>() : std::to_string(c.get<long long>())));
    if (j.contains("multiplicities")) {
      for (const auto& m : j["multiplicities"]) lp.multiplicities.push_back(m.get<unsigned>());
    } else {
      lp.multiplicities.assign(lp.centers.size(), 1);
    }
    lp.exponent = j.value("exponent", 1u);
    if (j.contains("claim")) lp.claim = SymA::parse(j["claim"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw CellFormatError(std::string("linear product: ") + e.what());
  }
  return lp;
}

fm::TermPtr linear_product_term(const LinearProduct& lp) {
  std::string text;
  for (std::size_t j = 0; j < lp.centers.size(); ++j) {
    if (j) text += " * ";
    text += "(t - (" + lp.centers[j].get_str() + "))^" + std::to_string(lp.multiplicities[j]);
  }
  fm::ParseOptions po;
  po.predeclared.push_back({"t", fm::Sort::VF});
  return fm::parse_vf_term(text, po);
}

oracle::VolumeInterval linear_product_oracle(const LinearProduct& lp, const lf::LocalFieldSpec& field,
                                             const oracle::OracleOptions& opts) {
  const fm::Formula all = fm::parse("vf t; true");
  return oracle::integrate(oracle::Integrand{linear_product_term(lp), lp.exponent}, all, field, opts);
}

oracle::VolumeInterval case_oracle(const mot::CellFile& file, const mot::CellCase& c, const pres::Assignment& zz,
                                   const lf::LocalFieldSpec& field, const oracle::OracleOptions& opts) {
  const fm::Formula dom = fm::parse(c.domain);
  oracle::OracleOptions o = opts;
  for (const auto& [name, w] : c.vf) o.fixed.insert_or_assign(name, mot::witness_value(w, zz, field));
  oracle::Integrand g;
  if (!file.integrand.empty()) {
    fm::ParseOptions po;
    po.predeclared.push_back({file.variable, fm::Sort::VF});
    g.f = fm::parse_vf_term(file.integrand, po);
    g.e = file.exponent;
  }
  return oracle::integrate(g, dom, field, o);
}

Rational case_value(const mot::CellFile& file, const mot::CellCase& c, const mot::IntegrationResult& r,
                    const pres::Assignment& zz, std::uint32_t q) {
  (void)file;
  mot::ParamValues pv;
  pv.zz = zz;
  for (const auto& [name, v] : c.rf) {
    const Rational x = v;
    mpz_class den = x.get_den() % q, inv;
    if (den == 0) throw BadPrime("parameter " + name + " has a denominator divisible by " + std::to_string(q));
    mpz_invert(inv.get_mpz_t(), den.get_mpz_t(), mpz_class(q).get_mpz_t());
    mpz_class val = (x.get_num() * inv) % q;
    if (val < 0) val += q;
    pv.rf[name] = static_cast<std::uint32_t>(val.get_ui());
  }
  return mot::specialize(r.value, q, pv, r.bad_prime_set());
}

namespace {

void run_oracles(Row& row, const std::function<oracle::VolumeInterval(const lf::LocalFieldSpec&)>& run,
                 const CompareOptions& opts) {
  row.qp = run(lf::LocalFieldSpec::qp(row.prime, row.precision));
  row.contained = row.qp->contains(row.symbolic);
  if (opts.both_characteristics) {
    row.fpt = run(lf::LocalFieldSpec::fpt(row.prime, row.precision));
    row.contained = row.contained && row.fpt->contains(row.symbolic);
  }
}

}  // namespace

std::vector<Row> compare_linear_product(const LinearProduct& lp, const CompareOptions& opts) {
  const mot::IntegrationResult r = mot::integrate_linear_product(lp.centers, lp.multiplicities, lp.exponent);
  const SymA value = lp.claim ? *lp.claim : *r.value.as_symbolic();
  const auto bad = r.bad_prime_set();
  std::vector<Row> rows;
  for (auto p : opts.primes) {
    Row row;
    row.label = "linear product";
    row.prime = p;
    row.precision = opts.precision;
    if (bad.count(p)) {
      row.skipped = true;
      rows.push_back(row);
      continue;
    }
    row.symbolic = nu_q(value, Rational(p));
    run_oracles(row, [&](const lf::LocalFieldSpec& f) { return linear_product_oracle(lp, f, opts.oracle); }, opts);
    rows.push_back(row);
  }
  return rows;
}

std::vector<Row> compare_cell_file(const mot::CellFile& file, const CompareOptions& opts) {
  std::vector<Row> rows;
  for (const auto& c : file.cases) {
    const mot::IntegrationResult r = mot::integrate_cells(file.cells_of(c), file.options());
    const auto bad = r.bad_prime_set();
    const std::vector<pres::Assignment> checks = c.checks.empty() ? std::vector<pres::Assignment>{{}} : c.checks;
    for (const auto& zz : checks) {
      if (!c.zz_domain.vars.empty() && !c.zz_domain.contains(zz))
        throw std::invalid_argument("case " + c.name + ": check outside the parameter domain");
      std::string label = c.name;
      for (const auto& [k, v] : zz) label += " " + k + "=" + std::to_string(v);
      for (auto p : opts.primes) {
        Row row;
        row.label = label;
        row.prime = p;
        row.precision = opts.precision + static_cast<int>(c.precision_offset.eval(zz));
        if (bad.count(p)) {
          row.skipped = true;
          rows.push_back(row);
          continue;
        }
        row.symbolic = case_value(file, c, r, zz, p);
        run_oracles(row, [&](const lf::LocalFieldSpec& f) { return case_oracle(file, c, zz, f, opts.oracle); }, opts);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace dpcalc::cmp
