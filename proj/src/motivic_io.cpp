#include "dpcalc/motivic.hpp"

#include "json.hpp"

namespace dpcalc::mot {

using nlohmann::json;
using nlohmann::ordered_json;
using pres::PresValue;

namespace {

fm::Sort sort_from(const std::string& s) {
  if (s == "vf") return fm::Sort::VF;
  if (s == "rf") return fm::Sort::RF;
  if (s == "zz") return fm::Sort::ZZ;
  throw CellFormatError("unknown sort '" + s + "'");
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw CellFormatError(where + ": missing field '" + key + "'");
  return j.at(key);
}

std::string str_of(const json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw CellFormatError(where + ": expected a string");
}

// "L^(affine)", "<SymA>", "<SymA> * L^(affine)"
PresValue parse_psi_term(std::string s, const std::string& where) {
  auto trim = [](std::string x) {
    x.erase(0, x.find_first_not_of(" \t"));
    x.erase(x.find_last_not_of(" \t") + 1);
    return x;
  };
  s = trim(s);
  auto exp_part = [&](const std::string& t) -> std::optional<pres::AffineForm> {
    const std::string u = trim(t);
    if (u.rfind("L^(", 0) != 0 || u.back() != ')') return std::nullopt;
    const std::string inner = u.substr(3, u.size() - 4);
    for (char ch : inner)
      if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return pres::AffineForm::parse(inner);
    return std::nullopt;
  };
  try {
    if (auto e = exp_part(s)) return PresValue(SymA(1), *e);
    int depth = 0;
    for (std::size_t i = s.size(); i-- > 0;) {
      if (s[i] == ')') ++depth;
      if (s[i] == '(') --depth;
      if (depth == 0 && s[i] == '*') {
        if (auto e = exp_part(s.substr(i + 1))) return PresValue(SymA::parse(s.substr(0, i)), *e);
        break;
      }
    }
    return PresValue(SymA::parse(s));
  } catch (const SyntaxError& e) {
    throw CellFormatError(where + ": bad coefficient '" + s + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CellFormatError(where + ": bad coefficient '" + s + "': " + e.what());
  }
}

PresValue parse_psi(const json& j, const std::string& where) {
  if (j.is_array()) {
    PresValue out;
    for (const auto& t : j) out = out + parse_psi_term(str_of(t, where), where);
    return out;
  }
  return parse_psi_term(str_of(j, where), where);
}

json psi_to_json(const PresValue& v) {
  json arr = json::array();
  for (const auto& [lin, c] : v.terms()) {
    std::string s = "(" + c.str() + ")";
    if (!lin.is_constant() || lin.constant() != 0) s += " * L^(" + lin.str() + ")";
    arr.push_back(s);
  }
  return arr;
}

pres::PresDomain parse_zz_domain(const std::string& text, const std::vector<fm::Variable>& params) {
  fm::ParseOptions po;
  po.default_sort = fm::Sort::ZZ;
  po.predeclared = params;
  return parameter_domain(fm::parse(text, po), params);
}

}  // namespace

const CellCase& CellFile::find_case(const std::string& name) const {
  for (const auto& c : cases)
    if (c.name == name) return c;
  throw CellFormatError("no case named '" + name + "'");
}

std::vector<Cell> CellFile::cells_of(const CellCase& c) const {
  std::vector<Cell> out;
  for (const auto& id : c.cells) {
    bool found = false;
    for (const auto& cell : cells)
      if (cell.id == id) {
        out.push_back(cell);
        found = true;
      }
    if (!found) throw CellFormatError("case '" + c.name + "' names unknown cell '" + id + "'");
  }
  return out;
}

CellOptions CellFile::options() const {
  CellOptions o;
  o.parameters = parameters;
  o.variable = variable;
  return o;
}

CellFile read_cell_file(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw CellFormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CellFormatError("top level must be an object");
  CellFile f;
  if (j.contains("variable")) f.variable = j["variable"].get<std::string>();
  if (j.contains("integrand")) {
    const json& in = j["integrand"];
    if (in.is_string()) {
      f.integrand = in.get<std::string>();
    } else {
      f.integrand = str_of(need(in, "term", "integrand"), "integrand");
      if (in.contains("exponent")) f.exponent = in["exponent"].get<unsigned>();
    }
  }
  if (j.contains("parameters"))
    for (const auto& p : j["parameters"])
      f.parameters.push_back({need(p, "name", "parameter").get<std::string>(),
                              sort_from(need(p, "sort", "parameter").get<std::string>())});
  for (const auto& p : f.parameters)
    if (p.sort == fm::Sort::VF)
      throw CellFormatError("parameter " + p.name + ": valued-field parameters are fixed per case, not declared");

  for (const auto& c : need(j, "cells", "file")) {
    Cell cell;
    cell.id = str_of(need(c, "id", "cell"), "cell");
    const std::string where = "cell " + cell.id;
    const std::string kind = c.value("kind", std::string("one"));
    if (kind == "one" || kind == "OneCell") cell.kind = CellKind::OneCell;
    else if (kind == "zero" || kind == "ZeroCell") cell.kind = CellKind::ZeroCell;
    else throw CellFormatError(where + ": unknown kind '" + kind + "'");
    fm::ParseOptions po;
    po.default_sort = fm::Sort::RF;
    po.predeclared = f.parameters;
    cell.basis = fm::parse(str_of(need(c, "basis", where), where), po);
    cell.center = parse_center(str_of(need(c, "center", where), where), f.variable);
    if (c.contains("alpha")) cell.alpha = pres::AffineForm::parse(str_of(c["alpha"], where));
    if (c.contains("xi")) {
      fm::ParseOptions xo = po;
      xo.predeclared = cell.basis.free_vars();
      for (const auto& p : f.parameters) {
        bool have = false;
        for (const auto& v : xo.predeclared) have = have || v.name == p.name;
        if (!have) xo.predeclared.push_back(p);
      }
      const fm::Formula x = fm::parse("(" + str_of(c["xi"], where) + ") != 0", xo);
      cell.xi = x.root()->lhs;
      if (cell.xi->sort != fm::Sort::RF) throw CellFormatError(where + ": xi must be a residue-field term");
    }
    cell.psi = c.contains("psi") ? parse_psi(c["psi"], where) : PresValue(SymA(1));
    cell.presentation = c.value("presentation", std::string());
    f.cells.push_back(std::move(cell));
  }

  if (j.contains("cases")) {
    for (const auto& c : j["cases"]) {
      CellCase cc;
      cc.name = str_of(need(c, "name", "case"), "case");
      const std::string where = "case " + cc.name;
      cc.domain = c.value("domain", std::string("true"));
      if (c.contains("vf"))
        for (const auto& [name, w] : c["vf"].items()) {
          Witness wi;
          if (w.is_string() && w.get<std::string>() == "0") {
            wi.zero = true;
          } else if (w.is_object()) {
            wi.ord = pres::AffineForm::parse(str_of(need(w, "ord", where), where));
            wi.unit = parse_rational(str_of(w.value("unit", json("1")), where));
            if (wi.unit == 0) throw CellFormatError(where + ": witness unit must be nonzero");
          } else {
            throw CellFormatError(where + ": witness for " + name + " must be \"0\" or {ord, unit}");
          }
          cc.vf[name] = wi;
        }
      if (c.contains("rf"))
        for (const auto& [name, v] : c["rf"].items()) cc.rf[name] = parse_rational(str_of(v, where));
      if (c.contains("zz_domain")) cc.zz_domain = parse_zz_domain(str_of(c["zz_domain"], where), f.parameters);
      if (c.contains("checks"))
        for (const auto& ck : c["checks"]) {
          pres::Assignment a;
          for (const auto& [name, v] : ck.items()) a[name] = v.get<std::int64_t>();
          cc.checks.push_back(a);
        }
      if (c.contains("precision_offset")) cc.precision_offset = pres::AffineForm::parse(str_of(c["precision_offset"], where));
      for (const auto& id : need(c, "cells", where)) cc.cells.push_back(id.get<std::string>());
      f.cases.push_back(std::move(cc));
    }
  }
  for (const auto& c : f.cases) (void)f.cells_of(c);
  return f;
}

std::string write_cell_file(const CellFile& f) {
  ordered_json j;
  j["variable"] = f.variable;
  if (!f.integrand.empty()) j["integrand"] = {{"term", f.integrand}, {"exponent", f.exponent}};
  j["parameters"] = json::array();
  for (const auto& p : f.parameters) j["parameters"].push_back({{"name", p.name}, {"sort", fm::sort_name(p.sort)}});
  j["cells"] = json::array();
  for (const auto& c : f.cells) {
    ordered_json cj;
    cj["id"] = c.id;
    cj["kind"] = c.kind == CellKind::OneCell ? "one" : "zero";
    cj["basis"] = fm::pretty_print(c.basis);
    cj["center"] = c.center.text;
    std::set<std::string> names;
    for (const auto& v : c.basis.free_vars()) names.insert(v.name);
    for (const auto& p : f.parameters) names.insert(p.name);
    if (c.alpha) cj["alpha"] = c.alpha->str();
    if (c.xi) cj["xi"] = fm::print_term(c.xi, names);
    cj["psi"] = psi_to_json(c.psi);
    if (!c.presentation.empty()) cj["presentation"] = c.presentation;
    j["cells"].push_back(cj);
  }
  j["cases"] = json::array();
  for (const auto& c : f.cases) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["domain"] = c.domain;
    if (!c.vf.empty()) {
      ordered_json vf = ordered_json::object();
      for (const auto& [k, w] : c.vf) {
        if (w.zero) vf[k] = "0";
        else vf[k] = {{"ord", w.ord.str()}, {"unit", to_string(w.unit)}};
      }
      cj["vf"] = vf;
    }
    if (!c.rf.empty()) {
      ordered_json rf = ordered_json::object();
      for (const auto& [k, v] : c.rf) rf[k] = to_string(v);
      cj["rf"] = rf;
    }
    if (!c.zz_domain.vars.empty()) {
      std::string s;
      for (const auto& v : c.zz_domain.vars) {
        auto add = [&](const std::string& t) { s += (s.empty() ? "" : " && ") + t; };
        if (v.lower) add(v.name + " >= " + v.lower->str());
        if (v.upper) add(v.name + " <= " + v.upper->str());
        if (v.modulus != 1) add(v.name + " == " + std::to_string(v.residue) + " mod " + std::to_string(v.modulus));
      }
      cj["zz_domain"] = s;
    }
    if (!c.checks.empty()) {
      cj["checks"] = json::array();
      for (const auto& a : c.checks) cj["checks"].push_back(a);
    }
    if (!c.precision_offset.is_constant() || c.precision_offset.constant() != 0)
      cj["precision_offset"] = c.precision_offset.str();
    cj["cells"] = c.cells;
    j["cases"].push_back(cj);
  }
  return j.dump(2) + "\n";
}

lf::LFElem witness_value(const Witness& w, const pres::Assignment& zz, const lf::LocalFieldSpec& field) {
  if (w.zero) return lf::LFElem::zero(field);
  const std::int64_t v = w.ord.eval(zz);
  if (v < 0) throw std::invalid_argument("witness valuation must be nonnegative");
  lf::LFElem x = lf::embed_rational(w.unit, field);
  const lf::LFElem pi = lf::LFElem::uniformizer(field);
  for (std::int64_t i = 0; i < v; ++i) x = lf::mul(x, pi);
  return x;
}

}  // namespace dpcalc::mot
