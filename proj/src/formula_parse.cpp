#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include "dpcalc/errors.hpp"
#include "dpcalc/formula.hpp"
#include "formula_internal.hpp"

namespace dpcalc::fm {

std::string sort_name(Sort s) {
  switch (s) {
    case Sort::VF: return "vf";
    case Sort::RF: return "rf";
    case Sort::ZZ: return "zz";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// bad primes

void BadPrimes::add(std::uint64_t p, const std::string& reason) {
  std::lock_guard lk(mu_);
  auto& v = reasons_[p];
  if (std::find(v.begin(), v.end(), reason) == v.end()) v.push_back(reason);
}

void BadPrimes::merge(const BadPrimes& other) {
  if (&other == this) return;
  for (const auto& [p, rs] : other.snapshot())
    for (const auto& r : rs) add(p, r);
}

std::map<std::uint64_t, std::vector<std::string>> BadPrimes::snapshot() const {
  std::lock_guard lk(mu_);
  return reasons_;
}

std::set<std::uint64_t> BadPrimes::primes() const {
  std::lock_guard lk(mu_);
  std::set<std::uint64_t> out;
  for (const auto& [p, r] : reasons_) out.insert(p);
  return out;
}

// ---------------------------------------------------------------------------
// Formula

Formula::Formula() : Formula([] {
  auto n = std::make_shared<Node>();
  n->kind = FormKind::True;
  return NodePtr(n);
}(), {}) {}

Formula::Formula(NodePtr root, std::vector<Variable> free_vars)
    : root_(std::move(root)), free_(std::move(free_vars)), bad_(std::make_shared<BadPrimes>()) {}

std::optional<Sort> Formula::sort_of(const std::string& name) const {
  for (const auto& v : free_)
    if (v.name == name) return v.sort;
  std::optional<Sort> found;
  std::function<void(const NodePtr&)> walk = [&](const NodePtr& n) {
    if (n->kind == FormKind::Exists && n->var == name) found = n->var_sort;
    for (const auto& c : n->children) walk(c);
  };
  walk(root_);
  return found;
}

std::set<std::string> Formula::all_names() const {
  std::set<std::string> out;
  for (const auto& v : free_) out.insert(v.name);
  std::function<void(const NodePtr&)> walk = [&](const NodePtr& n) {
    if (n->kind == FormKind::Exists) out.insert(n->var);
    for (const auto& c : n->children) walk(c);
  };
  walk(root_);
  return out;
}

// ---------------------------------------------------------------------------
// lexer

namespace {

enum class Tok { Ident, Number, Sym, End };

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

const std::set<std::string> kKeywords = {"vf", "rf", "zz", "exists", "forall", "ord", "ac",
                                         "inf", "true", "false", "mod", "unif"};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') advance(1);
      continue;
    }
    const int l = line, cl = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Tok::Ident, std::string(s.substr(i, j - i)), l, cl});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({Tok::Number, std::string(s.substr(i, j - i)), l, cl});
      advance(j - i);
      continue;
    }
    static const char* two[] = {"&&", "||", "==", "!=", "<=", ">="};
    bool matched = false;
    for (const char* t : two)
      if (s.substr(i, 2) == t) {
        out.push_back({Tok::Sym, t, l, cl});
        advance(2);
        matched = true;
        break;
      }
    if (matched) continue;
    if (std::string_view("!(),;:.+-*/^<>").find(c) != std::string_view::npos) {
      out.push_back({Tok::Sym, std::string(1, c), l, cl});
      advance(1);
      continue;
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", l, cl);
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

// ---------------------------------------------------------------------------
// parser

struct Symbol {
  std::string name;
  std::optional<Sort> sort;
  bool bound = false;
};

class Parser {
 public:
  Parser(std::string_view src, const ParseOptions& opts) : toks_(lex(src)), opts_(opts) {
    for (const auto& v : opts.predeclared) declare(v.name, v.sort, toks_[0], /*from_text=*/false);
  }

  Formula run() {
    parse_decls();
    auto root = parse_or();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    check_free_vs_bound();
    infer();
    NodePtr typed = annotate_node(root);
    return Formula(typed, free_list());
  }

 private:
  using MTerm = std::shared_ptr<Term>;
  using MNode = std::shared_ptr<Node>;

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const ParseOptions& opts_;

  std::vector<Symbol> syms_;
  std::map<std::string, int> declared_;
  std::vector<int> declared_order_;   // text declarations
  std::vector<int> predeclared_order_;
  std::set<int> used_;
  std::map<std::string, int> undeclared_;
  std::vector<int> undeclared_order_;
  std::vector<std::pair<std::string, int>> scope_;
  std::map<const Term*, int> var_sym_;
  std::map<const Node*, int> bind_sym_;
  std::vector<const Node*> atoms_;
  std::map<std::string, Token> bound_names_;

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool is_sym(const std::string& s, std::size_t k = 0) const {
    return peek(k).kind == Tok::Sym && peek(k).text == s;
  }
  bool is_kw(const std::string& s, std::size_t k = 0) const {
    return peek(k).kind == Tok::Ident && peek(k).text == s;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, peek().line, peek().col); }
  void expect_sym(const std::string& s) {
    if (!is_sym(s)) fail("expected '" + s + "'" + (peek().kind == Tok::End ? " at end of input" : ", found '" + peek().text + "'"));
    ++pos_;
  }
  Span span_of(const Token& t) const { return {t.line, t.col}; }

  static std::optional<Sort> sort_kw(const std::string& s) {
    if (s == "vf") return Sort::VF;
    if (s == "rf") return Sort::RF;
    if (s == "zz") return Sort::ZZ;
    return std::nullopt;
  }

  void declare(const std::string& name, Sort s, const Token& at, bool from_text) {
    auto it = declared_.find(name);
    if (it != declared_.end()) {
      if (syms_[it->second].sort != s)
        throw SortError("variable '" + name + "' declared with sort " + sort_name(s) + " but already has sort " +
                        sort_name(*syms_[it->second].sort) + " (" + std::to_string(at.line) + ":" +
                        std::to_string(at.col) + ")");
      if (from_text && std::find(declared_order_.begin(), declared_order_.end(), it->second) == declared_order_.end()) {
        declared_order_.push_back(it->second);
        predeclared_order_.erase(std::remove(predeclared_order_.begin(), predeclared_order_.end(), it->second),
                                 predeclared_order_.end());
      }
      return;
    }
    const int id = static_cast<int>(syms_.size());
    syms_.push_back({name, s, false});
    declared_[name] = id;
    (from_text ? declared_order_ : predeclared_order_).push_back(id);
  }

  void parse_decls() {
    while (peek().kind == Tok::Ident && sort_kw(peek().text) && peek(1).kind == Tok::Ident) {
      const Sort s = *sort_kw(peek().text);
      ++pos_;
      for (;;) {
        if (peek().kind != Tok::Ident || kKeywords.count(peek().text)) fail("expected variable name");
        declare(peek().text, s, peek(), true);
        ++pos_;
        if (is_sym(",")) {
          ++pos_;
          continue;
        }
        break;
      }
      expect_sym(";");
    }
  }

  // formulas ---------------------------------------------------------------

  static MNode make_node(FormKind k, Span sp) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->span = sp;
    return n;
  }

  MNode parse_or() {
    const Span sp = span_of(peek());
    std::vector<NodePtr> parts{parse_and()};
    while (is_sym("||")) {
      ++pos_;
      parts.push_back(parse_and());
    }
    if (parts.size() == 1) return std::const_pointer_cast<Node>(parts[0]);
    auto n = make_node(FormKind::Or, sp);
    for (auto& p : parts) {
      if (p->kind == FormKind::Or)
        n->children.insert(n->children.end(), p->children.begin(), p->children.end());
      else
        n->children.push_back(p);
    }
    return n;
  }

  MNode parse_and() {
    const Span sp = span_of(peek());
    std::vector<NodePtr> parts{parse_unary()};
    while (is_sym("&&")) {
      ++pos_;
      parts.push_back(parse_unary());
    }
    if (parts.size() == 1) return std::const_pointer_cast<Node>(parts[0]);
    auto n = make_node(FormKind::And, sp);
    for (auto& p : parts) {
      if (p->kind == FormKind::And)
        n->children.insert(n->children.end(), p->children.begin(), p->children.end());
      else
        n->children.push_back(p);
    }
    return n;
  }

  MNode parse_unary() {
    const Token start = peek();
    if (is_sym("!")) {
      ++pos_;
      auto n = make_node(FormKind::Not, span_of(start));
      n->children.push_back(parse_unary());
      return n;
    }
    if (is_kw("exists") || is_kw("forall")) return parse_quant();
    if (is_kw("true") || is_kw("false")) {
      ++pos_;
      return make_node(start.text == "true" ? FormKind::True : FormKind::False, span_of(start));
    }
    if (is_sym("(") && paren_holds_formula()) {
      ++pos_;
      auto n = parse_or();
      expect_sym(")");
      return n;
    }
    return parse_atom();
  }

  // Looks inside the parenthesis at pos_ for a token that can only occur in a formula.
  bool paren_holds_formula() const {
    int depth = 0;
    for (std::size_t k = pos_; k < toks_.size(); ++k) {
      const Token& t = toks_[k];
      if (t.kind == Tok::End) return false;
      if (t.kind == Tok::Sym && t.text == "(") ++depth;
      if (t.kind == Tok::Sym && t.text == ")") {
        if (--depth == 0) return false;
      }
      if (depth >= 1) {
        if (t.kind == Tok::Sym && (t.text == "&&" || t.text == "||" || t.text == "!" || t.text == "==" ||
                                   t.text == "!=" || t.text == "<=" || t.text == ">=" || t.text == "<" || t.text == ">"))
          return true;
        if (t.kind == Tok::Ident && (t.text == "exists" || t.text == "forall" || t.text == "true" ||
                                     t.text == "false" || t.text == "mod"))
          return true;
      }
    }
    return false;
  }

  MNode parse_quant() {
    const Token start = peek();
    const bool forall = start.text == "forall";
    ++pos_;
    if (peek().kind != Tok::Ident || kKeywords.count(peek().text)) fail("expected bound variable name");
    const Token vt = peek();
    const std::string name = vt.text;
    ++pos_;
    std::optional<Sort> s;
    if (is_sym(":")) {
      ++pos_;
      if (peek().kind != Tok::Ident || !sort_kw(peek().text)) fail("expected sort vf, rf or zz");
      s = sort_kw(peek().text);
      ++pos_;
    }
    expect_sym(".");
    for (const auto& [n, id] : scope_)
      if (n == name) throw SortError("bound variable '" + name + "' shadows an enclosing binding");
    if (declared_.count(name)) throw SortError("bound variable '" + name + "' shadows a free variable");
    const int id = static_cast<int>(syms_.size());
    syms_.push_back({name, s, true});
    bound_names_.emplace(name, vt);
    scope_.emplace_back(name, id);
    MNode body = parse_or();
    scope_.pop_back();
    auto ex = make_node(FormKind::Exists, span_of(start));
    ex->var = name;
    bind_sym_[ex.get()] = id;
    if (!forall) {
      ex->children.push_back(body);
      return ex;
    }
    auto inner = make_node(FormKind::Not, span_of(start));
    inner->children.push_back(body);
    ex->children.push_back(inner);
    auto outer = make_node(FormKind::Not, span_of(start));
    outer->children.push_back(ex);
    return outer;
  }

  MNode parse_atom() {
    const Token start = peek();
    MTerm lhs = parse_sum();
    Rel rel;
    if (is_sym("=="))
      rel = Rel::Eq;
    else if (is_sym("!="))
      rel = Rel::Ne;
    else if (is_sym("<="))
      rel = Rel::Le;
    else if (is_sym("<"))
      rel = Rel::Lt;
    else if (is_sym(">="))
      rel = Rel::Ge;
    else if (is_sym(">"))
      rel = Rel::Gt;
    else
      fail(peek().kind == Tok::End ? "expected a relation at end of input" : "expected a relation, found '" + peek().text + "'");
    ++pos_;
    MTerm rhs = parse_sum();
    auto n = make_node(FormKind::Atom, span_of(start));
    n->rel = rel;
    n->lhs = lhs;
    n->rhs = rhs;
    if (is_kw("mod")) {
      if (rel != Rel::Eq) fail("'mod' only follows '=='");
      ++pos_;
      if (peek().kind != Tok::Number) fail("expected a positive modulus");
      n->modulus = std::stoll(peek().text);
      if (n->modulus <= 0) fail("modulus must be positive");
      ++pos_;
      n->rel = Rel::Congruent;
    }
    atoms_.push_back(n.get());
    return n;
  }

  // terms ------------------------------------------------------------------

  static MTerm make_term(TermKind k, Span sp, std::vector<TermPtr> args = {}) {
    auto t = std::make_shared<Term>();
    t->kind = k;
    t->span = sp;
    t->args = std::move(args);
    return t;
  }

  MTerm parse_sum() {
    MTerm a = parse_product();
    while (is_sym("+") || is_sym("-")) {
      const Token op = peek();
      ++pos_;
      MTerm b = parse_product();
      a = make_term(op.text == "+" ? TermKind::Add : TermKind::Sub, a->span, {a, b});
    }
    return a;
  }

  MTerm parse_product() {
    MTerm a = parse_neg();
    while (is_sym("*") || is_sym("/")) {
      const Token op = peek();
      ++pos_;
      MTerm b = parse_neg();
      if (op.text == "/" && a->kind == TermKind::Const && b->kind == TermKind::Const) {
        if (b->value == 0) throw SyntaxError("division by zero", op.line, op.col);
        auto c = make_term(TermKind::Const, a->span);
        c->value = a->value / b->value;
        a = c;
        continue;
      }
      a = make_term(op.text == "*" ? TermKind::Mul : TermKind::Div, a->span, {a, b});
    }
    return a;
  }

  MTerm parse_neg() {
    if (is_sym("-")) {
      const Token m = peek();
      ++pos_;
      if (peek().kind == Tok::Number && !is_sym("^", 1)) {
        auto c = make_term(TermKind::Const, span_of(m));
        c->value = -Rational(Integer(peek().text));
        ++pos_;
        return c;
      }
      return make_term(TermKind::Neg, span_of(m), {parse_neg()});
    }
    return parse_pow();
  }

  MTerm parse_pow() {
    MTerm base = parse_primary();
    if (is_sym("^")) {
      ++pos_;
      if (peek().kind != Tok::Number) fail("expected a natural exponent");
      auto p = make_term(TermKind::Pow, base->span, {base});
      const unsigned long e = std::stoul(peek().text);
      if (e > 1000) fail("exponent too large");
      p->exponent = static_cast<unsigned>(e);
      ++pos_;
      return p;
    }
    return base;
  }

  MTerm parse_primary() {
    const Token t = peek();
    if (t.kind == Tok::Number) {
      ++pos_;
      auto c = make_term(TermKind::Const, span_of(t));
      c->value = Rational(Integer(t.text));
      return c;
    }
    if (is_sym("(")) {
      ++pos_;
      MTerm inner = parse_sum();
      expect_sym(")");
      return inner;
    }
    if (t.kind == Tok::Ident) {
      if (t.text == "ord" || t.text == "ac") {
        ++pos_;
        expect_sym("(");
        MTerm arg = parse_sum();
        expect_sym(")");
        return make_term(t.text == "ord" ? TermKind::Ord : TermKind::Ac, span_of(t), {arg});
      }
      if (t.text == "inf") {
        ++pos_;
        return make_term(TermKind::Inf, span_of(t));
      }
      if (t.text == "unif") {
        ++pos_;
        return make_term(TermKind::Unif, span_of(t));
      }
      if (kKeywords.count(t.text)) fail("unexpected keyword '" + t.text + "'");
      ++pos_;
      const int id = lookup(t.text);
      if (id < 0) return make_term(TermKind::Unif, span_of(t));
      auto v = make_term(TermKind::Var, span_of(t));
      v->name = t.text;
      var_sym_[v.get()] = id;
      return v;
    }
    fail(t.kind == Tok::End ? "unexpected end of input" : "unexpected '" + t.text + "'");
  }

  // Returns -1 for the uniformizer symbol `t`.
  int lookup(const std::string& name) {
    for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
      if (it->first == name) return it->second;
    if (auto it = declared_.find(name); it != declared_.end()) {
      used_.insert(it->second);
      return it->second;
    }
    if (name == "t") return -1;
    if (auto it = undeclared_.find(name); it != undeclared_.end()) return it->second;
    const int id = static_cast<int>(syms_.size());
    syms_.push_back({name, std::nullopt, false});
    undeclared_[name] = id;
    undeclared_order_.push_back(id);
    return id;
  }

  void check_free_vs_bound() const {
    for (const auto& [name, tok] : bound_names_)
      if (undeclared_.count(name))
        throw SortError("variable '" + name + "' is used both free and bound (" + std::to_string(tok.line) + ":" +
                        std::to_string(tok.col) + ")");
  }

  // sort inference ---------------------------------------------------------

  std::optional<Sort> known_sort(const TermPtr& t) const {
    switch (t->kind) {
      case TermKind::Var: return syms_[var_sym_.at(t.get())].sort;
      case TermKind::Unif:
      case TermKind::Div: return Sort::VF;
      case TermKind::Inf:
      case TermKind::Ord: return Sort::ZZ;
      case TermKind::Ac: return Sort::RF;
      case TermKind::Const: return std::nullopt;
      default:
        for (const auto& a : t->args)
          if (auto s = known_sort(a)) return s;
        return std::nullopt;
    }
  }

  bool constrain(const TermPtr& t, std::optional<Sort> s) {
    bool changed = false;
    switch (t->kind) {
      case TermKind::Var: {
        auto& sym = syms_[var_sym_.at(t.get())];
        if (s && !sym.sort) {
          sym.sort = s;
          changed = true;
        }
        break;
      }
      case TermKind::Ord:
      case TermKind::Ac: changed |= constrain(t->args[0], Sort::VF); break;
      case TermKind::Div:
        changed |= constrain(t->args[0], Sort::VF);
        changed |= constrain(t->args[1], Sort::VF);
        break;
      default:
        for (const auto& a : t->args) changed |= constrain(a, s);
    }
    return changed;
  }

  std::optional<Sort> atom_sort(const Node* n) const {
    if (n->rel == Rel::Congruent || n->rel == Rel::Le || n->rel == Rel::Lt || n->rel == Rel::Ge ||
        n->rel == Rel::Gt)
      return Sort::ZZ;
    if (auto s = known_sort(n->lhs)) return s;
    return known_sort(n->rhs);
  }

  void infer() {
    for (bool defaulted = false;;) {
      bool changed = true;
      while (changed) {
        changed = false;
        for (const Node* a : atoms_) {
          const auto s = atom_sort(a);
          changed |= constrain(a->lhs, s);
          changed |= constrain(a->rhs, s);
        }
      }
      if (defaulted) break;
      // Leave one unresolved symbol at a time to the default, then propagate again.
      bool any = false;
      for (auto& sym : syms_)
        if (!sym.sort) {
          sym.sort = opts_.default_sort;
          any = true;
          break;
        }
      if (!any) defaulted = true;
    }
  }

  // typed rebuild ----------------------------------------------------------

  [[noreturn]] void sort_error(const TermPtr& t, const std::string& msg) const {
    std::string who;
    std::function<void(const TermPtr&)> first_var = [&](const TermPtr& u) {
      if (!who.empty()) return;
      if (u->kind == TermKind::Var) who = u->name;
      for (const auto& a : u->args) first_var(a);
    };
    first_var(t);
    throw SortError((who.empty() ? std::string() : "variable '" + who + "': ") + msg + " (" +
                    std::to_string(t->span.line) + ":" + std::to_string(t->span.column) + ")");
  }

  // Integer constant expression: no variables, ord or inf.
  static bool ground(const TermPtr& t) {
    if (t->kind == TermKind::Var || t->kind == TermKind::Ord || t->kind == TermKind::Inf || t->kind == TermKind::Ac ||
        t->kind == TermKind::Unif)
      return false;
    return std::all_of(t->args.begin(), t->args.end(), [](const TermPtr& a) { return ground(a); });
  }

  TermPtr annotate(const TermPtr& t, Sort expected) const {
    auto out = std::make_shared<Term>(*t);
    out->sort = expected;
    const std::string exp = "expected sort " + sort_name(expected);
    switch (t->kind) {
      case TermKind::Var: {
        const Sort s = *syms_[var_sym_.at(t.get())].sort;
        if (s != expected)
          throw SortError("variable '" + t->name + "' has sort " + sort_name(s) + ", " + exp + " (" +
                          std::to_string(t->span.line) + ":" + std::to_string(t->span.column) + ")");
        break;
      }
      case TermKind::Unif:
        if (expected != Sort::VF) sort_error(t, "uniformizer used where " + exp);
        break;
      case TermKind::Inf:
        if (expected != Sort::ZZ) sort_error(t, "inf used where " + exp);
        break;
      case TermKind::Const:
        if (expected != Sort::VF && t->value.get_den() != 1)
          sort_error(t, "non-integer constant " + to_string(t->value) + " where " + exp);
        break;
      case TermKind::Ord:
        if (expected != Sort::ZZ) sort_error(t, "ord(...) is a ZZ term, " + exp);
        out->args[0] = annotate(t->args[0], Sort::VF);
        return out;
      case TermKind::Ac:
        if (expected != Sort::RF) sort_error(t, "ac(...) is an RF term, " + exp);
        out->args[0] = annotate(t->args[0], Sort::VF);
        return out;
      case TermKind::Div:
        if (expected != Sort::VF) sort_error(t, "division outside VF, " + exp);
        if (t->args[1]->kind != TermKind::Const || t->args[1]->value == 0)
          sort_error(t, "division only by a nonzero constant");
        break;
      case TermKind::Pow:
        if (expected == Sort::ZZ) sort_error(t, "no powers of ZZ terms, " + exp);
        break;
      case TermKind::Mul:
        if (expected == Sort::ZZ && !ground(t->args[0]) && !ground(t->args[1]))
          sort_error(t, "multiplication of ZZ terms is not allowed, " + exp);
        break;
      default: break;
    }
    for (auto& a : out->args) a = annotate(a, expected);
    return out;
  }

  NodePtr annotate_node(const NodePtr& n) const {
    auto out = std::make_shared<Node>(*n);
    switch (n->kind) {
      case FormKind::Atom: {
        const Sort s = atom_sort(n.get()).value_or(opts_.default_sort);
        out->lhs = annotate(n->lhs, s);
        out->rhs = annotate(n->rhs, s);
        return out;
      }
      case FormKind::Exists:
        out->var_sort = *syms_[bind_sym_.at(n.get())].sort;
        break;
      default: break;
    }
    for (auto& c : out->children) c = annotate_node(c);
    return out;
  }

  std::vector<Variable> free_list() const {
    std::vector<Variable> out;
    for (int id : declared_order_) out.push_back({syms_[id].name, *syms_[id].sort});
    for (int id : predeclared_order_)
      if (used_.count(id)) out.push_back({syms_[id].name, *syms_[id].sort});
    for (int id : undeclared_order_) out.push_back({syms_[id].name, *syms_[id].sort});
    return out;
  }
};

// ---------------------------------------------------------------------------
// printing

int term_prec(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Add:
    case TermKind::Sub: return 1;
    case TermKind::Mul:
    case TermKind::Div: return 2;
    case TermKind::Neg: return 3;
    case TermKind::Pow: return 4;
    case TermKind::Const: return t->value >= 0 && t->value.get_den() == 1 ? 5 : 0;
    default: return 5;
  }
}

std::string term_str(const TermPtr& t, int min_prec, const std::set<std::string>& names) {
  std::string s;
  switch (t->kind) {
    case TermKind::Var: s = t->name; break;
    case TermKind::Unif: s = names.count("t") ? "unif" : "t"; break;
    case TermKind::Inf: s = "inf"; break;
    case TermKind::Const: {
      s = t->value.get_den() == 1 ? t->value.get_num().get_str() : t->value.get_str();
      if (term_prec(t) == 0) return "(" + s + ")";
      break;
    }
    case TermKind::Add: s = term_str(t->args[0], 1, names) + " + " + term_str(t->args[1], 2, names); break;
    case TermKind::Sub: s = term_str(t->args[0], 1, names) + " - " + term_str(t->args[1], 2, names); break;
    case TermKind::Mul: s = term_str(t->args[0], 2, names) + "*" + term_str(t->args[1], 3, names); break;
    case TermKind::Div: s = term_str(t->args[0], 2, names) + "/" + term_str(t->args[1], 3, names); break;
    case TermKind::Neg: {
      const auto& a = t->args[0];
      s = "-" + (a->kind == TermKind::Const ? "(" + term_str(a, 0, names) + ")" : term_str(a, 3, names));
      break;
    }
    case TermKind::Pow: s = term_str(t->args[0], 5, names) + "^" + std::to_string(t->exponent); break;
    case TermKind::Ord: s = "ord(" + term_str(t->args[0], 0, names) + ")"; break;
    case TermKind::Ac: s = "ac(" + term_str(t->args[0], 0, names) + ")"; break;
  }
  if (term_prec(t) < min_prec) return "(" + s + ")";
  return s;
}

const char* rel_str(Rel r) {
  switch (r) {
    case Rel::Eq:
    case Rel::Congruent: return "==";
    case Rel::Ne: return "!=";
    case Rel::Le: return "<=";
    case Rel::Lt: return "<";
    case Rel::Ge: return ">=";
    case Rel::Gt: return ">";
  }
  return "?";
}

bool is_forall(const NodePtr& n) {
  return n->kind == FormKind::Not && n->children[0]->kind == FormKind::Exists &&
         n->children[0]->children[0]->kind == FormKind::Not;
}

enum class Ctx { Top, Conn };

std::string node_str(const NodePtr& n, Ctx ctx, const std::set<std::string>& names) {
  switch (n->kind) {
    case FormKind::True: return "true";
    case FormKind::False: return "false";
    case FormKind::Atom: {
      std::string s = term_str(n->lhs, 0, names) + " " + rel_str(n->rel) + " " + term_str(n->rhs, 0, names);
      if (n->rel == Rel::Congruent) s += " mod " + std::to_string(n->modulus);
      return s;
    }
    case FormKind::Not: {
      if (is_forall(n)) {
        const auto& ex = n->children[0];
        std::string s = "forall " + ex->var + ":" + sort_name(ex->var_sort) + ". " +
                        node_str(ex->children[0]->children[0], Ctx::Top, names);
        return ctx == Ctx::Conn ? "(" + s + ")" : s;
      }
      const auto& c = n->children[0];
      if (c->kind == FormKind::True || c->kind == FormKind::False || (c->kind == FormKind::Not && !is_forall(c)))
        return "!" + node_str(c, ctx, names);
      return "!(" + node_str(c, Ctx::Top, names) + ")";
    }
    case FormKind::And:
    case FormKind::Or: {
      std::string s;
      const bool is_and = n->kind == FormKind::And;
      for (std::size_t i = 0; i < n->children.size(); ++i) {
        if (i) s += is_and ? " && " : " || ";
        const auto& c = n->children[i];
        std::string cs = node_str(c, Ctx::Conn, names);
        if (is_and && c->kind == FormKind::Or) cs = "(" + cs + ")";
        s += cs;
      }
      return s;
    }
    case FormKind::Exists: {
      std::string s = "exists " + n->var + ":" + sort_name(n->var_sort) + ". " + node_str(n->children[0], Ctx::Top, names);
      return ctx == Ctx::Conn ? "(" + s + ")" : s;
    }
  }
  return "?";
}

}  // namespace

Formula parse(std::string_view src, const ParseOptions& opts) { return Parser(src, opts).run(); }

std::string print_term(const TermPtr& t, const std::set<std::string>& var_names) { return term_str(t, 0, var_names); }

std::string print_node(const NodePtr& n, const std::set<std::string>& var_names) {
  return node_str(n, Ctx::Top, var_names);
}

std::string pretty_print(const Formula& f) {
  const auto names = f.all_names();
  std::string out;
  const auto& fv = f.free_vars();
  for (std::size_t i = 0; i < fv.size();) {
    std::size_t j = i;
    out += sort_name(fv[i].sort) + " ";
    for (; j < fv.size() && fv[j].sort == fv[i].sort; ++j) out += (j > i ? ", " : "") + fv[j].name;
    out += "; ";
    i = j;
  }
  return out + node_str(f.root(), Ctx::Top, names);
}

// ---------------------------------------------------------------------------
// equality

bool equal(const TermPtr& a, const TermPtr& b) {
  if (a->kind != b->kind || a->sort != b->sort || a->name != b->name || a->value != b->value ||
      a->exponent != b->exponent || a->args.size() != b->args.size())
    return false;
  for (std::size_t i = 0; i < a->args.size(); ++i)
    if (!equal(a->args[i], b->args[i])) return false;
  return true;
}

bool equal(const NodePtr& a, const NodePtr& b) {
  if (a->kind != b->kind || a->children.size() != b->children.size()) return false;
  if (a->kind == FormKind::Atom &&
      (a->rel != b->rel || a->modulus != b->modulus || !equal(a->lhs, b->lhs) || !equal(a->rhs, b->rhs)))
    return false;
  if (a->kind == FormKind::Exists && (a->var != b->var || a->var_sort != b->var_sort)) return false;
  for (std::size_t i = 0; i < a->children.size(); ++i)
    if (!equal(a->children[i], b->children[i])) return false;
  return true;
}

bool equal(const Formula& a, const Formula& b) {
  if (a.free_vars().size() != b.free_vars().size()) return false;
  for (std::size_t i = 0; i < a.free_vars().size(); ++i)
    if (a.free_vars()[i].name != b.free_vars()[i].name || a.free_vars()[i].sort != b.free_vars()[i].sort)
      return false;
  return equal(a.root(), b.root());
}

// ---------------------------------------------------------------------------
// polynomial expansion and bad primes

namespace detail_fm {

detail::MPoly expand(const TermPtr& t, const std::map<std::string, std::size_t>& slots, std::size_t n,
                     const OpaqueFn& opaque) {
  using detail::MPoly;
  switch (t->kind) {
    case TermKind::Var: {
      auto it = slots.find(t->name);
      if (it == slots.end()) throw UnboundVariable("variable '" + t->name + "' has no slot");
      return MPoly::variable(n, it->second);
    }
    case TermKind::Unif: return MPoly::constant(n, UPoly::monomial(1, 1));
    case TermKind::Const: return MPoly::constant(n, UPoly::constant(t->value));
    case TermKind::Add: return expand(t->args[0], slots, n, opaque) + expand(t->args[1], slots, n, opaque);
    case TermKind::Sub: return expand(t->args[0], slots, n, opaque) - expand(t->args[1], slots, n, opaque);
    case TermKind::Mul: return expand(t->args[0], slots, n, opaque) * expand(t->args[1], slots, n, opaque);
    case TermKind::Neg: return -expand(t->args[0], slots, n, opaque);
    case TermKind::Div: return expand(t->args[0], slots, n, opaque).scaled(1 / t->args[1]->value);
    case TermKind::Pow: return expand(t->args[0], slots, n, opaque).pow(t->exponent);
    default:
      if (opaque) return opaque(t);
      throw UnsupportedFormula("term cannot be expanded as a polynomial");
  }
}

std::vector<std::uint64_t> prime_factors(Integer n) {
  std::vector<std::uint64_t> out;
  if (n < 0) n = -n;
  if (n <= 1) return out;
  for (unsigned long p = 2; p < 100000 && Integer(p) * p <= n; ++p) {
    if (mpz_divisible_ui_p(n.get_mpz_t(), p)) {
      out.push_back(p);
      while (mpz_divisible_ui_p(n.get_mpz_t(), p)) n /= p;
    }
  }
  if (n > 1 && n.fits_ulong_p()) out.push_back(n.get_ui());
  return out;
}

}  // namespace detail_fm

std::map<std::uint64_t, std::vector<std::string>> bad_primes(const Formula& f) {
  using detail_fm::expand;
  BadPrimes acc;
  acc.merge(f.bad_prime_log());
  std::map<std::string, std::size_t> slots;
  for (const auto& name : f.all_names()) slots.emplace(name, slots.size());
  const std::size_t n0 = slots.size();

  auto record = [&](const detail::MPoly& p) {
    for (const auto& [e, c] : p.terms)
      for (const auto& q : c.coeffs()) {
        if (q == 0) continue;
        for (auto pr : detail_fm::prime_factors(q.get_num()))
          if (q.get_num() != 1 && q.get_num() != -1)
            acc.add(pr, "coefficient " + to_string(q) + " not invertible");
        for (auto pr : detail_fm::prime_factors(q.get_den())) acc.add(pr, "coefficient denominator " + to_string(q));
      }
  };

  std::function<void(const NodePtr&)> walk = [&](const NodePtr& nd) {
    if (nd->kind == FormKind::Atom && nd->lhs->sort != Sort::ZZ) {
      // VF and RF atoms: opaque ac(...) gets a fresh slot, its argument is recorded too.
      std::size_t extra = 0;
      std::vector<TermPtr> inner;
      std::function<void(const TermPtr&)> count = [&](const TermPtr& t) {
        if (t->kind == TermKind::Ac || t->kind == TermKind::Ord) {
          ++extra;
          inner.push_back(t->args[0]);
          return;
        }
        for (const auto& a : t->args) count(a);
      };
      count(nd->lhs);
      count(nd->rhs);
      const std::size_t n = n0 + extra;
      std::size_t next = n0;
      detail_fm::OpaqueFn op = [&](const TermPtr&) { return detail::MPoly::variable(n, next++); };
      record(expand(nd->lhs, slots, n, op) - expand(nd->rhs, slots, n, op));
      for (const auto& a : inner) record(expand(a, slots, n, {}));
    } else if (nd->kind == FormKind::Atom) {
      std::function<void(const TermPtr&)> find = [&](const TermPtr& t) {
        if (t->kind == TermKind::Ord || t->kind == TermKind::Ac) {
          record(expand(t->args[0], slots, n0, {}));
          return;
        }
        for (const auto& a : t->args) find(a);
      };
      find(nd->lhs);
      find(nd->rhs);
    }
    for (const auto& c : nd->children) walk(c);
  };
  walk(f.root());
  return acc.snapshot();
}

}  // namespace dpcalc::fm

namespace dpcalc::fm {

TermPtr parse_vf_term(std::string_view src, const ParseOptions& opts) {
  ParseOptions o = opts;
  o.default_sort = Sort::VF;
  Formula f = parse("(" + std::string(src) + "\n) == 0", o);
  const auto& root = f.root();
  if (root->kind != FormKind::Atom || root->lhs->sort != Sort::VF)
    throw SortError("'" + std::string(src) + "' is not a VF term");
  return root->lhs;
}

std::vector<std::string> term_variables(const TermPtr& t) {
  std::vector<std::string> out;
  std::function<void(const TermPtr&)> walk = [&](const TermPtr& u) {
    if (u->kind == TermKind::Var && std::find(out.begin(), out.end(), u->name) == out.end()) out.push_back(u->name);
    for (const auto& a : u->args) walk(a);
  };
  walk(t);
  return out;
}

}  // namespace dpcalc::fm
