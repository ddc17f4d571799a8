#include "parsteps/ccg.hpp"

#include <istream>

namespace parsteps::ccg {

struct Category::Node {
  bool atom = true;
  std::string name;
  std::string feature;
  std::shared_ptr<const Node> result;
  Slash slash = Slash::Forward;
  std::shared_ptr<const Node> argument;
};

Category Category::atom(std::string name, std::string feature) {
  auto n = std::make_shared<Node>();
  n->name = std::move(name);
  n->feature = std::move(feature);
  Category c;
  c.node_ = std::move(n);
  return c;
}

Category Category::functor(Category result, Slash slash, Category argument) {
  auto n = std::make_shared<Node>();
  n->atom = false;
  n->result = std::move(result.node_);
  n->slash = slash;
  n->argument = std::move(argument.node_);
  Category c;
  c.node_ = std::move(n);
  return c;
}

bool Category::is_atom() const { return node_->atom; }
const std::string& Category::atom_name() const { return node_->name; }
const std::string& Category::feature() const { return node_->feature; }

Category Category::result() const {
  Category c;
  c.node_ = node_->result;
  return c;
}
Category Category::argument() const {
  Category c;
  c.node_ = node_->argument;
  return c;
}
Slash Category::slash() const { return node_->slash; }

namespace {

bool match_rec(const Category& a, const Category& b, FeaturePolicy policy) {
  if (a.is_atom() != b.is_atom()) return false;
  if (a.is_atom()) {
    if (a.atom_name() != b.atom_name()) return false;
    return policy == FeaturePolicy::Ignore || a.feature() == b.feature();
  }
  return a.slash() == b.slash() && match_rec(a.result(), b.result(), policy) &&
         match_rec(a.argument(), b.argument(), policy);
}

}  // namespace

bool operator==(const Category& a, const Category& b) {
  if (a.node_ == b.node_) return true;
  return match_rec(a, b, FeaturePolicy::Exact);
}

bool categories_match(const Category& a, const Category& b, FeaturePolicy policy) {
  return match_rec(a, b, policy);
}

namespace {

bool atom_char(char c) {
  return c != '(' && c != ')' && c != '/' && c != '\\' && c != '[' && c != ']' &&
         !(c == ' ' || c == '\t');
}

struct CatParser {
  std::string_view s;
  std::size_t pos = 0;

  Category parse_part() {
    if (pos >= s.size()) throw SyntaxError("expected category", pos);
    if (s[pos] == '(') {
      std::size_t open = pos++;
      Category c = parse_cat();
      if (pos >= s.size() || s[pos] != ')') throw SyntaxError("unclosed '('", open);
      ++pos;
      return c;
    }
    std::size_t start = pos;
    while (pos < s.size() && atom_char(s[pos])) ++pos;
    if (pos == start) throw SyntaxError("expected atom", pos);
    std::string name(s.substr(start, pos - start));
    std::string feature;
    if (pos < s.size() && s[pos] == '[') {
      std::size_t open = pos++;
      std::size_t fstart = pos;
      while (pos < s.size() && s[pos] != ']') ++pos;
      if (pos >= s.size()) throw SyntaxError("unclosed '['", open);
      feature = std::string(s.substr(fstart, pos - fstart));
      ++pos;
    }
    return Category::atom(std::move(name), std::move(feature));
  }

  Category parse_cat() {
    Category c = parse_part();
    while (pos < s.size() && (s[pos] == '/' || s[pos] == '\\')) {
      Slash slash = s[pos] == '/' ? Slash::Forward : Slash::Backward;
      ++pos;
      Category arg = parse_part();
      c = Category::functor(std::move(c), slash, std::move(arg));
    }
    return c;
  }
};

}  // namespace

Category parse_category(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  if (b == e) throw EmptyCategory();
  CatParser p{s.substr(0, e)};
  p.pos = b;
  Category c = p.parse_cat();
  if (p.pos != e) throw SyntaxError("unexpected character", p.pos);
  return c;
}

namespace {

void print_rec(const Category& c, bool wrap, std::string& out) {
  if (c.is_atom()) {
    out += c.atom_name();
    if (!c.feature().empty()) {
      out += '[';
      out += c.feature();
      out += ']';
    }
    return;
  }
  if (wrap) out += '(';
  print_rec(c.result(), true, out);
  out += c.slash() == Slash::Forward ? '/' : '\\';
  print_rec(c.argument(), true, out);
  if (wrap) out += ')';
}

}  // namespace

std::string print_category(const Category& c) {
  std::string out;
  print_rec(c, false, out);
  return out;
}

bool is_binary(Rule r) {
  switch (r) {
    case Rule::FwdApply:
    case Rule::BwdApply:
    case Rule::FwdCompose:
    case Rule::BwdCompose:
    case Rule::BwdCrossCompose:
      return true;
    default:
      return false;
  }
}

bool is_unary(Rule r) {
  return r == Rule::FwdTypeRaise || r == Rule::BwdTypeRaise || r == Rule::TypeChange;
}

std::string rule_name(const Combinator& c) {
  switch (c.rule) {
    case Rule::Lexical: return "lex";
    case Rule::FwdApply: return "fa";
    case Rule::BwdApply: return "ba";
    case Rule::FwdCompose: return "fc";
    case Rule::BwdCompose: return "bc";
    case Rule::BwdCrossCompose: return "bx";
    case Rule::FwdTypeRaise: return "ft";
    case Rule::BwdTypeRaise: return "bt";
    case Rule::TypeChange: return "tc:" + c.tc_id;
  }
  return "?";
}

Combinator rule_from_name(std::string_view name) {
  if (name == "lex") return {Rule::Lexical, ""};
  if (name == "fa") return {Rule::FwdApply, ""};
  if (name == "ba") return {Rule::BwdApply, ""};
  if (name == "fc") return {Rule::FwdCompose, ""};
  if (name == "bc") return {Rule::BwdCompose, ""};
  if (name == "bx") return {Rule::BwdCrossCompose, ""};
  if (name == "ft") return {Rule::FwdTypeRaise, ""};
  if (name == "bt") return {Rule::BwdTypeRaise, ""};
  if (name.substr(0, 3) == "tc:") return {Rule::TypeChange, std::string(name.substr(3))};
  throw InputError("unknown combinator rule '" + std::string(name) + "'");
}

namespace {

[[noreturn]] void mismatch(const std::string& expected, const Category& l, const Category* r,
                           const std::string& path) {
  std::string got = print_category(l);
  if (r) got += " + " + print_category(*r);
  throw RuleMismatch(expected, got, path);
}

}  // namespace

Category combine(const Combinator& comb, const Category& left, const Category& right,
                 FeaturePolicy policy) {
  switch (comb.rule) {
    case Rule::FwdApply:
      if (left.is_atom() || left.slash() != Slash::Forward ||
          !categories_match(left.argument(), right, policy))
        mismatch("X/Y + Y", left, &right, "");
      return left.result();
    case Rule::BwdApply:
      if (right.is_atom() || right.slash() != Slash::Backward ||
          !categories_match(right.argument(), left, policy))
        mismatch("Y + X\\Y", left, &right, "");
      return right.result();
    case Rule::FwdCompose:
      if (left.is_atom() || left.slash() != Slash::Forward || right.is_atom() ||
          right.slash() != Slash::Forward ||
          !categories_match(left.argument(), right.result(), policy))
        mismatch("X/Y + Y/Z", left, &right, "");
      return Category::functor(left.result(), Slash::Forward, right.argument());
    case Rule::BwdCompose:
      if (left.is_atom() || left.slash() != Slash::Backward || right.is_atom() ||
          right.slash() != Slash::Backward ||
          !categories_match(right.argument(), left.result(), policy))
        mismatch("Y\\Z + X\\Y", left, &right, "");
      return Category::functor(right.result(), Slash::Backward, left.argument());
    case Rule::BwdCrossCompose:
      if (left.is_atom() || left.slash() != Slash::Forward || right.is_atom() ||
          right.slash() != Slash::Backward ||
          !categories_match(right.argument(), left.result(), policy))
        mismatch("Y/Z + X\\Y", left, &right, "");
      return Category::functor(right.result(), Slash::Forward, left.argument());
    default:
      throw InputError("combine: rule '" + rule_name(comb) + "' is not binary");
  }
}

Category type_raise(Rule raise_rule, const Category& x, const Category& target) {
  if (raise_rule == Rule::FwdTypeRaise) {
    return Category::functor(target, Slash::Forward,
                             Category::functor(target, Slash::Backward, x));
  }
  if (raise_rule == Rule::BwdTypeRaise) {
    return Category::functor(target, Slash::Backward,
                             Category::functor(target, Slash::Forward, x));
  }
  throw InputError("type_raise: not a raise rule");
}

int leaf_count(const Derivation& d) {
  if (d.is_leaf()) return 1;
  int n = 0;
  for (const Derivation& c : d.children) n += leaf_count(c);
  return n;
}

int node_count(const Derivation& d) {
  if (d.is_leaf()) return 0;
  int n = 1;
  for (const Derivation& c : d.children) n += node_count(c);
  return n;
}

std::vector<std::string> der_leaves(const Derivation& d) {
  std::vector<std::string> out;
  auto walk = [&out](auto&& self, const Derivation& t) -> void {
    if (t.is_leaf()) {
      out.push_back(t.word);
      return;
    }
    for (const Derivation& c : t.children) self(self, c);
  };
  walk(walk, d);
  return out;
}

namespace {

// Claimed category of a forward raise must look like T/(T\X) over the child
// (mirrored for backward); the target T is read off the claim, never searched.
void check_raise(const Derivation& d, FeaturePolicy policy, const std::string& path) {
  Slash outer = d.comb.rule == Rule::FwdTypeRaise ? Slash::Forward : Slash::Backward;
  Slash inner = d.comb.rule == Rule::FwdTypeRaise ? Slash::Backward : Slash::Forward;
  const Category& c = d.cat;
  const char* shape = outer == Slash::Forward ? "T/(T\\X)" : "T\\(T/X)";
  if (c.is_atom() || c.slash() != outer || c.argument().is_atom() ||
      c.argument().slash() != inner ||
      !categories_match(c.result(), c.argument().result(), policy) ||
      !categories_match(c.argument().argument(), d.children[0].cat, policy)) {
    throw RuleMismatch(shape, print_category(c) + " over " + print_category(d.children[0].cat),
                       path);
  }
}

void validate_rec(const Derivation& d, const UnaryRuleTable& table, FeaturePolicy policy,
                  const std::string& path) {
  if (d.is_leaf()) {
    if (d.comb.rule != Rule::Lexical)
      throw RuleMismatch("lexical leaf", rule_name(d.comb), path);
    return;
  }
  if (d.comb.rule == Rule::Lexical)
    throw RuleMismatch("internal rule", "lex with children", path);
  std::size_t want = is_binary(d.comb.rule) ? 2 : 1;
  if (d.children.size() != want)
    throw RuleMismatch(std::to_string(want) + " children",
                       std::to_string(d.children.size()) + " children", path);
  for (std::size_t i = 0; i < d.children.size(); ++i)
    validate_rec(d.children[i], table, policy, path.empty() ? std::to_string(i)
                                                            : path + "." + std::to_string(i));
  if (is_binary(d.comb.rule)) {
    Category out;
    try {
      out = combine(d.comb, d.children[0].cat, d.children[1].cat, policy);
    } catch (const RuleMismatch& e) {
      throw RuleMismatch(e.expected, e.got, path);
    }
    if (!categories_match(out, d.cat, policy))
      throw RuleMismatch(print_category(out), print_category(d.cat), path);
    return;
  }
  if (d.comb.rule == Rule::TypeChange) {
    auto it = table.find(d.comb.tc_id);
    if (it == table.end())
      throw RuleMismatch("configured tc rule", "unknown id '" + d.comb.tc_id + "'", path);
    if (!categories_match(it->second.from, d.children[0].cat, policy) ||
        !categories_match(it->second.to, d.cat, policy))
      throw RuleMismatch(print_category(it->second.from) + " => " + print_category(it->second.to),
                         print_category(d.children[0].cat) + " => " + print_category(d.cat), path);
    return;
  }
  check_raise(d, policy, path);
}

}  // namespace

void validate(const Derivation& d, const UnaryRuleTable& table, FeaturePolicy policy) {
  validate_rec(d, table, policy, "");
}

namespace {

int category_arity(const Category& c) {
  int n = 0;
  Category p = c;
  while (!p.is_atom()) {
    ++n;
    p = p.result();
  }
  return n;
}

std::string lower_ascii(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

// \x1...\xk. w'(xk, ..., x1): arguments arrive in consumption order and the
// predicate receives them last-consumed first (subject before object).
lam::TermPtr lexical_term(const std::string& word, const Category& cat) {
  int k = category_arity(cat);
  lam::TermPtr t = lam::constant(lower_ascii(word) + "'");
  for (int i = 0; i < k; ++i) t = lam::app(t, lam::var(i));
  for (int i = 0; i < k; ++i) t = lam::abs(t);
  return t;
}

lam::TermPtr sem_rec(const Derivation& d) {
  if (d.is_leaf()) return lexical_term(d.word, d.cat);
  switch (d.comb.rule) {
    case Rule::FwdApply:
      return lam::app(sem_rec(d.children[0]), sem_rec(d.children[1]));
    case Rule::BwdApply:
      return lam::app(sem_rec(d.children[1]), sem_rec(d.children[0]));
    case Rule::FwdCompose:
      // \z. L(R z)
      return lam::abs(lam::app(sem_rec(d.children[0]), lam::app(sem_rec(d.children[1]), lam::var(0))));
    case Rule::BwdCompose:
    case Rule::BwdCrossCompose:
      // \z. R(L z)
      return lam::abs(lam::app(sem_rec(d.children[1]), lam::app(sem_rec(d.children[0]), lam::var(0))));
    case Rule::FwdTypeRaise:
    case Rule::BwdTypeRaise:
      // \p. p(child)
      return lam::abs(lam::app(lam::var(0), sem_rec(d.children[0])));
    case Rule::TypeChange:
      return sem_rec(d.children[0]);
    case Rule::Lexical:
      break;
  }
  throw InputError("semantics: malformed derivation");
}

}  // namespace

lam::TermPtr semantics(const Derivation& d) { return lam::beta_normalize(sem_rec(d)); }

namespace {

struct SexprParser {
  std::string_view s;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r')) ++pos;
  }

  std::string read_atom() {
    std::size_t start = pos;
    while (pos < s.size() && s[pos] != ' ' && s[pos] != '\t' && s[pos] != '(' && s[pos] != ')')
      ++pos;
    if (pos == start) throw SyntaxError("expected atom", pos);
    return std::string(s.substr(start, pos - start));
  }

  std::string read_quoted() {
    if (pos >= s.size() || s[pos] != '"') throw SyntaxError("expected quoted category", pos);
    std::size_t open = pos++;
    std::size_t start = pos;
    while (pos < s.size() && s[pos] != '"') ++pos;
    if (pos >= s.size()) throw SyntaxError("unclosed quote", open);
    std::string out(s.substr(start, pos - start));
    ++pos;
    return out;
  }

  Derivation parse_node() {
    skip_space();
    if (pos >= s.size() || s[pos] != '(') throw SyntaxError("expected '('", pos);
    std::size_t open = pos++;
    skip_space();
    std::string kw = read_atom();
    Derivation d;
    if (kw == "lex") {
      skip_space();
      d.cat = parse_category(read_quoted());
      skip_space();
      d.word = s[pos] == '"' ? read_quoted() : read_atom();
    } else if (kw == "u" || kw == "b") {
      skip_space();
      d.comb = rule_from_name(read_atom());
      bool unary = kw == "u";
      if (unary != is_unary(d.comb.rule))
        throw SyntaxError("arity tag does not match rule '" + rule_name(d.comb) + "'", open);
      skip_space();
      d.cat = parse_category(read_quoted());
      d.children.push_back(parse_node());
      if (!unary) d.children.push_back(parse_node());
    } else {
      throw SyntaxError("expected lex|u|b, got '" + kw + "'", open);
    }
    skip_space();
    if (pos >= s.size() || s[pos] != ')') throw SyntaxError("unclosed '('", open);
    ++pos;
    return d;
  }
};

}  // namespace

Derivation parse_derivation(std::string_view line) {
  SexprParser p{line};
  Derivation d = p.parse_node();
  p.skip_space();
  if (p.pos < line.size()) throw SyntaxError("trailing input", p.pos);
  return d;
}

std::string emit_derivation(const Derivation& d) {
  if (d.is_leaf()) return "(lex \"" + print_category(d.cat) + "\" " + d.word + ")";
  std::string out = d.children.size() == 1 ? "(u " : "(b ";
  out += rule_name(d.comb) + " \"" + print_category(d.cat) + "\"";
  for (const Derivation& c : d.children) out += " " + emit_derivation(c);
  out += ")";
  return out;
}

std::vector<Derivation> read_derivation_file(std::istream& in) {
  std::vector<Derivation> out;
  std::string line;
  while (std::getline(in, line)) {
    bool blank = true;
    for (char c : line) {
      if (c != ' ' && c != '\t' && c != '\r') blank = false;
    }
    if (blank) continue;
    out.push_back(parse_derivation(line));
  }
  return out;
}

}  // namespace parsteps::ccg
