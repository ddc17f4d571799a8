#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "parsteps/errors.hpp"
#include "parsteps/lambda.hpp"

namespace parsteps::ccg {

enum class Slash { Forward, Backward };

// Syntactic type: an atom (optionally with a [feature]) or a directional
// functor over two categories. Immutable; copies share structure.
class Category {
 public:
  Category() = default;
  static Category atom(std::string name, std::string feature = "");
  static Category functor(Category result, Slash slash, Category argument);

  bool is_atom() const;
  const std::string& atom_name() const;
  const std::string& feature() const;
  Category result() const;
  Slash slash() const;
  Category argument() const;

  // Exact structural equality, features included.
  friend bool operator==(const Category& a, const Category& b);
  friend bool operator!=(const Category& a, const Category& b) { return !(a == b); }

 private:
  struct Node;
  std::shared_ptr<const Node> node_;
};

enum class FeaturePolicy { Ignore, Exact };

// Structural comparison under the configured feature policy.
bool categories_match(const Category& a, const Category& b, FeaturePolicy policy);

struct SyntaxError : InputError {
  std::size_t offset;
  SyntaxError(const std::string& what, std::size_t off)
      : InputError(what + " at offset " + std::to_string(off)), offset(off) {}
};

struct EmptyCategory : InputError {
  EmptyCategory() : InputError("empty category") {}
};

// Grammar: cat := part (slash part)*, left-associative; part := atom | "(" cat ")".
// Atoms may carry one [feature].
Category parse_category(std::string_view s);

// Canonical form: functor subparts parenthesized, no outer parens, no spaces.
std::string print_category(const Category& c);

enum class Rule {
  Lexical,
  FwdApply,        // X/Y  Y    -> X
  BwdApply,        // Y    X\Y  -> X
  FwdCompose,      // X/Y  Y/Z  -> X/Z
  BwdCompose,      // Y\Z  X\Y  -> X\Z
  BwdCrossCompose, // Y/Z  X\Y  -> X/Z
  FwdTypeRaise,    // X -> T/(T\X)
  BwdTypeRaise,    // X -> T\(T/X)
  TypeChange,      // unary, per configured table
};

struct Combinator {
  Rule rule = Rule::Lexical;
  std::string tc_id;  // TypeChange only

  friend bool operator==(const Combinator&, const Combinator&) = default;
};

bool is_binary(Rule r);
bool is_unary(Rule r);
std::string rule_name(const Combinator& c);
Combinator rule_from_name(std::string_view name);  // InputError on unknown

// Unary type-change rules are not fixed by the formalism; they are supplied
// as configuration. Empty by default.
struct UnaryRule {
  Category from;
  Category to;
};
using UnaryRuleTable = std::map<std::string, UnaryRule>;

struct RuleMismatch : InputError {
  std::string expected;
  std::string got;
  std::string path;
  RuleMismatch(std::string expected_shape, std::string got_shape, std::string node_path)
      : InputError("rule mismatch at node [" + node_path + "]: expected " + expected_shape +
                   ", got " + got_shape),
        expected(std::move(expected_shape)),
        got(std::move(got_shape)),
        path(std::move(node_path)) {}
};

// Output category of a binary combinator; RuleMismatch when the inputs do not
// fit the schema.
Category combine(const Combinator& comb, const Category& left, const Category& right,
                 FeaturePolicy policy = FeaturePolicy::Ignore);

// X -> T/(T\X) (forward) or T\(T/X) (backward); the target T is explicit.
Category type_raise(Rule raise_rule, const Category& x, const Category& target);

// Derivation tree replayed from a parser's output. Internal nodes carry the
// category claimed by the file; validate() checks every claim.
struct Derivation {
  Category cat;
  Combinator comb;   // Lexical at leaves
  std::string word;  // leaves only
  std::vector<Derivation> children;

  bool is_leaf() const { return children.empty(); }
};

int leaf_count(const Derivation& d);
int node_count(const Derivation& d);  // unary + binary nodes, leaves excluded
std::vector<std::string> der_leaves(const Derivation& d);

// Checks that every internal node's category equals the output of its rule
// applied to its children. Throws RuleMismatch naming the first bad node.
void validate(const Derivation& d, const UnaryRuleTable& table = {},
              FeaturePolicy policy = FeaturePolicy::Ignore);

// Beta-normal semantics. Each leaf word w contributes a constant w'; lexical
// terms take their category's arguments in consumption order and hand them to
// the constant in reverse, which reproduces the usual predicate order.
lam::TermPtr semantics(const Derivation& d);

// One derivation per line, s-expressions:
//   (lex "CAT" word) | (u RULE "CAT" child) | (b RULE "CAT" left right)
Derivation parse_derivation(std::string_view line);
std::string emit_derivation(const Derivation& d);
std::vector<Derivation> read_derivation_file(std::istream& in);

}  // namespace parsteps::ccg
