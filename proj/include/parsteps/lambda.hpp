#pragma once

#include <memory>
#include <string>

#include "parsteps/errors.hpp"

namespace parsteps::lam {

// Immutable lambda terms with de Bruijn indices, so alpha-equivalence is
// structural equality. Terms built from CCG derivations are simply typed and
// always normalize.
struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  enum class Kind { Var, Const, Abs, App };
  Kind kind;
  int index = 0;      // Var
  std::string name;   // Const
  TermPtr sub;        // Abs body / App function
  TermPtr arg;        // App argument
};

TermPtr var(int index);
TermPtr constant(std::string name);
TermPtr abs(TermPtr body);
TermPtr app(TermPtr fun, TermPtr argument);

// Normal-order reduction to beta-normal form.
TermPtr beta_normalize(const TermPtr& t);

bool alpha_equal(const TermPtr& a, const TermPtr& b);

// Named rendering; constant application spines print as c(a1, a2).
std::string print_term(const TermPtr& t);

}  // namespace parsteps::lam
