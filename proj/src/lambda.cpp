#include "parsteps/lambda.hpp"

#include <vector>

namespace parsteps::lam {

TermPtr var(int index) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Var;
  t->index = index;
  return t;
}

TermPtr constant(std::string name) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Const;
  t->name = std::move(name);
  return t;
}

TermPtr abs(TermPtr body) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Abs;
  t->sub = std::move(body);
  return t;
}

TermPtr app(TermPtr fun, TermPtr argument) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::App;
  t->sub = std::move(fun);
  t->arg = std::move(argument);
  return t;
}

namespace {

// Shift free variables >= cutoff by d.
TermPtr shift(const TermPtr& t, int d, int cutoff) {
  switch (t->kind) {
    case Term::Kind::Var:
      return t->index >= cutoff ? var(t->index + d) : t;
    case Term::Kind::Const:
      return t;
    case Term::Kind::Abs:
      return abs(shift(t->sub, d, cutoff + 1));
    case Term::Kind::App:
      return app(shift(t->sub, d, cutoff), shift(t->arg, d, cutoff));
  }
  return t;
}

// Substitute s for variable j in t.
TermPtr subst(const TermPtr& t, int j, const TermPtr& s) {
  switch (t->kind) {
    case Term::Kind::Var:
      if (t->index == j) return s;
      return t->index > j ? var(t->index - 1) : t;
    case Term::Kind::Const:
      return t;
    case Term::Kind::Abs:
      return abs(subst(t->sub, j + 1, shift(s, 1, 0)));
    case Term::Kind::App:
      return app(subst(t->sub, j, s), subst(t->arg, j, s));
  }
  return t;
}

constexpr int kMaxSteps = 1000000;

TermPtr normalize(const TermPtr& t, int& budget) {
  if (--budget < 0) throw NumericalError("beta reduction budget exceeded");
  switch (t->kind) {
    case Term::Kind::Var:
    case Term::Kind::Const:
      return t;
    case Term::Kind::Abs:
      return abs(normalize(t->sub, budget));
    case Term::Kind::App: {
      TermPtr f = normalize(t->sub, budget);
      if (f->kind == Term::Kind::Abs) {
        return normalize(subst(f->sub, 0, t->arg), budget);
      }
      return app(f, normalize(t->arg, budget));
    }
  }
  return t;
}

}  // namespace

TermPtr beta_normalize(const TermPtr& t) {
  int budget = kMaxSteps;
  return normalize(t, budget);
}

bool alpha_equal(const TermPtr& a, const TermPtr& b) {
  if (a == b) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Term::Kind::Var:
      return a->index == b->index;
    case Term::Kind::Const:
      return a->name == b->name;
    case Term::Kind::Abs:
      return alpha_equal(a->sub, b->sub);
    case Term::Kind::App:
      return alpha_equal(a->sub, b->sub) && alpha_equal(a->arg, b->arg);
  }
  return false;
}

namespace {

std::string binder_name(int depth) {
  static const char* names[] = {"x", "y", "z", "p", "q", "r", "s", "t"};
  if (depth < 8) return names[depth];
  return "v" + std::to_string(depth);
}

std::string print_rec(const TermPtr& t, int depth, bool parens_app) {
  switch (t->kind) {
    case Term::Kind::Var: {
      int binder = depth - 1 - t->index;
      return binder >= 0 ? binder_name(binder) : "#" + std::to_string(t->index);
    }
    case Term::Kind::Const:
      return t->name;
    case Term::Kind::Abs: {
      std::string body = print_rec(t->sub, depth + 1, false);
      std::string s = "\\" + binder_name(depth) + "." + body;
      return parens_app ? "(" + s + ")" : s;
    }
    case Term::Kind::App: {
      // collect the application spine
      std::vector<const TermPtr*> args;
      const TermPtr* head = &t;
      while ((*head)->kind == Term::Kind::App) {
        args.push_back(&(*head)->arg);
        head = &(*head)->sub;
      }
      std::string s = print_rec(*head, depth, true);
      s += "(";
      for (auto it = args.rbegin(); it != args.rend(); ++it) {
        if (it != args.rbegin()) s += ",";
        s += print_rec(**it, depth, false);
      }
      s += ")";
      return s;
    }
  }
  return "?";
}

}  // namespace

std::string print_term(const TermPtr& t) { return print_rec(t, 0, false); }

}  // namespace parsteps::lam
