#include "parsteps/ccg_strategies.hpp"

#include <utility>

namespace parsteps::ccg {

bool RevealConfig::is_adjunct(const Category& c) const {
  if (adjunct_test) return adjunct_test(c);
  return !c.is_atom() && c.slash() == Slash::Backward &&
         categories_match(c.result(), c.argument(), features);
}

namespace {

Derivation make_binary(Rule r, Category cat, Derivation left, Derivation right) {
  Derivation d;
  d.cat = std::move(cat);
  d.comb = {r, ""};
  d.children.push_back(std::move(left));
  d.children.push_back(std::move(right));
  return d;
}

Derivation make_unary(Rule r, Category cat, Derivation child) {
  Derivation d;
  d.cat = std::move(cat);
  d.comb = {r, ""};
  d.children.push_back(std::move(child));
  return d;
}

// ---- left-branching normal form -------------------------------------------

// Rewrites at one node; children are already in normal form. New intermediate
// nodes are renormalized recursively.
void leftify_at(Derivation& n, const RevealConfig& cfg);

Derivation leftified_binary(Rule r, Category cat, Derivation left, Derivation right,
                            const RevealConfig& cfg) {
  Derivation d = make_binary(r, std::move(cat), std::move(left), std::move(right));
  leftify_at(d, cfg);
  return d;
}

void leftify_at(Derivation& n, const RevealConfig& cfg) {
  for (;;) {
    if (n.children.size() != 2) return;
    Derivation& l = n.children[0];
    Derivation& r = n.children[1];
    // application into a right spine becomes composition:
    //   fa(A, fa(B, C)) => fa(fc(A, B), C)
    if (n.comb.rule == Rule::FwdApply && r.comb.rule == Rule::FwdApply &&
        !l.cat.is_atom() && !r.children[0].cat.is_atom()) {
      Category fc_cat =
          Category::functor(l.cat.result(), Slash::Forward, r.children[0].cat.argument());
      Derivation c = std::move(r.children[1]);
      Derivation newl = leftified_binary(Rule::FwdCompose, std::move(fc_cat), std::move(l),
                                         std::move(r.children[0]), cfg);
      n = make_binary(Rule::FwdApply, n.cat, std::move(newl), std::move(c));
      continue;
    }
    // composition chains associate left: fc(A, fc(B, C)) => fc(fc(A, B), C)
    if (n.comb.rule == Rule::FwdCompose && r.comb.rule == Rule::FwdCompose &&
        !l.cat.is_atom() && !r.children[0].cat.is_atom()) {
      Category fc_cat =
          Category::functor(l.cat.result(), Slash::Forward, r.children[0].cat.argument());
      Derivation c = std::move(r.children[1]);
      Derivation newl = leftified_binary(Rule::FwdCompose, std::move(fc_cat), std::move(l),
                                         std::move(r.children[0]), cfg);
      n = make_binary(Rule::FwdCompose, n.cat, std::move(newl), std::move(c));
      continue;
    }
    // type-raise the left argument of every backward application so the spine
    // composes as eagerly as possible; right adjuncts keep their gold BwdApply
    // site
    if (n.comb.rule == Rule::BwdApply && !cfg.is_adjunct(r.cat) && !r.cat.is_atom() &&
        r.cat.slash() == Slash::Backward) {
      Category raised = Category::functor(r.cat.result(), Slash::Forward, r.cat);
      Derivation ft_node = make_unary(Rule::FwdTypeRaise, std::move(raised), std::move(l));
      n = make_binary(Rule::FwdApply, n.cat, std::move(ft_node), std::move(r));
      continue;
    }
    return;
  }
}

Derivation leftify(const Derivation& d, const RevealConfig& cfg) {
  Derivation out;
  out.cat = d.cat;
  out.comb = d.comb;
  out.word = d.word;
  for (const Derivation& c : d.children) out.children.push_back(leftify(c, cfg));
  leftify_at(out, cfg);
  return out;
}

// ---- right-branching normal form -------------------------------------------

void rightify_at(Derivation& n, const RevealConfig& cfg);

Derivation rightified_binary(Rule r, Category cat, Derivation left, Derivation right,
                             const RevealConfig& cfg) {
  Derivation d = make_binary(r, std::move(cat), std::move(left), std::move(right));
  rightify_at(d, cfg);
  return d;
}

void rightify_at(Derivation& n, const RevealConfig& cfg) {
  for (;;) {
    if (n.children.size() != 2) return;
    Derivation& l = n.children[0];
    Derivation& r = n.children[1];
    // fa(fc(A, B), C) => fa(A, fa(B, C))
    if (n.comb.rule == Rule::FwdApply && l.comb.rule == Rule::FwdCompose &&
        !l.children[1].cat.is_atom()) {
      Category inner_cat = l.children[1].cat.result();
      Derivation a = std::move(l.children[0]);
      Derivation inner = rightified_binary(Rule::FwdApply, std::move(inner_cat),
                                           std::move(l.children[1]), std::move(r), cfg);
      n = make_binary(Rule::FwdApply, n.cat, std::move(a), std::move(inner));
      continue;
    }
    // fc(fc(A, B), C) => fc(A, fc(B, C))
    if (n.comb.rule == Rule::FwdCompose && l.comb.rule == Rule::FwdCompose &&
        !l.children[1].cat.is_atom() && !r.cat.is_atom()) {
      Category inner_cat = Category::functor(l.children[1].cat.result(), Slash::Forward,
                                             r.cat.argument());
      Derivation a = std::move(l.children[0]);
      Derivation inner = rightified_binary(Rule::FwdCompose, std::move(inner_cat),
                                           std::move(l.children[1]), std::move(r), cfg);
      n = make_binary(Rule::FwdCompose, n.cat, std::move(a), std::move(inner));
      continue;
    }
    // lower a raised argument: fa(ft(L), R) => ba(L, R)
    if (n.comb.rule == Rule::FwdApply && l.comb.rule == Rule::FwdTypeRaise) {
      Derivation child = std::move(l.children[0]);
      n = make_binary(Rule::BwdApply, n.cat, std::move(child), std::move(r));
      continue;
    }
    // ba(L, bt(R)) => fa(L, R)
    if (n.comb.rule == Rule::BwdApply && r.comb.rule == Rule::BwdTypeRaise) {
      Derivation child = std::move(r.children[0]);
      n = make_binary(Rule::FwdApply, n.cat, std::move(l), std::move(child));
      continue;
    }
    return;
  }
}

Derivation rightify(const Derivation& d, const RevealConfig& cfg) {
  Derivation out;
  out.cat = d.cat;
  out.comb = d.comb;
  out.word = d.word;
  for (const Derivation& c : d.children) out.children.push_back(rightify(c, cfg));
  rightify_at(out, cfg);
  return out;
}

void scan_for_raises(const Derivation& d, const std::string& path) {
  if (d.comb.rule == Rule::FwdTypeRaise || d.comb.rule == Rule::BwdTypeRaise)
    throw NotRotatable(path.empty() ? "root" : path);
  for (std::size_t i = 0; i < d.children.size(); ++i)
    scan_for_raises(d.children[i],
                    path.empty() ? std::to_string(i) : path + "." + std::to_string(i));
}

}  // namespace

Derivation to_left_branching(const Derivation& d, const RevealConfig& cfg) {
  return leftify(d, cfg);
}

Derivation rotate_to_right(const Derivation& d, const RevealConfig& cfg) {
  Derivation out = rightify(d, cfg);
  // every raise must have been lowered; fragments that keep one cannot be
  // expressed as a right-branching application tree
  scan_for_raises(out, "");
  return out;
}

namespace {

Op node_op(const Combinator& c) {
  switch (c.rule) {
    case Rule::FwdApply:
    case Rule::BwdApply:
      return {OpKind::Apply, ""};
    case Rule::FwdCompose:
    case Rule::BwdCompose:
    case Rule::BwdCrossCompose:
      return {OpKind::Compose, ""};
    case Rule::FwdTypeRaise:
    case Rule::BwdTypeRaise:
      return {OpKind::TypeRaise, ""};
    case Rule::TypeChange:
      return {OpKind::Reduce, rule_name(c)};
    case Rule::Lexical:
      break;
  }
  return {OpKind::Shift, ""};
}

// Bottom-up replay: SHIFT per leaf plus one op per derivation node charged at
// its rightmost descendant leaf, innermost first.
struct Replayer {
  std::vector<StepTrace>* traces;
  int next_leaf = 0;

  int walk(const Derivation& d) {
    if (d.is_leaf()) {
      int idx = next_leaf++;
      StepTrace tr;
      tr.word_index = idx;
      tr.word = d.word;
      tr.ops.push_back({OpKind::Shift, ""});
      traces->push_back(std::move(tr));
      return idx;
    }
    int last = -1;
    for (const Derivation& c : d.children) last = walk(c);
    (*traces)[last].ops.push_back(node_op(d.comb));
    return last;
  }
};

std::vector<StepTrace> replay_bottom_up(const Derivation& d) {
  std::vector<StepTrace> traces;
  Replayer r{&traces};
  r.walk(d);
  return traces;
}

// ---- revealing simulation ---------------------------------------------------

struct SimAction {
  enum class Kind { Reduce, Reveal };
  Kind kind = Kind::Reduce;
  Combinator comb;  // Reduce
  Category cat;     // Reduce: node category; Reveal: category the adjunct seeks
  int arity = 2;
};

using SimPlan = std::vector<std::vector<SimAction>>;  // one list per word

struct Attachment {
  Derivation adj;
  int last_leaf = 0;
};

// Removes right-adjunct attachments, recording them with their leaf spans.
Derivation strip_adjuncts(const Derivation& d, int& next_leaf, std::vector<int>& core_leaves,
                          std::vector<Attachment>& out, const RevealConfig& cfg) {
  if (d.is_leaf()) {
    core_leaves.push_back(next_leaf++);
    return d;
  }
  if (d.children.size() == 2 && d.comb.rule == Rule::BwdApply &&
      cfg.is_adjunct(d.children[1].cat)) {
    Derivation core = strip_adjuncts(d.children[0], next_leaf, core_leaves, out, cfg);
    Attachment att;
    att.adj = d.children[1];
    next_leaf += leaf_count(att.adj);
    att.last_leaf = next_leaf - 1;
    out.push_back(std::move(att));
    return core;
  }
  Derivation node;
  node.cat = d.cat;
  node.comb = d.comb;
  for (const Derivation& c : d.children)
    node.children.push_back(strip_adjuncts(c, next_leaf, core_leaves, out, cfg));
  return node;
}

// Completions of the leftified core, charged at global leaf indices.
int collect_completions(const Derivation& d, const std::vector<int>& core_leaves, int& local,
                        SimPlan& plan) {
  if (d.is_leaf()) return core_leaves[local++];
  int last = -1;
  for (const Derivation& c : d.children) last = collect_completions(c, core_leaves, local, plan);
  SimAction a;
  a.kind = SimAction::Kind::Reduce;
  a.comb = d.comb;
  a.cat = d.cat;
  a.arity = static_cast<int>(d.children.size());
  plan[last].push_back(std::move(a));
  return last;
}

void compile_segment(const Derivation& d, int& next_leaf, SimPlan& plan,
                     const RevealConfig& cfg) {
  std::vector<int> core_leaves;
  std::vector<Attachment> attachments;
  Derivation core = strip_adjuncts(d, next_leaf, core_leaves, attachments, cfg);
  Derivation left = to_left_branching(core, cfg);
  int local = 0;
  collect_completions(left, core_leaves, local, plan);
  for (Attachment& att : attachments) {
    if (att.adj.cat.is_atom() || att.adj.cat.slash() != Slash::Backward)
      throw InputError("adjunct test accepted non-backward category " +
                       print_category(att.adj.cat));
    int adj_first = att.last_leaf - leaf_count(att.adj) + 1;
    int cursor = adj_first;
    compile_segment(att.adj, cursor, plan, cfg);
    SimAction a;
    a.kind = SimAction::Kind::Reveal;
    a.cat = att.adj.cat.argument();
    plan[att.last_leaf].push_back(std::move(a));
  }
}

bool has_spine_marks(const Derivation& d) {
  switch (d.comb.rule) {
    case Rule::FwdCompose:
    case Rule::BwdCompose:
    case Rule::BwdCrossCompose:
    case Rule::FwdTypeRaise:
    case Rule::BwdTypeRaise:
      return true;
    default:
      break;
  }
  for (const Derivation& c : d.children) {
    if (has_spine_marks(c)) return true;
  }
  return false;
}

// Splice the adjunct onto the right-edge node at the given depth from the root.
Derivation splice_adjunct(Derivation t, int depth, const Derivation& adj) {
  if (depth == 0) {
    Category cat = t.cat;
    return make_binary(Rule::BwdApply, std::move(cat), std::move(t), adj);
  }
  Derivation& last = t.children.back();
  last = splice_adjunct(std::move(last), depth - 1, adj);
  return t;
}

std::vector<StepTrace> simulate_revealing(const Derivation& d, const RevealConfig& cfg) {
  int n = leaf_count(d);
  SimPlan plan(n);
  int cursor = 0;
  compile_segment(d, cursor, plan, cfg);

  // leaves in order, for shifting
  std::vector<const Derivation*> leaf_nodes;
  auto collect = [&leaf_nodes](auto&& self, const Derivation& t) -> void {
    if (t.is_leaf()) {
      leaf_nodes.push_back(&t);
      return;
    }
    for (const Derivation& c : t.children) self(self, c);
  };
  collect(collect, d);

  std::vector<StepTrace> traces;
  std::vector<Derivation> stack;
  for (int i = 0; i < n; ++i) {
    StepTrace tr;
    tr.word_index = i;
    tr.word = leaf_nodes[i]->word;
    tr.ops.push_back({OpKind::Shift, ""});
    stack.push_back(*leaf_nodes[i]);
    for (const SimAction& a : plan[i]) {
      if (a.kind == SimAction::Kind::Reduce) {
        if (a.arity == 1) {
          Derivation child = std::move(stack.back());
          stack.pop_back();
          stack.push_back(make_unary(a.comb.rule, a.cat, std::move(child)));
          stack.back().comb = a.comb;
          tr.ops.push_back(node_op(a.comb));
        } else {
          Derivation right = std::move(stack.back());
          stack.pop_back();
          Derivation left = std::move(stack.back());
          stack.pop_back();
          bool apply = a.comb.rule == Rule::FwdApply || a.comb.rule == Rule::BwdApply;
          bool composed_spine = apply && has_spine_marks(left);
          stack.push_back(make_binary(a.comb.rule, a.cat, std::move(left), std::move(right)));
          stack.back().comb = a.comb;
          tr.ops.push_back(node_op(a.comb));
          if (composed_spine) {
            // normalize the finished spine so its right edge is available
            stack.back() = rightify(stack.back(), cfg);
            if (cfg.count_rotation_as_step) tr.ops.push_back({OpKind::Rotate, ""});
          }
        }
      } else {
        if (stack.size() < 2) throw RevealTargetMissing(i);
        Derivation adj = std::move(stack.back());
        stack.pop_back();
        Derivation target = std::move(stack.back());
        stack.pop_back();
        // right-edge categories, root first
        std::vector<Category> edge;
        for (const Derivation* p = &target;; p = &p->children.back()) {
          edge.push_back(p->cat);
          if (p->is_leaf()) break;
        }
        int depth = -1;
        for (int k = 0; k < static_cast<int>(edge.size()); ++k) {
          if (categories_match(edge[k], a.cat, cfg.features)) {
            depth = k;
            if (cfg.attach == RevealConfig::Attach::Highest) break;
          }
        }
        if (depth < 0) {
          std::string seen;
          for (const Category& c : edge) seen += " " + print_category(c);
          throw RevealTargetMissing(i, print_category(a.cat), seen);
        }
        stack.push_back(splice_adjunct(std::move(target), depth, adj));
        tr.ops.push_back({OpKind::Reveal, ""});
      }
    }
    traces.push_back(std::move(tr));
  }
  return traces;
}

}  // namespace

std::vector<StepTrace> steps_ccg(const Derivation& d, CcgStrategy strategy,
                                 const RevealConfig& cfg) {
  switch (strategy) {
    case CcgStrategy::Right:
      return replay_bottom_up(rotate_to_right(d, cfg));
    case CcgStrategy::Left:
      return replay_bottom_up(to_left_branching(d, cfg));
    case CcgStrategy::Revealing:
      return simulate_revealing(d, cfg);
  }
  throw InputError("unknown ccg strategy");
}

std::string_view strategy_name(CcgStrategy s) {
  switch (s) {
    case CcgStrategy::Right: return "ccg_right";
    case CcgStrategy::Left: return "ccg_left";
    case CcgStrategy::Revealing: return "ccg_revealing";
  }
  return "?";
}

}  // namespace parsteps::ccg
