#include "parsteps/cfg.hpp"

#include <cctype>
#include <istream>

namespace parsteps::cfg {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string unescape_token(std::string_view s) {
  std::string out(s);
  auto replace_all = [&out](std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("-LRB-", "(");
  replace_all("-RRB-", ")");
  return out;
}

std::string escape_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '(') {
      out += "-LRB-";
    } else if (c == ')') {
      out += "-RRB-";
    } else {
      out += c;
    }
  }
  return out;
}

struct PennParser {
  std::string_view text;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < text.size() && is_space(text[pos])) ++pos;
  }

  std::string_view read_atom() {
    std::size_t start = pos;
    while (pos < text.size() && !is_space(text[pos]) && text[pos] != '(' && text[pos] != ')') ++pos;
    return text.substr(start, pos - start);
  }

  ConstTree parse_node() {
    // caller guarantees text[pos] == '('
    std::size_t open = pos;
    ++pos;
    skip_space();
    std::string_view label = read_atom();
    if (label.empty()) throw EmptyNode(open);
    ConstTree node;
    node.label = std::string(label);
    for (;;) {
      skip_space();
      if (pos >= text.size()) throw UnbalancedBrackets(open);
      char c = text[pos];
      if (c == ')') {
        ++pos;
        break;
      }
      if (c == '(') {
        node.children.push_back(parse_node());
      } else {
        std::string_view tok = read_atom();
        ConstTree leaf;
        leaf.token = unescape_token(tok);
        node.children.push_back(std::move(leaf));
      }
    }
    if (node.children.empty()) throw EmptyNode(open);
    return node;
  }
};

}  // namespace

ConstTree parse_penn_bracketed(std::string_view text) {
  PennParser p{text};
  p.skip_space();
  if (p.pos >= text.size()) throw EmptyNode(0);
  if (text[p.pos] != '(') throw UnbalancedBrackets(p.pos);
  ConstTree tree = p.parse_node();
  p.skip_space();
  if (p.pos < text.size()) throw TrailingInput(p.pos);
  return tree;
}

std::string emit_penn(const ConstTree& tree) {
  if (tree.is_leaf()) return escape_token(tree.token);
  std::string out = "(" + tree.label;
  for (const ConstTree& c : tree.children) {
    out += " ";
    out += emit_penn(c);
  }
  out += ")";
  return out;
}

std::vector<ConstTree> read_penn_file(std::istream& in) {
  std::vector<ConstTree> trees;
  std::string line;
  while (std::getline(in, line)) {
    bool blank = true;
    for (char c : line) {
      if (!is_space(c)) blank = false;
    }
    if (blank) continue;
    trees.push_back(parse_penn_bracketed(line));
  }
  return trees;
}

std::vector<std::string> leaves(const ConstTree& tree) {
  std::vector<std::string> out;
  auto walk = [&out](auto&& self, const ConstTree& t) -> void {
    if (t.is_leaf()) {
      out.push_back(t.token);
      return;
    }
    for (const ConstTree& c : t.children) self(self, c);
  };
  walk(walk, tree);
  return out;
}

int internal_node_count(const ConstTree& tree) {
  if (tree.is_leaf()) return 0;
  int n = 1;
  for (const ConstTree& c : tree.children) n += internal_node_count(c);
  return n;
}

namespace {

bool all_punct(const std::string& s) {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (!std::ispunct(c)) return false;
  }
  return true;
}

}  // namespace

std::optional<ConstTree> strip_punctuation(const ConstTree& tree) {
  if (tree.is_leaf()) {
    if (all_punct(tree.token)) return std::nullopt;
    return tree;
  }
  ConstTree out;
  out.label = tree.label;
  for (const ConstTree& c : tree.children) {
    if (auto kept = strip_punctuation(c)) out.children.push_back(std::move(*kept));
  }
  if (out.children.empty()) return std::nullopt;
  return out;
}

namespace {

// One pass computing, per internal node, which leaf each strategy charges.
struct Walker {
  std::vector<StepTrace>* traces;
  CfgStrategy strategy;
  int next_leaf = 0;
  std::vector<Op> pending_predictions;  // top-down: outermost first, flushed at the next shift

  // Returns (leftmost leaf, rightmost leaf) of the subtree.
  std::pair<int, int> walk(const ConstTree& t) {
    if (t.is_leaf()) {
      int idx = next_leaf++;
      StepTrace tr;
      tr.word_index = idx;
      tr.word = t.token;
      tr.ops = std::move(pending_predictions);
      pending_predictions.clear();
      tr.ops.push_back({OpKind::Shift, ""});
      traces->push_back(std::move(tr));
      return {idx, idx};
    }
    if (strategy == CfgStrategy::TopDown) {
      // predicted before its leftmost leaf is shifted; entry order = outermost first
      pending_predictions.push_back({OpKind::Predict, t.label});
    }
    std::pair<int, int> span{-1, -1};
    int leftmost_child_right = -1;
    bool first = true;
    for (const ConstTree& c : t.children) {
      auto [lo, hi] = walk(c);
      if (first) {
        span.first = lo;
        leftmost_child_right = hi;
        first = false;
      }
      span.second = hi;
    }
    switch (strategy) {
      case CfgStrategy::BottomUp:
        // completed at its rightmost leaf; post-order append gives innermost first
        (*traces)[span.second].ops.push_back({OpKind::Reduce, t.label});
        break;
      case CfgStrategy::TopDown:
        break;
      case CfgStrategy::LeftCorner:
        // announced once its leftmost child is complete
        (*traces)[leftmost_child_right].ops.push_back({OpKind::Announce, t.label});
        break;
    }
    return span;
  }
};

}  // namespace

std::vector<StepTrace> steps_cfg(const ConstTree& tree, CfgStrategy strategy) {
  std::vector<StepTrace> traces;
  Walker w{&traces, strategy, 0, {}};
  w.walk(tree);
  return traces;
}

std::vector<StepTrace> steps_bottom_up(const ConstTree& tree) {
  return steps_cfg(tree, CfgStrategy::BottomUp);
}

std::vector<StepTrace> steps_top_down(const ConstTree& tree) {
  return steps_cfg(tree, CfgStrategy::TopDown);
}

std::vector<StepTrace> steps_left_corner(const ConstTree& tree) {
  return steps_cfg(tree, CfgStrategy::LeftCorner);
}

std::string_view strategy_name(CfgStrategy s) {
  switch (s) {
    case CfgStrategy::BottomUp: return "cfg_bottomup";
    case CfgStrategy::TopDown: return "cfg_topdown";
    case CfgStrategy::LeftCorner: return "cfg_leftcorner";
  }
  return "?";
}

}  // namespace parsteps::cfg
