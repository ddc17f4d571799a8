#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "parsteps/errors.hpp"
#include "parsteps/trace.hpp"

namespace parsteps::cfg {

// Labeled constituency tree. Internal nodes carry a nonempty label and at
// least one child; leaves carry exactly one word token.
struct ConstTree {
  std::string label;  // internal nodes
  std::string token;  // leaves
  std::vector<ConstTree> children;

  bool is_leaf() const { return children.empty(); }

  friend bool operator==(const ConstTree&, const ConstTree&) = default;
};

struct UnbalancedBrackets : InputError {
  std::size_t offset;
  explicit UnbalancedBrackets(std::size_t off)
      : InputError("unbalanced brackets at offset " + std::to_string(off)), offset(off) {}
};

struct EmptyNode : InputError {
  std::size_t offset;
  explicit EmptyNode(std::size_t off)
      : InputError("empty node at offset " + std::to_string(off)), offset(off) {}
};

struct TrailingInput : InputError {
  std::size_t offset;
  explicit TrailingInput(std::size_t off)
      : InputError("trailing input at offset " + std::to_string(off)), offset(off) {}
};

// Penn-style bracketed tree. `-LRB-`/`-RRB-` escape parentheses in tokens.
ConstTree parse_penn_bracketed(std::string_view text);

// Canonical single-space bracketing; inverse of parse_penn_bracketed.
std::string emit_penn(const ConstTree& tree);

// One tree per nonblank line.
std::vector<ConstTree> read_penn_file(std::istream& in);

std::vector<std::string> leaves(const ConstTree& tree);
int internal_node_count(const ConstTree& tree);

// Remove leaves whose token is entirely punctuation, pruning any internal
// node left childless. Empty result when the whole tree is punctuation.
std::optional<ConstTree> strip_punctuation(const ConstTree& tree);

enum class CfgStrategy { BottomUp, TopDown, LeftCorner };

std::string_view strategy_name(CfgStrategy s);

// Per-word traces. A word is charged one SHIFT plus one op per internal node
// whose defining structural event lands on it:
//   bottom-up:   nodes whose rightmost descendant leaf is the word (REDUCE)
//   top-down:    nodes whose leftmost descendant leaf is the word (PREDICT)
//   left-corner: nodes whose leftmost child completes at the word (ANNOUNCE)
std::vector<StepTrace> steps_bottom_up(const ConstTree& tree);
std::vector<StepTrace> steps_top_down(const ConstTree& tree);
std::vector<StepTrace> steps_cfg(const ConstTree& tree, CfgStrategy strategy);
std::vector<StepTrace> steps_left_corner(const ConstTree& tree);

}  // namespace parsteps::cfg
