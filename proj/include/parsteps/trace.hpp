#pragma once

#include <string>
#include <vector>

namespace parsteps {

enum class OpKind {
  Shift,      // consume the next word
  Reduce,     // complete a labeled node (CFG bottom-up, CCG type-change)
  Predict,    // speculate a labeled node top-down
  Announce,   // left-corner parent announcement
  TypeRaise,  // CCG unary raise
  Compose,    // CCG composition (fc/bc/bx)
  Apply,      // CCG application (fa/ba)
  Rotate,     // revealing: left-to-right spine rotation
  Reveal,     // revealing: right-edge adjunct attachment
};

struct Op {
  OpKind kind;
  std::string label;  // node label for Reduce/Predict/Announce, tc id for type-change
};

inline std::string op_name(const Op& op) {
  switch (op.kind) {
    case OpKind::Shift: return "SHIFT";
    case OpKind::Reduce: return "REDUCE(" + op.label + ")";
    case OpKind::Predict: return "PREDICT(" + op.label + ")";
    case OpKind::Announce: return "ANNOUNCE(" + op.label + ")";
    case OpKind::TypeRaise: return "TYPERAISE";
    case OpKind::Compose: return "COMPOSE";
    case OpKind::Apply: return "APPLY";
    case OpKind::Rotate: return "ROTATE";
    case OpKind::Reveal: return "REVEAL";
  }
  return "?";
}

// Per-word operation record for one parsing strategy. The count equals the
// number of ops; every word starts with its SHIFT.
struct StepTrace {
  int word_index = 0;
  std::string word;
  std::vector<Op> ops;

  int count() const { return static_cast<int>(ops.size()); }
};

inline std::string format_ops(const StepTrace& t) {
  std::string out;
  for (const Op& op : t.ops) {
    if (!out.empty()) out += ",";
    out += op_name(op);
  }
  return out;
}

}  // namespace parsteps
