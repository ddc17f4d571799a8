#pragma once

#include <functional>
#include <string>
#include <vector>

#include "parsteps/ccg.hpp"
#include "parsteps/trace.hpp"

namespace parsteps::ccg {

// Settings for the revealing strategy and the shape transforms.
struct RevealConfig {
  // Figure-of-merit choice: rotation is rendered as a counted panel even
  // though it is described as cheap; switch off for sensitivity analysis.
  bool count_rotation_as_step = true;
  enum class Attach { Lowest, Highest };
  Attach attach = Attach::Lowest;
  FeaturePolicy features = FeaturePolicy::Ignore;
  // Override for what counts as a right adjunct. Must only accept backward
  // functors whose result equals their argument (X\X). Default: that shape,
  // compared under `features`.
  std::function<bool(const Category&)> adjunct_test;

  bool is_adjunct(const Category& c) const;
};

struct NotRotatable : InputError {
  std::string path;
  explicit NotRotatable(std::string node_path)
      : InputError("derivation not rotatable at node [" + node_path + "]"),
        path(std::move(node_path)) {}
};

struct RevealTargetMissing : InputError {
  int word_index;
  explicit RevealTargetMissing(int idx)
      : InputError("no right-edge constituent matches the adjunct at word " + std::to_string(idx)),
        word_index(idx) {}
  RevealTargetMissing(int idx, const std::string& wanted, const std::string& edge)
      : InputError("no right-edge constituent matches the adjunct at word " + std::to_string(idx) +
                   ": wanted " + wanted + ", edge has" + edge),
        word_index(idx) {}
};

// Semantically equal derivation with every adjunct-free spine maximally
// left-branching: applications into right spines become compositions, bare
// left arguments are type-raised where that feeds a spine, and right adjuncts
// keep their BwdApply attachment sites.
Derivation to_left_branching(const Derivation& d, const RevealConfig& cfg = {});

// Inverse normal form: compositions are re-associated rightward and
// type-raised arguments are lowered to plain applications. Throws
// NotRotatable when a raise cannot be lowered (fragment roots).
Derivation rotate_to_right(const Derivation& d, const RevealConfig& cfg = {});

enum class CcgStrategy { Right, Left, Revealing };

std::string_view strategy_name(CcgStrategy s);

// Per-word traces:
//   right:     bottom-up replay of rotate_to_right(d)
//   left:      bottom-up replay of to_left_branching(d)
//   revealing: left-to-right simulation; eager left-branching reduces, ROTATE
//              after applications that close a composed spine, REVEAL for
//              right adjuncts located in the rotated right edge.
std::vector<StepTrace> steps_ccg(const Derivation& d, CcgStrategy strategy,
                                 const RevealConfig& cfg = {});

}  // namespace parsteps::ccg
