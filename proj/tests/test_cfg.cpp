#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "parsteps/cfg.hpp"
#include "parsteps/rng.hpp"

using namespace parsteps;
using cfg::CfgStrategy;
using cfg::ConstTree;

namespace {

// the four-word example tree used throughout the step figures
const char* kFourWord = "(S (NP Mary) (VP (VP (V reads) (NP papers)) (ADVP daily)))";
const char* kThreeWord = "(S (NP Mary) (VP (V reads) (NP papers)))";

std::vector<int> counts(const std::vector<StepTrace>& traces) {
  std::vector<int> out;
  for (const StepTrace& t : traces) out.push_back(t.count());
  return out;
}

}  // namespace

TEST_CASE("penn parsing round-trips") {
  ConstTree t = cfg::parse_penn_bracketed("(S (NP Mary) (VP (V reads) (NP papers)))");
  CHECK(cfg::internal_node_count(t) == 5);
  CHECK(cfg::leaves(t) == std::vector<std::string>{"Mary", "reads", "papers"});
  CHECK(cfg::emit_penn(t) == "(S (NP Mary) (VP (V reads) (NP papers)))");
  CHECK(cfg::parse_penn_bracketed(cfg::emit_penn(t)) == t);

  ConstTree single = cfg::parse_penn_bracketed("(NP Mary)");
  CHECK(cfg::internal_node_count(single) == 1);
  CHECK(cfg::leaves(single).size() == 1);

  // whitespace does not matter
  CHECK(cfg::parse_penn_bracketed("( S  ( NP  Mary )  ( VP ( V reads ) ( NP papers ) ) )") == t);
}

TEST_CASE("penn parsing reports offsets") {
  CHECK_THROWS_AS(cfg::parse_penn_bracketed("(S (NP Mary)"), cfg::UnbalancedBrackets);
  CHECK_THROWS_AS(cfg::parse_penn_bracketed("(S (NP Mary))) extra"), cfg::TrailingInput);
  CHECK_THROWS_AS(cfg::parse_penn_bracketed("(S () )"), cfg::EmptyNode);
  CHECK_THROWS_AS(cfg::parse_penn_bracketed("(S (NP))"), cfg::EmptyNode);
  CHECK_THROWS_AS(cfg::parse_penn_bracketed(""), cfg::EmptyNode);
  CHECK_THROWS_AS(cfg::parse_penn_bracketed("Mary"), cfg::UnbalancedBrackets);
  try {
    cfg::parse_penn_bracketed("(S (NP Mary");
  } catch (const cfg::UnbalancedBrackets& e) {
    CHECK(e.offset == 3);  // the unclosed '('
  }
}

TEST_CASE("parenthesis tokens escape") {
  ConstTree t = cfg::parse_penn_bracketed("(NP (P -LRB-) (N x))");
  CHECK(cfg::leaves(t)[0] == "(");
  CHECK(cfg::emit_penn(t) == "(NP (P -LRB-) (N x))");
}

TEST_CASE("bottom-up counts match the worked example") {
  ConstTree t = cfg::parse_penn_bracketed(kFourWord);
  auto traces = cfg::steps_bottom_up(t);
  CHECK(counts(traces) == std::vector<int>{2, 2, 3, 4});
  // first word: shift then one reduce
  CHECK(traces[0].ops[0].kind == OpKind::Shift);
  CHECK(traces[0].ops[1].kind == OpKind::Reduce);
  CHECK(traces[0].ops[1].label == "NP");
  // last word closes ADVP, inner VP chain, then S, innermost first
  CHECK(traces[3].ops[1].label == "ADVP");
  CHECK(traces[3].ops[2].label == "VP");
  CHECK(traces[3].ops[3].label == "S");
}

TEST_CASE("top-down counts match the worked example") {
  ConstTree t = cfg::parse_penn_bracketed(kFourWord);
  auto traces = cfg::steps_top_down(t);
  CHECK(counts(traces) == std::vector<int>{3, 4, 2, 2});
  // root prediction lands on the first word, outermost first, shift last
  CHECK(traces[0].ops[0].kind == OpKind::Predict);
  CHECK(traces[0].ops[0].label == "S");
  CHECK(traces[0].ops[1].label == "NP");
  CHECK(traces[0].ops[2].kind == OpKind::Shift);
}

TEST_CASE("left-corner counts match the worked example") {
  ConstTree t = cfg::parse_penn_bracketed(kFourWord);
  auto traces = cfg::steps_left_corner(t);
  CHECK(counts(traces) == std::vector<int>{3, 3, 3, 2});
  // NP announced before S on the first word
  CHECK(traces[0].ops[1].label == "NP");
  CHECK(traces[0].ops[2].label == "S");
}

TEST_CASE("single-leaf tree yields [2] under all strategies") {
  ConstTree t = cfg::parse_penn_bracketed("(NP Mary)");
  CHECK(counts(cfg::steps_bottom_up(t)) == std::vector<int>{2});
  CHECK(counts(cfg::steps_top_down(t)) == std::vector<int>{2});
  CHECK(counts(cfg::steps_left_corner(t)) == std::vector<int>{2});
}

TEST_CASE("three-word tree against the event-stream oracles") {
  ConstTree t = cfg::parse_penn_bracketed(kThreeWord);
  // frozen from the oracle: shift+reduce(NP)=2, shift+reduce(V)=2,
  // shift+reduce(NP)+reduce(VP)+reduce(S)=4
  CHECK(oracles::cfg_counts_oracle(t, CfgStrategy::BottomUp) == std::vector<int>{2, 2, 4});
  CHECK(counts(cfg::steps_bottom_up(t)) == std::vector<int>{2, 2, 4});
  CHECK(oracles::cfg_counts_oracle(t, CfgStrategy::TopDown) == std::vector<int>{3, 3, 2});
  CHECK(counts(cfg::steps_top_down(t)) == std::vector<int>{3, 3, 2});
  CHECK(oracles::cfg_counts_oracle(t, CfgStrategy::LeftCorner) == std::vector<int>{3, 3, 2});
  CHECK(counts(cfg::steps_left_corner(t)) == std::vector<int>{3, 3, 2});
}

TEST_CASE("conservation: totals equal words + internal nodes") {
  Rng rng(2024);
  for (int i = 0; i < 400; ++i) {
    ConstTree t = oracles::random_tree(rng, 1 + rng.uniform_int(12));
    if (t.is_leaf()) continue;
    int expect = static_cast<int>(cfg::leaves(t).size()) + cfg::internal_node_count(t);
    for (CfgStrategy s :
         {CfgStrategy::BottomUp, CfgStrategy::TopDown, CfgStrategy::LeftCorner}) {
      int total = 0;
      for (const StepTrace& tr : cfg::steps_cfg(t, s)) total += tr.count();
      REQUIRE(total == expect);
    }
  }
}

TEST_CASE("unary chains contribute one step per chain node") {
  ConstTree t = cfg::parse_penn_bracketed("(S (NP (N (X Mary))) (VP sleeps))");
  CHECK(counts(cfg::steps_bottom_up(t)) == std::vector<int>{4, 3});
}

TEST_CASE("exhaustive shapes agree with the panel simulators") {
  std::vector<ConstTree> shapes;
  for (int leaves = 1; leaves <= 6; ++leaves) oracles::enumerate_shapes(leaves, 2, shapes);
  REQUIRE(shapes.size() > 100);
  for (const ConstTree& t : shapes) {
    for (CfgStrategy s :
         {CfgStrategy::BottomUp, CfgStrategy::TopDown, CfgStrategy::LeftCorner}) {
      std::vector<int> got = counts(cfg::steps_cfg(t, s));
      REQUIRE(got == oracles::cfg_counts_oracle(t, s));
    }
  }
}

TEST_CASE("determinism: identical input bytes, identical traces") {
  ConstTree a = cfg::parse_penn_bracketed(kFourWord);
  ConstTree b = cfg::parse_penn_bracketed(kFourWord);
  auto ta = cfg::steps_left_corner(a);
  auto tb = cfg::steps_left_corner(b);
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(format_ops(ta[i]) == format_ops(tb[i]));
}

TEST_CASE("punctuation stripping") {
  ConstTree t = cfg::parse_penn_bracketed("(S (NP Mary) (VP sleeps) (. .))");
  auto stripped = cfg::strip_punctuation(t);
  REQUIRE(stripped.has_value());
  CHECK(cfg::leaves(*stripped) == std::vector<std::string>{"Mary", "sleeps"});
  CHECK(cfg::internal_node_count(*stripped) == 3);  // the . node is pruned
  CHECK(!cfg::strip_punctuation(cfg::parse_penn_bracketed("(X .)")).has_value());
}

TEST_CASE("penn file reader skips blank lines") {
  std::istringstream in("(NP Mary)\n\n(NP John)\n");
  auto trees = cfg::read_penn_file(in);
  CHECK(trees.size() == 2);
}
