#include <doctest.h>

#include <cmath>
#include <sstream>

#include "parsteps/rng.hpp"
#include "parsteps/surprisal.hpp"

using namespace parsteps;
using namespace parsteps::surprisal;

TEST_CASE("alignment: forced by concatenation") {
  WordAlignment a = align({"Mary", "reads"}, {"Mary", "read", "s"});
  REQUIRE(a.spans.size() == 2);
  CHECK(a.spans[0].first == 0);
  CHECK(a.spans[0].count == 1);
  CHECK(a.spans[1].first == 1);
  CHECK(a.spans[1].count == 2);

  WordAlignment b = align({"reading"}, {"read", "ing"});
  CHECK(b.spans[0].count == 2);
}

TEST_CASE("alignment mismatches are loud") {
  CHECK_THROWS_AS(align({"Mary"}, {"Ma", "ry", "x"}), AlignmentMismatch);
  CHECK_THROWS_AS(align({"Mary"}, {"Ma", "rx"}), AlignmentMismatch);
  CHECK_THROWS_AS(align({"Mary", "reads"}, {"Mary"}), AlignmentMismatch);
  try {
    align({"Mary"}, {"Ma", "ry", "x"});
  } catch (const AlignmentMismatch& e) {
    CHECK(e.word_index == 1);  // one past the last word: unconsumed token
  }
}

TEST_CASE("subword markers are stripped before matching") {
  // U+2581 and the GPT-style space marker
  WordAlignment a = align({"Mary", "reads"}, {"\xe2\x96\x81Mary", "\xc4\xa0read", "s"});
  CHECK(a.spans[1].count == 2);
}

TEST_CASE("word surprisal sums token bits") {
  LogProbFile lp;
  lp.tokens = {{"a", std::log2(0.25)}};
  WordAlignment a = align({"a"}, {"a"});
  std::vector<double> s = word_surprisal(lp, a);
  CHECK(s[0] == doctest::Approx(2.0).epsilon(1e-12));

  LogProbFile lp2;
  lp2.tokens = {{"re", std::log2(0.5)}, {"ads", std::log2(0.25)}};
  WordAlignment a2 = align({"reads"}, {"re", "ads"});
  std::vector<double> s2 = word_surprisal(lp2, a2);
  CHECK(s2[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("partition identity on random streams") {
  Rng rng(99);
  for (int rep = 0; rep < 120; ++rep) {
    int n_words = 1 + rng.uniform_int(30);
    std::vector<std::string> words, tokens;
    LogProbFile lp;
    double token_total = 0;
    for (int w = 0; w < n_words; ++w) {
      int pieces = 1 + rng.uniform_int(3);
      std::string word;
      for (int p = 0; p < pieces; ++p) {
        std::string piece = "t" + std::to_string(w) + "_" + std::to_string(p);
        word += piece;
        tokens.push_back(piece);
        double lpv = -rng.uniform(0.01, 15.0);
        lp.tokens.push_back({piece, lpv});
        token_total += -lpv;
      }
      words.push_back(word);
    }
    WordAlignment a = align(words, tokens);
    std::vector<double> s = word_surprisal(lp, a);
    double word_total = 0;
    for (double v : s) word_total += v;
    REQUIRE(std::fabs(word_total - token_total) <= 1e-12 * std::fabs(token_total));
  }
}

TEST_CASE("monotonicity: dropping a token lowers the word's surprisal") {
  LogProbFile lp;
  lp.tokens = {{"re", std::log2(0.5)}, {"ads", std::log2(0.25)}};
  WordAlignment two = align({"reads"}, {"re", "ads"});
  double full = word_surprisal(lp, two)[0];
  LogProbFile lp1;
  lp1.tokens = {{"re", std::log2(0.5)}};
  WordAlignment one = align({"re"}, {"re"});
  double partial = word_surprisal(lp1, one)[0];
  CHECK(partial < full);
}

TEST_CASE("logprob file reading and base conversion") {
  std::istringstream in("#base=e\nMary\t-1.3862943611198906\nreads\t-0.6931471805599453\n");
  LogProbFile lp = read_logprob_tsv(in);
  REQUIRE(lp.tokens.size() == 2);
  // ln(0.25) -> 2 bits, ln(0.5) -> 1 bit
  CHECK(lp.tokens[0].logprob_bits == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(lp.tokens[1].logprob_bits == doctest::Approx(-1.0).epsilon(1e-12));

  std::istringstream in10("#base=10\nx\t-1\n");
  CHECK(read_logprob_tsv(in10).tokens[0].logprob_bits ==
        doctest::Approx(-std::log2(10.0)).epsilon(1e-12));

  std::istringstream in2("#base=2\nx\t-3\n");
  CHECK(read_logprob_tsv(in2).tokens[0].logprob_bits == -3.0);
}

TEST_CASE("double conversion and bad values are rejected") {
  std::istringstream twice("#base=e\n#base=e\nx\t-1\n");
  CHECK_THROWS_AS(read_logprob_tsv(twice), InputError);
  std::istringstream missing("x\t-1\n");
  CHECK_THROWS_AS(read_logprob_tsv(missing), InputError);
  std::istringstream positive("#base=2\nx\t0.5\n");
  CHECK_THROWS_AS(read_logprob_tsv(positive), InputError);
  std::istringstream zerop("#base=2\nx\t-inf\n");
  CHECK_THROWS_AS(read_logprob_tsv(zerop), InputError);
  std::istringstream badbase("#base=7\nx\t-1\n");
  CHECK_THROWS_AS(read_logprob_tsv(badbase), InputError);
}

TEST_CASE("output tsv is stable") {
  std::ostringstream out;
  write_surprisal_tsv(out, {"Mary"}, {2.0});
  CHECK(out.str() == "word_index\tword\tsurprisal_bits\n0\tMary\t2\n");
}
