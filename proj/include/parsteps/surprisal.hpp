#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "parsteps/errors.hpp"

namespace parsteps::surprisal {

// Token log-probabilities are stored in bits (base 2) regardless of the base
// the producing model reported; conversion happens once at ingestion.
struct TokenLogProb {
  std::string token;
  double logprob_bits = 0;  // <= 0
};

enum class LogBase { Two, E, Ten };

// One declared conversion; the file header carries the base.
double to_bits(double logprob, LogBase base);

struct LogProbFile {
  std::vector<TokenLogProb> tokens;
  LogBase declared_base = LogBase::Two;
};

// TSV: header line `#base=<e|2|10>`, then `token<TAB>logprob` per line.
// Rejects p > 1, p = 0, non-finite values, and a duplicated base header
// (declaring the base twice would convert twice).
LogProbFile read_logprob_tsv(std::istream& in);

struct AlignmentMismatch : InputError {
  int word_index;
  std::string residual;
  AlignmentMismatch(int idx, std::string res)
      : InputError("alignment mismatch at word " + std::to_string(idx) + ": '" + res + "'"),
        word_index(idx),
        residual(std::move(res)) {}
};

// word index -> contiguous token span
struct WordAlignment {
  struct Span {
    int first = 0;
    int count = 0;
  };
  std::vector<Span> spans;
};

// Subword markers stripped from token fronts before concatenation matching.
struct TokenNormalizer {
  std::vector<std::string> prefixes{"\xe2\x96\x81", "\xc4\xa0"};  // U+2581, 'Ġ'
  std::string operator()(const std::string& token) const;
};

// Greedy left-to-right span assignment; token concatenation must reproduce
// each word exactly and consume every token.
WordAlignment align(const std::vector<std::string>& words, const std::vector<std::string>& tokens,
                    const TokenNormalizer& norm = {});

// surprisal(word_i) = -sum of its tokens' log2 probabilities, in bits
std::vector<double> word_surprisal(const LogProbFile& lp, const WordAlignment& a);

std::vector<std::string> read_word_list(std::istream& in);

void write_surprisal_tsv(std::ostream& out, const std::vector<std::string>& words,
                         const std::vector<double>& bits);

}  // namespace parsteps::surprisal
