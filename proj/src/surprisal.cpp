#include "parsteps/surprisal.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>

namespace parsteps::surprisal {

double to_bits(double logprob, LogBase base) {
  switch (base) {
    case LogBase::Two: return logprob;
    case LogBase::E: return logprob / std::log(2.0);
    case LogBase::Ten: return logprob * std::log2(10.0);
  }
  throw InputError("unknown log base");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

LogProbFile read_logprob_tsv(std::istream& in) {
  LogProbFile out;
  std::string line;
  bool base_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("#base=", 0) == 0) {
      if (base_seen)
        throw InputError("line " + std::to_string(lineno) +
                         ": base declared twice; refusing to convert twice");
      std::string b = t.substr(6);
      if (b == "2") out.declared_base = LogBase::Two;
      else if (b == "e") out.declared_base = LogBase::E;
      else if (b == "10") out.declared_base = LogBase::Ten;
      else throw InputError("line " + std::to_string(lineno) + ": unknown base '" + b + "'");
      base_seen = true;
      continue;
    }
    if (t[0] == '#') continue;
    if (!base_seen)
      throw InputError("missing #base=<e|2|10> header before data at line " +
                       std::to_string(lineno));
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw InputError("line " + std::to_string(lineno) + ": expected token<TAB>logprob");
    std::string token = line.substr(0, tab);
    std::string value = trim(line.substr(tab + 1));
    char* end = nullptr;
    double raw = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
      throw InputError("line " + std::to_string(lineno) + ": bad logprob '" + value + "'");
    if (!std::isfinite(raw))
      throw InputError("line " + std::to_string(lineno) +
                       ": zero-probability or non-finite token rejected");
    if (raw > 0)
      throw InputError("line " + std::to_string(lineno) + ": logprob " + value +
                       " implies p > 1");
    out.tokens.push_back({std::move(token), to_bits(raw, out.declared_base)});
  }
  return out;
}

std::string TokenNormalizer::operator()(const std::string& token) const {
  for (const std::string& p : prefixes) {
    if (token.size() >= p.size() && token.compare(0, p.size(), p) == 0)
      return token.substr(p.size());
  }
  return token;
}

WordAlignment align(const std::vector<std::string>& words, const std::vector<std::string>& tokens,
                    const TokenNormalizer& norm) {
  WordAlignment out;
  std::size_t t = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::string& word = words[w];
    std::string built;
    int first = static_cast<int>(t);
    while (built.size() < word.size()) {
      if (t >= tokens.size())
        throw AlignmentMismatch(static_cast<int>(w), word.substr(built.size()));
      built += norm(tokens[t]);
      ++t;
    }
    if (built != word) throw AlignmentMismatch(static_cast<int>(w), built);
    out.spans.push_back({first, static_cast<int>(t) - first});
  }
  if (t < tokens.size())
    throw AlignmentMismatch(static_cast<int>(words.size()),
                            "unconsumed token '" + tokens[t] + "'");
  return out;
}

std::vector<double> word_surprisal(const LogProbFile& lp, const WordAlignment& a) {
  std::vector<double> out;
  out.reserve(a.spans.size());
  for (const WordAlignment::Span& s : a.spans) {
    if (s.first + s.count > static_cast<int>(lp.tokens.size()))
      throw InputError("alignment span exceeds token count");
    double sum = 0;
    for (int j = s.first; j < s.first + s.count; ++j) sum += lp.tokens[j].logprob_bits;
    out.push_back(-sum);
  }
  return out;
}

std::vector<std::string> read_word_list(std::istream& in) {
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (!t.empty()) words.push_back(std::move(t));
  }
  return words;
}

void write_surprisal_tsv(std::ostream& out, const std::vector<std::string>& words,
                         const std::vector<double>& bits) {
  out << "word_index\tword\tsurprisal_bits\n";
  char buf[64];
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", bits[i]);
    out << i << '\t' << words[i] << '\t' << buf << '\n';
  }
}

}  // namespace parsteps::surprisal
