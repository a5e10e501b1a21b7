#include "ust/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace ust {

namespace {

// FNV-1a 64-bit; the fixed public hash behind the hashing trick.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void add_term(std::unordered_map<std::uint32_t, double>& acc,
              std::string_view term) {
  const std::uint64_t h = fnv1a(term);
  const std::uint32_t idx = static_cast<std::uint32_t>(h & (kHashDim - 1));
  const double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
  acc[idx] += sign;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

FeatureVec featurize(std::string_view text) {
  const std::vector<std::string> tokens = tokenize(text);
  std::unordered_map<std::uint32_t, double> acc;
  acc.reserve(tokens.size() * 2);
  for (const auto& t : tokens) add_term(acc, t);
  std::string bigram;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    bigram.assign(tokens[i]);
    bigram.push_back('\x1f');  // separator keeps bigrams disjoint from unigrams
    bigram.append(tokens[i + 1]);
    add_term(acc, bigram);
  }

  FeatureVec fv;
  fv.entries.reserve(acc.size());
  double sq = 0.0;
  for (const auto& [idx, val] : acc) {
    if (val == 0.0) continue;  // signed counts can cancel
    fv.entries.emplace_back(idx, val);
    sq += val * val;
  }
  std::sort(fv.entries.begin(), fv.entries.end());
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& [idx, val] : fv.entries) val *= inv;
  }
  return fv;
}

}  // namespace ust
