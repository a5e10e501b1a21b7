#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ust {

// Hashing dimension for the bag-of-words featurizer.
inline constexpr std::uint32_t kHashDim = 1u << 15;

// Sparse l2-normalized feature vector; entries sorted by index, unique.
struct FeatureVec {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }
};

// Lowercased word tokens; splits on any non-alphanumeric byte.
std::vector<std::string> tokenize(std::string_view text);

// Hashed unigram+bigram term frequencies with sign hashing, l2-normalized.
// Empty text maps to the zero vector. Pure and platform-independent.
FeatureVec featurize(std::string_view text);

}  // namespace ust
