#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pc {

// Byte-level tokenizer: token IDs 0..255 are raw byte values, followed by
// the reserved specials. detokenize(tokenize(t)) == t for any byte string.
namespace tok {

constexpr int kUnk = 256;
constexpr int kBos = 257;
constexpr int kEos = 258;
constexpr int kNumSpecials = 3;
constexpr int kMinVocab = 256 + kNumSpecials;

std::vector<int> tokenize(const std::string& text);
std::string detokenize(const std::vector<int>& tokens);

}  // namespace tok
}  // namespace pc
