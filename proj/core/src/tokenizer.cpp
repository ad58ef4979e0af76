#include "promptcache/tokenizer.hpp"

namespace pc::tok {

std::vector<int> tokenize(const std::string& text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<int>(c));
  return out;
}

std::string detokenize(const std::vector<int>& tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t >= 0 && t < 256) out.push_back(static_cast<char>(t));
    // specials render as nothing
  }
  return out;
}

}  // namespace pc::tok
