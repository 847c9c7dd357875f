#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace clonecraft::synth {

// Character vocabulary; id 0 is padding.
inline constexpr std::string_view kAlphabet = " abcdefghijklmnopqrstuvwxyz'.,?!-";
inline constexpr std::size_t kVocabSize = kAlphabet.size() + 1;

struct TextSequence {
  std::vector<std::size_t> token_ids;
  std::string raw_text;
};

// Lower-cases; EmptyInput for empty text, FormatError for characters outside
// the alphabet.
TextSequence text_to_sequence(std::string_view text);

}  // namespace clonecraft::synth
