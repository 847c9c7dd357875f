#include "clonecraft/synth/text.hpp"

#include <cctype>

#include "clonecraft/core/error.hpp"

namespace clonecraft::synth {

TextSequence text_to_sequence(std::string_view text) {
  if (text.empty()) throw Error(Errc::EmptyInput, "empty text");
  TextSequence seq;
  seq.raw_text = std::string(text);
  for (char c : text) {
    const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto pos = kAlphabet.find(lc);
    if (pos == std::string_view::npos)
      throw Error(Errc::FormatError, std::string("unsupported character '") + c + "' in text");
    seq.token_ids.push_back(pos + 1);
  }
  return seq;
}

}  // namespace clonecraft::synth
