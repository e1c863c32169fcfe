#pragma once

#include <string>
#include <vector>

#include "gencat/common.hpp"

namespace gencat {

// Character-level tokenizer over printable ASCII plus newline/tab, with three
// reserved specials. The placeholder id marks a mastery-embedding slot in a
// prompt template; it never appears in ordinary text.
class CharTokenizer {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPlaceholder = 2;
  static constexpr int kCharBase = 3;

  static int vocab_size() { return kCharBase + (126 - 32 + 1) + 2; }  // chars + \n \t

  static int char_to_id(char c) {
    if (c >= 32 && c <= 126) return kCharBase + (c - 32);
    if (c == '\n') return kCharBase + 95;
    if (c == '\t') return kCharBase + 96;
    throw validation_error(std::string("character out of vocabulary: code ") +
                           std::to_string(static_cast<int>(static_cast<unsigned char>(c))));
  }

  static char id_to_char(int id) {
    const int offset = id - kCharBase;
    if (offset >= 0 && offset <= 94) return static_cast<char>(32 + offset);
    if (offset == 95) return '\n';
    if (offset == 96) return '\t';
    throw validation_error("token id " + std::to_string(id) + " is not a character token");
  }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> out;
    out.reserve(text.size());
    for (char c : text) out.push_back(char_to_id(c));
    return out;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
      if (id == kBos || id == kEos || id == kPlaceholder) continue;
      out += id_to_char(id);
    }
    return out;
  }

  // First-subtoken ids of the anchor words (char-level, so the initial letter).
  int true_anchor_id() const { return char_to_id('T'); }
  int false_anchor_id() const { return char_to_id('F'); }
};

}  // namespace gencat
