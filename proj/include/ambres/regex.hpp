#pragma once

#include <bitset>
#include <string>
#include <vector>

#include "ambres/errors.hpp"

namespace ambres {

using CharSet = std::bitset<256>;

/// Printable ASCII (0x20..0x7E), the default automaton alphabet.
const std::string& default_alphabet();

struct RegexOptions {
  std::string alphabet = default_alphabet();
};

// Parsed regular expression, reduced to five core node kinds.
//
// Supported surface syntax: literals, backslash escapes (backslash
// followed by any character denotes that literal character), character
// classes with ranges and negation, grouping, alternation, `*`, `+`,
// `?`, and bounded repetition `{m}` / `{m,n}`. Class negation is taken
// relative to the declared alphabet, and every leaf set is intersected
// with it.
struct RegexAst {
  enum class Kind { Empty, Chars, Concat, Alternate, Star };
  Kind kind = Kind::Empty;
  CharSet chars;                   // Kind::Chars
  std::vector<RegexAst> children;  // Concat / Alternate; Star has one child
};

RegexAst parse_regex(const std::string& pattern, const RegexOptions& options = {});

/// Escapes a literal string for embedding into a pattern.
std::string regex_escape_literal(std::string_view text);

inline constexpr int kMaxRepetitionBound = 4096;

}  // namespace ambres
