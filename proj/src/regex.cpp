#include "ambres/regex.hpp"

#include <cctype>

namespace ambres {

const std::string& default_alphabet() {
  static const std::string alphabet = [] {
    std::string s;
    for (int c = 0x20; c <= 0x7e; ++c) s.push_back(static_cast<char>(c));
    return s;
  }();
  return alphabet;
}

namespace {

constexpr const char* kMetachars = "\\[](){}|*+?.";

bool is_meta(char c) {
  for (const char* p = kMetachars; *p; ++p)
    if (*p == c) return true;
  return false;
}

CharSet alphabet_set(const std::string& alphabet) {
  CharSet s;
  for (unsigned char c : alphabet) s.set(c);
  return s;
}

struct Parser {
  const std::string& text;
  CharSet alpha;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& why) const {
    throw RegexParseError("regex parse error at offset " + std::to_string(pos) + ": " + why);
  }

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() { return text[pos++]; }

  RegexAst parse() {
    RegexAst ast = parse_alternation();
    if (!done()) fail(std::string("unexpected '") + peek() + "'");
    return ast;
  }

  RegexAst parse_alternation() {
    RegexAst node = parse_concat();
    if (done() || peek() != '|') return node;
    RegexAst alt;
    alt.kind = RegexAst::Kind::Alternate;
    alt.children.push_back(std::move(node));
    while (!done() && peek() == '|') {
      take();
      alt.children.push_back(parse_concat());
    }
    return alt;
  }

  RegexAst parse_concat() {
    RegexAst cat;
    cat.kind = RegexAst::Kind::Concat;
    while (!done() && peek() != '|' && peek() != ')') {
      cat.children.push_back(parse_postfix());
    }
    if (cat.children.empty()) return RegexAst{};  // epsilon
    if (cat.children.size() == 1) return std::move(cat.children[0]);
    return cat;
  }

  RegexAst parse_postfix() {
    RegexAst node = parse_atom();
    while (!done()) {
      char c = peek();
      if (c == '*') {
        take();
        node = make_star(std::move(node));
      } else if (c == '+') {
        take();
        RegexAst copy = node;
        node = make_concat(std::move(copy), make_star(std::move(node)));
      } else if (c == '?') {
        take();
        node = make_optional(std::move(node));
      } else if (c == '{') {
        take();
        auto [m, n] = parse_bounds();
        node = expand_repetition(std::move(node), m, n);
      } else {
        break;
      }
    }
    return node;
  }

  std::pair<int, int> parse_bounds() {
    int m = parse_number();
    int n = m;
    if (!done() && peek() == ',') {
      take();
      n = parse_number();
    }
    if (done() || take() != '}') fail("expected '}' in repetition bound");
    if (n < m) fail("repetition bound {m,n} requires m <= n");
    if (n > kMaxRepetitionBound) fail("repetition bound too large");
    return {m, n};
  }

  int parse_number() {
    if (done() || !std::isdigit(static_cast<unsigned char>(peek()))) fail("expected digit");
    long v = 0;
    while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (take() - '0');
      if (v > kMaxRepetitionBound) fail("repetition bound too large");
    }
    return static_cast<int>(v);
  }

  RegexAst parse_atom() {
    if (done()) fail("expected atom");
    char c = take();
    if (c == '(') {
      RegexAst inner = parse_alternation();
      if (done() || take() != ')') fail("expected ')'");
      return inner;
    }
    if (c == '[') return make_chars(parse_class());
    if (c == '\\') {
      if (done()) fail("dangling escape");
      return make_chars(single(take()));
    }
    if (c == '.') fail("'.' is not in the supported operator subset; escape it as '\\.'");
    if (c == '*' || c == '+' || c == '?' || c == '{') fail("quantifier with no preceding atom");
    if (c == ')' || c == '}' || c == ']' || c == '|') fail(std::string("unexpected '") + c + "'");
    return make_chars(single(c));
  }

  // cursor sits just past '['
  CharSet parse_class() {
    bool negated = false;
    if (!done() && peek() == '^') {
      take();
      negated = true;
    }
    CharSet set;
    bool any_item = false;
    while (true) {
      if (done()) fail("unterminated character class");
      if (peek() == ']') {
        take();
        break;
      }
      unsigned char lo = class_char();
      unsigned char hi = lo;
      if (!done() && peek() == '-' && pos + 1 < text.size() && text[pos + 1] != ']') {
        take();
        hi = class_char();
        if (hi < lo) fail("inverted range in character class");
      }
      for (int c = lo; c <= hi; ++c) set.set(static_cast<size_t>(c));
      any_item = true;
    }
    if (!any_item && !negated) fail("empty character class");
    if (negated) set = ~set;
    return set & alpha;
  }

  unsigned char class_char() {
    char c = take();
    if (c == '\\') {
      if (done()) fail("dangling escape in character class");
      c = take();
    }
    return static_cast<unsigned char>(c);
  }

  CharSet single(char c) const {
    CharSet s;
    s.set(static_cast<unsigned char>(c));
    return s & alpha;
  }

  RegexAst make_chars(CharSet set) const {
    RegexAst n;
    n.kind = RegexAst::Kind::Chars;
    n.chars = set;
    return n;
  }

  static RegexAst make_star(RegexAst child) {
    RegexAst n;
    n.kind = RegexAst::Kind::Star;
    n.children.push_back(std::move(child));
    return n;
  }

  static RegexAst make_concat(RegexAst a, RegexAst b) {
    RegexAst n;
    n.kind = RegexAst::Kind::Concat;
    n.children.push_back(std::move(a));
    n.children.push_back(std::move(b));
    return n;
  }

  static RegexAst make_optional(RegexAst child) {
    RegexAst n;
    n.kind = RegexAst::Kind::Alternate;
    n.children.push_back(std::move(child));
    n.children.push_back(RegexAst{});  // epsilon branch
    return n;
  }

  // X{m,n} -> X^m (X (X (...)?)?)?  -- the optional tail is nested, not
  // flat, so subset construction tracks one active copy instead of a
  // suffix of all remaining copies
  static RegexAst expand_repetition(RegexAst node, int m, int n) {
    if (n == 0) return RegexAst{};
    RegexAst tail;  // epsilon
    for (int i = m; i < n; ++i) {
      RegexAst copy = node;
      RegexAst chain = tail.kind == RegexAst::Kind::Empty
                           ? std::move(copy)
                           : make_concat(std::move(copy), std::move(tail));
      tail = make_optional(std::move(chain));
    }
    RegexAst cat;
    cat.kind = RegexAst::Kind::Concat;
    for (int i = 0; i < m; ++i) cat.children.push_back(node);
    if (tail.kind != RegexAst::Kind::Empty) cat.children.push_back(std::move(tail));
    if (cat.children.empty()) return RegexAst{};
    if (cat.children.size() == 1) return std::move(cat.children[0]);
    return cat;
  }
};

}  // namespace

RegexAst parse_regex(const std::string& pattern, const RegexOptions& options) {
  Parser p{pattern, alphabet_set(options.alphabet)};
  return p.parse();
}

std::string regex_escape_literal(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (is_meta(c)) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace ambres
