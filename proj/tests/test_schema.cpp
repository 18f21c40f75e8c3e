#include "ambres/schema.hpp"

#include <set>

#include "ambres/dfa.hpp"
#include "ambres/rng.hpp"
#include "doctest.h"
#include "support/json_oracle.hpp"
#include "support/ref_matcher.hpp"

using namespace ambres;

TEST_CASE("parse_schema maps the restricted dialect") {
  CHECK(parse_schema(R"({"type":"boolean"})") == SchemaNode::boolean_node());
  CHECK(parse_schema(R"({"type":"string"})") == SchemaNode::string_node());
  CHECK(parse_schema(R"({"type":"array","items":{"type":"string"}})") ==
        SchemaNode::array_node(SchemaNode::string_node()));

  SchemaNode obj = parse_schema(
      R"({"type":"object","properties":{"a":{"type":"boolean"},"b":{"type":"string"}},"order":["b","a"]})");
  REQUIRE(obj.field_names.size() == 2);
  CHECK(obj.field_names[0] == "b");  // declared order, not key order
  CHECK(obj.field_names[1] == "a");
  CHECK(obj.children[0].kind == SchemaKind::String);
}

TEST_CASE("parse_schema rejects what the dialect does not cover") {
  CHECK_THROWS_AS(parse_schema("{\"type\":"), MalformedSchema);
  CHECK_THROWS_AS(parse_schema("[1,2]"), MalformedSchema);
  CHECK_THROWS_AS(parse_schema(R"({"items":{}})"), MalformedSchema);
  CHECK_THROWS_AS(parse_schema(R"({"type":"number"})"), UnsupportedFeature);
  CHECK_THROWS_AS(parse_schema(R"({"type":["string","boolean"]})"), MalformedSchema);
  CHECK_THROWS_AS(
      parse_schema(
          R"({"type":"object","properties":{"a":{"type":"boolean"}},"order":["a"],"additional":true})"),
      UnsupportedFeature);
  CHECK_THROWS_AS(parse_schema(R"({"type":"array"})"), MalformedSchema);
  CHECK_THROWS_AS(
      parse_schema(R"({"type":"object","properties":{"a":{"type":"boolean"}},"order":[]})"),
      MalformedSchema);
  CHECK_THROWS_AS(
      parse_schema(R"({"type":"object","properties":{"a":{"type":"boolean"}},"order":["a","a"]})"),
      MalformedSchema);

  // nesting depth > 8
  std::string deep = R"({"type":"string"})";
  for (int i = 0; i < 8; ++i) deep = R"({"type":"array","items":)" + deep + "}";
  CHECK_THROWS_AS(parse_schema(deep), DepthExceeded);
  std::string deep_ok = R"({"type":"string"})";
  for (int i = 0; i < 7; ++i) deep_ok = R"({"type":"array","items":)" + deep_ok + "}";
  CHECK_NOTHROW(parse_schema(deep_ok));
}

TEST_CASE("boolean pattern accepts exactly true and false") {
  const std::string pattern = compile_schema(SchemaNode::boolean_node());
  Dfa dfa = compile_regex(pattern);
  int accepted = 0;
  ref::enumerate_strings("truefals", 5, [&](const std::string& s) {
    const bool hit = dfa.accepts(s);
    const bool expected = s == "true" || s == "false";
    CHECK(hit == expected);
    accepted += hit;
  });
  CHECK(accepted == 2);
}

TEST_CASE("array-of-strings pattern agrees with the validity oracle by enumeration") {
  const SchemaNode schema = SchemaNode::array_node(SchemaNode::string_node());
  Dfa dfa = compile_regex(compile_schema(schema));

  CHECK(dfa.accepts(R"(["a","b"])"));
  CHECK(dfa.accepts("[]"));
  CHECK_FALSE(dfa.accepts(R"(["a",])"));
  CHECK_FALSE(dfa.accepts("[true]"));

  size_t checked = 0, valid = 0;
  ref::enumerate_strings("[]\",a", 10, [&](const std::string& s) {
    const bool by_dfa = dfa.accepts(s);
    const bool by_oracle = test_oracle::valid_instance(schema, s);
    if (by_dfa != by_oracle) {
      CAPTURE(s);
      REQUIRE(by_dfa == by_oracle);
    }
    ++checked;
    valid += by_dfa;
  });
  CHECK(checked > 3000000);  // exhaustive over the reduced alphabet
  CHECK(valid > 0);
}

TEST_CASE("object pattern enforces the declared key order") {
  const SchemaNode schema = builtin_schemas().ambiguity;
  Dfa dfa = compile_regex(compile_schema(schema));

  const std::string canonical =
      R"({"ambiguity": true, "explanation": "x", "clarifying_question": ""})";
  CHECK(dfa.accepts(canonical));
  CHECK(test_oracle::valid_instance(schema, canonical));

  // every non-identity permutation of the three keys must be rejected
  const std::string parts[3] = {R"("ambiguity": true)", R"("explanation": "x")",
                                R"("clarifying_question": "")"};
  int perm[3] = {0, 1, 2};
  int rejected = 0;
  std::sort(perm, perm + 3);
  do {
    if (perm[0] == 0 && perm[1] == 1 && perm[2] == 2) continue;
    const std::string s =
        "{" + parts[perm[0]] + ", " + parts[perm[1]] + ", " + parts[perm[2]] + "}";
    CHECK_FALSE(dfa.accepts(s));
    CHECK_FALSE(test_oracle::valid_instance(schema, s));
    ++rejected;
  } while (std::next_permutation(perm, perm + 3));
  CHECK(rejected == 5);
}

TEST_CASE("whitespace policy: single optional spaces at the stated positions") {
  const SchemaNode arr = SchemaNode::array_node(SchemaNode::string_node());
  Dfa adfa = compile_regex(compile_schema(arr));
  CHECK(adfa.accepts(R"([ "a", "b" ])"));
  CHECK(adfa.accepts(R"(["a","b"])"));
  CHECK(adfa.accepts("[ ]"));
  CHECK_FALSE(adfa.accepts(R"([  "a"])"));   // double space
  CHECK_FALSE(adfa.accepts(R"(["a" ,"b"])"));  // space before array comma
  CHECK_FALSE(adfa.accepts("[\"a\"] "));       // trailing space outside the array

  const SchemaNode obj = SchemaNode::object_node({{"a", SchemaNode::boolean_node()}});
  Dfa odfa = compile_regex(compile_schema(obj));
  CHECK(odfa.accepts(R"({"a":true})"));
  CHECK(odfa.accepts(R"({"a": true})"));
  CHECK(odfa.accepts(R"({"a" : true})"));  // spaces around ':'
  CHECK_FALSE(odfa.accepts(R"({ "a": true})"));  // no space after '{'
  CHECK_FALSE(odfa.accepts(R"({"a": true })"));  // no space before '}'
}

TEST_CASE("string escapes and content bounds") {
  const SchemaNode schema = SchemaNode::string_node();
  Dfa dfa = compile_regex(compile_schema(schema));
  CHECK(dfa.accepts(R"("")"));
  CHECK(dfa.accepts(R"("hello world")"));
  CHECK(dfa.accepts(R"("a\"b")"));
  CHECK(dfa.accepts(R"("a\\b")"));
  CHECK(dfa.accepts(R"("a\nb")"));
  CHECK(dfa.accepts(R"("a\tb")"));
  CHECK_FALSE(dfa.accepts(R"("a\xb")"));  // unsupported escape
  CHECK_FALSE(dfa.accepts("\"a\nb\""));   // raw control character
  CHECK_FALSE(dfa.accepts(R"("a"b")"));   // unescaped quote

  const std::string content(kMaxStringContentLength, 'q');
  CHECK(dfa.accepts("\"" + content + "\""));
  CHECK_FALSE(dfa.accepts("\"" + content + "q\""));
  // escapes count as one content unit
  std::string escapes;
  for (int i = 0; i < kMaxStringContentLength; ++i) escapes += "\\n";
  CHECK(dfa.accepts("\"" + escapes + "\""));
  CHECK_FALSE(dfa.accepts("\"" + escapes + "\\n\""));
}

TEST_CASE("builtin schemas match the two structured-output formats") {
  BuiltinSchemas b = builtin_schemas();
  CHECK(b.grounding == SchemaNode::array_node(SchemaNode::string_node()));
  REQUIRE(b.ambiguity.field_names.size() == 3);
  CHECK(b.ambiguity.field_names[0] == "ambiguity");
  CHECK(b.ambiguity.field_names[1] == "explanation");
  CHECK(b.ambiguity.field_names[2] == "clarifying_question");
  CHECK(b.ambiguity.children[0].kind == SchemaKind::Boolean);
  CHECK(b.ambiguity.children[1].kind == SchemaKind::String);
  CHECK(b.ambiguity.children[2].kind == SchemaKind::String);

  Dfa g = compile_regex(compile_schema(b.grounding));
  CHECK(g.accepts(R"(["blue block", "red bowl"])"));
  Dfa a = compile_regex(compile_schema(b.ambiguity));
  CHECK(a.accepts(R"({"ambiguity": false, "explanation": "only one cup", "clarifying_question": ""})"));
  CHECK_FALSE(a.accepts(R"({"explanation": "x", "ambiguity": true, "clarifying_question": "?"})"));
}

namespace {

SchemaNode random_schema(Rng& rng, int depth) {
  const uint64_t roll = rng.uniform(depth <= 1 ? 2 : 4);
  switch (roll) {
    case 0: return SchemaNode::boolean_node();
    case 1: return SchemaNode::string_node();
    case 2: return SchemaNode::array_node(random_schema(rng, depth - 1));
    default: {
      static const char* names[] = {"a", "b", "c", "d"};
      const size_t n = 1 + rng.uniform(3);
      std::vector<std::pair<std::string, SchemaNode>> fields;
      for (size_t i = 0; i < n; ++i) fields.emplace_back(names[i], random_schema(rng, depth - 1));
      return SchemaNode::object_node(std::move(fields));
    }
  }
}

// serialize one valid instance, optionally sprinkling the allowed spaces
std::string sample_instance(const SchemaNode& s, Rng& rng) {
  auto sp = [&] { return rng.uniform(2) ? " " : ""; };
  switch (s.kind) {
    case SchemaKind::Boolean: return rng.uniform(2) ? "true" : "false";
    case SchemaKind::String: {
      static const char* contents[] = {"", "a", "ab", "a b", "\\n", "\\\"", "x\\\\y"};
      return std::string("\"") + contents[rng.uniform(7)] + "\"";
    }
    case SchemaKind::Array: {
      const size_t n = rng.uniform(3);
      if (n == 0) return "[" + std::string(sp()) + "]";
      std::string out = "[";
      out += sp();
      for (size_t i = 0; i < n; ++i) {
        if (i) out += "," + std::string(sp());
        out += sample_instance(s.children[0], rng);
      }
      out += sp();
      return out + "]";
    }
    case SchemaKind::Object: {
      std::string out = "{";
      for (size_t i = 0; i < s.children.size(); ++i) {
        if (i) out += std::string(sp()) + "," + sp();
        out += "\"" + s.field_names[i] + "\"" + sp() + ":" + sp() +
               sample_instance(s.children[i], rng);
      }
      return out + "}";
    }
  }
  return "";
}

}  // namespace

TEST_CASE("property: compiled patterns agree with the oracle on random schemas") {
  Rng rng(2024);
  for (int round = 0; round < 25; ++round) {
    SchemaNode schema = random_schema(rng, 3);
    const std::string pattern = compile_schema(schema);
    CHECK(compile_schema(schema) == pattern);  // deterministic compilation
    Dfa dfa;
    REQUIRE_NOTHROW(dfa = compile_regex(pattern));  // parses under the FSM grammar

    // positive samples with randomized optional spacing
    for (int k = 0; k < 40; ++k) {
      const std::string s = sample_instance(schema, rng);
      CAPTURE(pattern);
      CAPTURE(s);
      REQUIRE(test_oracle::valid_instance(schema, s));
      REQUIRE(dfa.accepts(s));
    }
    // mutations: both sides must agree on every corruption
    for (int k = 0; k < 60; ++k) {
      std::string s = sample_instance(schema, rng);
      if (s.empty()) continue;
      switch (rng.uniform(3)) {
        case 0: s.erase(rng.uniform(s.size()), 1); break;
        case 1: s.insert(rng.uniform(s.size() + 1), 1, "[]{}\",: abtrue"[rng.uniform(14)]); break;
        default: s[rng.uniform(s.size())] = "[]{}\",: abtrue"[rng.uniform(14)]; break;
      }
      CAPTURE(pattern);
      CAPTURE(s);
      REQUIRE(dfa.accepts(s) == test_oracle::valid_instance(schema, s));
    }
  }
}

TEST_CASE("compile_schema propagates depth violations on hand-built nodes") {
  SchemaNode deep = SchemaNode::string_node();
  for (int i = 0; i < 8; ++i) deep = SchemaNode::array_node(std::move(deep));
  CHECK_THROWS_AS(compile_schema(deep), DepthExceeded);
  CHECK_THROWS_AS(
      SchemaNode::object_node({{"a", SchemaNode::boolean_node()}, {"a", SchemaNode::string_node()}}),
      MalformedSchema);
}
