#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ambres/errors.hpp"

namespace ambres {

enum class SchemaKind { String, Boolean, Array, Object };

// Recursive description of a structured-output schema. Arrays hold one
// child (the element schema); objects hold an ordered list of required
// fields with unique names. Nesting depth is capped at 8.
struct SchemaNode {
  SchemaKind kind = SchemaKind::String;
  std::vector<SchemaNode> children;      // Array: 1 element; Object: field values
  std::vector<std::string> field_names;  // Object only, parallel to children

  bool operator==(const SchemaNode&) const = default;

  static SchemaNode string_node() { return {SchemaKind::String, {}, {}}; }
  static SchemaNode boolean_node() { return {SchemaKind::Boolean, {}, {}}; }
  static SchemaNode array_node(SchemaNode element);
  static SchemaNode object_node(std::vector<std::pair<std::string, SchemaNode>> fields);
};

inline constexpr int kMaxSchemaDepth = 8;
inline constexpr int kMaxStringContentLength = 256;

// Parses the restricted schema dialect:
//   {"type":"string"} | {"type":"boolean"} | {"type":"array","items":S}
//   | {"type":"object","properties":{...},"order":[...]}
// Unknown keys or types raise UnsupportedFeature; bad JSON raises
// MalformedSchema; nesting beyond kMaxSchemaDepth raises DepthExceeded.
SchemaNode parse_schema(const std::string& text);

// Compiles a schema into a regular expression whose language is exactly
// the set of valid serializations (anchored). Identical nodes compile to
// identical pattern strings.
std::string compile_schema(const SchemaNode& schema);

struct BuiltinSchemas {
  SchemaNode grounding;  // list of strings
  SchemaNode ambiguity;  // {ambiguity: bool, explanation: string, clarifying_question: string}
};

BuiltinSchemas builtin_schemas();

}  // namespace ambres
