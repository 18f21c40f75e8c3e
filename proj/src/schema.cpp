#include "ambres/schema.hpp"

#include <algorithm>
#include <set>

#include "ambres/regex.hpp"
#include "json.hpp"

namespace ambres {

namespace {

using nlohmann::json;

// content unit: any printable char except '"' and '\', or one of the
// four supported escapes
const char* kStringPattern = "\"([ !#-[\\]-~]|\\\\[\"\\\\nt]){0,256}\"";

int depth_of(const SchemaNode& node) {
  int deepest = 0;
  for (const SchemaNode& c : node.children) deepest = std::max(deepest, depth_of(c));
  return 1 + deepest;
}

void validate_node(const SchemaNode& node) {
  if (node.kind == SchemaKind::Array && node.children.size() != 1)
    throw MalformedSchema("array schema requires exactly one element schema");
  if (node.kind == SchemaKind::Object) {
    if (node.children.size() != node.field_names.size())
      throw MalformedSchema("object schema field names and values must align");
    std::set<std::string> seen(node.field_names.begin(), node.field_names.end());
    if (seen.size() != node.field_names.size())
      throw MalformedSchema("object field names must be unique");
  }
  for (const SchemaNode& c : node.children) validate_node(c);
}

SchemaNode from_json(const json& j, int depth) {
  if (depth > kMaxSchemaDepth)
    throw DepthExceeded("schema nesting exceeds depth " + std::to_string(kMaxSchemaDepth));
  if (!j.is_object()) throw MalformedSchema("schema node must be a JSON object");
  if (!j.contains("type")) throw MalformedSchema("schema node missing \"type\"");
  if (!j["type"].is_string()) throw MalformedSchema("\"type\" must be a string");
  const std::string type = j["type"].get<std::string>();

  auto check_keys = [&](std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : allowed)
        if (it.key() == k) ok = true;
      if (!ok)
        throw UnsupportedFeature("unsupported schema key \"" + it.key() + "\" for type " + type);
    }
  };

  if (type == "string") {
    check_keys({"type"});
    return SchemaNode::string_node();
  }
  if (type == "boolean") {
    check_keys({"type"});
    return SchemaNode::boolean_node();
  }
  if (type == "array") {
    check_keys({"type", "items"});
    if (!j.contains("items")) throw MalformedSchema("array schema missing \"items\"");
    return SchemaNode::array_node(from_json(j["items"], depth + 1));
  }
  if (type == "object") {
    check_keys({"type", "properties", "order"});
    if (!j.contains("properties") || !j["properties"].is_object())
      throw MalformedSchema("object schema missing \"properties\" object");
    if (!j.contains("order") || !j["order"].is_array())
      throw MalformedSchema("object schema missing \"order\" array");
    const json& props = j["properties"];
    std::vector<std::pair<std::string, SchemaNode>> fields;
    std::set<std::string> ordered;
    for (const json& name : j["order"]) {
      if (!name.is_string()) throw MalformedSchema("\"order\" entries must be strings");
      const std::string key = name.get<std::string>();
      if (!ordered.insert(key).second)
        throw MalformedSchema("duplicate field \"" + key + "\" in \"order\"");
      if (!props.contains(key))
        throw MalformedSchema("\"order\" names unknown field \"" + key + "\"");
      fields.emplace_back(key, from_json(props.at(key), depth + 1));
    }
    if (ordered.size() != props.size())
      throw MalformedSchema("\"order\" must list every property exactly once");
    return SchemaNode::object_node(std::move(fields));
  }
  throw UnsupportedFeature("unsupported schema type \"" + type + "\"");
}

std::string emit(const SchemaNode& node, bool embedded) {
  switch (node.kind) {
    case SchemaKind::Boolean:
      return embedded ? "(true|false)" : "true|false";
    case SchemaKind::String:
      return kStringPattern;
    case SchemaKind::Array: {
      const std::string e = emit(node.children[0], true);
      // optional single spaces after '[' and ',' and before ']'
      std::string p = "\\[ ?\\]|\\[ ?" + e + "(, ?" + e + ")* ?\\]";
      return embedded ? "(" + p + ")" : p;
    }
    case SchemaKind::Object: {
      std::string p = "\\{";
      for (size_t i = 0; i < node.children.size(); ++i) {
        if (i > 0) p += " ?, ?";  // optional single spaces around ','
        p += "\"" + regex_escape_literal(node.field_names[i]) + "\" ?: ?" +
             emit(node.children[i], true);
      }
      p += "\\}";
      return p;
    }
  }
  throw Error("unreachable schema kind");
}

}  // namespace

SchemaNode SchemaNode::array_node(SchemaNode element) {
  SchemaNode n;
  n.kind = SchemaKind::Array;
  n.children.push_back(std::move(element));
  return n;
}

SchemaNode SchemaNode::object_node(std::vector<std::pair<std::string, SchemaNode>> fields) {
  SchemaNode n;
  n.kind = SchemaKind::Object;
  for (auto& [name, value] : fields) {
    n.field_names.push_back(std::move(name));
    n.children.push_back(std::move(value));
  }
  validate_node(n);
  return n;
}

SchemaNode parse_schema(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedSchema(std::string("schema is not valid JSON: ") + e.what());
  }
  return from_json(j, 1);
}

std::string compile_schema(const SchemaNode& schema) {
  validate_node(schema);
  if (depth_of(schema) > kMaxSchemaDepth)
    throw DepthExceeded("schema nesting exceeds depth " + std::to_string(kMaxSchemaDepth));
  return emit(schema, false);
}

BuiltinSchemas builtin_schemas() {
  BuiltinSchemas b;
  b.grounding = SchemaNode::array_node(SchemaNode::string_node());
  b.ambiguity = SchemaNode::object_node({
      {"ambiguity", SchemaNode::boolean_node()},
      {"explanation", SchemaNode::string_node()},
      {"clarifying_question", SchemaNode::string_node()},
  });
  return b;
}

}  // namespace ambres
