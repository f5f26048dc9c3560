#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "augraph/common.hpp"
#include "augraph/values.hpp"

namespace augraph {

struct RelationDecl {
  std::string name;
  std::vector<std::string> attr_names;
  std::vector<AttrType> attr_types;

  int arity() const { return static_cast<int>(attr_types.size()); }

  // 1-based position of a named attribute, 0 if absent.
  int position_of(const std::string& attr) const {
    for (size_t i = 0; i < attr_names.size(); ++i)
      if (attr_names[i] == attr) return static_cast<int>(i) + 1;
    return 0;
  }
};

// (R_i, j, R_k): position j of R_i references the primary key of R_k.
// Positions are 1-based; position 1 is the primary key. User schemas never
// carry a link at position 1; the task-encoding relation added by
// attach_task is the one exception.
struct ForeignKeyLink {
  std::string relation;
  int position = 0;
  std::string target;

  bool operator==(const ForeignKeyLink& o) const {
    return relation == o.relation && position == o.position && target == o.target;
  }
  bool operator<(const ForeignKeyLink& o) const {
    return std::tie(relation, position, target) < std::tie(o.relation, o.position, o.target);
  }
};

struct Schema {
  std::vector<RelationDecl> relations;
  std::vector<ForeignKeyLink> links;

  const RelationDecl* find(const std::string& name) const {
    for (const auto& r : relations)
      if (r.name == name) return &r;
    return nullptr;
  }

  int index_of(const std::string& name) const {
    for (size_t i = 0; i < relations.size(); ++i)
      if (relations[i].name == name) return static_cast<int>(i);
    return -1;
  }

  bool position_is_linked(const std::string& relation, int position) const {
    for (const auto& l : links)
      if (l.relation == relation && l.position == position) return true;
    return false;
  }

  std::string descriptor_text() const {
    std::string out;
    for (const auto& r : relations) {
      out += "relation " + r.name + "(";
      for (int i = 0; i < r.arity(); ++i) {
        if (i) out += ", ";
        out += r.attr_names[i] + ":" + r.attr_types[i].to_string();
      }
      out += ")\n";
    }
    return out;
  }
};

namespace detail {

struct DescriptorCursor {
  std::string_view text;
  size_t pos = 0;
  int line = 1;
  int col = 1;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  void advance() {
    if (text[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_ws_and_comments() {
    while (!eof()) {
      char c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail_validation("schema descriptor: " + msg + " at line " + std::to_string(line) + ", column " +
                        std::to_string(col),
                    {{"line", line}, {"column", col}});
  }

  std::string read_identifier() {
    skip_ws_and_comments();
    if (eof()) error("unexpected end of input, expected identifier");
    size_t start = pos;
    if (!(std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_'))
      error("expected identifier");
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) advance();
    return std::string(text.substr(start, pos - start));
  }

  void expect(char c) {
    skip_ws_and_comments();
    if (eof() || peek() != c) error(std::string("expected '") + c + "'");
    advance();
  }

  bool try_consume(char c) {
    skip_ws_and_comments();
    if (!eof() && peek() == c) {
      advance();
      return true;
    }
    return false;
  }
};

}  // namespace detail

// Parses the schema-descriptor format:
//
//   # comment
//   relation customer(id:key, region:cat, score:float?)
//   relation order(id:key, cust:fk(customer), qty:int)
//
// Types: key, fk(<relation>), cat, int, float; a '?' suffix marks
// missing-allowed. Foreign-key links are implied by fk(...) positions.
inline Schema parse_schema(std::string_view descriptor_text) {
  detail::DescriptorCursor cur{descriptor_text};
  Schema schema;
  std::set<std::string> seen_names;

  while (true) {
    cur.skip_ws_and_comments();
    if (cur.eof()) break;
    std::string kw = cur.read_identifier();
    if (kw != "relation") cur.error("expected 'relation', got '" + kw + "'");
    RelationDecl rel;
    rel.name = cur.read_identifier();
    if (seen_names.count(rel.name))
      fail_validation("schema descriptor: duplicate relation '" + rel.name + "'",
                      {{"relation", rel.name}});
    seen_names.insert(rel.name);
    cur.expect('(');
    while (true) {
      std::string attr_name = cur.read_identifier();
      cur.expect(':');
      std::string type_name = cur.read_identifier();
      AttrType type;
      if (type_name == "key") {
        type.kind = AttrType::Kind::Key;
      } else if (type_name == "fk") {
        type.kind = AttrType::Kind::ForeignKey;
        cur.expect('(');
        type.fk_target = cur.read_identifier();
        cur.expect(')');
      } else if (type_name == "cat") {
        type.kind = AttrType::Kind::Categorical;
      } else if (type_name == "int") {
        type.kind = AttrType::Kind::Integer;
      } else if (type_name == "float") {
        type.kind = AttrType::Kind::Float;
      } else {
        cur.error("unknown type '" + type_name + "'");
      }
      if (cur.try_consume('?')) type.nullable = true;
      if (type.is_key() && type.nullable) cur.error("key attributes cannot be missing-allowed");
      for (const auto& existing : rel.attr_names)
        if (existing == attr_name)
          fail_validation("schema descriptor: duplicate attribute '" + attr_name +
                              "' in relation '" + rel.name + "'",
                          {{"relation", rel.name}, {"attribute", attr_name}});
      rel.attr_names.push_back(attr_name);
      rel.attr_types.push_back(type);
      if (cur.try_consume(')')) break;
      cur.expect(',');
    }
    if (rel.attr_types.empty() || rel.attr_types[0].kind != AttrType::Kind::Key)
      fail_validation("schema descriptor: relation '" + rel.name +
                          "' must declare a key at position 1",
                      {{"relation", rel.name}});
    for (int i = 1; i < rel.arity(); ++i)
      if (rel.attr_types[i].is_key())
        fail_validation("schema descriptor: relation '" + rel.name +
                            "' declares a second key at position " + std::to_string(i + 1),
                        {{"relation", rel.name}, {"position", i + 1}});
    schema.relations.push_back(std::move(rel));
  }

  // Resolve foreign keys after all relations are known.
  for (const auto& rel : schema.relations) {
    for (int i = 0; i < rel.arity(); ++i) {
      const AttrType& t = rel.attr_types[i];
      if (!t.is_fk()) continue;
      if (i == 0)
        fail_validation("schema descriptor: foreign key at position 1 in relation '" + rel.name +
                            "' (position 1 is the primary key)",
                        {{"relation", rel.name}});
      if (!schema.find(t.fk_target))
        fail_validation("schema descriptor: foreign key in relation '" + rel.name +
                            "' references undeclared relation '" + t.fk_target + "'",
                        {{"relation", rel.name}, {"target", t.fk_target}});
      schema.links.push_back({rel.name, i + 1, t.fk_target});
    }
  }
  return schema;
}

}  // namespace augraph
