#pragma once

#include <map>
#include <string>
#include <vector>

#include "promptcache/errors.hpp"

namespace pc::pml {

// ---------------------------------------------------------------------------
// Schema AST
// ---------------------------------------------------------------------------

enum class NodeKind { Text, Module, Union, Param, Chat };

struct SchemaNode {
  NodeKind kind = NodeKind::Text;
  std::string text;   // Text
  std::string name;   // Module, Param
  int param_len = 0;  // Param
  std::string role;   // Chat: "system" | "user" | "assistant"
  bool anonymous = false;  // Module generated from bare schema-level text
  std::vector<SchemaNode> children;  // Module, Union, Chat

  static SchemaNode make_text(std::string t) {
    SchemaNode n; n.kind = NodeKind::Text; n.text = std::move(t); return n;
  }
  static SchemaNode make_module(std::string name, std::vector<SchemaNode> ch = {}) {
    SchemaNode n; n.kind = NodeKind::Module; n.name = std::move(name);
    n.children = std::move(ch); return n;
  }
  static SchemaNode make_union(std::vector<SchemaNode> ch) {
    SchemaNode n; n.kind = NodeKind::Union; n.children = std::move(ch); return n;
  }
  static SchemaNode make_param(std::string name, int len) {
    SchemaNode n; n.kind = NodeKind::Param; n.name = std::move(name);
    n.param_len = len; return n;
  }
  static SchemaNode make_chat(std::string role, std::vector<SchemaNode> ch) {
    SchemaNode n; n.kind = NodeKind::Chat; n.role = std::move(role);
    n.children = std::move(ch); return n;
  }

  bool operator==(const SchemaNode&) const = default;
};

struct SchemaDoc {
  std::string name;
  std::vector<SchemaNode> root;

  bool operator==(const SchemaDoc&) const = default;
};

// ---------------------------------------------------------------------------
// Prompt AST
// ---------------------------------------------------------------------------

struct PromptItem;

struct ModuleImport {
  std::string name;
  // Parameter arguments, in document order. Values from attributes and from
  // text-only child elements normalize into the same list.
  std::vector<std::pair<std::string, std::string>> args;
  std::vector<PromptItem> children;  // nested imports
};

struct PromptItem {
  enum class Kind { Import, Text };
  Kind kind = Kind::Text;
  ModuleImport import;  // Kind::Import
  std::string text;     // Kind::Text

  static PromptItem make_text(std::string t) {
    PromptItem p; p.kind = Kind::Text; p.text = std::move(t); return p;
  }
  static PromptItem make_import(ModuleImport m) {
    PromptItem p; p.kind = Kind::Import; p.import = std::move(m); return p;
  }
};

bool operator==(const PromptItem& a, const PromptItem& b);
bool operator==(const ModuleImport& a, const ModuleImport& b);

struct PromptDoc {
  std::string schema_name;
  std::vector<PromptItem> items;

  bool operator==(const PromptDoc&) const = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Severity { Warning, Error };

struct Issue {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  int line = 0;
  int col = 0;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Issue> issues;

  void add(Severity sev, std::string code, std::string message);
  std::string to_json() const;
};

// Issue codes used by validate_prompt.
inline constexpr const char* kUnknownSchema = "UNKNOWN_SCHEMA";
inline constexpr const char* kUnknownModule = "UNKNOWN_MODULE";
inline constexpr const char* kUnionConflict = "UNION_CONFLICT";
inline constexpr const char* kUnknownParam = "UNKNOWN_PARAM";
inline constexpr const char* kArgTooLong = "ARG_TOO_LONG";
inline constexpr const char* kParentNotImported = "PARENT_NOT_IMPORTED";
inline constexpr const char* kUnusedParam = "UNUSED_PARAM";

// ---------------------------------------------------------------------------
// Chat templates
// ---------------------------------------------------------------------------

struct ChatTemplate {
  struct Role { std::string prefix, suffix; };
  std::map<std::string, Role> roles;

  // Llama2-style [INST] template.
  static ChatTemplate llama2();
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Throws Error(SyntaxError | DuplicateName) on malformed input. Bare schema-level
// text becomes implicit always-included modules named "__anon_<index>".
SchemaDoc parse_schema(const std::string& text);

// Throws Error(SyntaxError | MissingSchemaAttr).
PromptDoc parse_prompt(const std::string& text);

std::string serialize(const SchemaDoc& doc);
std::string serialize(const PromptDoc& doc);

ValidationReport validate_prompt(const PromptDoc& prompt, const SchemaDoc& schema);

// Replaces every chat tag with prefix/suffix text segments around its children;
// adjacent schema-level text runs merge and re-wrap as anonymous modules.
// Throws Error(UnknownRole).
SchemaDoc expand_chat_tags(const SchemaDoc& doc, const ChatTemplate& tpl);

}  // namespace pc::pml
