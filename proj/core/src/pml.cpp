#include "promptcache/pml.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include "promptcache/tokenizer.hpp"
#include "json.hpp"

namespace pc::pml {

namespace {

// ---------------------------------------------------------------------------
// Low-level XML-ish scanner. Fixed entity set, no namespaces, no CDATA.
// ---------------------------------------------------------------------------

struct RawNode {
  bool is_text = false;
  std::string text;  // decoded
  std::string tag;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<RawNode> children;
  int line = 1, col = 1;
};

class Scanner {
 public:
  explicit Scanner(const std::string& src) : src_(src) {}

  RawNode parse_document() {
    skip_ws();
    if (eof() || peek() != '<')
      fail("expected a root element");
    RawNode root = parse_element();
    skip_ws();
    if (!eof()) fail("trailing content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::SyntaxError, msg, line_, col_);
  }

  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  char advance() {
    char c = src_[pos_++];
    if (c == '\n') { ++line_; col_ = 1; } else { ++col_; }
    return c;
  }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  static bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
           c == '.';
  }

  std::string parse_name() {
    if (eof() || !is_name_start(peek())) fail("expected a name");
    std::string out;
    while (!eof() && is_name_char(peek())) out.push_back(advance());
    return out;
  }

  std::string decode_entity() {
    // positioned just past '&'
    std::string ent;
    while (!eof() && peek() != ';' && ent.size() < 8) ent.push_back(advance());
    if (eof() || peek() != ';') fail("unterminated entity");
    advance();  // ';'
    if (ent == "lt") return "<";
    if (ent == "gt") return ">";
    if (ent == "amp") return "&";
    if (ent == "quot") return "\"";
    if (ent == "apos") return "'";
    fail("unknown entity &" + ent + ";");
  }

  std::string parse_attr_value() {
    if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
    char quote = advance();
    std::string out;
    while (!eof() && peek() != quote) {
      if (peek() == '&') { advance(); out += decode_entity(); }
      else if (peek() == '<') fail("'<' in attribute value");
      else out.push_back(advance());
    }
    if (eof()) fail("unterminated attribute value");
    advance();  // closing quote
    return out;
  }

  RawNode parse_element() {
    RawNode node;
    node.line = line_;
    node.col = col_;
    advance();  // '<'
    node.tag = parse_name();
    for (;;) {
      skip_ws();
      if (eof()) fail("unterminated tag <" + node.tag + ">");
      if (peek() == '/') {
        advance();
        if (eof() || peek() != '>') fail("malformed self-closing tag");
        advance();
        return node;  // self-closing, no children
      }
      if (peek() == '>') { advance(); break; }
      std::string attr = parse_name();
      skip_ws();
      if (eof() || peek() != '=') fail("expected '=' after attribute name");
      advance();
      skip_ws();
      std::string value = parse_attr_value();
      for (auto& [k, v] : node.attrs)
        if (k == attr) fail("duplicate attribute '" + attr + "'");
      node.attrs.emplace_back(std::move(attr), std::move(value));
    }
    // children until matching close tag
    std::string pending_text;
    int text_line = line_, text_col = col_;
    auto flush_text = [&] {
      if (!pending_text.empty()) {
        RawNode t;
        t.is_text = true;
        t.text = std::move(pending_text);
        t.line = text_line;
        t.col = text_col;
        node.children.push_back(std::move(t));
        pending_text.clear();
      }
    };
    for (;;) {
      if (eof()) fail("missing closing tag </" + node.tag + ">");
      if (peek() == '<') {
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
          flush_text();
          advance(); advance();  // "</"
          std::string close = parse_name();
          skip_ws();
          if (eof() || peek() != '>') fail("malformed closing tag");
          advance();
          if (close != node.tag)
            fail("mismatched closing tag </" + close + ">, expected </" + node.tag + ">");
          return node;
        }
        flush_text();
        node.children.push_back(parse_element());
        text_line = line_;
        text_col = col_;
      } else if (peek() == '&') {
        if (pending_text.empty()) { text_line = line_; text_col = col_; }
        advance();
        pending_text += decode_entity();
      } else {
        if (pending_text.empty()) { text_line = line_; text_col = col_; }
        pending_text.push_back(advance());
      }
    }
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

bool is_ws_only(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

std::string trimmed(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

const std::set<std::string> kReservedTags = {
    "schema", "module", "union", "param", "prompt",
    "system", "user",   "assistant"};

bool is_chat_tag(const std::string& t) {
  return t == "system" || t == "user" || t == "assistant";
}

std::optional<std::string> find_attr(const RawNode& n, const std::string& key) {
  for (auto& [k, v] : n.attrs)
    if (k == key) return v;
  return std::nullopt;
}

void escape_text(const std::string& s, std::string& out) {
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
}

void escape_attr(const std::string& s, std::string& out) {
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
}

// ---------------------------------------------------------------------------
// Schema building
// ---------------------------------------------------------------------------

struct SchemaBuilder {
  int anon_index = 0;

  SchemaNode build_content_node(const RawNode& raw);

  // Children of a module or chat tag: text is content, kept verbatim.
  std::vector<SchemaNode> build_content(const RawNode& parent) {
    std::vector<SchemaNode> out;
    for (const RawNode& c : parent.children) {
      if (c.is_text) {
        out.push_back(SchemaNode::make_text(c.text));
      } else {
        out.push_back(build_content_node(c));
      }
    }
    return out;
  }

  SchemaNode build_module(const RawNode& raw) {
    auto name = find_attr(raw, "name");
    if (!name || name->empty())
      throw Error(ErrorCode::SyntaxError, "<module> requires a non-empty name attribute",
                  raw.line, raw.col);
    return SchemaNode::make_module(*name, build_content(raw));
  }

  SchemaNode build_union(const RawNode& raw) {
    std::vector<SchemaNode> members;
    for (const RawNode& c : raw.children) {
      if (c.is_text) {
        if (is_ws_only(c.text)) continue;
        throw Error(ErrorCode::SyntaxError, "bare text under <union>", c.line, c.col);
      }
      if (c.tag != "module")
        throw Error(ErrorCode::SyntaxError,
                    "non-module child <" + c.tag + "> of <union>", c.line, c.col);
      members.push_back(build_module(c));
    }
    return SchemaNode::make_union(std::move(members));
  }

  SchemaNode build_param(const RawNode& raw) {
    auto name = find_attr(raw, "name");
    if (!name || name->empty())
      throw Error(ErrorCode::SyntaxError, "<param> requires a non-empty name attribute",
                  raw.line, raw.col);
    auto len = find_attr(raw, "len");
    if (!len)
      throw Error(ErrorCode::SyntaxError, "<param> requires a len attribute",
                  raw.line, raw.col);
    int value = 0;
    try {
      size_t used = 0;
      value = std::stoi(*len, &used);
      if (used != len->size()) value = 0;
    } catch (...) {
      value = 0;
    }
    if (value < 1)
      throw Error(ErrorCode::SyntaxError,
                  "<param> len must be a positive integer, got \"" + *len + "\"",
                  raw.line, raw.col);
    if (!raw.children.empty())
      throw Error(ErrorCode::SyntaxError, "<param> must be empty", raw.line, raw.col);
    return SchemaNode::make_param(*name, value);
  }

  SchemaNode build_chat(const RawNode& raw) {
    return SchemaNode::make_chat(raw.tag, build_content(raw));
  }

  // Structural level (schema root): bare text wraps into anonymous modules.
  std::vector<SchemaNode> build_root(const RawNode& schema) {
    std::vector<SchemaNode> out;
    for (const RawNode& c : schema.children) {
      if (c.is_text) {
        if (is_ws_only(c.text)) continue;
        SchemaNode anon = SchemaNode::make_module(
            "__anon_" + std::to_string(anon_index++),
            {SchemaNode::make_text(trimmed(c.text))});
        anon.anonymous = true;
        out.push_back(std::move(anon));
      } else {
        out.push_back(build_content_node(c));
      }
    }
    return out;
  }
};

SchemaNode SchemaBuilder::build_content_node(const RawNode& raw) {
  if (raw.tag == "module") return build_module(raw);
  if (raw.tag == "union") return build_union(raw);
  if (raw.tag == "param") return build_param(raw);
  if (is_chat_tag(raw.tag)) return build_chat(raw);
  throw Error(ErrorCode::SyntaxError, "unknown tag <" + raw.tag + "> in schema",
              raw.line, raw.col);
}

void collect_module_names(const std::vector<SchemaNode>& nodes,
                          std::vector<std::string>& out) {
  for (const SchemaNode& n : nodes) {
    if (n.kind == NodeKind::Module) {
      out.push_back(n.name);
      collect_module_names(n.children, out);
    } else if (n.kind == NodeKind::Union || n.kind == NodeKind::Chat) {
      collect_module_names(n.children, out);
    }
  }
}

void check_param_placement(const std::vector<SchemaNode>& nodes, bool inside_module) {
  for (const SchemaNode& n : nodes) {
    switch (n.kind) {
      case NodeKind::Param:
        if (!inside_module)
          throw Error(ErrorCode::SyntaxError, "<param> must appear inside a <module>");
        break;
      case NodeKind::Module:
        check_param_placement(n.children, true);
        break;
      case NodeKind::Union:
      case NodeKind::Chat:
        check_param_placement(n.children, inside_module);
        break;
      default:
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Prompt building
// ---------------------------------------------------------------------------

// An element child of an import is an argument value iff it carries no
// attributes, no element children, and non-empty text. Anything else is a
// nested module import.
bool looks_like_arg(const RawNode& n) {
  if (!n.attrs.empty()) return false;
  std::string text;
  for (const RawNode& c : n.children) {
    if (!c.is_text) return false;
    text += c.text;
  }
  return !text.empty();
}

ModuleImport build_import(const RawNode& raw) {
  ModuleImport imp;
  imp.name = raw.tag;
  if (kReservedTags.count(raw.tag))
    throw Error(ErrorCode::SyntaxError,
                "reserved tag <" + raw.tag + "> cannot be imported", raw.line, raw.col);
  for (auto& [k, v] : raw.attrs) imp.args.emplace_back(k, v);
  for (const RawNode& c : raw.children) {
    if (c.is_text) {
      if (is_ws_only(c.text)) continue;
      throw Error(ErrorCode::SyntaxError,
                  "bare text inside module import <" + raw.tag + ">", c.line, c.col);
    }
    if (looks_like_arg(c)) {
      std::string value;
      for (const RawNode& t : c.children) value += t.text;
      imp.args.emplace_back(c.tag, value);
    } else {
      imp.children.push_back(PromptItem::make_import(build_import(c)));
    }
  }
  return imp;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

bool operator==(const ModuleImport& a, const ModuleImport& b) {
  return a.name == b.name && a.args == b.args && a.children == b.children;
}

bool operator==(const PromptItem& a, const PromptItem& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == PromptItem::Kind::Text) return a.text == b.text;
  return a.import == b.import;
}

SchemaDoc parse_schema(const std::string& text) {
  Scanner scanner(text);
  RawNode root = scanner.parse_document();
  if (root.tag != "schema")
    throw Error(ErrorCode::SyntaxError, "root element must be <schema>, got <" + root.tag + ">",
                root.line, root.col);
  auto name = find_attr(root, "name");
  if (!name || name->empty())
    throw Error(ErrorCode::SyntaxError, "<schema> requires a non-empty name attribute",
                root.line, root.col);

  SchemaDoc doc;
  doc.name = *name;
  SchemaBuilder builder;
  doc.root = builder.build_root(root);

  check_param_placement(doc.root, false);

  std::vector<std::string> names;
  collect_module_names(doc.root, names);
  std::set<std::string> seen;
  for (const std::string& n : names)
    if (!seen.insert(n).second)
      throw Error(ErrorCode::SyntaxError, "duplicate module name \"" + n + "\"");
  return doc;
}

PromptDoc parse_prompt(const std::string& text) {
  Scanner scanner(text);
  RawNode root = scanner.parse_document();
  if (root.tag != "prompt")
    throw Error(ErrorCode::SyntaxError, "root element must be <prompt>, got <" + root.tag + ">",
                root.line, root.col);
  auto schema = find_attr(root, "schema");
  if (!schema || schema->empty())
    throw Error(ErrorCode::MissingSchemaAttr, "<prompt> requires a schema attribute",
                root.line, root.col);

  PromptDoc doc;
  doc.schema_name = *schema;
  for (const RawNode& c : root.children) {
    if (c.is_text) {
      if (is_ws_only(c.text)) continue;
      doc.items.push_back(PromptItem::make_text(trimmed(c.text)));
    } else {
      doc.items.push_back(PromptItem::make_import(build_import(c)));
    }
  }
  return doc;
}

namespace {

void serialize_node(const SchemaNode& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Text:
      escape_text(n.text, out);
      break;
    case NodeKind::Module:
      if (n.anonymous) {
        // implicit module: emits as bare text, re-wrapped on parse
        for (const SchemaNode& c : n.children) serialize_node(c, out);
        break;
      }
      out += "<module name=\"";
      escape_attr(n.name, out);
      out += "\">";
      for (const SchemaNode& c : n.children) serialize_node(c, out);
      out += "</module>";
      break;
    case NodeKind::Union:
      out += "<union>";
      for (const SchemaNode& c : n.children) serialize_node(c, out);
      out += "</union>";
      break;
    case NodeKind::Param:
      out += "<param name=\"";
      escape_attr(n.name, out);
      out += "\" len=\"" + std::to_string(n.param_len) + "\"/>";
      break;
    case NodeKind::Chat:
      out += "<" + n.role + ">";
      for (const SchemaNode& c : n.children) serialize_node(c, out);
      out += "</" + n.role + ">";
      break;
  }
}

void serialize_item(const PromptItem& item, std::string& out) {
  if (item.kind == PromptItem::Kind::Text) {
    escape_text(item.text, out);
    return;
  }
  const ModuleImport& imp = item.import;
  out += "<" + imp.name;
  if (imp.args.empty() && imp.children.empty()) {
    out += "/>";
    return;
  }
  out += ">";
  for (auto& [k, v] : imp.args) {
    out += "<" + k + ">";
    escape_text(v, out);
    out += "</" + k + ">";
  }
  for (const PromptItem& c : imp.children) serialize_item(c, out);
  out += "</" + imp.name + ">";
}

}  // namespace

std::string serialize(const SchemaDoc& doc) {
  std::string out = "<schema name=\"";
  escape_attr(doc.name, out);
  out += "\">";
  for (const SchemaNode& n : doc.root) serialize_node(n, out);
  out += "</schema>";
  return out;
}

std::string serialize(const PromptDoc& doc) {
  std::string out = "<prompt schema=\"";
  escape_attr(doc.schema_name, out);
  out += "\">";
  for (const PromptItem& item : doc.items) serialize_item(item, out);
  out += "</prompt>";
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void ValidationReport::add(Severity sev, std::string code, std::string message) {
  if (sev == Severity::Error) ok = false;
  issues.push_back({sev, std::move(code), std::move(message), 0, 0});
}

std::string ValidationReport::to_json() const {
  nlohmann::json j;
  j["ok"] = ok;
  j["issues"] = nlohmann::json::array();
  for (const Issue& i : issues) {
    j["issues"].push_back({{"severity", i.severity == Severity::Error ? "error" : "warning"},
                           {"code", i.code},
                           {"message", i.message},
                           {"line", i.line},
                           {"col", i.col}});
  }
  return j.dump();
}

namespace {

struct ModuleInfo {
  std::map<std::string, int> params;  // name -> len
  std::string parent;                 // nearest enclosing module, "" if top-level
  int union_group = -1;
};

struct SchemaIndex {
  std::map<std::string, ModuleInfo> modules;
  int union_count = 0;

  void index_nodes(const std::vector<SchemaNode>& nodes, const std::string& parent,
                   int union_group) {
    for (const SchemaNode& n : nodes) {
      switch (n.kind) {
        case NodeKind::Module: {
          ModuleInfo info;
          info.parent = parent;
          info.union_group = union_group;
          for (const SchemaNode& c : n.children)
            if (c.kind == NodeKind::Param) info.params[c.name] = c.param_len;
          // params nested inside chat tags within the module
          std::function<void(const std::vector<SchemaNode>&)> scan_chat =
              [&](const std::vector<SchemaNode>& ch) {
                for (const SchemaNode& c : ch)
                  if (c.kind == NodeKind::Chat) {
                    for (const SchemaNode& cc : c.children)
                      if (cc.kind == NodeKind::Param) info.params[cc.name] = cc.param_len;
                    scan_chat(c.children);
                  }
              };
          scan_chat(n.children);
          modules[n.name] = std::move(info);
          index_nodes(n.children, n.name, -1);
          break;
        }
        case NodeKind::Union:
          index_nodes(n.children, parent, union_count++);
          break;
        case NodeKind::Chat:
          index_nodes(n.children, parent, union_group);
          break;
        default:
          break;
      }
    }
  }
};

void validate_imports(const std::vector<PromptItem>& items, const std::string& enclosing,
                      const SchemaIndex& index, ValidationReport& report,
                      std::map<std::string, int>& import_count,
                      std::map<int, std::vector<std::string>>& union_imports) {
  for (const PromptItem& item : items) {
    if (item.kind != PromptItem::Kind::Import) continue;
    const ModuleImport& imp = item.import;
    auto it = index.modules.find(imp.name);
    if (it == index.modules.end()) {
      report.add(Severity::Error, kUnknownModule,
                 "unknown module \"" + imp.name + "\"");
      continue;
    }
    const ModuleInfo& info = it->second;
    if (info.parent != enclosing) {
      report.add(Severity::Error, kParentNotImported,
                 "module \"" + imp.name + "\" must be imported inside \"" +
                     (info.parent.empty() ? std::string("<top level>") : info.parent) +
                     "\"");
    }
    if (++import_count[imp.name] > 1)
      report.add(Severity::Error, "DUPLICATE_IMPORT",
                 "module \"" + imp.name + "\" imported more than once");
    if (info.union_group >= 0) union_imports[info.union_group].push_back(imp.name);

    std::set<std::string> supplied;
    for (auto& [pname, value] : imp.args) {
      supplied.insert(pname);
      auto p = info.params.find(pname);
      if (p == info.params.end()) {
        report.add(Severity::Error, kUnknownParam,
                   "module \"" + imp.name + "\" has no parameter \"" + pname + "\"");
        continue;
      }
      int ntok = static_cast<int>(tok::tokenize(value).size());
      if (ntok > p->second)
        report.add(Severity::Error, kArgTooLong,
                   "argument for \"" + pname + "\" is " + std::to_string(ntok) +
                       " tokens, parameter len is " + std::to_string(p->second));
    }
    for (auto& [pname, len] : info.params)
      if (!supplied.count(pname))
        report.add(Severity::Warning, kUnusedParam,
                   "parameter \"" + pname + "\" of module \"" + imp.name +
                       "\" not supplied");
    validate_imports(imp.children, imp.name, index, report, import_count, union_imports);
  }
}

}  // namespace

ValidationReport validate_prompt(const PromptDoc& prompt, const SchemaDoc& schema) {
  ValidationReport report;
  if (prompt.schema_name != schema.name) {
    report.add(Severity::Error, kUnknownSchema,
               "prompt references schema \"" + prompt.schema_name +
                   "\", validated against \"" + schema.name + "\"");
    return report;
  }
  SchemaIndex index;
  index.index_nodes(schema.root, "", -1);

  std::map<std::string, int> import_count;
  std::map<int, std::vector<std::string>> union_imports;
  validate_imports(prompt.items, "", index, report, import_count, union_imports);

  for (auto& [group, names] : union_imports) {
    if (names.size() > 1) {
      std::string joined;
      for (auto& n : names) joined += (joined.empty() ? "" : ", ") + n;
      report.add(Severity::Error, kUnionConflict,
                 "modules from the same union imported together: " + joined);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Chat template expansion
// ---------------------------------------------------------------------------

ChatTemplate ChatTemplate::llama2() {
  ChatTemplate t;
  t.roles["system"] = {"<<SYS>>\n", "\n<</SYS>>\n\n"};
  t.roles["user"] = {"[INST] ", " [/INST]"};
  t.roles["assistant"] = {" ", " </s>"};
  return t;
}

namespace {

void expand_nodes(const std::vector<SchemaNode>& in, const ChatTemplate& tpl,
                  std::vector<SchemaNode>& out) {
  for (const SchemaNode& n : in) {
    if (n.kind == NodeKind::Chat) {
      auto role = tpl.roles.find(n.role);
      if (role == tpl.roles.end())
        throw Error(ErrorCode::UnknownRole, "no template for role \"" + n.role + "\"");
      if (!role->second.prefix.empty())
        out.push_back(SchemaNode::make_text(role->second.prefix));
      expand_nodes(n.children, tpl, out);
      if (!role->second.suffix.empty())
        out.push_back(SchemaNode::make_text(role->second.suffix));
    } else {
      SchemaNode copy = n;
      if (!copy.children.empty()) {
        std::vector<SchemaNode> ch;
        expand_nodes(copy.children, tpl, ch);
        copy.children = std::move(ch);
      }
      out.push_back(std::move(copy));
    }
  }
}

int max_anon_index(const std::vector<SchemaNode>& nodes) {
  int max_idx = -1;
  for (const SchemaNode& n : nodes) {
    if (n.kind == NodeKind::Module && n.anonymous &&
        n.name.rfind("__anon_", 0) == 0) {
      try {
        max_idx = std::max(max_idx, std::stoi(n.name.substr(7)));
      } catch (...) {
      }
    }
    max_idx = std::max(max_idx, max_anon_index(n.children));
  }
  return max_idx;
}

}  // namespace

SchemaDoc expand_chat_tags(const SchemaDoc& doc, const ChatTemplate& tpl) {
  SchemaDoc out;
  out.name = doc.name;
  std::vector<SchemaNode> expanded;
  expand_nodes(doc.root, tpl, expanded);

  // Merge adjacent root-level text runs and wrap them as anonymous modules.
  int next_anon = max_anon_index(expanded) + 1;
  std::string pending;
  auto flush = [&] {
    if (pending.empty()) return;
    SchemaNode anon = SchemaNode::make_module(
        "__anon_" + std::to_string(next_anon++),
        {SchemaNode::make_text(std::move(pending))});
    anon.anonymous = true;
    out.root.push_back(std::move(anon));
    pending.clear();
  };
  for (SchemaNode& n : expanded) {
    if (n.kind == NodeKind::Text) {
      pending += n.text;
    } else {
      flush();
      out.root.push_back(std::move(n));
    }
  }
  flush();
  return out;
}

}  // namespace pc::pml
