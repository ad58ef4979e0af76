#include "promptcache/compiler.hpp"

#include <set>

#include "json.hpp"

namespace pc::compiler {

namespace {

Stmt parse_stmt(const nlohmann::json& j);

std::vector<Stmt> parse_body(const nlohmann::json& j) {
  if (!j.is_array())
    throw Error(ErrorCode::InvalidProgram, "statement body must be an array");
  std::vector<Stmt> out;
  for (const auto& s : j) out.push_back(parse_stmt(s));
  return out;
}

Stmt parse_stmt(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1)
    throw Error(ErrorCode::InvalidProgram,
                "each statement must be an object with exactly one key");
  Stmt s;
  if (j.contains("emit")) {
    s.kind = Stmt::Kind::Emit;
    s.text = j.at("emit").get<std::string>();
  } else if (j.contains("if")) {
    s.kind = Stmt::Kind::If;
    s.name = j.at("if").at("name").get<std::string>();
    s.body = parse_body(j.at("if").at("body"));
  } else if (j.contains("choose_one")) {
    s.kind = Stmt::Kind::ChooseOne;
    for (const auto& arm : j.at("choose_one")) {
      ChooseArm a;
      a.name = arm.at("name").get<std::string>();
      a.body = parse_body(arm.at("body"));
      s.arms.push_back(std::move(a));
    }
  } else if (j.contains("call")) {
    s.kind = Stmt::Kind::Call;
    s.name = j.at("call").get<std::string>();
  } else if (j.contains("param")) {
    s.kind = Stmt::Kind::ParamDecl;
    s.name = j.at("param").at("name").get<std::string>();
    s.max_len = j.at("param").at("len").get<int>();
    if (s.max_len < 1)
      throw Error(ErrorCode::InvalidProgram, "param len must be >= 1");
  } else {
    throw Error(ErrorCode::InvalidProgram,
                "unknown statement key \"" + j.begin().key() + "\"");
  }
  return s;
}

}  // namespace

PromptProgram PromptProgram::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidProgram, std::string("bad program JSON: ") + e.what());
  }
  PromptProgram p;
  if (j.contains("functions"))
    for (auto& [name, body] : j.at("functions").items())
      p.functions[name] = parse_body(body);
  p.statements = parse_body(j.at("statements"));
  return p;
}

namespace {

struct Compiler {
  const PromptProgram& program;
  std::set<std::string> module_names;
  std::set<std::string> call_stack;  // functions on the current expansion path

  void claim_name(const std::string& name) {
    if (!module_names.insert(name).second)
      throw Error(ErrorCode::DuplicateName, "module name \"" + name + "\" used twice");
  }

  std::vector<pml::SchemaNode> lower(const std::vector<Stmt>& stmts,
                                     bool inside_module) {
    std::vector<pml::SchemaNode> out;
    for (const Stmt& s : stmts) {
      switch (s.kind) {
        case Stmt::Kind::Emit:
          out.push_back(pml::SchemaNode::make_text(s.text));
          break;
        case Stmt::Kind::If: {
          claim_name(s.name);
          out.push_back(pml::SchemaNode::make_module(s.name, lower(s.body, true)));
          break;
        }
        case Stmt::Kind::ChooseOne: {
          std::vector<pml::SchemaNode> arms;
          for (const ChooseArm& a : s.arms) {
            claim_name(a.name);
            arms.push_back(pml::SchemaNode::make_module(a.name, lower(a.body, true)));
          }
          out.push_back(pml::SchemaNode::make_union(std::move(arms)));
          break;
        }
        case Stmt::Kind::Call: {
          auto fn = program.functions.find(s.name);
          if (fn == program.functions.end())
            throw Error(ErrorCode::UnknownCall, "no function \"" + s.name + "\"");
          if (!call_stack.insert(s.name).second)
            throw Error(ErrorCode::RecursionDetected,
                        "recursive call to \"" + s.name + "\"");
          claim_name(s.name);
          out.push_back(pml::SchemaNode::make_module(s.name, lower(fn->second, true)));
          call_stack.erase(s.name);
          break;
        }
        case Stmt::Kind::ParamDecl:
          if (!inside_module)
            throw Error(ErrorCode::InvalidProgram,
                        "param \"" + s.name + "\" declared outside any module");
          out.push_back(pml::SchemaNode::make_param(s.name, s.max_len));
          break;
      }
    }
    return out;
  }
};

}  // namespace

pml::SchemaDoc compile_program(const PromptProgram& program,
                               const std::string& schema_name) {
  Compiler c{program, {}, {}};
  std::vector<pml::SchemaNode> lowered = c.lower(program.statements, false);

  // top-level emitted text becomes anonymous always-included modules, same
  // convention as the parser
  pml::SchemaDoc doc;
  doc.name = schema_name;
  int anon = 0;
  std::string pending;
  auto flush = [&] {
    // surrounding whitespace would not survive a parse of the emitted text,
    // so trim it the way the parser does
    size_t b = pending.find_first_not_of(" \t\r\n");
    size_t e = pending.find_last_not_of(" \t\r\n");
    pending = b == std::string::npos ? "" : pending.substr(b, e - b + 1);
    if (pending.empty()) return;
    pml::SchemaNode m = pml::SchemaNode::make_module(
        "__anon_" + std::to_string(anon++), {pml::SchemaNode::make_text(pending)});
    m.anonymous = true;
    doc.root.push_back(std::move(m));
    pending.clear();
  };
  for (pml::SchemaNode& n : lowered) {
    if (n.kind == pml::NodeKind::Text) {
      pending += n.text;
    } else {
      flush();
      doc.root.push_back(std::move(n));
    }
  }
  flush();
  return doc;
}

}  // namespace pc::compiler
