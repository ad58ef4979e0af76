#pragma once

#include <map>
#include <string>
#include <vector>

#include "promptcache/pml.hpp"

namespace pc::compiler {

// Structured mini prompt-program, normally loaded from JSON (see
// docs/program.schema.json). Conditionals lower to modules, choose-one
// statements to unions, calls to nested modules, parameter declarations to
// <param> slots.
struct Stmt;

struct ChooseArm {
  std::string name;
  std::vector<Stmt> body;
};

struct Stmt {
  enum class Kind { Emit, If, ChooseOne, Call, ParamDecl };
  Kind kind = Kind::Emit;
  std::string text;            // Emit
  std::string name;            // If (condition), Call (function), ParamDecl
  int max_len = 0;             // ParamDecl
  std::vector<Stmt> body;      // If
  std::vector<ChooseArm> arms; // ChooseOne
};

struct PromptProgram {
  std::vector<Stmt> statements;
  std::map<std::string, std::vector<Stmt>> functions;

  static PromptProgram from_json(const std::string& json_text);
};

// Throws Error(UnknownCall | RecursionDetected | DuplicateName | InvalidProgram).
pml::SchemaDoc compile_program(const PromptProgram& program,
                               const std::string& schema_name);

}  // namespace pc::compiler
