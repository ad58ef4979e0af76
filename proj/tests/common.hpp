#pragma once

// Shared fixtures for the test suites: the small reference model config and a
// seeded random schema/prompt generator used by the property tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "promptcache/cache.hpp"
#include "promptcache/engine.hpp"
#include "promptcache/layout.hpp"
#include "promptcache/model.hpp"
#include "promptcache/pml.hpp"

namespace pctest {

inline pc::model::ModelConfig tiny_config() {
  pc::model::ModelConfig c;
  c.n_layers = 4;
  c.n_heads = 8;
  c.head_dim = 32;
  c.hidden = 256;
  c.vocab_size = 512;
  c.pos_encoding = pc::model::PosEncoding::Rope;
  c.max_position = 8192;
  c.bytes_per_element = 4;
  c.seed = 42;
  return c;
}

// Model construction fills a few million weights; share one instance.
inline const pc::model::Model& tiny_model() {
  static pc::model::Model m(tiny_config());
  return m;
}

inline const pc::model::Model& tiny_model_alibi() {
  static pc::model::Model m = [] {
    auto c = tiny_config();
    c.pos_encoding = pc::model::PosEncoding::Alibi;
    return pc::model::Model(c);
  }();
  return m;
}

inline std::string random_words(std::mt19937& rng, int min_len, int max_len) {
  static const char* kWords[] = {"plan",  "route", "hotel", "city",  "food",
                                 "train", "beach", "note",  "guide", "cost"};
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> pick(0, 9);
  int target = len(rng);
  std::string out;
  while (static_cast<int>(out.size()) < target) {
    if (!out.empty()) out += ' ';
    out += kWords[pick(rng)];
  }
  out.resize(static_cast<size_t>(target));
  if (out.back() == ' ') out.back() = 'x';
  return out;
}

struct RandomCase {
  pc::pml::SchemaDoc schema;
  pc::pml::PromptDoc prompt;
};

// A schema of 1-5 top-level modules (possibly one union, up to two params)
// plus a prompt importing a random subset, with random argument values and a
// short trailing question. Prompts always validate against their schema.
inline RandomCase random_case(uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> d_modules(1, 5);
  std::uniform_int_distribution<int> coin(0, 1);

  RandomCase rc;
  rc.schema.name = "gen" + std::to_string(seed);
  int n_modules = d_modules(rng);
  int next_param = 0;
  std::vector<std::string> names;
  // module name -> (param name, max len)
  std::vector<std::tuple<std::string, std::string, int>> params;

  bool want_union = n_modules >= 3 && coin(rng) == 1;
  int union_at =
      want_union ? std::uniform_int_distribution<int>(0, n_modules - 2)(rng) : -1;

  for (int i = 0; i < n_modules; ++i) {
    std::string name = "m" + std::to_string(i);
    bool in_union = i == union_at;
    if (in_union) name += "a";
    std::vector<pc::pml::SchemaNode> body;
    body.push_back(pc::pml::SchemaNode::make_text(random_words(rng, 8, 40)));
    if (next_param < 2 && coin(rng) == 1) {
      std::string pname = "p" + std::to_string(next_param++);
      int plen = std::uniform_int_distribution<int>(3, 8)(rng);
      body.push_back(pc::pml::SchemaNode::make_param(pname, plen));
      body.push_back(pc::pml::SchemaNode::make_text(random_words(rng, 4, 12)));
      params.emplace_back(name, pname, plen);
    }
    if (in_union) {
      std::vector<pc::pml::SchemaNode> arms;
      arms.push_back(pc::pml::SchemaNode::make_module(name, std::move(body)));
      arms.push_back(pc::pml::SchemaNode::make_module(
          "m" + std::to_string(i) + "b",
          {pc::pml::SchemaNode::make_text(random_words(rng, 8, 30))}));
      rc.schema.root.push_back(pc::pml::SchemaNode::make_union(std::move(arms)));
      names.push_back(name);
      names.push_back("m" + std::to_string(i) + "b");
    } else {
      rc.schema.root.push_back(
          pc::pml::SchemaNode::make_module(name, std::move(body)));
      names.push_back(name);
    }
    if (coin(rng) == 1)
      rc.schema.root.push_back(
          pc::pml::SchemaNode::make_text(random_words(rng, 3, 10)));
  }

  // prompt: subset of modules, at most one member per union pair
  rc.prompt.schema_name = rc.schema.name;
  bool any = false;
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string& n = names[i];
    bool is_union_b = n.back() == 'b' && i > 0 &&
                      names[i - 1] == n.substr(0, n.size() - 1) + "a";
    if (is_union_b && !rc.prompt.items.empty() &&
        rc.prompt.items.back().kind == pc::pml::PromptItem::Kind::Import &&
        rc.prompt.items.back().import.name == names[i - 1])
      continue;  // sibling already chosen
    if (any && coin(rng) == 0) continue;
    pc::pml::ModuleImport imp;
    imp.name = n;
    for (auto& [mod, pname, plen] : params)
      if (mod == n && coin(rng) == 1) {
        int alen = std::uniform_int_distribution<int>(1, plen)(rng);
        imp.args.emplace_back(pname, std::string(static_cast<size_t>(alen), 'q'));
      }
    rc.prompt.items.push_back(pc::pml::PromptItem::make_import(std::move(imp)));
    any = true;
  }
  if (!any) {
    pc::pml::ModuleImport imp;
    imp.name = names[0];
    rc.prompt.items.push_back(pc::pml::PromptItem::make_import(std::move(imp)));
  }
  if (coin(rng) == 1)
    rc.prompt.items.push_back(
        pc::pml::PromptItem::make_text(random_words(rng, 3, 12)));
  return rc;
}

// Random schema AST (no prompt) for serializer round-trip property tests.
// Exercises nesting, unions, params and awkward text (markup characters,
// quotes, inner whitespace). Adjacent text runs are avoided because the
// serializer legitimately fuses them.
inline pc::pml::SchemaDoc random_ast(uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> d_children(1, 3);
  int counter = 0;
  int anon_count = 0;

  const std::string charset = "ab <>&\"'xyz.,!?";
  auto text = [&] {
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_int_distribution<int> pick(0,
                                            static_cast<int>(charset.size()) - 1);
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i) s += charset[static_cast<size_t>(pick(rng))];
    // surrounding whitespace would not survive anonymous-module trimming
    if (s.front() == ' ') s.front() = 'a';
    if (s.back() == ' ') s.back() = 'z';
    return s;
  };

  std::function<pc::pml::SchemaNode(int)> module = [&](int depth) {
    std::string name = "n" + std::to_string(counter++);
    std::vector<pc::pml::SchemaNode> body;
    int n = d_children(rng);
    bool last_was_text = false;
    for (int i = 0; i < n; ++i) {
      int kind = std::uniform_int_distribution<int>(0, depth < 2 ? 3 : 1)(rng);
      if (kind == 0 && last_was_text) kind = 1;
      last_was_text = kind == 0;
      switch (kind) {
        case 0:
          body.push_back(pc::pml::SchemaNode::make_text(text()));
          break;
        case 1:
          body.push_back(pc::pml::SchemaNode::make_param(
              "q" + std::to_string(counter++),
              std::uniform_int_distribution<int>(1, 9)(rng)));
          break;
        case 2:
          body.push_back(module(depth + 1));
          break;
        default: {
          std::vector<pc::pml::SchemaNode> arms;
          arms.push_back(module(depth + 1));
          arms.push_back(module(depth + 1));
          body.push_back(pc::pml::SchemaNode::make_union(std::move(arms)));
        }
      }
    }
    return pc::pml::SchemaNode::make_module(name, std::move(body));
  };

  pc::pml::SchemaDoc doc;
  doc.name = "ast" + std::to_string(seed);
  int n = d_children(rng);
  bool last_was_anon = false;
  for (int i = 0; i < n; ++i) {
    if (coin(rng) == 1 && !last_was_anon) {
      // bare text: the parser names these by position
      pc::pml::SchemaNode anon = pc::pml::SchemaNode::make_module(
          "__anon_" + std::to_string(anon_count++),
          {pc::pml::SchemaNode::make_text(text())});
      anon.anonymous = true;
      doc.root.push_back(std::move(anon));
      last_was_anon = true;
    } else {
      doc.root.push_back(module(0));
      last_was_anon = false;
    }
  }
  return doc;
}

inline double max_rel_diff(const std::vector<float>& a,
                           const std::vector<float>& b) {
  if (a.size() != b.size()) return 1e30;
  double worst = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double denom = std::max(1.0, std::abs(static_cast<double>(a[i])));
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]) / denom);
  }
  return worst;
}

}  // namespace pctest
