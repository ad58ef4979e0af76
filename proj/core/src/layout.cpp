#include "promptcache/layout.hpp"

#include <algorithm>
#include <set>

#include "promptcache/tokenizer.hpp"
#include "json.hpp"

namespace pc::layout {

const ModuleLayout& LayoutPlan::at(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end())
    throw Error(ErrorCode::UnknownModule, "module \"" + name + "\" not in layout plan");
  return it->second;
}

std::string LayoutPlan::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const std::string& name : order) {
    const ModuleLayout& m = entries.at(name);
    nlohmann::json params = nlohmann::json::array();
    for (const ParamSlot& p : m.param_slots)
      params.push_back({{"name", p.param_name},
                        {"slot_start", p.slot_start},
                        {"slot_len", p.slot_len}});
    rows.push_back({{"module", m.module},
                    {"start", m.start_pos},
                    {"len", m.token_len},
                    {"params", params}});
  }
  nlohmann::json j;
  j["schema"] = schema_name;
  j["total_len"] = total_len;
  j["modules"] = rows;
  return j.dump();
}

namespace {

struct Walker {
  LayoutPlan plan;
  int next_order = 0;

  // Returns the cursor after laying out `nodes`. Text and params attach to
  // `current` (the nearest enclosing module); nested modules and unions get
  // their own entries.
  long walk(const std::vector<pml::SchemaNode>& nodes, long cursor,
            ModuleLayout* current, const std::string& parent) {
    for (const pml::SchemaNode& n : nodes) {
      switch (n.kind) {
        case pml::NodeKind::Text: {
          std::vector<int> tokens = tok::tokenize(n.text);
          if (current) {
            for (int t : tokens) {
              current->own_tokens.push_back(t);
              current->own_positions.push_back(cursor++);
            }
          } else {
            cursor += static_cast<long>(tokens.size());
          }
          break;
        }
        case pml::NodeKind::Param: {
          if (!current)
            throw Error(ErrorCode::Internal, "parameter outside any module");
          current->param_slots.push_back({n.name, cursor, n.param_len});
          for (int i = 0; i < n.param_len; ++i) {
            current->own_tokens.push_back(tok::kUnk);
            current->own_positions.push_back(cursor++);
          }
          break;
        }
        case pml::NodeKind::Module: {
          ModuleLayout m;
          m.module = n.name;
          m.start_pos = cursor;
          m.parent = parent;
          m.order = next_order++;
          m.anonymous = n.anonymous;
          plan.order.push_back(n.name);
          auto [it, inserted] = plan.entries.emplace(n.name, std::move(m));
          if (!inserted)
            throw Error(ErrorCode::DuplicateName, "duplicate module \"" + n.name + "\"");
          long end = walk(n.children, cursor, &it->second, n.name);
          it->second.token_len = end - cursor;
          cursor = end;
          break;
        }
        case pml::NodeKind::Union: {
          long start = cursor;
          long max_len = 0;
          UnionGroup group;
          group.start_pos = start;
          int group_id = static_cast<int>(plan.union_groups.size());
          for (const pml::SchemaNode& child : n.children) {
            if (child.kind != pml::NodeKind::Module)
              throw Error(ErrorCode::Internal, "non-module child of union");
            long end = walk({child}, start, current, parent);
            plan.entries.at(child.name).union_group = group_id;
            group.members.push_back(child.name);
            max_len = std::max(max_len, end - start);
          }
          group.group_len = max_len;
          plan.union_groups.push_back(std::move(group));
          cursor = start + max_len;
          break;
        }
        case pml::NodeKind::Chat:
          throw Error(ErrorCode::Internal,
                      "chat tags must be expanded before layout planning");
      }
    }
    return cursor;
  }
};

}  // namespace

LayoutPlan plan_layout(const pml::SchemaDoc& schema) {
  Walker walker;
  walker.plan.schema_name = schema.name;
  walker.plan.total_len = walker.walk(schema.root, 0, nullptr, "");
  return walker.plan;
}

namespace {

void collect_imports(const std::vector<pml::PromptItem>& items,
                     std::vector<const pml::ModuleImport*>& out) {
  for (const pml::PromptItem& item : items) {
    if (item.kind != pml::PromptItem::Kind::Import) continue;
    out.push_back(&item.import);
    collect_imports(item.import.children, out);
  }
}

// Argument segments of one import (and, recursively, its nested imports),
// emitted in the module's slot order.
void emit_args(const pml::ModuleImport& imp, const LayoutPlan& plan,
               std::vector<ResolvedPrompt::Uncached>& out) {
  const ModuleLayout& m = plan.at(imp.name);
  for (const ParamSlot& slot : m.param_slots) {
    const std::string* value = nullptr;
    for (auto& [k, v] : imp.args)
      if (k == slot.param_name) value = &v;
    if (!value) continue;
    Segment seg;
    seg.tokens = tok::tokenize(*value);
    if (static_cast<int>(seg.tokens.size()) > slot.slot_len)
      throw Error(ErrorCode::ArgTooLong,
                  "argument for \"" + slot.param_name + "\" exceeds len " +
                      std::to_string(slot.slot_len));
    for (size_t i = 0; i < seg.tokens.size(); ++i)
      seg.position_ids.push_back(slot.slot_start + static_cast<long>(i));
    ResolvedPrompt::Uncached u;
    u.is_arg = true;
    u.arg = {imp.name, slot.param_name, std::move(seg)};
    out.push_back(std::move(u));
  }
  for (const pml::PromptItem& c : imp.children)
    if (c.kind == pml::PromptItem::Kind::Import) emit_args(c.import, plan, out);
}

}  // namespace

ResolvedPrompt resolve_prompt(const pml::PromptDoc& prompt, const LayoutPlan& plan) {
  ResolvedPrompt out;

  std::vector<const pml::ModuleImport*> imports;
  collect_imports(prompt.items, imports);

  std::set<std::string> included;
  for (const pml::ModuleImport* imp : imports) {
    plan.at(imp->name);  // throws UnknownModule
    included.insert(imp->name);
  }
  for (const std::string& name : plan.order)
    if (plan.entries.at(name).anonymous) included.insert(name);

  out.cached_imports.assign(included.begin(), included.end());
  std::sort(out.cached_imports.begin(), out.cached_imports.end(),
            [&](const std::string& a, const std::string& b) {
              return plan.at(a).order < plan.at(b).order;
            });

  std::set<long> used;
  long max_used = -1;
  for (const std::string& name : out.cached_imports)
    for (long p : plan.at(name).own_positions) {
      used.insert(p);
      max_used = std::max(max_used, p);
    }

  // Walk top-level items in document order. Free text consumes the positional
  // gap after the preceding import; trailing text is assigned last.
  long gap_cursor = 0;
  std::vector<size_t> trailing;  // indices into out.uncached, filled later
  std::vector<std::string> trailing_texts;
  size_t last_import_idx = prompt.items.size();
  for (size_t i = 0; i < prompt.items.size(); ++i)
    if (prompt.items[i].kind == pml::PromptItem::Kind::Import) last_import_idx = i;

  for (size_t i = 0; i < prompt.items.size(); ++i) {
    const pml::PromptItem& item = prompt.items[i];
    if (item.kind == pml::PromptItem::Kind::Import) {
      emit_args(item.import, plan, out.uncached);
      const ModuleLayout& m = plan.at(item.import.name);
      gap_cursor = m.start_pos + m.token_len;
      continue;
    }
    if (i > last_import_idx || last_import_idx == prompt.items.size()) {
      trailing_texts.push_back(item.text);
      continue;
    }
    // find the next import's start position
    long next_start = -1;
    for (size_t j = i + 1; j < prompt.items.size(); ++j)
      if (prompt.items[j].kind == pml::PromptItem::Kind::Import) {
        next_start = plan.at(prompt.items[j].import.name).start_pos;
        break;
      }
    Segment seg;
    seg.tokens = tok::tokenize(item.text);
    for (size_t t = 0; t < seg.tokens.size(); ++t) {
      long p = gap_cursor + static_cast<long>(t);
      if (p >= next_start || used.count(p))
        throw Error(ErrorCode::FreeTextOverflow,
                    "free text does not fit in the positional gap before position " +
                        std::to_string(next_start));
      seg.position_ids.push_back(p);
    }
    gap_cursor += static_cast<long>(seg.tokens.size());
    for (long p : seg.position_ids) {
      used.insert(p);
      max_used = std::max(max_used, p);
    }
    ResolvedPrompt::Uncached u;
    u.free_text = std::move(seg);
    out.uncached.push_back(std::move(u));
  }

  for (const std::string& text : trailing_texts) {
    Segment seg;
    seg.tokens = tok::tokenize(text);
    for (size_t t = 0; t < seg.tokens.size(); ++t)
      seg.position_ids.push_back(max_used + 1 + static_cast<long>(t));
    max_used += static_cast<long>(seg.tokens.size());
    for (long p : seg.position_ids) used.insert(p);
    ResolvedPrompt::Uncached u;
    u.free_text = std::move(seg);
    out.uncached.push_back(std::move(u));
  }

  out.suffix_start = max_used + 1;
  return out;
}

}  // namespace pc::layout
