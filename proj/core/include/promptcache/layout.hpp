#pragma once

#include <map>
#include <string>
#include <vector>

#include "promptcache/pml.hpp"

namespace pc::layout {

struct ParamSlot {
  std::string param_name;
  long slot_start = 0;  // position ID of the first <unk> placeholder
  int slot_len = 0;

  bool operator==(const ParamSlot&) const = default;
};

// One row per module (named, anonymous, union child, nested). `token_len` is
// the module's full span including nested children; `own_tokens` holds only
// the tokens the module contributes directly (text and <unk> placeholders),
// each paired with its position ID in `own_positions`.
struct ModuleLayout {
  std::string module;
  long start_pos = 0;
  long token_len = 0;
  std::vector<int> own_tokens;
  std::vector<long> own_positions;
  std::vector<ParamSlot> param_slots;
  std::string parent;  // nearest enclosing module, "" if top-level
  int order = 0;       // document order over all modules
  bool anonymous = false;
  int union_group = -1;

  bool operator==(const ModuleLayout&) const = default;
};

struct UnionGroup {
  std::vector<std::string> members;
  long start_pos = 0;
  long group_len = 0;  // size of the largest child

  bool operator==(const UnionGroup&) const = default;
};

struct LayoutPlan {
  std::string schema_name;
  std::map<std::string, ModuleLayout> entries;
  std::vector<std::string> order;  // module names in document order
  std::vector<UnionGroup> union_groups;
  long total_len = 0;

  const ModuleLayout& at(const std::string& name) const;
  std::string to_json() const;

  bool operator==(const LayoutPlan&) const = default;
};

struct Segment {
  std::vector<int> tokens;
  std::vector<long> position_ids;

  bool operator==(const Segment&) const = default;
};

struct ArgSegment {
  std::string module;
  std::string param;
  Segment seg;  // positions are the leading <unk> slot positions
};

struct ResolvedPrompt {
  // imported + anonymous modules, canonicalized to schema order
  std::vector<std::string> cached_imports;
  // uncached segments interleaved in prompt document order
  struct Uncached {
    bool is_arg = false;
    ArgSegment arg;   // is_arg
    Segment free_text;  // !is_arg
  };
  std::vector<Uncached> uncached;
  long suffix_start = 0;  // max used position + 1
};

// Assigns spans and position IDs depth-first in document order. Union size is
// the size of its largest child; all children share the union start position.
// Chat tags must have been expanded beforehand.
LayoutPlan plan_layout(const pml::SchemaDoc& schema);

// Maps a validated prompt onto the plan. Free text between two imports takes
// the positional gap after the preceding import; throws
// Error(FreeTextOverflow) when it does not fit, Error(ArgTooLong) for
// over-long arguments.
ResolvedPrompt resolve_prompt(const pml::PromptDoc& prompt, const LayoutPlan& plan);

}  // namespace pc::layout
