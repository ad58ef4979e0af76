#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "promptcache/layout.hpp"
#include "promptcache/model.hpp"

namespace pc::cache {

enum class Tier { Fast, Slow };

struct CacheEntry {
  std::string schema;
  std::string name;  // module name, or scaffold id for scaffolds
  bool scaffold = false;
  std::vector<std::string> members;  // scaffold member modules, sorted
  model::KVState kv;
  std::vector<int> tokens;  // the encoded token sequence
  long token_len = 0;       // kv rows
  std::vector<layout::ParamSlot> param_slots;
  Tier tier = Tier::Fast;
  uint64_t created_at = 0;  // logical clock
  uint64_t last_used = 0;

  uint64_t checksum() const;
};

// Cache-size accounting: key+value, per layer, per hidden unit.
long long per_token_bytes(const model::ModelConfig& config);
long long entry_bytes(const CacheEntry& entry, const model::ModelConfig& config);

struct StoreStats {
  long long hits = 0;
  long long misses = 0;
  long long bytes_fast = 0;
  long long bytes_slow = 0;
};

// Keyed cache of encoded modules. Single-writer / multi-reader: callers
// serialize inserts and evictions externally; entries are immutable once
// stored.
class ModuleStore {
 public:
  explicit ModuleStore(const model::ModelConfig& config);

  // capacity in bytes per tier; default unlimited
  void set_capacity(Tier tier, long long bytes);
  long long capacity(Tier tier) const;

  // Inserts (replacing any entry with the same key), evicting LRU entries of
  // the same tier as needed. Throws Error(CapacityExceeded) when the entry
  // cannot fit even after eviction.
  void insert(CacheEntry entry);

  // Returns the entry and bumps last_used + hit/miss stats.
  const CacheEntry* lookup(const std::string& schema, const std::string& name);
  const CacheEntry* lookup_scaffold(const std::string& schema,
                                    const std::vector<std::string>& members);
  void touch(const std::string& schema, const std::string& name);

  // Evicts LRU entries from `tier` until `needed_bytes` fit.
  void evict_lru(Tier tier, long long needed_bytes);

  size_t size() const { return entries_.size(); }
  const StoreStats& stats() const { return stats_; }
  const model::ModelConfig& config() const { return config_; }
  const std::map<std::string, CacheEntry>& entries() const { return entries_; }

  std::string stats_json() const;

  void save(const std::string& path) const;
  static ModuleStore load(const std::string& path, const model::ModelConfig& config);

 private:
  friend struct StoreIo;
  long long& bytes_used(Tier t) {
    return t == Tier::Fast ? stats_.bytes_fast : stats_.bytes_slow;
  }

  model::ModelConfig config_;
  std::map<std::string, CacheEntry> entries_;
  long long cap_fast_ = -1;  // -1 = unlimited
  long long cap_slow_ = -1;
  StoreStats stats_;
  uint64_t clock_ = 0;
};

std::string scaffold_id(const std::vector<std::string>& members);

// Runs the model over the module's own tokens at their schema-assigned
// position IDs, attention confined to the module (no past KV). Parameter
// slots are encoded as <unk> placeholders.
CacheEntry encode_module(const model::Model& model, const layout::LayoutPlan& plan,
                         const std::string& module_name, Tier tier = Tier::Fast);

// Encodes every module in the plan into the store; idempotent.
int encode_schema(const model::Model& model, const layout::LayoutPlan& plan,
                  ModuleStore& store, Tier tier = Tier::Fast);

// One causal pass over the concatenation of the members' tokens, so members
// share an attention span. Members must be position-disjoint.
CacheEntry encode_scaffold(const model::Model& model, const layout::LayoutPlan& plan,
                           const std::vector<std::string>& modules,
                           Tier tier = Tier::Fast);

}  // namespace pc::cache
