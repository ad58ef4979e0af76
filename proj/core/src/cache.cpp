#include "promptcache/cache.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"

namespace pc::cache {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'S', 'T'};
constexpr uint32_t kVersion = 1;

std::string store_key(const std::string& schema, const std::string& name) {
  return schema + '\x1f' + name;
}

}  // namespace

uint64_t CacheEntry::checksum() const {
  uint64_t h = model::fnv1a64(tokens.data(), tokens.size() * sizeof(int));
  h ^= model::fnv1a64(kv.position_ids.data(),
                      kv.position_ids.size() * sizeof(long));
  for (int l = 0; l < kv.n_layers; ++l) {
    h = h * 1099511628211ULL ^
        model::fnv1a64(kv.k[l].data(), kv.k[l].size() * sizeof(float));
    h = h * 1099511628211ULL ^
        model::fnv1a64(kv.v[l].data(), kv.v[l].size() * sizeof(float));
  }
  return h;
}

long long per_token_bytes(const model::ModelConfig& config) {
  return 2LL * config.n_layers * config.hidden * config.bytes_per_element;
}

long long entry_bytes(const CacheEntry& entry, const model::ModelConfig& config) {
  return entry.token_len * per_token_bytes(config);
}

// ---------------------------------------------------------------------------
// ModuleStore
// ---------------------------------------------------------------------------

ModuleStore::ModuleStore(const model::ModelConfig& config) : config_(config) {}

void ModuleStore::set_capacity(Tier tier, long long bytes) {
  (tier == Tier::Fast ? cap_fast_ : cap_slow_) = bytes;
}

long long ModuleStore::capacity(Tier tier) const {
  return tier == Tier::Fast ? cap_fast_ : cap_slow_;
}

void ModuleStore::evict_lru(Tier tier, long long needed_bytes) {
  long long cap = capacity(tier);
  if (cap < 0) return;
  while (bytes_used(tier) + needed_bytes > cap) {
    auto victim = entries_.end();
    for (auto it = entries_.begin(); it != entries_.end(); ++it)
      if (it->second.tier == tier &&
          (victim == entries_.end() || it->second.last_used < victim->second.last_used))
        victim = it;
    if (victim == entries_.end())
      throw Error(ErrorCode::CapacityExceeded,
                  "cannot free " + std::to_string(needed_bytes) + " bytes in tier");
    bytes_used(tier) -= entry_bytes(victim->second, config_);
    entries_.erase(victim);
  }
}

void ModuleStore::insert(CacheEntry entry) {
  long long bytes = entry_bytes(entry, config_);
  long long cap = capacity(entry.tier);
  if (cap >= 0 && bytes > cap)
    throw Error(ErrorCode::CapacityExceeded,
                "entry of " + std::to_string(bytes) + " bytes exceeds tier capacity " +
                    std::to_string(cap));
  std::string key = store_key(entry.schema, entry.name);
  auto existing = entries_.find(key);
  if (existing != entries_.end()) {
    bytes_used(existing->second.tier) -= entry_bytes(existing->second, config_);
    entries_.erase(existing);
  }
  evict_lru(entry.tier, bytes);
  entry.created_at = ++clock_;
  entry.last_used = entry.created_at;
  bytes_used(entry.tier) += bytes;
  entries_.emplace(std::move(key), std::move(entry));
}

const CacheEntry* ModuleStore::lookup(const std::string& schema,
                                      const std::string& name) {
  auto it = entries_.find(store_key(schema, name));
  if (it == entries_.end()) {
    ++stats_.misses;
    return nullptr;
  }
  ++stats_.hits;
  it->second.last_used = ++clock_;
  return &it->second;
}

const CacheEntry* ModuleStore::lookup_scaffold(
    const std::string& schema, const std::vector<std::string>& members) {
  auto it = entries_.find(store_key(schema, scaffold_id(members)));
  if (it == entries_.end()) return nullptr;  // scaffold probe, not a stats miss
  ++stats_.hits;
  it->second.last_used = ++clock_;
  return &it->second;
}

void ModuleStore::touch(const std::string& schema, const std::string& name) {
  auto it = entries_.find(store_key(schema, name));
  if (it != entries_.end()) it->second.last_used = ++clock_;
}

std::string ModuleStore::stats_json() const {
  nlohmann::json j;
  j["entries"] = entries_.size();
  j["bytes_used"] = {{"fast", stats_.bytes_fast}, {"slow", stats_.bytes_slow}};
  j["hits"] = stats_.hits;
  j["misses"] = stats_.misses;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Persistence: little-endian, magic PCST, version, config hash, entries.
// ---------------------------------------------------------------------------

namespace {

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw Error(ErrorCode::IoError, "cannot open \"" + path + "\" for write");
  }
  void bytes(const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw Error(ErrorCode::IoError, "write failed");
  }
  template <typename T>
  void pod(T v) { bytes(&v, sizeof(T)); }
  void str(const std::string& s) {
    pod<uint32_t>(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::ifstream in;
  size_t offset = 0;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw Error(ErrorCode::IoError, "cannot open \"" + path + "\"");
  }
  void bytes(void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
      throw Error(ErrorCode::IoError,
                  "truncated store file at offset " + std::to_string(offset));
    offset += n;
  }
  template <typename T>
  T pod() { T v; bytes(&v, sizeof(T)); return v; }
  std::string str() {
    uint32_t n = pod<uint32_t>();
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void ModuleStore::save(const std::string& path) const {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.pod<uint32_t>(kVersion);
  w.pod<uint64_t>(config_.hash());
  w.pod<uint32_t>(static_cast<uint32_t>(entries_.size()));
  for (const auto& [key, e] : entries_) {  // sorted by key: deterministic bytes
    w.str(e.schema);
    w.str(e.name);
    w.pod<uint8_t>(e.scaffold ? 1 : 0);
    w.pod<uint32_t>(static_cast<uint32_t>(e.members.size()));
    for (const std::string& m : e.members) w.str(m);
    w.pod<uint8_t>(e.tier == Tier::Slow ? 1 : 0);
    w.pod<int64_t>(e.token_len);
    w.pod<uint32_t>(static_cast<uint32_t>(e.tokens.size()));
    w.bytes(e.tokens.data(), e.tokens.size() * sizeof(int));
    w.pod<uint32_t>(static_cast<uint32_t>(e.param_slots.size()));
    for (const layout::ParamSlot& s : e.param_slots) {
      w.str(s.param_name);
      w.pod<int64_t>(s.slot_start);
      w.pod<int32_t>(s.slot_len);
    }
    w.pod<uint32_t>(static_cast<uint32_t>(e.kv.position_ids.size()));
    for (long p : e.kv.position_ids) w.pod<int64_t>(p);
    w.pod<uint32_t>(static_cast<uint32_t>(e.kv.n_layers));
    for (int l = 0; l < e.kv.n_layers; ++l) {
      w.pod<uint64_t>(e.kv.k[l].size());
      w.bytes(e.kv.k[l].data(), e.kv.k[l].size() * sizeof(float));
      w.pod<uint64_t>(e.kv.v[l].size());
      w.bytes(e.kv.v[l].data(), e.kv.v[l].size() * sizeof(float));
    }
  }
}

ModuleStore ModuleStore::load(const std::string& path,
                              const model::ModelConfig& config) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::IoError, "\"" + path + "\" is not a module store file");
  uint32_t version = r.pod<uint32_t>();
  if (version != kVersion)
    throw Error(ErrorCode::VersionMismatch,
                "store version " + std::to_string(version) + ", expected " +
                    std::to_string(kVersion));
  uint64_t hash = r.pod<uint64_t>();
  if (hash != config.hash())
    throw Error(ErrorCode::ConfigHashMismatch,
                "store was built with a different model config");

  ModuleStore store(config);
  uint32_t count = r.pod<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    CacheEntry e;
    e.schema = r.str();
    e.name = r.str();
    e.scaffold = r.pod<uint8_t>() != 0;
    uint32_t nmembers = r.pod<uint32_t>();
    for (uint32_t m = 0; m < nmembers; ++m) e.members.push_back(r.str());
    e.tier = r.pod<uint8_t>() ? Tier::Slow : Tier::Fast;
    e.token_len = r.pod<int64_t>();
    uint32_t ntok = r.pod<uint32_t>();
    e.tokens.resize(ntok);
    if (ntok) r.bytes(e.tokens.data(), ntok * sizeof(int));
    uint32_t nslots = r.pod<uint32_t>();
    for (uint32_t s = 0; s < nslots; ++s) {
      layout::ParamSlot slot;
      slot.param_name = r.str();
      slot.slot_start = r.pod<int64_t>();
      slot.slot_len = r.pod<int32_t>();
      e.param_slots.push_back(std::move(slot));
    }
    uint32_t npos = r.pod<uint32_t>();
    for (uint32_t p = 0; p < npos; ++p)
      e.kv.position_ids.push_back(static_cast<long>(r.pod<int64_t>()));
    e.kv.n_layers = static_cast<int>(r.pod<uint32_t>());
    e.kv.hidden = config.hidden;
    e.kv.k.resize(e.kv.n_layers);
    e.kv.v.resize(e.kv.n_layers);
    for (int l = 0; l < e.kv.n_layers; ++l) {
      uint64_t nk = r.pod<uint64_t>();
      e.kv.k[l].resize(nk);
      if (nk) r.bytes(e.kv.k[l].data(), nk * sizeof(float));
      uint64_t nv = r.pod<uint64_t>();
      e.kv.v[l].resize(nv);
      if (nv) r.bytes(e.kv.v[l].data(), nv * sizeof(float));
    }
    store.insert(std::move(e));
  }
  store.stats_.hits = 0;
  store.stats_.misses = 0;
  return store;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

std::string scaffold_id(const std::vector<std::string>& members) {
  std::vector<std::string> sorted = members;
  std::sort(sorted.begin(), sorted.end());
  std::string id = "scaffold:";
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (i) id += '+';
    id += sorted[i];
  }
  return id;
}

CacheEntry encode_module(const model::Model& model, const layout::LayoutPlan& plan,
                         const std::string& module_name, Tier tier) {
  const layout::ModuleLayout& m = plan.at(module_name);
  model::ForwardOutput out = model.forward(m.own_tokens, m.own_positions, nullptr);
  CacheEntry e;
  e.schema = plan.schema_name;
  e.name = module_name;
  e.kv = std::move(out.new_kv);
  e.tokens = m.own_tokens;
  e.token_len = static_cast<long>(m.own_tokens.size());
  e.param_slots = m.param_slots;
  e.tier = tier;
  return e;
}

int encode_schema(const model::Model& model, const layout::LayoutPlan& plan,
                  ModuleStore& store, Tier tier) {
  int count = 0;
  for (const std::string& name : plan.order) {
    store.insert(encode_module(model, plan, name, tier));
    ++count;
  }
  return count;
}

CacheEntry encode_scaffold(const model::Model& model, const layout::LayoutPlan& plan,
                           const std::vector<std::string>& modules, Tier tier) {
  std::vector<std::string> ordered = modules;
  std::sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    return plan.at(a).order < plan.at(b).order;
  });

  std::vector<int> tokens;
  std::vector<long> positions;
  std::vector<layout::ParamSlot> slots;
  std::set<long> seen;
  for (const std::string& name : ordered) {
    const layout::ModuleLayout& m = plan.at(name);
    tokens.insert(tokens.end(), m.own_tokens.begin(), m.own_tokens.end());
    for (long p : m.own_positions) {
      if (!seen.insert(p).second)
        throw Error(ErrorCode::PositionOverlap,
                    "scaffold members overlap at position " + std::to_string(p));
      positions.push_back(p);
    }
    slots.insert(slots.end(), m.param_slots.begin(), m.param_slots.end());
  }

  model::ForwardOutput out = model.forward(tokens, positions, nullptr);
  CacheEntry e;
  e.schema = plan.schema_name;
  e.name = scaffold_id(modules);
  e.scaffold = true;
  e.members = modules;
  std::sort(e.members.begin(), e.members.end());
  e.kv = std::move(out.new_kv);
  e.tokens = std::move(tokens);
  e.token_len = static_cast<long>(e.tokens.size());
  e.param_slots = std::move(slots);
  e.tier = tier;
  return e;
}

}  // namespace pc::cache
