#include "promptcache/engine.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

#include "promptcache/tokenizer.hpp"
#include "json.hpp"

namespace pc::engine {

namespace {

using Clock = std::chrono::steady_clock;

double us_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

// Uncached tokens aggregated into one forward pass, plus the bookkeeping for
// the <unk>-slot replacement applied before decoding.
struct UncachedPass {
  std::vector<int> tokens;
  std::vector<long> positions;
  std::map<long, long> arg_row_by_pos;  // slot position -> row in the pass
  std::set<long> drop_positions;        // unfilled tail of supplied slots
  std::vector<long> free_rows;          // rows that are free text (or probe)
  long prompt_token_count = 0;          // excludes the probe token
};

UncachedPass build_uncached(const layout::ResolvedPrompt& resolved,
                            const layout::LayoutPlan& plan, bool need_probe) {
  UncachedPass up;
  for (const auto& u : resolved.uncached) {
    const layout::Segment& seg = u.is_arg ? u.arg.seg : u.free_text;
    for (size_t i = 0; i < seg.tokens.size(); ++i) {
      long row = static_cast<long>(up.tokens.size());
      up.tokens.push_back(seg.tokens[i]);
      up.positions.push_back(seg.position_ids[i]);
      if (u.is_arg)
        up.arg_row_by_pos[seg.position_ids[i]] = row;
      else
        up.free_rows.push_back(row);
    }
    if (u.is_arg) {
      // slot tail beyond the argument is dropped from the working cache
      const layout::ModuleLayout& m = plan.at(u.arg.module);
      for (const layout::ParamSlot& slot : m.param_slots)
        if (slot.param_name == u.arg.param)
          for (long p = slot.slot_start + static_cast<long>(seg.tokens.size());
               p < slot.slot_start + slot.slot_len; ++p)
            up.drop_positions.insert(p);
    }
  }
  up.prompt_token_count = static_cast<long>(up.tokens.size());
  if (need_probe && up.tokens.empty()) {
    up.free_rows.push_back(0);
    up.tokens.push_back(tok::kBos);
    up.positions.push_back(resolved.suffix_start);
  }
  return up;
}

void append_row(model::KVState& dst, const model::KVState& src, long row) {
  int d = src.hidden;
  dst.position_ids.push_back(src.position_ids[row]);
  for (int l = 0; l < src.n_layers; ++l) {
    dst.k[l].insert(dst.k[l].end(), src.k[l].begin() + row * d,
                    src.k[l].begin() + (row + 1) * d);
    dst.v[l].insert(dst.v[l].end(), src.v[l].begin() + row * d,
                    src.v[l].begin() + (row + 1) * d);
  }
}

// Working KV for decoding: cached rows with supplied <unk> slots replaced by
// the argument rows (and unfilled tails dropped), then the free-text rows.
model::KVState assemble_working(const model::KVState& cached,
                                const model::KVState& uncached,
                                const UncachedPass& up) {
  model::KVState w;
  w.n_layers = uncached.n_layers;
  w.hidden = uncached.hidden;
  w.k.resize(w.n_layers);
  w.v.resize(w.n_layers);
  for (long r = 0; r < cached.seq_len(); ++r) {
    long p = cached.position_ids[r];
    auto arg = up.arg_row_by_pos.find(p);
    if (arg != up.arg_row_by_pos.end()) {
      append_row(w, uncached, arg->second);
    } else if (!up.drop_positions.count(p)) {
      append_row(w, cached, r);
    }
  }
  for (long row : up.free_rows) append_row(w, uncached, row);
  return w;
}

void require_valid(const pml::PromptDoc& prompt, const pml::SchemaDoc& schema) {
  pml::ValidationReport report = pml::validate_prompt(prompt, schema);
  if (!report.ok) {
    std::string codes;
    for (const pml::Issue& i : report.issues)
      if (i.severity == pml::Severity::Error)
        codes += (codes.empty() ? "" : ", ") + i.code;
    throw Error(ErrorCode::ValidationFailed, codes);
  }
}

void finish_decode(ServeResponse& resp, const model::Model& model,
                   model::KVState& working, const model::ForwardOutput& fo,
                   long first_pos, int max_new, Clock::time_point t0) {
  resp.timings.ttft_us = us_since(t0);
  if (max_new <= 0) return;
  const float* last = fo.row(fo.seq - 1);
  resp.first_token_logits.assign(last, last + fo.vocab);
  int t1 = model::argmax_lowest(last, fo.vocab);
  resp.output_tokens.push_back(t1);
  resp.timings.ttft_us = us_since(t0);
  auto tdec = Clock::now();
  std::vector<int> rest = model.generate(working, t1, first_pos, max_new - 1);
  resp.output_tokens.insert(resp.output_tokens.end(), rest.begin(), rest.end());
  if (max_new > 1)
    resp.timings.decode_us_per_token = us_since(tdec) / (max_new - 1);
  resp.output_text = tok::detokenize(resp.output_tokens);
}

ServeResponse serve_baseline(const ServeRequest& request,
                             const layout::ResolvedPrompt& resolved,
                             const layout::LayoutPlan& plan,
                             const model::Model& model, Clock::time_point t0) {
  // Materialize the prompt as a plain LLM would see it: included module tokens
  // with supplied arguments substituted into their slots (unfilled tails
  // omitted, unsupplied slots as <unk>), plus free text, in position order,
  // renumbered contiguously from 0.
  std::map<long, int> by_pos;
  for (const std::string& name : resolved.cached_imports) {
    const layout::ModuleLayout& m = plan.at(name);
    for (size_t i = 0; i < m.own_tokens.size(); ++i)
      by_pos[m.own_positions[i]] = m.own_tokens[i];
  }
  UncachedPass up = build_uncached(resolved, plan, false);
  for (size_t i = 0; i < up.tokens.size(); ++i) by_pos[up.positions[i]] = up.tokens[i];
  for (long p : up.drop_positions) by_pos.erase(p);

  std::vector<int> tokens;
  std::vector<long> positions;
  for (auto& [p, t] : by_pos) {
    positions.push_back(static_cast<long>(tokens.size()));
    tokens.push_back(t);
  }
  if (tokens.empty()) {
    tokens.push_back(tok::kBos);
    positions.push_back(0);
  }

  ServeResponse resp;
  resp.cache_report.cached_token_count = 0;
  resp.cache_report.uncached_token_count = static_cast<long>(by_pos.size());

  auto tp = Clock::now();
  model::ForwardOutput fo = model.forward(tokens, positions, nullptr);
  resp.timings.uncached_prefill_us = us_since(tp);

  model::KVState working = std::move(fo.new_kv);
  fo.new_kv = model::KVState{};
  finish_decode(resp, model, working, fo, static_cast<long>(tokens.size()),
                request.max_new_tokens, t0);
  return resp;
}

}  // namespace

model::KVState concat_kv(const std::vector<const cache::CacheEntry*>& entries) {
  model::KVState out;
  std::set<long> seen;
  for (const cache::CacheEntry* e : entries) {
    for (long p : e->kv.position_ids)
      if (!seen.insert(p).second)
        throw Error(ErrorCode::PositionOverlap,
                    "cache entries overlap at position " + std::to_string(p));
    out.append(e->kv);
  }
  return out;
}

ServeResponse serve(const ServeRequest& request, const pml::SchemaDoc& schema,
                    const layout::LayoutPlan& plan, cache::ModuleStore& store,
                    const model::Model& model) {
  auto t0 = Clock::now();
  require_valid(request.prompt, schema);
  layout::ResolvedPrompt resolved = layout::resolve_prompt(request.prompt, plan);

  if (!request.use_cache) return serve_baseline(request, resolved, plan, model, t0);

  ServeResponse resp;
  resp.timings.parse_us = us_since(t0);

  // entry selection: a scaffold covering the import set exactly wins
  auto tl = Clock::now();
  std::vector<const cache::CacheEntry*> selected;
  if (request.use_scaffolds) {
    const cache::CacheEntry* sc =
        store.lookup_scaffold(schema.name, resolved.cached_imports);
    if (sc) {
      selected.push_back(sc);
      resp.cache_report.used_scaffold = true;
      ++resp.cache_report.modules_hit;
    }
  }
  if (selected.empty()) {
    for (const std::string& name : resolved.cached_imports) {
      const cache::CacheEntry* e = store.lookup(schema.name, name);
      const layout::ModuleLayout& m = plan.at(name);
      bool stale = e && (e->token_len != static_cast<long>(m.own_tokens.size()) ||
                         e->kv.position_ids != m.own_positions);
      if (!e || stale) {
        ++resp.cache_report.modules_missed;
        store.insert(cache::encode_module(model, plan, name));
        e = store.lookup(schema.name, name);
      } else {
        ++resp.cache_report.modules_hit;
      }
      selected.push_back(e);
    }
  }
  resp.timings.lookup_us = us_since(tl);

  // slow-tier entries pay one full buffer copy on retrieval
  std::vector<model::KVState> slow_copies;
  auto tc = Clock::now();
  for (const cache::CacheEntry*& e : selected)
    if (e->tier == cache::Tier::Slow) slow_copies.push_back(e->kv);
  resp.timings.copy_us = us_since(tc);

  model::KVState cached = concat_kv(selected);
  for (const cache::CacheEntry* e : selected)
    resp.cache_report.cached_token_count += e->token_len;

  UncachedPass up = build_uncached(resolved, plan, request.max_new_tokens > 0);
  resp.cache_report.uncached_token_count = up.prompt_token_count;

  model::ForwardOutput fo;
  auto tp = Clock::now();
  if (!up.tokens.empty())
    fo = model.forward(up.tokens, up.positions, cached.empty() ? nullptr : &cached);
  resp.timings.uncached_prefill_us = us_since(tp);
  if (up.tokens.empty()) {
    resp.timings.ttft_us = us_since(t0);
    return resp;  // nothing to decode from (max_new_tokens == 0)
  }

  model::KVState working = assemble_working(cached, fo.new_kv, up);
  long first_pos = std::max(resolved.suffix_start,
                            up.positions.empty() ? 0 : up.positions.back() + 1);
  finish_decode(resp, model, working, fo, first_pos, request.max_new_tokens, t0);
  return resp;
}

ServeResponse oracle_serve(const ServeRequest& request, const pml::SchemaDoc& schema,
                           const layout::LayoutPlan& plan, const model::Model& model) {
  auto t0 = Clock::now();
  require_valid(request.prompt, schema);
  layout::ResolvedPrompt resolved = layout::resolve_prompt(request.prompt, plan);

  ServeResponse resp;
  resp.timings.parse_us = us_since(t0);

  // materialize: cached module tokens in concatenation order, then uncached
  std::vector<int> tokens;
  std::vector<long> positions;
  std::vector<int> block;  // module index for cached rows, -1 for uncached
  int block_id = 0;
  for (const std::string& name : resolved.cached_imports) {
    const layout::ModuleLayout& m = plan.at(name);
    for (size_t i = 0; i < m.own_tokens.size(); ++i) {
      tokens.push_back(m.own_tokens[i]);
      positions.push_back(m.own_positions[i]);
      block.push_back(block_id);
    }
    ++block_id;
    resp.cache_report.cached_token_count += static_cast<long>(m.own_tokens.size());
  }
  long n_cached = static_cast<long>(tokens.size());

  UncachedPass up = build_uncached(resolved, plan, request.max_new_tokens > 0);
  resp.cache_report.uncached_token_count = up.prompt_token_count;
  for (size_t i = 0; i < up.tokens.size(); ++i) {
    tokens.push_back(up.tokens[i]);
    positions.push_back(up.positions[i]);
    block.push_back(-1);
  }

  long n = static_cast<long>(tokens.size());
  if (n == 0) {
    resp.timings.ttft_us = us_since(t0);
    return resp;
  }

  // block-causal within modules; uncached rows see all cached rows plus
  // earlier uncached rows
  // Cached rows all precede uncached rows, so "all cached plus earlier
  // uncached" reduces to plain j <= i for uncached query rows.
  std::vector<uint8_t> mask(n * n, 0);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j <= i; ++j)
      mask[i * n + j] = (block[i] == -1 || block[j] == block[i]) ? 1 : 0;

  auto tp = Clock::now();
  model::ForwardOutput fo = model.forward_masked(tokens, positions, mask);
  resp.timings.uncached_prefill_us = us_since(tp);

  if (up.tokens.empty()) {
    // fully cached prompt and max_new_tokens == 0
    resp.timings.ttft_us = us_since(t0);
    return resp;
  }

  // slice the masked pass into cached part and uncached part
  model::KVState cached_part, uncached_part;
  cached_part.n_layers = uncached_part.n_layers = fo.new_kv.n_layers;
  cached_part.hidden = uncached_part.hidden = fo.new_kv.hidden;
  cached_part.k.resize(fo.new_kv.n_layers);
  cached_part.v.resize(fo.new_kv.n_layers);
  uncached_part.k.resize(fo.new_kv.n_layers);
  uncached_part.v.resize(fo.new_kv.n_layers);
  for (long r = 0; r < n_cached; ++r) append_row(cached_part, fo.new_kv, r);
  for (long r = n_cached; r < n; ++r) append_row(uncached_part, fo.new_kv, r);

  model::KVState working = assemble_working(cached_part, uncached_part, up);
  long first_pos = std::max(resolved.suffix_start, positions.back() + 1);
  finish_decode(resp, model, working, fo, first_pos, request.max_new_tokens, t0);
  return resp;
}

std::string ServeResponse::to_json() const {
  nlohmann::json j;
  j["output_tokens"] = output_tokens;
  j["output_text"] = output_text;
  j["timings"] = {{"parse_us", timings.parse_us},
                  {"lookup_us", timings.lookup_us},
                  {"copy_us", timings.copy_us},
                  {"uncached_prefill_us", timings.uncached_prefill_us},
                  {"ttft_us", timings.ttft_us},
                  {"decode_us_per_token", timings.decode_us_per_token}};
  j["cache_report"] = {{"modules_hit", cache_report.modules_hit},
                       {"modules_missed", cache_report.modules_missed},
                       {"cached_token_count", cache_report.cached_token_count},
                       {"uncached_token_count", cache_report.uncached_token_count},
                       {"used_scaffold", cache_report.used_scaffold}};
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace pc::engine
