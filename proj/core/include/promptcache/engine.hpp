#pragma once

#include <string>
#include <vector>

#include "promptcache/cache.hpp"
#include "promptcache/layout.hpp"
#include "promptcache/model.hpp"
#include "promptcache/pml.hpp"

namespace pc::engine {

struct ServeRequest {
  pml::PromptDoc prompt;
  int max_new_tokens = 16;
  bool use_cache = true;  // false = baseline full prefill
  bool use_scaffolds = false;
};

struct Timings {
  double parse_us = 0;
  double lookup_us = 0;
  double copy_us = 0;
  double uncached_prefill_us = 0;
  double ttft_us = 0;
  double decode_us_per_token = 0;
};

struct CacheReport {
  int modules_hit = 0;
  int modules_missed = 0;
  long cached_token_count = 0;
  long uncached_token_count = 0;
  bool used_scaffold = false;
};

struct ServeResponse {
  std::vector<int> output_tokens;
  std::string output_text;
  // logits of the first generated token, kept for equivalence checks
  std::vector<float> first_token_logits;
  Timings timings;
  CacheReport cache_report;

  std::string to_json() const;
};

// Pure per-layer concatenation along the sequence axis. Entries must be
// position-disjoint; throws Error(PositionOverlap).
model::KVState concat_kv(const std::vector<const cache::CacheEntry*>& entries);

// Cached path (or baseline full prefill when request.use_cache is false).
// Throws Error(ValidationFailed) when the prompt does not validate.
ServeResponse serve(const ServeRequest& request, const pml::SchemaDoc& schema,
                    const layout::LayoutPlan& plan, cache::ModuleStore& store,
                    const model::Model& model);

// Executable definition of the masking approximation: materializes the full
// sequence with the cached path's position IDs and runs exact attention under
// the block-causal module mask.
ServeResponse oracle_serve(const ServeRequest& request, const pml::SchemaDoc& schema,
                           const layout::LayoutPlan& plan, const model::Model& model);

}  // namespace pc::engine
