// Acceptance gate for the prompt-cache artifact. Each numbered check prints
// exactly one PASS/FAIL line; the process exits non-zero if any check fails.
//
// Tolerances are pinned here, not configurable: equivalence between the
// cached path and the exact block-masked reference is required to 1e-5
// relative on first-token logits (and token-identical greedy output); the
// tighter numerical identities (KV chaining, concatenation-order invariance,
// zero-masking cases, shift invariance) are required to 1e-6.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "promptcache/bench.hpp"
#include "promptcache/cache.hpp"
#include "promptcache/compiler.hpp"
#include "promptcache/engine.hpp"
#include "promptcache/layout.hpp"
#include "promptcache/model.hpp"
#include "promptcache/pml.hpp"
#include "promptcache/tokenizer.hpp"

using namespace pc;
using pctest::max_rel_diff;
using pctest::tiny_config;
using pctest::tiny_model;

namespace {

constexpr double kTolServe = 1e-5;   // cached vs reference, first-token logits
constexpr double kTolExact = 1e-6;   // numerical identities
constexpr int kServePairs = 200;     // randomized schema/prompt pairs
constexpr int kGreedySteps = 32;
constexpr int kZeroMaskCases = 50;
constexpr int kChainSplits = 100;
constexpr int kPermCases = 50;
constexpr int kAstRoundTrips = 1000;
constexpr double kMinExponentGap = 0.5;

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail = "") {
  std::printf("%s  %2d %s%s%s\n", ok ? "PASS" : "FAIL", idx, name,
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

engine::ServeResponse serve_case(const pctest::RandomCase& rc,
                                 const layout::LayoutPlan& plan,
                                 cache::ModuleStore& store, int max_new,
                                 bool use_cache = true, bool scaffolds = false) {
  engine::ServeRequest req;
  req.prompt = rc.prompt;
  req.max_new_tokens = max_new;
  req.use_cache = use_cache;
  req.use_scaffolds = scaffolds;
  return engine::serve(req, rc.schema, plan, store, tiny_model());
}

// 1. cached path vs exact block-masked reference on randomized pairs
void check_serve_equivalence() {
  double worst = 0;
  int bad_tokens = 0;
  for (int seed = 1; seed <= kServePairs; ++seed) {
    pctest::RandomCase rc = pctest::random_case(static_cast<uint32_t>(seed));
    layout::LayoutPlan plan = layout::plan_layout(rc.schema);
    cache::ModuleStore store(tiny_config());
    cache::encode_schema(tiny_model(), plan, store);

    engine::ServeResponse cached = serve_case(rc, plan, store, kGreedySteps);
    engine::ServeRequest req;
    req.prompt = rc.prompt;
    req.max_new_tokens = kGreedySteps;
    engine::ServeResponse ref =
        engine::oracle_serve(req, rc.schema, plan, tiny_model());

    worst = std::max(worst, max_rel_diff(cached.first_token_logits,
                                         ref.first_token_logits));
    if (cached.output_tokens != ref.output_tokens) ++bad_tokens;
  }
  std::ostringstream d;
  d << kServePairs << " pairs, worst logit diff " << worst << " (tol "
    << kTolServe << "), " << bad_tokens << " token mismatches";
  report(1, "cached serving matches exact masked reference",
         worst < kTolServe && bad_tokens == 0, d.str());
}

// 2. configurations with no masking effect reproduce the full prefill exactly
void check_zero_masking() {
  double worst = 0;
  int bad_tokens = 0;
  std::mt19937 rng(41);
  for (int c = 0; c < kZeroMaskCases; ++c) {
    bool scaffold_case = c % 2 == 1;
    pctest::RandomCase rc;
    rc.schema.name = "zm" + std::to_string(c);
    int n_modules = scaffold_case ? 2 + c % 3 : 1;
    for (int m = 0; m < n_modules; ++m)
      rc.schema.root.push_back(pml::SchemaNode::make_module(
          "m" + std::to_string(m),
          {pml::SchemaNode::make_text(pctest::random_words(rng, 10, 60))}));
    rc.prompt.schema_name = rc.schema.name;
    for (int m = 0; m < n_modules; ++m) {
      pml::ModuleImport imp;
      imp.name = "m" + std::to_string(m);
      rc.prompt.items.push_back(pml::PromptItem::make_import(std::move(imp)));
    }
    rc.prompt.items.push_back(
        pml::PromptItem::make_text(pctest::random_words(rng, 3, 10)));

    layout::LayoutPlan plan = layout::plan_layout(rc.schema);
    cache::ModuleStore store(tiny_config());
    cache::encode_schema(tiny_model(), plan, store);
    if (scaffold_case) {
      std::vector<std::string> all;
      for (int m = 0; m < n_modules; ++m) all.push_back("m" + std::to_string(m));
      store.insert(cache::encode_scaffold(tiny_model(), plan, all));
    }

    engine::ServeResponse cached =
        serve_case(rc, plan, store, 8, true, scaffold_case);
    engine::ServeResponse baseline = serve_case(rc, plan, store, 8, false);
    worst = std::max(worst, max_rel_diff(cached.first_token_logits,
                                         baseline.first_token_logits));
    if (cached.output_tokens != baseline.output_tokens) ++bad_tokens;
  }
  std::ostringstream d;
  d << kZeroMaskCases << " cases (single-module and full scaffolds), worst "
    << worst << ", " << bad_tokens << " token mismatches";
  report(2, "no-masking configurations equal full prefill",
         worst < kTolExact && bad_tokens == 0, d.str());
}

// 3. chained prefix+suffix forward vs single shot
void check_kv_chaining() {
  const model::Model& m = tiny_model();
  std::mt19937 rng(43);
  double worst = 0;
  for (int t = 0; t < kChainSplits; ++t) {
    long n = std::uniform_int_distribution<long>(4, 64)(rng);
    long split = std::uniform_int_distribution<long>(1, n - 1)(rng);
    std::vector<int> tokens(static_cast<size_t>(n));
    std::vector<long> pos(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
      tokens[static_cast<size_t>(i)] =
          std::uniform_int_distribution<int>(0, 255)(rng);
      pos[static_cast<size_t>(i)] = i;
    }
    auto whole = m.forward(tokens, pos);
    std::vector<int> t1(tokens.begin(), tokens.begin() + split);
    std::vector<int> t2(tokens.begin() + split, tokens.end());
    std::vector<long> p1(pos.begin(), pos.begin() + split);
    std::vector<long> p2(pos.begin() + split, pos.end());
    auto part1 = m.forward(t1, p1);
    auto part2 = m.forward(t2, p2, &part1.new_kv);
    std::vector<float> a(whole.row(n - 1), whole.row(n - 1) + whole.vocab);
    std::vector<float> b(part2.row(n - split - 1),
                         part2.row(n - split - 1) + part2.vocab);
    worst = std::max(worst, max_rel_diff(a, b));
  }
  std::ostringstream d;
  d << kChainSplits << " random splits, worst " << worst;
  report(3, "kv-cache chaining equals single-shot forward", worst < kTolExact,
         d.str());
}

// 4. order of cache concatenation is irrelevant
void check_permutation_invariance() {
  std::mt19937 rng(47);
  double worst = 0;
  for (int c = 0; c < kPermCases; ++c) {
    int n_modules = std::uniform_int_distribution<int>(2, 5)(rng);
    pml::SchemaDoc schema;
    schema.name = "perm" + std::to_string(c);
    for (int m = 0; m < n_modules; ++m)
      schema.root.push_back(pml::SchemaNode::make_module(
          "m" + std::to_string(m),
          {pml::SchemaNode::make_text(pctest::random_words(rng, 6, 30))}));
    layout::LayoutPlan plan = layout::plan_layout(schema);
    cache::ModuleStore store(tiny_config());
    cache::encode_schema(tiny_model(), plan, store);

    std::vector<const cache::CacheEntry*> order;
    for (int m = 0; m < n_modules; ++m)
      order.push_back(store.lookup(schema.name, "m" + std::to_string(m)));

    auto probe = [&](const std::vector<const cache::CacheEntry*>& o) {
      model::KVState kv = engine::concat_kv(o);
      auto out = tiny_model().forward({'?'}, {plan.total_len}, &kv);
      return std::vector<float>(out.row(0), out.row(0) + out.vocab);
    };
    std::vector<float> base = probe(order);
    for (int p = 0; p < 3; ++p) {
      std::shuffle(order.begin(), order.end(), rng);
      worst = std::max(worst, max_rel_diff(base, probe(order)));
    }
  }
  std::ostringstream d;
  d << kPermCases << " cases x 3 shuffles, worst " << worst;
  report(4, "concatenation order does not change logits", worst < kTolExact,
         d.str());
}

// 5. layout positions: shared union starts, the 50/60 -> 110 example, shift
// invariance of the relative encodings
void check_position_semantics() {
  bool ok = true;
  std::string detail;

  pml::SchemaDoc doc;
  doc.name = "pos";
  doc.root.push_back(pml::SchemaNode::make_module(
      "a", {pml::SchemaNode::make_text(std::string(50, 'x'))}));
  doc.root.push_back(pml::SchemaNode::make_module(
      "b", {pml::SchemaNode::make_text(std::string(60, 'y'))}));
  std::vector<pml::SchemaNode> arms;
  arms.push_back(pml::SchemaNode::make_module(
      "u1", {pml::SchemaNode::make_text(std::string(5, 'p'))}));
  arms.push_back(pml::SchemaNode::make_module(
      "u2", {pml::SchemaNode::make_text(std::string(9, 'q'))}));
  doc.root.push_back(pml::SchemaNode::make_union(std::move(arms)));
  layout::LayoutPlan plan = layout::plan_layout(doc);

  if (plan.at("u1").start_pos != 110 || plan.at("u2").start_pos != 110) {
    ok = false;
    detail = "module after spans 50+60 starts at " +
             std::to_string(plan.at("u1").start_pos) + ", want 110";
  }
  if (plan.at("u1").start_pos != plan.at("u2").start_pos) ok = false;

  std::mt19937 rng(53);
  double worst = 0;
  for (int t = 0; t < 10; ++t) {
    long n = 12;
    long shift = std::uniform_int_distribution<long>(1, 4000)(rng);
    std::vector<int> tokens(static_cast<size_t>(n));
    for (auto& x : tokens) x = std::uniform_int_distribution<int>(0, 255)(rng);
    auto run_at = [&](const model::Model& m, long start) {
      std::vector<long> pos(static_cast<size_t>(n));
      for (long i = 0; i < n; ++i) pos[static_cast<size_t>(i)] = start + i;
      auto o = m.forward(tokens, pos);
      return std::vector<float>(o.row(n - 1), o.row(n - 1) + o.vocab);
    };
    worst = std::max(worst, max_rel_diff(run_at(tiny_model(), 0),
                                         run_at(tiny_model(), shift)));
    worst = std::max(worst, max_rel_diff(run_at(pctest::tiny_model_alibi(), 0),
                                         run_at(pctest::tiny_model_alibi(), shift)));
  }
  if (worst >= kTolExact) ok = false;
  if (detail.empty()) {
    std::ostringstream d;
    d << "110-start reproduced; union starts shared; worst shift diff " << worst;
    detail = d.str();
  }
  report(5, "position assignment and shift invariance", ok, detail);
}

// 6. per-token cache size at published model shapes
void check_memory_accounting() {
  model::ModelConfig big;
  big.n_heads = 32;
  big.head_dim = 128;
  big.n_layers = 32;
  big.hidden = 4096;
  big.bytes_per_element = 2;
  long long b7 = cache::per_token_bytes(big);
  big.n_layers = 40;
  big.hidden = 5120;
  big.n_heads = 40;
  long long b13 = cache::per_token_bytes(big);

  auto mb2 = [](long long bytes) {
    return std::round(static_cast<double>(bytes) / (1024.0 * 1024.0) * 100.0) /
           100.0;
  };
  bool ok = b7 == 524288 && b13 == 819200 && mb2(b7) == 0.50 && mb2(b13) == 0.78;
  std::ostringstream d;
  d << "7B-shape " << b7 << " B (" << mb2(b7) << " MB/token), 13B-shape " << b13
    << " B (" << mb2(b13) << " MB/token)";
  report(6, "per-token memory accounting", ok, d.str());
}

// 7+8 share the scaling sweep
bench::ScalingReport g_sweep;

void check_flops_model() {
  bool ok = true;
  for (long long n : {1LL, 16LL, 256LL, 1024LL, 4096LL})
    for (long long d : {64LL, 256LL, 1024LL, 4096LL}) {
      if (model::flops_prefill(n, d) != 6 * n * d * d + 4 * n * n * d) ok = false;
      if (model::flops_decode_step(n, d) != 6 * d * d + 4 * n * d) ok = false;
    }

  // baseline TTFT must be monotone in the prefill-flops prediction
  bool monotone = true;
  for (size_t i = 1; i < g_sweep.rows.size(); ++i) {
    if (g_sweep.rows[i].flops_baseline <= g_sweep.rows[i - 1].flops_baseline)
      ok = false;
    if (g_sweep.rows[i].ttft_baseline_us <= g_sweep.rows[i - 1].ttft_baseline_us)
      monotone = false;
  }
  std::ostringstream d;
  d << "formula grid exact; baseline TTFT "
    << (monotone ? "monotone" : "NOT monotone") << " across sweep";
  report(7, "flops cost model", ok && monotone, d.str());
}

void check_growth_law() {
  double gap = g_sweep.baseline_exp - g_sweep.cached_exp;
  bool increasing = true;
  for (size_t i = 1; i < g_sweep.rows.size(); ++i)
    if (g_sweep.rows[i].speedup <= g_sweep.rows[i - 1].speedup)
      increasing = false;
  std::ostringstream d;
  d << "baseline exp " << g_sweep.baseline_exp << ", cached exp "
    << g_sweep.cached_exp << ", gap " << gap << " (need >= " << kMinExponentGap
    << "); speedup " << (increasing ? "strictly increasing" : "NOT increasing");
  report(8, "baseline and cached latency scale apart",
         gap >= kMinExponentGap && increasing, d.str());
}

// 9. bundled corpus end to end, plus serializer round-trips
void check_corpus_and_roundtrip() {
  namespace fs = std::filesystem;
  int schemas = 0, failures = 0;
  std::string first_error;
  for (const auto& entry : fs::directory_iterator(PC_DATA_DIR "/corpus")) {
    std::string path = entry.path().string();
    if (path.size() < 4 || path.substr(path.size() - 4) != ".pml") continue;
    if (path.find(".prompt.pml") != std::string::npos) continue;
    ++schemas;
    try {
      std::ifstream in(path);
      std::string text((std::istreambuf_iterator<char>(in)), {});
      pml::SchemaDoc schema = pml::expand_chat_tags(pml::parse_schema(text),
                                                    pml::ChatTemplate::llama2());
      std::string prompt_path = path.substr(0, path.size() - 4) + ".prompt.pml";
      std::ifstream pin(prompt_path);
      std::string ptext((std::istreambuf_iterator<char>(pin)), {});
      pml::PromptDoc prompt = pml::parse_prompt(ptext);
      if (!pml::validate_prompt(prompt, schema).ok)
        throw Error(ErrorCode::ValidationFailed, "corpus prompt invalid");
      layout::LayoutPlan plan = layout::plan_layout(schema);
      cache::ModuleStore store(tiny_config());
      cache::encode_schema(tiny_model(), plan, store);
      engine::ServeRequest req;
      req.prompt = prompt;
      req.max_new_tokens = 2;
      auto resp = engine::serve(req, schema, plan, store, tiny_model());
      if (resp.output_tokens.size() != 2)
        throw Error(ErrorCode::Internal, "short output");
    } catch (const std::exception& e) {
      ++failures;
      if (first_error.empty()) first_error = path + ": " + e.what();
    }
  }

  int rt_failures = 0;
  for (uint32_t seed = 0; seed < kAstRoundTrips; ++seed) {
    pml::SchemaDoc doc = pctest::random_ast(seed);
    if (pml::parse_schema(pml::serialize(doc)) != doc) ++rt_failures;
  }

  std::ostringstream d;
  d << schemas << " schemas served, " << failures << " failures; "
    << kAstRoundTrips << " round-trips, " << rt_failures << " mismatches";
  if (!first_error.empty()) d << "; first: " << first_error;
  report(9, "corpus pipeline and serializer round-trip",
         schemas >= 10 && failures == 0 && rt_failures == 0, d.str());
}

// 10. parameter slots: under-fill works, over-fill rejected, args are causal
void check_parameterization() {
  pml::SchemaDoc schema = pml::parse_schema(
      "<schema name=\"p\"><module name=\"m\">The topic is "
      "<param name=\"t\" len=\"6\"/> as requested.</module></schema>");
  layout::LayoutPlan plan = layout::plan_layout(schema);
  cache::ModuleStore store(tiny_config());
  cache::encode_schema(tiny_model(), plan, store);

  auto serve_with = [&](const std::string& arg) {
    engine::ServeRequest req;
    req.prompt = pml::parse_prompt("<prompt schema=\"p\"><m><t>" + arg +
                                   "</t></m>tell me more</prompt>");
    req.max_new_tokens = 1;
    return engine::serve(req, schema, plan, store, tiny_model());
  };

  bool short_ok = false, long_rejected = false, causal = false;
  std::vector<float> l1, l2;
  try {
    l1 = serve_with("ab").first_token_logits;  // 2 of 6 slots used
    short_ok = !l1.empty();
    l2 = serve_with("cd").first_token_logits;
    causal = max_rel_diff(l1, l2) > kTolExact;
  } catch (const std::exception&) {
  }
  try {
    serve_with("toolongbyfar");
  } catch (const Error& e) {
    long_rejected = e.code() == ErrorCode::ValidationFailed &&
                    std::string(e.what()).find("ARG_TOO_LONG") != std::string::npos;
  }
  std::ostringstream d;
  d << "short arg served: " << (short_ok ? "yes" : "no")
    << "; oversized rejected with ARG_TOO_LONG: " << (long_rejected ? "yes" : "no")
    << "; argument perturbs downstream logits: " << (causal ? "yes" : "no");
  report(10, "parameter slot semantics", short_ok && long_rejected && causal,
         d.str());
}

// 11. store persistence
void check_persistence() {
  pml::SchemaDoc schema = pml::parse_schema(
      "<schema name=\"store\"><module name=\"x\">persistent text"
      "</module><module name=\"y\">more <param name=\"p\" len=\"2\"/>"
      "</module></schema>");
  layout::LayoutPlan plan = layout::plan_layout(schema);
  cache::ModuleStore store(tiny_config());
  cache::encode_schema(tiny_model(), plan, store);
  store.insert(cache::encode_scaffold(tiny_model(), plan, {"x", "y"},
                                      cache::Tier::Slow));

  std::string p1 = "/tmp/pc_accept_1.pcst", p2 = "/tmp/pc_accept_2.pcst";
  store.save(p1);
  cache::ModuleStore loaded = cache::ModuleStore::load(p1, tiny_config());
  loaded.save(p2);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };
  bool identical = slurp(p1) == slurp(p2) && !slurp(p1).empty();

  bool rejected = false;
  auto other = tiny_config();
  other.seed = 43;
  try {
    cache::ModuleStore::load(p1, other);
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::ConfigHashMismatch;
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  std::ostringstream d;
  d << "save/load/save byte-identical: " << (identical ? "yes" : "no")
    << "; foreign config rejected: " << (rejected ? "yes" : "no");
  report(11, "store persistence", identical && rejected, d.str());
}

// 12. compiled programs run the full pipeline; choose_one arms stay exclusive
void check_compiler() {
  const char* kProgram = R"({
    "functions": {"closing": [{"emit": "Close politely."}]},
    "statements": [
      {"emit": "Assistant setup. "},
      {"if": {"name": "verbose", "body": [
        {"emit": "Explain in the style of "},
        {"param": {"name": "style", "len": 6}}
      ]}},
      {"choose_one": [
        {"name": "short_form", "body": [{"emit": "Two sentences max."}]},
        {"name": "long_form", "body": [{"emit": "No length limit."}]}
      ]},
      {"call": "closing"}
    ]
  })";
  bool ok = true;
  std::string detail;
  try {
    auto program = compiler::PromptProgram::from_json(kProgram);
    pml::SchemaDoc doc = compiler::compile_program(program, "compiled");
    if (pml::parse_schema(pml::serialize(doc)) != doc) {
      ok = false;
      detail = "emitted text did not parse back to the same schema";
    }
    layout::LayoutPlan plan = layout::plan_layout(doc);
    cache::ModuleStore store(tiny_config());
    cache::encode_schema(tiny_model(), plan, store);
    engine::ServeRequest req;
    req.prompt = pml::parse_prompt(
        "<prompt schema=\"compiled\"><verbose><style>dry</style></verbose>"
        "<short_form/>go</prompt>");
    req.max_new_tokens = 2;
    auto resp = engine::serve(req, doc, plan, store, tiny_model());
    if (resp.output_tokens.size() != 2) ok = false;

    bool exclusive = false;
    try {
      engine::ServeRequest both;
      both.prompt = pml::parse_prompt(
          "<prompt schema=\"compiled\"><short_form/><long_form/></prompt>");
      engine::serve(both, doc, plan, store, tiny_model());
    } catch (const Error& e) {
      exclusive = e.code() == ErrorCode::ValidationFailed;
    }
    if (!exclusive) {
      ok = false;
      detail = "union members served together without a validation error";
    }
    if (ok && detail.empty())
      detail = "compile -> serialize -> parse -> encode -> serve, arms exclusive";
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  report(12, "prompt-program compiler end to end", ok, detail);
}

}  // namespace

int main() {
  check_serve_equivalence();
  check_zero_masking();
  check_kv_chaining();
  check_permutation_invariance();
  check_position_semantics();
  check_memory_accounting();

  g_sweep = bench::run_scaling(tiny_model(), {256, 512, 1024, 2048, 4096}, 3,
                               cache::Tier::Fast);
  check_flops_model();
  check_growth_law();

  check_corpus_and_roundtrip();
  check_parameterization();
  check_persistence();
  check_compiler();

  if (g_failures) std::printf("%d of 12 checks failed\n", g_failures);
  return g_failures ? 1 : 0;
}
