// promptcache: PML toolchain driver.
//
// Exit codes: 0 ok, 2 validation/input error, 3 I/O error, 4 capacity
// exceeded, 5 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "promptcache/bench.hpp"
#include "promptcache/cache.hpp"
#include "promptcache/compiler.hpp"
#include "promptcache/engine.hpp"
#include "promptcache/layout.hpp"
#include "promptcache/model.hpp"
#include "promptcache/pml.hpp"

namespace {

using namespace pc;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::IoError:
    case ErrorCode::VersionMismatch:
    case ErrorCode::ConfigHashMismatch:
      return 3;
    case ErrorCode::CapacityExceeded:
      return 4;
    case ErrorCode::Internal:
      return 5;
    default:
      return 2;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

model::ModelConfig load_config(const std::string& path) {
  if (path.empty())
    throw Error(ErrorCode::IoError,
                "no model config: pass --model or set PROMPTCACHE_MODEL");
  return model::ModelConfig::from_json(read_file(path));
}

pml::SchemaDoc load_schema(const std::string& path) {
  pml::SchemaDoc doc = pml::parse_schema(read_file(path));
  return pml::expand_chat_tags(doc, pml::ChatTemplate::llama2());
}

cache::Tier tier_from(const std::string& s) {
  if (s == "fast") return cache::Tier::Fast;
  if (s == "slow") return cache::Tier::Slow;
  throw Error(ErrorCode::InvalidConfig, "tier must be fast or slow");
}

struct CommonOpts {
  std::string model_path;
  std::string store_path;
  std::string format = "json";
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular attention-state reuse for transformer inference"};
  app.require_subcommand(1);

  CommonOpts opts;

  // validate
  std::string v_schema, v_prompt;
  auto* validate = app.add_subcommand("validate", "Validate a schema and optionally a prompt");
  validate->add_option("schema", v_schema, "schema .pml file")->required();
  validate->add_option("prompt", v_prompt, "prompt .pml file");
  validate->add_option("--format", opts.format, "json|text");

  // encode
  std::string e_schema, e_tier = "fast";
  std::vector<std::string> e_scaffolds;
  long long e_cap_fast = -1, e_cap_slow = -1;
  auto* encode = app.add_subcommand("encode", "Precompute attention states for all modules");
  encode->add_option("schema", e_schema)->required();
  encode->add_option("--store", opts.store_path)->envname("PROMPTCACHE_STORE")->required();
  encode->add_option("--model", opts.model_path)->envname("PROMPTCACHE_MODEL");
  encode->add_option("--tier", e_tier, "fast|slow");
  encode->add_option("--scaffold", e_scaffolds,
                     "comma-separated module set to encode jointly (repeatable)");
  encode->add_option("--fast-capacity", e_cap_fast, "fast tier capacity in bytes");
  encode->add_option("--slow-capacity", e_cap_slow, "slow tier capacity in bytes");
  encode->add_option("--format", opts.format);

  // run
  std::string r_prompt, r_schema;
  int r_max_new = 16;
  bool r_no_cache = false, r_oracle = false, r_scaffolds = false;
  auto* run = app.add_subcommand("run", "Serve a prompt");
  run->add_option("prompt", r_prompt)->required();
  run->add_option("--schema", r_schema)->required();
  run->add_option("--store", opts.store_path)->envname("PROMPTCACHE_STORE");
  run->add_option("--model", opts.model_path)->envname("PROMPTCACHE_MODEL");
  run->add_option("--max-new", r_max_new, "tokens to generate");
  run->add_flag("--no-cache", r_no_cache, "baseline full prefill");
  run->add_flag("--oracle", r_oracle, "exact block-masked oracle path");
  run->add_flag("--scaffolds", r_scaffolds, "allow scaffold entries");
  run->add_option("--format", opts.format);

  // inspect
  std::string i_schema;
  auto* inspect = app.add_subcommand("inspect", "Dump store stats or a layout plan");
  inspect->add_option("--store", opts.store_path)->envname("PROMPTCACHE_STORE");
  inspect->add_option("--schema", i_schema, "dump this schema's layout plan");
  inspect->add_option("--model", opts.model_path)->envname("PROMPTCACHE_MODEL");
  inspect->add_option("--format", opts.format);

  // bench
  std::string b_lengths = "256,512,1024,2048,4096", b_tier = "fast", b_out;
  int b_trials = 5;
  std::string b_outfmt = "csv";
  auto* bench_cmd = app.add_subcommand("bench", "TTFT scaling sweep, cached vs baseline");
  bench_cmd->add_option("--model", opts.model_path)->envname("PROMPTCACHE_MODEL");
  bench_cmd->add_option("--lengths", b_lengths, "comma-separated sequence lengths");
  bench_cmd->add_option("--trials", b_trials);
  bench_cmd->add_option("--tier", b_tier, "fast|slow");
  bench_cmd->add_option("--out", b_out, "report file (.csv or .json by --out-format)");
  bench_cmd->add_option("--out-format", b_outfmt, "csv|json");
  bench_cmd->add_option("--format", opts.format);

  // compile
  std::string c_program, c_out, c_name = "program";
  auto* compile = app.add_subcommand("compile", "Lower a prompt program JSON to a PML schema");
  compile->add_option("program", c_program)->required();
  compile->add_option("-o,--out", c_out)->required();
  compile->add_option("--name", c_name, "schema name");
  compile->add_option("--format", opts.format);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      pml::SchemaDoc schema = load_schema(v_schema);
      pml::ValidationReport report;
      if (!v_prompt.empty()) {
        pml::PromptDoc prompt = pml::parse_prompt(read_file(v_prompt));
        report = pml::validate_prompt(prompt, schema);
      }
      if (!report.ok) {
        std::cerr << report.to_json() << "\n";
        return 2;
      }
      if (opts.format == "json")
        std::cout << report.to_json() << "\n";
      else
        std::cout << "ok\n";
      return 0;
    }

    if (*encode) {
      model::ModelConfig cfg = load_config(opts.model_path);
      model::Model mdl(cfg);
      pml::SchemaDoc schema = load_schema(e_schema);
      layout::LayoutPlan plan = layout::plan_layout(schema);
      cache::ModuleStore store(cfg);
      if (e_cap_fast >= 0) store.set_capacity(cache::Tier::Fast, e_cap_fast);
      if (e_cap_slow >= 0) store.set_capacity(cache::Tier::Slow, e_cap_slow);
      cache::Tier tier = tier_from(e_tier);
      int entries = cache::encode_schema(mdl, plan, store, tier);
      for (const std::string& spec : e_scaffolds) {
        std::vector<std::string> members;
        std::stringstream ss(spec);
        std::string m;
        while (std::getline(ss, m, ',')) members.push_back(m);
        store.insert(cache::encode_scaffold(mdl, plan, members, tier));
        ++entries;
      }
      store.save(opts.store_path);
      nlohmann::json j;
      j["entries"] = entries;
      j["bytes_used"] = {{"fast", store.stats().bytes_fast},
                         {"slow", store.stats().bytes_slow}};
      std::cout << j.dump() << "\n";
      return 0;
    }

    if (*run) {
      model::ModelConfig cfg = load_config(opts.model_path);
      model::Model mdl(cfg);
      pml::SchemaDoc schema = load_schema(r_schema);
      layout::LayoutPlan plan = layout::plan_layout(schema);
      engine::ServeRequest req;
      req.prompt = pml::parse_prompt(read_file(r_prompt));
      req.max_new_tokens = r_max_new;
      req.use_cache = !r_no_cache;
      req.use_scaffolds = r_scaffolds;

      engine::ServeResponse resp;
      if (r_oracle) {
        resp = engine::oracle_serve(req, schema, plan, mdl);
      } else {
        cache::ModuleStore store =
            (!opts.store_path.empty() && std::filesystem::exists(opts.store_path))
                ? cache::ModuleStore::load(opts.store_path, cfg)
                : cache::ModuleStore(cfg);
        resp = engine::serve(req, schema, plan, store, mdl);
      }
      if (opts.format == "json")
        std::cout << resp.to_json() << "\n";
      else
        std::cout << resp.output_text << "\n";
      return 0;
    }

    if (*inspect) {
      if (!i_schema.empty()) {
        pml::SchemaDoc schema = load_schema(i_schema);
        std::cout << layout::plan_layout(schema).to_json() << "\n";
        return 0;
      }
      if (opts.store_path.empty())
        throw Error(ErrorCode::IoError, "inspect needs --store or --schema");
      model::ModelConfig cfg = load_config(opts.model_path);
      cache::ModuleStore store = cache::ModuleStore::load(opts.store_path, cfg);
      std::cout << store.stats_json() << "\n";
      return 0;
    }

    if (*bench_cmd) {
      model::ModelConfig cfg = load_config(opts.model_path);
      model::Model mdl(cfg);
      std::vector<long> lengths;
      std::stringstream ss(b_lengths);
      std::string tokstr;
      while (std::getline(ss, tokstr, ',')) lengths.push_back(std::stol(tokstr));
      bench::ScalingReport report =
          bench::run_scaling(mdl, lengths, b_trials, tier_from(b_tier));
      if (!b_out.empty())
        bench::export_report(report, b_out,
                             b_outfmt == "json" ? bench::ReportFormat::Json
                                                : bench::ReportFormat::Csv);
      std::cout << (opts.format == "json" ? report.to_json() : report.to_csv());
      std::cout << "\n";
      return 0;
    }

    if (*compile) {
      compiler::PromptProgram program =
          compiler::PromptProgram::from_json(read_file(c_program));
      pml::SchemaDoc schema = compiler::compile_program(program, c_name);
      std::string text = pml::serialize(schema);
      pml::parse_schema(text);  // self-check: output must parse
      std::ofstream out(c_out, std::ios::binary);
      if (!out) throw Error(ErrorCode::IoError, "cannot open \"" + c_out + "\"");
      out << text;
      if (opts.format == "json") {
        nlohmann::json j;
        j["schema"] = schema.name;
        j["out"] = c_out;
        std::cout << j.dump() << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    nlohmann::json j;
    j["error"] = error_code_name(e.code());
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"Internal\",\"message\":\"" << e.what() << "\"}\n";
    return 5;
  }
  return 5;
}
