#include "promptcache/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "promptcache/engine.hpp"
#include "json.hpp"

namespace pc::bench {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// deterministic printable filler text
std::string synthetic_text(long n, uint64_t seed) {
  static const char alphabet[] =
      "abcdefghijklmnopqrstuvwxyz ABCDEFGHIJKLMNOPQRSTUVWXYZ.,";
  model::Pcg32 rng(model::splitmix64(seed));
  std::string s;
  s.reserve(n);
  for (long i = 0; i < n; ++i)
    s.push_back(alphabet[rng.next() % (sizeof(alphabet) - 1)]);
  return s;
}

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t n = x.size();
  for (size_t i = 0; i < n; ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ScalingReport run_scaling(const model::Model& model, const std::vector<long>& lengths,
                          int trials, cache::Tier tier) {
  if (trials < 3) throw Error(ErrorCode::InvalidConfig, "trials must be >= 3");
  std::vector<long> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());

  ScalingReport report;
  const long d = model.config().hidden;
  for (long n : sorted) {
    pml::SchemaDoc schema;
    schema.name = "bench";
    schema.root.push_back(pml::SchemaNode::make_module(
        "m", {pml::SchemaNode::make_text(synthetic_text(n, 7 * n + 1))}));
    layout::LayoutPlan plan = layout::plan_layout(schema);

    cache::ModuleStore store(model.config());
    cache::encode_schema(model, plan, store, tier);

    pml::PromptDoc prompt;
    prompt.schema_name = "bench";
    pml::ModuleImport imp;
    imp.name = "m";
    prompt.items.push_back(pml::PromptItem::make_import(imp));
    prompt.items.push_back(pml::PromptItem::make_text("?"));

    engine::ServeRequest cached_req{prompt, 1, true, false};
    engine::ServeRequest baseline_req{prompt, 1, false, false};

    std::vector<double> ttft_c, ttft_b, copies;
    for (int t = 0; t < trials + 1; ++t) {  // first trial is warm-up
      engine::ServeResponse rc = engine::serve(cached_req, schema, plan, store, model);
      engine::ServeResponse rb = engine::serve(baseline_req, schema, plan, store, model);
      if (t == 0) continue;
      ttft_c.push_back(rc.timings.ttft_us);
      ttft_b.push_back(rb.timings.ttft_us);
      copies.push_back(rc.timings.copy_us);
    }

    ScalingRow row;
    row.seq_len = n;
    row.ttft_baseline_us = median(ttft_b);
    row.ttft_cached_us = median(ttft_c);
    row.copy_us = median(copies);
    row.speedup = row.ttft_baseline_us / row.ttft_cached_us;
    row.flops_baseline = model::flops_prefill(n + 1, d);
    row.flops_cached_model = model::flops_decode_step(n + 1, d);
    report.rows.push_back(row);
  }

  // fit over the largest half of the lengths
  size_t half = report.rows.size() / 2;
  std::vector<double> xs, yb, yc;
  for (size_t i = half; i < report.rows.size(); ++i) {
    xs.push_back(static_cast<double>(report.rows[i].seq_len));
    yb.push_back(report.rows[i].ttft_baseline_us);
    yc.push_back(report.rows[i].ttft_cached_us);
  }
  if (xs.size() >= 2) {
    report.baseline_exp = loglog_slope(xs, yb);
    report.cached_exp = loglog_slope(xs, yc);
  }
  return report;
}

std::string ScalingReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const ScalingRow& r : rows)
    j["rows"].push_back({{"seq_len", r.seq_len},
                         {"ttft_baseline_us", r.ttft_baseline_us},
                         {"ttft_cached_us", r.ttft_cached_us},
                         {"copy_us", r.copy_us},
                         {"speedup", r.speedup},
                         {"flops_baseline", r.flops_baseline},
                         {"flops_cached_model", r.flops_cached_model}});
  j["fitted"] = {{"baseline_exp", baseline_exp}, {"cached_exp", cached_exp}};
  return j.dump();
}

ScalingReport ScalingReport::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  ScalingReport report;
  for (const auto& r : j.at("rows")) {
    ScalingRow row;
    row.seq_len = r.at("seq_len");
    row.ttft_baseline_us = r.at("ttft_baseline_us");
    row.ttft_cached_us = r.at("ttft_cached_us");
    row.copy_us = r.at("copy_us");
    row.speedup = r.at("speedup");
    row.flops_baseline = r.at("flops_baseline");
    row.flops_cached_model = r.at("flops_cached_model");
    report.rows.push_back(row);
  }
  report.baseline_exp = j.at("fitted").at("baseline_exp");
  report.cached_exp = j.at("fitted").at("cached_exp");
  return report;
}

std::string ScalingReport::to_csv() const {
  std::ostringstream out;
  out << "seq_len,ttft_baseline_us,ttft_cached_us,copy_us,speedup,"
         "flops_baseline,flops_cached_model\n";
  out.precision(17);
  for (const ScalingRow& r : rows)
    out << r.seq_len << ',' << r.ttft_baseline_us << ',' << r.ttft_cached_us << ','
        << r.copy_us << ',' << r.speedup << ',' << r.flops_baseline << ','
        << r.flops_cached_model << '\n';
  return out.str();
}

void export_report(const ScalingReport& report, const std::string& path,
                   ReportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open \"" + path + "\" for write");
  out << (format == ReportFormat::Csv ? report.to_csv() : report.to_json());
  if (!out) throw Error(ErrorCode::IoError, "write failed for \"" + path + "\"");
}

}  // namespace pc::bench
