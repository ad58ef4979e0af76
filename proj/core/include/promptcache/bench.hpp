#pragma once

#include <string>
#include <vector>

#include "promptcache/cache.hpp"
#include "promptcache/model.hpp"

namespace pc::bench {

struct ScalingRow {
  long seq_len = 0;
  double ttft_baseline_us = 0;
  double ttft_cached_us = 0;
  double copy_us = 0;
  double speedup = 0;
  long long flops_baseline = 0;
  long long flops_cached_model = 0;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;  // sorted by seq_len
  double baseline_exp = 0;       // log-log slope over the largest half
  double cached_exp = 0;

  std::string to_json() const;
  static ScalingReport from_json(const std::string& json_text);
  std::string to_csv() const;
};

// For each length: one synthetic module of that many tokens, encoded once,
// then served with a 1-token suffix; medians over `trials` (one extra warm-up
// trial is discarded). Baseline serves the same prompt with use_cache=false.
ScalingReport run_scaling(const model::Model& model, const std::vector<long>& lengths,
                          int trials, cache::Tier tier);

enum class ReportFormat { Csv, Json };
void export_report(const ScalingReport& report, const std::string& path,
                   ReportFormat format);

// least-squares slope of log(y) against log(x)
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pc::bench
