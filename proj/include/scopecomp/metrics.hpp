#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "scopecomp/util.hpp"

namespace scopecomp {

/// Distances are computed over Unicode scalar values unless `bytes` is set.
struct MetricOptions {
  bool bytes = false;
  bool normalize_ws = false;
};

/// Unit-cost Levenshtein distance between two UTF-8 strings.
std::size_t levenshtein(std::string_view a, std::string_view b, const MetricOptions& opts = {});
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

struct OptPrefix {
  std::size_t distance = 0;
  std::size_t prefix_len = 0;  // in the same units as the distance
};

/// min over i of levenshtein(prediction[0, i), truth); ties resolve to the
/// shortest prefix. Single DP pass with rolling rows over `truth`.
OptPrefix opt_prefix_distance(std::string_view prediction, std::string_view truth,
                              const MetricOptions& opts = {});
OptPrefix opt_prefix_distance(std::u32string_view prediction, std::u32string_view truth);

/// Collapses runs of spaces/tabs to one space and drops trailing whitespace
/// on every line.
std::string normalize_whitespace(std::string_view text);

struct EvalInput {
  std::string test_id;
  std::string category;
  std::string prediction;
  std::string ground_truth;
};

struct EvalRecord {
  std::string test_id;
  std::string category;
  std::string prediction;
  std::string ground_truth;
  std::size_t full_distance = 0;
  std::size_t opt_distance = 0;
  std::size_t opt_prefix_len = 0;
  std::size_t conciseness_delta = 0;
};

EvalRecord evaluate_one(const EvalInput& test, const MetricOptions& opts = {});
std::vector<EvalRecord> evaluate(const std::vector<EvalInput>& tests, const MetricOptions& opts = {});

struct CategoryReport {
  std::string category;
  std::size_t n_tests = 0;
  double mean_opt = 0;
  double mean_full = 0;
  double median_opt = 0;
  double median_full = 0;
};

/// One row per category, ordered by category name.
std::vector<CategoryReport> aggregate_report(const std::vector<EvalRecord>& records);

OrderedJson to_json(const EvalRecord& r);
EvalInput eval_input_from_json(const Json& j);

/// "category,n,mean_opt,median_opt,mean_full,median_full" plus one line per row.
std::string report_csv(const std::vector<CategoryReport>& rows);

}  // namespace scopecomp
