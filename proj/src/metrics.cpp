#include "scopecomp/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace scopecomp {

namespace {

template <typename Seq>
std::size_t levenshtein_impl(const Seq& a, const Seq& b) {
  // Keep the rolling row over the shorter sequence.
  const Seq& outer = a.size() >= b.size() ? a : b;
  const Seq& inner = a.size() >= b.size() ? b : a;
  std::vector<std::size_t> prev(inner.size() + 1);
  std::vector<std::size_t> cur(inner.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= outer.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= inner.size(); ++j) {
      std::size_t sub = prev[j - 1] + (outer[i - 1] == inner[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[inner.size()];
}

template <typename Seq>
OptPrefix opt_prefix_impl(const Seq& prediction, const Seq& truth) {
  // Row i holds D[i][*] = distances from prediction[0, i) to every truth
  // prefix; the final column D[i][m] is the candidate for prefix length i.
  const std::size_t m = truth.size();
  std::vector<std::size_t> prev(m + 1);
  std::vector<std::size_t> cur(m + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  OptPrefix best{prev[m], 0};
  for (std::size_t i = 1; i <= prediction.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (prediction[i - 1] == truth[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    if (cur[m] < best.distance) best = {cur[m], i};
    std::swap(prev, cur);
  }
  return best;
}

std::string prepare(std::string_view text, const MetricOptions& opts) {
  return opts.normalize_ws ? normalize_whitespace(text) : std::string(text);
}

double mean_of(const std::vector<std::size_t>& v) {
  double sum = 0;
  for (auto x : v) sum += static_cast<double>(x);
  return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

double median_of(std::vector<std::size_t> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return static_cast<double>(v[mid]);
  return (static_cast<double>(v[mid - 1]) + static_cast<double>(v[mid])) / 2.0;
}

}  // namespace

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  return levenshtein_impl(a, b);
}

std::size_t levenshtein(std::string_view a, std::string_view b, const MetricOptions& opts) {
  std::string pa = prepare(a, opts);
  std::string pb = prepare(b, opts);
  if (opts.bytes) return levenshtein_impl(std::string_view(pa), std::string_view(pb));
  auto ua = decode_utf8(pa);
  auto ub = decode_utf8(pb);
  return levenshtein_impl(std::u32string_view(ua), std::u32string_view(ub));
}

OptPrefix opt_prefix_distance(std::u32string_view prediction, std::u32string_view truth) {
  return opt_prefix_impl(prediction, truth);
}

OptPrefix opt_prefix_distance(std::string_view prediction, std::string_view truth,
                              const MetricOptions& opts) {
  std::string pp = prepare(prediction, opts);
  std::string pt = prepare(truth, opts);
  if (opts.bytes) return opt_prefix_impl(std::string_view(pp), std::string_view(pt));
  auto up = decode_utf8(pp);
  auto ut = decode_utf8(pt);
  return opt_prefix_impl(std::u32string_view(up), std::u32string_view(ut));
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == ' ' || c == '\t') {
      std::size_t j = i;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
      bool line_end = j == text.size() || text[j] == '\n' || text[j] == '\r';
      if (!line_end) out += ' ';
      i = j - 1;
      continue;
    }
    out += c;
  }
  return out;
}

EvalRecord evaluate_one(const EvalInput& test, const MetricOptions& opts) {
  EvalRecord r;
  r.test_id = test.test_id;
  r.category = test.category;
  r.prediction = test.prediction;
  r.ground_truth = test.ground_truth;
  r.full_distance = levenshtein(test.prediction, test.ground_truth, opts);
  auto opt = opt_prefix_distance(test.prediction, test.ground_truth, opts);
  r.opt_distance = opt.distance;
  r.opt_prefix_len = opt.prefix_len;
  r.conciseness_delta = r.full_distance - r.opt_distance;
  return r;
}

std::vector<EvalRecord> evaluate(const std::vector<EvalInput>& tests, const MetricOptions& opts) {
  std::vector<EvalRecord> out;
  out.reserve(tests.size());
  for (const auto& t : tests) out.push_back(evaluate_one(t, opts));
  return out;
}

std::vector<CategoryReport> aggregate_report(const std::vector<EvalRecord>& records) {
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (const auto& r : records) {
    auto& [opt, full] = groups[r.category];
    opt.push_back(r.opt_distance);
    full.push_back(r.full_distance);
  }
  std::vector<CategoryReport> rows;
  for (const auto& [cat, dists] : groups) {
    const auto& [opt, full] = dists;
    rows.push_back({cat, opt.size(), mean_of(opt), mean_of(full), median_of(opt), median_of(full)});
  }
  return rows;
}

OrderedJson to_json(const EvalRecord& r) {
  OrderedJson j;
  j["test_id"] = r.test_id;
  j["category"] = r.category;
  j["prediction"] = r.prediction;
  j["ground_truth"] = r.ground_truth;
  j["full_distance"] = r.full_distance;
  j["opt_distance"] = r.opt_distance;
  j["opt_prefix_len"] = r.opt_prefix_len;
  j["conciseness_delta"] = r.conciseness_delta;
  return j;
}

EvalInput eval_input_from_json(const Json& j) {
  EvalInput t;
  t.test_id = j.at("test_id").get<std::string>();
  t.category = j.value("category", "unclassified");
  t.prediction = j.at("prediction").get<std::string>();
  t.ground_truth = j.at("ground_truth").get<std::string>();
  return t;
}

std::string report_csv(const std::vector<CategoryReport>& rows) {
  std::ostringstream out;
  out << "category,n,mean_opt,median_opt,mean_full,median_full\n";
  out.setf(std::ios::fixed);
  out.precision(3);
  for (const auto& r : rows) {
    out << r.category << ',' << r.n_tests << ',' << r.mean_opt << ',' << r.median_opt << ','
        << r.mean_full << ',' << r.median_full << '\n';
  }
  return out.str();
}

}  // namespace scopecomp
