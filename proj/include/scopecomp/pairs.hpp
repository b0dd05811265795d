#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scopecomp/ingest.hpp"
#include "scopecomp/scopes.hpp"
#include "scopecomp/util.hpp"

namespace scopecomp {

inline constexpr std::string_view kDefaultEotToken = "<|endoftext|>";

struct FilterConfig {
  std::size_t min_scope_bytes = 50;
  std::size_t max_scope_bytes = 1000;
  std::size_t min_prefix_bytes = 200;
  std::size_t max_prefix_bytes = 3072;
  std::optional<std::size_t> max_depth;
  std::optional<std::set<ScopeCategory>> category_allowlist;
  std::vector<std::string> exclude_keywords;
  std::optional<std::string> modified_after;  // canonical ISO-8601 UTC

  /// Every violated invariant, one message per line item; empty when valid.
  std::vector<std::string> violations() const;
};

class InvalidConfig : public std::runtime_error {
 public:
  explicit InvalidConfig(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct PairOptions {
  std::string eot_token{kDefaultEotToken};
  bool include_closer = true;
};

enum class PairKind { kPrimary, kRandomStart };

std::string_view to_string(PairKind kind);
PairKind parse_pair_kind(std::string_view name);

struct CompletionPair {
  std::string pair_id;
  std::string query;
  std::string label;  // scope remainder + closer + eot_token
  PairKind kind = PairKind::kPrimary;
  std::size_t start_shift_bytes = 0;
  ScopeCategory category = ScopeCategory::kUnclassified;
  std::string file_id;
  std::size_t scope_start_byte = 0;
  std::string eot_token;
  std::string closer;  // closing delimiter appended to the label, or empty

  std::size_t mask_len() const { return query.size(); }
  /// label with the trailing eot_token removed.
  std::string_view label_without_eot() const;
  /// Byte offset in the source file where `query` begins.
  std::size_t query_start_byte() const {
    return scope_start_byte + start_shift_bytes - query.size();
  }
};

/// Lookup from file_id to its record(s). Identical contents share one
/// file_id, so one id can resolve to several paths.
class SourceIndex {
 public:
  SourceIndex() = default;
  explicit SourceIndex(const std::vector<FileRecord>& files);

  const FileRecord* find(std::string_view file_id) const;
  std::vector<std::string> paths_of(std::string_view file_id) const;
  bool has_path(const std::string& path) const { return paths_.contains(path); }

 private:
  std::map<std::string, const FileRecord*, std::less<>> by_id_;
  std::multimap<std::string, std::string, std::less<>> id_paths_;
  std::set<std::string> paths_;
};

/// Keeps candidates satisfying every bound in `cfg`; order preserved.
/// Candidates whose file_id is unknown to `sources` are dropped. Throws
/// InvalidConfig when cfg is inconsistent.
std::vector<ScopeCandidate> apply_filters(const std::vector<ScopeCandidate>& candidates,
                                          const FilterConfig& cfg, const SourceIndex& sources);

std::string make_pair_id(std::string_view file_id, std::size_t scope_start, PairKind kind,
                         std::size_t shift);

CompletionPair make_primary_pair(const ScopeCandidate& candidate, std::string_view content,
                                 const FilterConfig& cfg, const PairOptions& opts);

struct PairBatch {
  std::vector<CompletionPair> pairs;
  std::vector<std::string> diagnostics;
};

/// Up to k pairs with the partition point moved s bytes into the scope,
/// s uniform on [1, size_bytes - 1] from a generator keyed by
/// (seed, file_id, start_byte). Shifts that would split a UTF-8 sequence are
/// redrawn; duplicate shifts collapse. Result is sorted by shift.
PairBatch make_random_start_pairs(const ScopeCandidate& candidate, std::string_view content,
                                  const FilterConfig& cfg, const PairOptions& opts, std::size_t k,
                                  std::uint64_t seed);

/// First k raw shift draws for a candidate (before boundary redraws).
std::vector<std::size_t> draw_shifts(std::string_view file_id, std::size_t start_byte,
                                     std::size_t size_bytes, std::size_t k, std::uint64_t seed);

/// Primary + random-start pairs for every candidate, sorted by
/// (file_id, scope_start_byte, kind, start_shift_bytes).
PairBatch generate_pairs(const std::vector<ScopeCandidate>& filtered, const SourceIndex& sources,
                         const FilterConfig& cfg, const PairOptions& opts,
                         std::size_t random_starts, std::uint64_t seed);

struct HoldoutResult {
  std::vector<CompletionPair> kept;
  std::vector<CompletionPair> removed;
  std::vector<std::string> unknown_paths;  // holdout paths matching no ingested file
};

/// Drops every pair whose file_id resolves to any holdout path.
HoldoutResult exclude_holdout(const std::vector<CompletionPair>& pairs,
                              const std::set<std::string>& holdout_paths,
                              const SourceIndex& sources);

enum class LeakKind { kExactLabel, kSubstring };
std::string_view to_string(LeakKind kind);

struct LeakFinding {
  std::string test_id;
  std::string train_pair_id;
  LeakKind kind = LeakKind::kSubstring;
};

struct LeakageReport {
  std::vector<LeakFinding> findings;
  std::vector<std::string> skipped_empty;  // test ids whose normalized label is empty
};

struct TestLabel {
  std::string id;
  std::string label;
};

/// Strips a trailing eot_token and rewrites CRLF / lone CR to LF.
std::string normalize_for_leakage(std::string_view text, std::string_view eot_token);

/// Reports every (test, train) pair where the normalized test label occurs
/// in the training label or query. Equal labels are kExactLabel.
LeakageReport leakage_scan(const std::vector<CompletionPair>& train,
                           const std::vector<TestLabel>& tests, std::string_view eot_token);

OrderedJson to_json(const CompletionPair& p);
CompletionPair pair_from_json(const Json& j);
OrderedJson to_json(const LeakageReport& r);

/// Sort order used for emitted pair files.
bool pair_order(const CompletionPair& a, const CompletionPair& b);

}  // namespace scopecomp
