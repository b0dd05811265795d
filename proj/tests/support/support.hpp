#pragma once

// Independent reference implementations and fixtures shared by the unit
// tests and the acceptance binary. Nothing here calls into the code under
// test except to read its data types.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "scopecomp/config.hpp"
#include "scopecomp/pairs.hpp"
#include "scopecomp/scopes.hpp"

namespace testsupport {

namespace fs = std::filesystem;

fs::path fixture_dir();
fs::path corpus_dir();
fs::path cli_path();

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

void write_text(const fs::path& path, std::string_view text);
void copy_tree(const fs::path& from, const fs::path& to);

// ---- edit distance -------------------------------------------------------

/// Levenshtein straight from the recursive definition, memoized.
std::size_t oracle_levenshtein(std::u32string_view a, std::u32string_view b);
/// min over every prefix p of `prediction` of oracle_levenshtein(p, truth).
std::size_t oracle_opt(std::u32string_view prediction, std::u32string_view truth);
std::u32string random_string(std::mt19937_64& rng, std::size_t max_len, char32_t alphabet);

// ---- nearest neighbours --------------------------------------------------

struct RefEntry {
  std::string id;
  std::vector<float> key;
};

/// Cosine in long double, then a full stable sort: similarity descending,
/// id ascending. Returns the first n ids.
std::vector<std::string> oracle_knn(const std::vector<RefEntry>& entries,
                                    const std::vector<float>& query, std::size_t n);

// ---- scopes --------------------------------------------------------------

struct RefScan {
  std::vector<scopecomp::DelimiterSpan> spans;  // sorted by open
  std::vector<bool> code;                       // byte is outside comments/literals
  bool balanced = true;
};

/// Plain stack walk with its own comment/literal/preprocessor skipping.
RefScan reference_scan(std::string_view content, scopecomp::Language lang);

struct Annotation {
  std::string path;
  std::size_t line = 0;
  scopecomp::ScopeCategory expected{};
  char delimiter = '{';
  std::size_t open = 0;  // byte offset of the annotated opener
};

/// Comments of the form "@expect <category> <{|(> [n]" name the n-th opener
/// of that kind on the same line (code bytes only, default n = 1).
std::vector<Annotation> parse_annotations(const fs::path& root);

/// Balanced, laminar per delimiter class, and consistent with `content`.
std::vector<std::string> check_span_soundness(std::string_view content,
                                              const std::vector<scopecomp::DelimiterSpan>& spans);

// ---- pairs ---------------------------------------------------------------

/// Filter bounds re-derived from the pair and its source file.
std::vector<std::string> check_pair_bounds(const scopecomp::CompletionPair& p,
                                           std::string_view content,
                                           const scopecomp::FilterConfig& cfg);

/// query ++ label_without_eot must be a verbatim slice of content.
bool check_contiguity(const scopecomp::CompletionPair& p, std::string_view content);

/// Repository of `n_files` C files built from random identifiers.
void write_synthetic_repo(const fs::path& root, std::uint64_t seed, std::size_t n_files);

// ---- stub services -------------------------------------------------------

/// Local HTTP server with /embed and /generate handlers.
class StubServer {
 public:
  using GenerateFn = std::function<std::string(const std::string& prompt)>;
  using EmbedFn = std::function<std::vector<float>(const std::string& text)>;

  StubServer(GenerateFn generate, EmbedFn embed, std::size_t embed_dim);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string url() const;
  std::size_t generate_calls() const;
  std::size_t embed_calls() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// The generation stub used for end-to-end runs: finds the longest known
/// query that ends the prompt and answers with its ground truth + junk.
StubServer::GenerateFn truth_plus_junk(std::vector<std::pair<std::string, std::string>> query_truth,
                                       std::string junk);

/// Like truth_plus_junk, but reads (prompt, ground_truth) from a tests.jsonl
/// file on the first request, for runs that write that file mid-pipeline.
StubServer::GenerateFn truth_plus_junk_from(fs::path tests_jsonl, std::string junk);

/// Runs the CLI binary; returns its exit status. stdout/stderr go to files
/// under `capture_dir` when given.
int run_cli(const std::vector<std::string>& args, const fs::path& capture_dir = {},
            const std::string& stdin_text = {});

}  // namespace testsupport
