#pragma once

#include <array>
#include <cstdint>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "scopecomp/ingest.hpp"
#include "scopecomp/util.hpp"

namespace scopecomp {

enum class ScopeCategory {
  kElseBody,
  kForBody,
  kFuncBody,
  kIfBody,
  kLogging,
  kFuncCall,
  kUnclassified,
};

inline constexpr std::array<ScopeCategory, 7> kAllCategories = {
    ScopeCategory::kElseBody, ScopeCategory::kForBody, ScopeCategory::kFuncBody,
    ScopeCategory::kIfBody,   ScopeCategory::kLogging, ScopeCategory::kFuncCall,
    ScopeCategory::kUnclassified,
};

/// "else_body", "for_body", "func_body", "if_body", "logging", "func_call",
/// "unclassified".
std::string_view to_string(ScopeCategory cat);
ScopeCategory parse_category(std::string_view name);

enum class LexMode : std::uint8_t {
  kCode,
  kLineComment,
  kBlockComment,
  kStringLit,
  kCharLit,
  kPreprocessor,
};

/// A matched delimiter pair. `open` and `close` are the offsets of the
/// delimiter bytes themselves; `delimiter` is '{' or '('.
struct DelimiterSpan {
  std::size_t open = 0;
  std::size_t close = 0;
  char delimiter = '{';

  bool operator==(const DelimiterSpan&) const = default;
};

struct Diagnostic {
  std::string code;
  std::string message;
  std::vector<std::size_t> offsets;
};

struct ScanResult {
  std::vector<DelimiterSpan> spans;  // sorted by open
  std::vector<std::size_t> orphan_openers;
  std::vector<std::size_t> orphan_closers;
  std::vector<LexMode> modes;  // one entry per content byte
  std::vector<Diagnostic> diagnostics;
};

/// Matches `{}` and `()` occurring in code, with one stack per delimiter
/// class. Comments, string/char literals and (C/C++) preprocessor lines are
/// opaque. Unmatched delimiters are reported in orphan_* and as an
/// "unbalanced_delimiters" diagnostic.
ScanResult scan_delimiters(std::string_view content, Language lang);
inline ScanResult scan_delimiters(const FileRecord& record) {
  return scan_delimiters(record.content, record.language);
}

inline constexpr std::string_view kDefaultLoggingPattern = "(?i)(log|trace|pd_?)";

/// Regex search over callee names. A leading "(?i)" makes a pattern
/// case-insensitive (std::regex has no inline flags).
class LoggingMatcher {
 public:
  LoggingMatcher();
  /// Throws std::invalid_argument naming the first pattern that fails to compile.
  explicit LoggingMatcher(std::vector<std::string> patterns);

  bool matches(std::string_view callee) const;
  const std::vector<std::string>& patterns() const { return patterns_; }

 private:
  std::vector<std::string> patterns_;
  std::vector<std::regex> compiled_;
};

/// Token-lookbehind classifier over one scanned file. Holds references to
/// `content`, `scan` and `logging`; they must outlive it.
class ScopeClassifier {
 public:
  ScopeClassifier(std::string_view content, Language lang, const ScanResult& scan,
                  const LoggingMatcher& logging);

  ScopeCategory classify(const DelimiterSpan& span) const;
  /// Category of scan.spans[i].
  ScopeCategory category_at(std::size_t i) const { return categories_[i]; }

 private:
  struct Token {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string_view text;
    bool ident = false;
  };

  bool has_token_before(std::size_t pos) const;
  Token token_before(std::size_t pos) const;
  std::size_t matching_open(std::size_t close) const;
  bool is_callee_name(const Token& t) const;
  bool is_container(std::size_t brace_index) const;
  /// Returns the open offset of the parameter list, or npos.
  std::size_t function_param_list(std::size_t brace_index) const;
  bool param_list_callee_ok(std::size_t paren_open) const;
  ScopeCategory classify_brace(std::size_t i, std::size_t* params) const;
  ScopeCategory classify_paren(std::size_t i) const;

  std::string_view content_;
  Language lang_;
  const ScanResult& scan_;
  const LoggingMatcher& logging_;
  std::unordered_map<std::size_t, std::size_t> close_to_open_;
  std::unordered_map<std::size_t, std::size_t> open_to_index_;
  std::vector<std::ptrdiff_t> enclosing_brace_;  // index into scan_.spans or -1
  std::unordered_set<std::size_t> param_lists_;  // paren open offsets
  std::vector<ScopeCategory> categories_;
};

/// Classifies one span from scan_delimiters on the same record.
ScopeCategory classify_scope(const FileRecord& record, const ScanResult& scan,
                             const DelimiterSpan& span, const LoggingMatcher& logging);

struct ScopeCandidate {
  std::string file_id;
  ScopeCategory category = ScopeCategory::kUnclassified;
  std::size_t start_byte = 0;  // first byte after the opening delimiter
  std::size_t end_byte = 0;    // offset of the closing delimiter
  std::size_t depth = 0;       // delimiter nesting levels strictly inside
  std::size_t size_bytes = 0;
  std::size_t prefix_available_bytes = 0;

  bool operator==(const ScopeCandidate&) const = default;
};

struct ExtractResult {
  std::vector<ScopeCandidate> candidates;  // sorted by start_byte
  std::vector<Diagnostic> diagnostics;
};

/// depth[i] for scan.spans[i]: 0 when nothing is nested inside, otherwise
/// one more than the deepest span strictly inside.
std::vector<std::size_t> nesting_depths(const std::vector<DelimiterSpan>& spans);

ExtractResult extract_scopes(const FileRecord& record, const LoggingMatcher& logging);

OrderedJson to_json(const ScopeCandidate& c);
ScopeCandidate scope_from_json(const Json& j);

}  // namespace scopecomp
