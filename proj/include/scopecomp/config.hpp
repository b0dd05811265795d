#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "scopecomp/client.hpp"
#include "scopecomp/ingest.hpp"
#include "scopecomp/metrics.hpp"
#include "scopecomp/pairs.hpp"
#include "scopecomp/util.hpp"

namespace scopecomp {

struct RagConfig {
  std::size_t n_neighbors = 3;
  std::size_t budget_bytes = 6144;
};

struct EndpointConfig {
  std::string embed;     // base URL of the embedding service, optional
  std::string generate;  // base URL of the generation service
};

struct GenerationConfig {
  std::size_t max_new_tokens = 256;
  double temperature = 0.0;
  std::size_t timeout_ms = 120'000;
  std::size_t max_in_flight = 4;
  std::size_t retries = 2;
};

struct PipelineConfig {
  std::filesystem::path repo_root;
  std::set<Language> languages{Language::kCCpp, Language::kJava};
  std::vector<std::string> exclude_globs;
  std::size_t max_file_bytes = 4u << 20;
  FilterConfig filters;
  std::vector<std::string> logging_patterns{std::string(kDefaultLoggingPattern)};
  std::size_t random_starts = 1;
  std::uint64_t seed = 0;
  std::string eot_token{kDefaultEotToken};
  bool include_closer = true;
  std::vector<std::string> holdout;  // repo-relative paths
  std::optional<std::filesystem::path> holdout_file;
  std::string embedder = "builtin";
  RagConfig rag;
  EndpointConfig endpoints;
  GenerationConfig generation;
  MetricOptions metrics;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> predictions_file;
  std::size_t test_max_samples = 0;  // 0: every held-out scope

  IngestOptions ingest_options() const;
  PairOptions pair_options() const;
  /// Inline holdout entries plus the lines of holdout_file.
  std::set<std::string> holdout_paths() const;
  /// "builtin" stays as is; "remote" resolves to "remote:<endpoints.embed>".
  std::string embedder_spec() const;
  ClientOptions client_options() const;
  GenerationRequest generation_request() const;
};

struct FieldDiagnostic {
  std::string field;  // dotted key, e.g. "filters.min_scope_bytes"
  std::string message;
};

class ConfigInvalid : public std::runtime_error {
 public:
  explicit ConfigInvalid(std::vector<FieldDiagnostic> problems);
  ConfigInvalid(std::string field, std::string message)
      : ConfigInvalid(std::vector<FieldDiagnostic>{{std::move(field), std::move(message)}}) {}
  const std::vector<FieldDiagnostic>& problems() const { return problems_; }

 private:
  std::vector<FieldDiagnostic> problems_;
};

/// kComplete also requires repo_root and checks that referenced paths exist;
/// kPartial is for single-stage subcommands that only borrow a few keys.
enum class Validation { kComplete, kPartial };

/// Parses a JSON config file without interpreting it. Throws ConfigInvalid
/// if the file is missing or not a JSON object.
Json load_config_json(const std::filesystem::path& path);

/// Interprets a config document. Relative paths are resolved against
/// base_dir. Every problem is collected before ConfigInvalid is thrown.
PipelineConfig config_from_json(const Json& doc, const std::filesystem::path& base_dir,
                                Validation level = Validation::kComplete);

PipelineConfig validate_config(const std::filesystem::path& path,
                               Validation level = Validation::kComplete);

/// The defaults as a config document (repo_root left empty).
OrderedJson default_config_json();

/// Sets a dotted key ("filters.min_scope_bytes") to `value_text`, parsed as
/// JSON when it parses and taken as a string otherwise.
void set_dotted(Json& doc, std::string_view dotted_key, std::string_view value_text);

}  // namespace scopecomp
