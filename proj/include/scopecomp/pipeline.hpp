#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "scopecomp/config.hpp"
#include "scopecomp/rag.hpp"

namespace scopecomp {

enum class RunMode { kRagEval, kFtExport, kEvalOnly };

std::string_view to_string(RunMode mode);
/// "rag_eval", "ft_export" or "eval_only" (dashes also accepted).
RunMode parse_run_mode(std::string_view name);

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ArtifactRef {
  std::string path;  // relative to the output directory when inside it
  std::string sha256;
};

struct StageRecord {
  std::string name;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  bool complete = false;
  std::string error;
};

struct ArtifactManifest {
  std::string mode;
  bool complete = false;
  std::vector<StageRecord> stages;
};

inline constexpr std::string_view kArtifactManifestFile = "artifacts.json";

OrderedJson to_json(const ArtifactManifest& m);
ArtifactManifest artifact_manifest_from_json(const Json& j);

struct RunResult {
  int exit_status = 0;
  ArtifactManifest manifest;
  std::vector<CategoryReport> report;  // RAG_EVAL and EVAL_ONLY
};

/// Runs the stages of `mode` in order under cfg.output_dir and writes
/// artifacts.json after every stage. A failing stage leaves earlier outputs
/// on disk, marks the manifest incomplete and throws StageError.
///
/// Outputs:
///   FT_EXPORT  ingest/, scopes.jsonl, train.jsonl, dataset_card.json
///   RAG_EVAL   ingest/, scopes.jsonl, train.jsonl, index.bin, tests.jsonl,
///              predictions.jsonl, records.jsonl, report.csv, leakage.json
///   EVAL_ONLY  records.jsonl, report.csv
RunResult run_pipeline(const PipelineConfig& cfg, RunMode mode);

/// Counts per category and kind plus the filter settings; no timestamps, so
/// identical inputs give identical cards.
OrderedJson dataset_card(const std::vector<CompletionPair>& pairs, const PipelineConfig& cfg,
                         std::size_t holdout_removed);

struct SweepAxis {
  std::string key;                  // dotted config key
  std::vector<std::string> values;  // JSON (or bare string) literals
};

/// Parses "filters.min_scope_bytes=50,100,200".
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepPoint {
  std::vector<std::pair<std::string, std::string>> settings;
  std::filesystem::path output_dir;
  OrderedJson card;
};

/// Runs FT_EXPORT for every point of the cartesian grid, each into
/// <output_dir>/sweep/point_<i>/, and writes <output_dir>/sweep/summary.jsonl.
std::vector<SweepPoint> run_sweep(const Json& base_config, const std::filesystem::path& base_dir,
                                  const std::vector<SweepAxis>& axes);

}  // namespace scopecomp
