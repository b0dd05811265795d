#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scopecomp {

enum class Language { kCCpp, kJava, kOther };

std::string_view to_string(Language lang);

/// Parses "c_cpp", "java" or "other" (case-insensitive). Throws
/// std::invalid_argument on anything else.
Language parse_language(std::string_view name);

/// Lowercase extension including the dot (".cpp") to language.
using ExtensionTable = std::map<std::string, Language>;

const ExtensionTable& default_extension_table();

/// Extension-table lookup on the final path component; case-insensitive.
Language detect_language(std::string_view path,
                         const ExtensionTable& table = default_extension_table());

struct FileRecord {
  std::string file_id;  // sha256 of content
  std::string path;     // repo-relative, '/'-separated
  Language language = Language::kOther;
  std::string content;
  std::size_t byte_len = 0;
  std::string modified_at;
  bool lossy_decoded = false;
};

struct IngestWarning {
  std::string path;
  std::string message;
};

struct IngestOptions {
  std::set<Language> languages{Language::kCCpp, Language::kJava};
  std::vector<std::string> exclude_globs;
  std::uintmax_t max_file_bytes = 4u << 20;
  ExtensionTable extensions = default_extension_table();
};

struct IngestManifest {
  std::string repo_root;
  std::vector<FileRecord> files;  // sorted by path
  std::map<Language, std::size_t> counts;
  std::string ingested_at;
  std::vector<IngestWarning> warnings;
};

class RootNotFound : public std::runtime_error {
 public:
  explicit RootNotFound(const std::filesystem::path& root)
      : std::runtime_error("repository root not found or not a directory: " + root.string()) {}
};

/// Builds a FileRecord from raw bytes. Content is lossy-decoded to UTF-8.
FileRecord make_file_record(std::string path, Language lang, std::string_view raw_bytes,
                            std::string modified_at);

/// fnmatch-style match of a repo-relative path; '*' also crosses '/'.
bool matches_any_glob(std::string_view rel_path, const std::vector<std::string>& globs);

IngestManifest ingest_repository(const std::filesystem::path& root, const IngestOptions& opts);

// On-disk layout of an ingest directory:
//   manifest.jsonl       one FileRecord header per line
//   manifest_meta.json   repo_root, counts, ingested_at, warnings
//   content/<file_id>    content-addressed file bytes
inline constexpr std::string_view kManifestFile = "manifest.jsonl";
inline constexpr std::string_view kManifestMetaFile = "manifest_meta.json";
inline constexpr std::string_view kContentDir = "content";

void write_manifest(const IngestManifest& manifest, const std::filesystem::path& out_dir);

/// Accepts the ingest directory or the manifest.jsonl inside it; content is
/// loaded from the sibling content/ store.
IngestManifest read_manifest(const std::filesystem::path& dir_or_file);

/// Serialized manifest lines; identical trees give identical text.
std::string manifest_jsonl(const IngestManifest& manifest);

}  // namespace scopecomp
