#include "scopecomp/ingest.hpp"

#include <fnmatch.h>
#include <sys/stat.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "scopecomp/util.hpp"

namespace scopecomp {

namespace fs = std::filesystem;

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::kCCpp:
      return "c_cpp";
    case Language::kJava:
      return "java";
    case Language::kOther:
      break;
  }
  return "other";
}

Language parse_language(std::string_view name) {
  auto lower = to_lower(trim(name));
  if (lower == "c_cpp" || lower == "c" || lower == "cpp" || lower == "c++") return Language::kCCpp;
  if (lower == "java") return Language::kJava;
  if (lower == "other") return Language::kOther;
  throw std::invalid_argument("unknown language: " + std::string(name));
}

const ExtensionTable& default_extension_table() {
  static const ExtensionTable table = {
      {".c", Language::kCCpp},   {".h", Language::kCCpp},   {".cc", Language::kCCpp},
      {".cpp", Language::kCCpp}, {".cxx", Language::kCCpp}, {".hpp", Language::kCCpp},
      {".hh", Language::kCCpp},  {".java", Language::kJava},
  };
  return table;
}

Language detect_language(std::string_view path, const ExtensionTable& table) {
  auto slash = path.find_last_of("/\\");
  std::string_view name = slash == std::string_view::npos ? path : path.substr(slash + 1);
  auto dot = name.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return Language::kOther;
  auto it = table.find(to_lower(name.substr(dot)));
  return it == table.end() ? Language::kOther : it->second;
}

FileRecord make_file_record(std::string path, Language lang, std::string_view raw_bytes,
                            std::string modified_at) {
  FileRecord rec;
  rec.path = std::move(path);
  rec.language = lang;
  rec.content = lossy_utf8(raw_bytes, &rec.lossy_decoded);
  rec.byte_len = rec.content.size();
  rec.file_id = sha256_hex(rec.content);
  rec.modified_at = std::move(modified_at);
  return rec;
}

bool matches_any_glob(std::string_view rel_path, const std::vector<std::string>& globs) {
  std::string path(rel_path);
  return std::any_of(globs.begin(), globs.end(), [&](const std::string& g) {
    return ::fnmatch(g.c_str(), path.c_str(), 0) == 0;
  });
}

IngestManifest ingest_repository(const fs::path& root, const IngestOptions& opts) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw RootNotFound(root);

  IngestManifest manifest;
  manifest.repo_root = fs::absolute(root).lexically_normal().string();
  manifest.ingested_at = utc_now();

  auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw RootNotFound(root);
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) {
      manifest.warnings.push_back({it->path().string(), "traversal error: " + ec.message()});
      ec.clear();
      continue;
    }
    const auto& entry = *it;
    if (entry.is_symlink(ec)) {
      // Not followed; recursive_directory_iterator already declines to
      // descend into symlinked directories.
      continue;
    }
    if (!entry.is_regular_file(ec)) continue;

    std::string rel = entry.path().lexically_relative(root).generic_string();
    Language lang = detect_language(rel, opts.extensions);
    if (lang == Language::kOther || !opts.languages.contains(lang)) continue;
    if (matches_any_glob(rel, opts.exclude_globs)) continue;

    auto size = entry.file_size(ec);
    if (ec) {
      manifest.warnings.push_back({rel, "unreadable: " + ec.message()});
      ec.clear();
      continue;
    }
    if (size > opts.max_file_bytes) {
      manifest.warnings.push_back(
          {rel, "skipped: " + std::to_string(size) + " bytes exceeds size cap"});
      continue;
    }

    std::string bytes;
    try {
      bytes = read_file(entry.path());
    } catch (const std::exception& e) {
      manifest.warnings.push_back({rel, std::string("unreadable: ") + e.what()});
      continue;
    }

    struct stat st {};
    std::time_t mtime = 0;
    if (::stat(entry.path().c_str(), &st) == 0) mtime = st.st_mtime;

    auto rec = make_file_record(rel, lang, bytes, format_utc(mtime));
    if (rec.lossy_decoded) {
      manifest.warnings.push_back({rel, "non-UTF-8 bytes replaced with U+FFFD"});
    }
    manifest.files.push_back(std::move(rec));
  }

  std::sort(manifest.files.begin(), manifest.files.end(),
            [](const FileRecord& a, const FileRecord& b) { return a.path < b.path; });
  std::sort(manifest.warnings.begin(), manifest.warnings.end(),
            [](const IngestWarning& a, const IngestWarning& b) {
              return std::tie(a.path, a.message) < std::tie(b.path, b.message);
            });
  for (const auto& f : manifest.files) ++manifest.counts[f.language];
  return manifest;
}

std::string manifest_jsonl(const IngestManifest& manifest) {
  std::vector<OrderedJson> lines;
  lines.reserve(manifest.files.size());
  for (const auto& f : manifest.files) {
    OrderedJson j;
    j["file_id"] = f.file_id;
    j["path"] = f.path;
    j["language"] = to_string(f.language);
    j["byte_len"] = f.byte_len;
    j["modified_at"] = f.modified_at;
    if (f.lossy_decoded) j["lossy_decoded"] = true;
    lines.push_back(std::move(j));
  }
  return to_jsonl(lines);
}

void write_manifest(const IngestManifest& manifest, const fs::path& out_dir) {
  fs::create_directories(out_dir / kContentDir);
  for (const auto& f : manifest.files) {
    auto blob = out_dir / kContentDir / f.file_id;
    // Content-addressed: an existing blob with this name already has these bytes.
    if (!fs::exists(blob)) write_file(blob, f.content);
  }
  write_file(out_dir / kManifestFile, manifest_jsonl(manifest));

  OrderedJson meta;
  meta["repo_root"] = manifest.repo_root;
  OrderedJson counts = OrderedJson::object();
  for (Language lang : {Language::kCCpp, Language::kJava}) {
    auto it = manifest.counts.find(lang);
    counts[std::string(to_string(lang))] = it == manifest.counts.end() ? 0 : it->second;
  }
  meta["counts"] = counts;
  meta["file_count"] = manifest.files.size();
  meta["ingested_at"] = manifest.ingested_at;
  OrderedJson warnings = OrderedJson::array();
  for (const auto& w : manifest.warnings) warnings.push_back({{"path", w.path}, {"message", w.message}});
  meta["warnings"] = warnings;
  write_file(out_dir / kManifestMetaFile, meta.dump(2) + "\n");
}

IngestManifest read_manifest(const fs::path& dir_or_file) {
  fs::path dir = fs::is_directory(dir_or_file) ? dir_or_file : dir_or_file.parent_path();
  fs::path manifest_path = fs::is_directory(dir_or_file) ? dir / kManifestFile : dir_or_file;

  IngestManifest manifest;
  if (fs::exists(dir / kManifestMetaFile)) {
    auto meta = Json::parse(read_file(dir / kManifestMetaFile));
    manifest.repo_root = meta.value("repo_root", "");
    manifest.ingested_at = meta.value("ingested_at", "");
    for (const auto& w : meta.value("warnings", Json::array())) {
      manifest.warnings.push_back({w.value("path", ""), w.value("message", "")});
    }
  }
  for (const auto& j : read_jsonl(manifest_path)) {
    FileRecord rec;
    rec.file_id = j.at("file_id").get<std::string>();
    rec.path = j.at("path").get<std::string>();
    rec.language = parse_language(j.at("language").get<std::string>());
    rec.byte_len = j.at("byte_len").get<std::size_t>();
    rec.modified_at = j.value("modified_at", "");
    rec.lossy_decoded = j.value("lossy_decoded", false);
    rec.content = read_file(dir / kContentDir / rec.file_id);
    if (rec.content.size() != rec.byte_len) {
      throw std::runtime_error("content store mismatch for " + rec.path + ": expected " +
                               std::to_string(rec.byte_len) + " bytes");
    }
    manifest.files.push_back(std::move(rec));
  }
  std::sort(manifest.files.begin(), manifest.files.end(),
            [](const FileRecord& a, const FileRecord& b) { return a.path < b.path; });
  for (const auto& f : manifest.files) ++manifest.counts[f.language];
  return manifest;
}

}  // namespace scopecomp
