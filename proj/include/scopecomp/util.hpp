#pragma once

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace scopecomp {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of SHA-256(data), big-endian.
std::uint64_t hash64(std::string_view data);

/// Hex digest of a file's bytes; throws std::runtime_error if unreadable.
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::vector<Json> read_jsonl(const std::filesystem::path& path);

/// One compact JSON document per line, LF-terminated.
template <typename Range>
std::string to_jsonl(const Range& docs) {
  std::string out;
  for (const auto& doc : docs) {
    out += doc.dump(-1, ' ', false);
    out += '\n';
  }
  return out;
}

/// ISO-8601 UTC, second resolution: "2024-05-01T12:34:56Z".
std::string format_utc(std::time_t t);
std::string utc_now();

/// Accepts "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SSZ"; returns the canonical long
/// form or an empty string if the input is malformed.
std::string normalize_timestamp(std::string_view text);

/// Replaces malformed UTF-8 sequences with U+FFFD. Sets *replaced when any
/// byte was rewritten.
std::string lossy_utf8(std::string_view bytes, bool* replaced = nullptr);

/// Decodes UTF-8 into scalar values; malformed bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view bytes);

inline bool is_utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace scopecomp
