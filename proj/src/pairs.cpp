#include "scopecomp/pairs.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <tuple>

namespace scopecomp {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  return msg;
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  // Unbiased integer in [0, bound). std::uniform_int_distribution is not
  // specified bit-for-bit across standard libraries.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::mt19937_64 shift_generator(std::string_view file_id, std::size_t start_byte,
                                std::uint64_t seed) {
  std::string key = std::to_string(seed) + ':' + std::string(file_id) + ':' + std::to_string(start_byte);
  return std::mt19937_64(hash64(key));
}

CompletionPair make_pair_at(const ScopeCandidate& c, std::string_view content,
                            const FilterConfig& cfg, const PairOptions& opts, PairKind kind,
                            std::size_t shift) {
  const std::size_t cut = c.start_byte + shift;
  std::size_t qbegin = cut > cfg.max_prefix_bytes ? cut - cfg.max_prefix_bytes : 0;
  // Never start the query inside a UTF-8 sequence.
  while (qbegin < cut && is_utf8_continuation(static_cast<unsigned char>(content[qbegin]))) {
    ++qbegin;
  }

  CompletionPair p;
  p.kind = kind;
  p.start_shift_bytes = shift;
  p.category = c.category;
  p.file_id = c.file_id;
  p.scope_start_byte = c.start_byte;
  p.eot_token = opts.eot_token;
  p.query.assign(content.substr(qbegin, cut - qbegin));
  if (opts.include_closer && c.end_byte < content.size()) p.closer.assign(1, content[c.end_byte]);
  p.label.assign(content.substr(cut, c.end_byte - cut));
  p.label += p.closer;
  p.label += opts.eot_token;
  p.pair_id = make_pair_id(c.file_id, c.start_byte, kind, shift);
  return p;
}

}  // namespace

InvalidConfig::InvalidConfig(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

std::vector<std::string> FilterConfig::violations() const {
  std::vector<std::string> out;
  if (min_scope_bytes > max_scope_bytes) {
    out.push_back("min_scope_bytes (" + std::to_string(min_scope_bytes) +
                  ") exceeds max_scope_bytes (" + std::to_string(max_scope_bytes) + ")");
  }
  if (min_prefix_bytes > max_prefix_bytes) {
    out.push_back("min_prefix_bytes (" + std::to_string(min_prefix_bytes) +
                  ") exceeds max_prefix_bytes (" + std::to_string(max_prefix_bytes) + ")");
  }
  if (max_prefix_bytes == 0) out.push_back("max_prefix_bytes must be positive");
  if (modified_after && normalize_timestamp(*modified_after).empty()) {
    out.push_back("modified_after is not an ISO-8601 date: " + *modified_after);
  }
  return out;
}

std::string_view to_string(PairKind kind) {
  return kind == PairKind::kPrimary ? "primary" : "random_start";
}

PairKind parse_pair_kind(std::string_view name) {
  if (name == "primary") return PairKind::kPrimary;
  if (name == "random_start") return PairKind::kRandomStart;
  throw std::invalid_argument("unknown pair kind: " + std::string(name));
}

std::string_view CompletionPair::label_without_eot() const {
  std::string_view l = label;
  if (!eot_token.empty() && l.size() >= eot_token.size() &&
      l.substr(l.size() - eot_token.size()) == eot_token) {
    l.remove_suffix(eot_token.size());
  }
  return l;
}

SourceIndex::SourceIndex(const std::vector<FileRecord>& files) {
  for (const auto& f : files) {
    by_id_.emplace(f.file_id, &f);
    id_paths_.emplace(f.file_id, f.path);
    paths_.insert(f.path);
  }
}

const FileRecord* SourceIndex::find(std::string_view file_id) const {
  auto it = by_id_.find(file_id);
  return it == by_id_.end() ? nullptr : it->second;
}

std::vector<std::string> SourceIndex::paths_of(std::string_view file_id) const {
  std::vector<std::string> out;
  auto [lo, hi] = id_paths_.equal_range(file_id);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  return out;
}

std::vector<ScopeCandidate> apply_filters(const std::vector<ScopeCandidate>& candidates,
                                          const FilterConfig& cfg, const SourceIndex& sources) {
  if (auto problems = cfg.violations(); !problems.empty()) throw InvalidConfig(problems);
  std::string after = cfg.modified_after ? normalize_timestamp(*cfg.modified_after) : "";

  std::vector<ScopeCandidate> kept;
  for (const auto& c : candidates) {
    if (c.size_bytes < cfg.min_scope_bytes || c.size_bytes > cfg.max_scope_bytes) continue;
    if (c.prefix_available_bytes < cfg.min_prefix_bytes) continue;
    if (cfg.max_depth && c.depth > *cfg.max_depth) continue;
    if (cfg.category_allowlist && !cfg.category_allowlist->contains(c.category)) continue;
    const FileRecord* file = sources.find(c.file_id);
    if (file == nullptr || c.end_byte > file->content.size()) continue;
    if (!after.empty() && file->modified_at < after) continue;
    if (!cfg.exclude_keywords.empty()) {
      std::string_view text = std::string_view(file->content).substr(c.start_byte, c.size_bytes);
      bool hit = std::any_of(cfg.exclude_keywords.begin(), cfg.exclude_keywords.end(),
                             [&](const std::string& kw) {
                               return !kw.empty() && text.find(kw) != std::string_view::npos;
                             });
      if (hit) continue;
    }
    kept.push_back(c);
  }
  return kept;
}

std::string make_pair_id(std::string_view file_id, std::size_t scope_start, PairKind kind,
                         std::size_t shift) {
  std::string key(file_id);
  key += ':' + std::to_string(scope_start) + ':' + std::string(to_string(kind)) + ':' +
         std::to_string(shift);
  return sha256_hex(key).substr(0, 20);
}

CompletionPair make_primary_pair(const ScopeCandidate& candidate, std::string_view content,
                                 const FilterConfig& cfg, const PairOptions& opts) {
  return make_pair_at(candidate, content, cfg, opts, PairKind::kPrimary, 0);
}

std::vector<std::size_t> draw_shifts(std::string_view file_id, std::size_t start_byte,
                                     std::size_t size_bytes, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> shifts;
  if (size_bytes < 2) return shifts;
  std::mt19937_64 rng = shift_generator(file_id, start_byte, seed);
  shifts.reserve(k);
  for (std::size_t i = 0; i < k; ++i) shifts.push_back(1 + bounded_draw(rng, size_bytes - 1));
  return shifts;
}

PairBatch make_random_start_pairs(const ScopeCandidate& candidate, std::string_view content,
                                  const FilterConfig& cfg, const PairOptions& opts, std::size_t k,
                                  std::uint64_t seed) {
  PairBatch batch;
  if (k == 0) return batch;
  if (candidate.size_bytes < 2) {
    batch.diagnostics.push_back("DegenerateScope: scope at byte " +
                                std::to_string(candidate.start_byte) + " of " + candidate.file_id +
                                " has fewer than 2 bytes");
    return batch;
  }

  auto splits_sequence = [&](std::size_t shift) {
    return is_utf8_continuation(static_cast<unsigned char>(content[candidate.start_byte + shift]));
  };
  bool any_boundary = false;
  for (std::size_t s = 1; s < candidate.size_bytes && !any_boundary; ++s) {
    any_boundary = !splits_sequence(s);
  }
  if (!any_boundary) {
    batch.diagnostics.push_back("DegenerateScope: no character boundary inside scope at byte " +
                                std::to_string(candidate.start_byte) + " of " + candidate.file_id);
    return batch;
  }

  // Redraws replace shifts landing inside a multi-byte sequence; this keeps
  // the draw uniform over the valid boundaries.
  std::mt19937_64 rng = shift_generator(candidate.file_id, candidate.start_byte, seed);
  std::set<std::size_t> shifts;
  std::size_t valid = 0;
  for (std::size_t attempt = 0; valid < k && attempt < 64 * k + 64; ++attempt) {
    std::size_t s = 1 + bounded_draw(rng, candidate.size_bytes - 1);
    if (splits_sequence(s)) continue;
    shifts.insert(s);
    ++valid;
  }
  for (std::size_t s : shifts) {
    batch.pairs.push_back(make_pair_at(candidate, content, cfg, opts, PairKind::kRandomStart, s));
  }
  return batch;
}

bool pair_order(const CompletionPair& a, const CompletionPair& b) {
  return std::tie(a.file_id, a.scope_start_byte, a.kind, a.start_shift_bytes) <
         std::tie(b.file_id, b.scope_start_byte, b.kind, b.start_shift_bytes);
}

PairBatch generate_pairs(const std::vector<ScopeCandidate>& filtered, const SourceIndex& sources,
                         const FilterConfig& cfg, const PairOptions& opts,
                         std::size_t random_starts, std::uint64_t seed) {
  PairBatch out;
  for (const auto& c : filtered) {
    const FileRecord* file = sources.find(c.file_id);
    if (file == nullptr) {
      out.diagnostics.push_back("unknown file_id " + c.file_id);
      continue;
    }
    out.pairs.push_back(make_primary_pair(c, file->content, cfg, opts));
    auto extra = make_random_start_pairs(c, file->content, cfg, opts, random_starts, seed);
    std::move(extra.pairs.begin(), extra.pairs.end(), std::back_inserter(out.pairs));
    std::move(extra.diagnostics.begin(), extra.diagnostics.end(),
              std::back_inserter(out.diagnostics));
  }
  std::sort(out.pairs.begin(), out.pairs.end(), pair_order);
  out.pairs.erase(std::unique(out.pairs.begin(), out.pairs.end(),
                              [](const CompletionPair& a, const CompletionPair& b) {
                                return a.pair_id == b.pair_id;
                              }),
                  out.pairs.end());
  return out;
}

HoldoutResult exclude_holdout(const std::vector<CompletionPair>& pairs,
                              const std::set<std::string>& holdout_paths,
                              const SourceIndex& sources) {
  HoldoutResult out;
  for (const auto& p : holdout_paths) {
    if (!sources.has_path(p)) out.unknown_paths.push_back(p);
  }
  std::map<std::string, bool, std::less<>> held;  // file_id -> any path held out
  for (const auto& pair : pairs) {
    auto it = held.find(pair.file_id);
    if (it == held.end()) {
      auto paths = sources.paths_of(pair.file_id);
      bool hit = std::any_of(paths.begin(), paths.end(),
                             [&](const std::string& p) { return holdout_paths.contains(p); });
      it = held.emplace(pair.file_id, hit).first;
    }
    (it->second ? out.removed : out.kept).push_back(pair);
  }
  return out;
}

std::string_view to_string(LeakKind kind) {
  return kind == LeakKind::kExactLabel ? "exact-label" : "label-substring-of-train-file";
}

std::string normalize_for_leakage(std::string_view text, std::string_view eot_token) {
  if (!eot_token.empty() && text.size() >= eot_token.size() &&
      text.substr(text.size() - eot_token.size()) == eot_token) {
    text.remove_suffix(eot_token.size());
  }
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out += '\n';
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      out += text[i];
    }
  }
  return out;
}

LeakageReport leakage_scan(const std::vector<CompletionPair>& train,
                           const std::vector<TestLabel>& tests, std::string_view eot_token) {
  LeakageReport report;

  // One haystack: each training pair contributes its normalized label and
  // query, separated by NUL so no match spans two records.
  std::string haystack;
  std::vector<std::size_t> record_start;  // start offset per training pair
  std::vector<std::string> train_labels;
  train_labels.reserve(train.size());
  for (const auto& p : train) {
    record_start.push_back(haystack.size());
    train_labels.push_back(normalize_for_leakage(p.label, p.eot_token.empty() ? eot_token : p.eot_token));
    haystack += train_labels.back();
    haystack += '\0';
    haystack += normalize_for_leakage(p.query, {});
    haystack += '\0';
  }

  for (const auto& t : tests) {
    std::string needle = normalize_for_leakage(t.label, eot_token);
    if (needle.empty()) {
      report.skipped_empty.push_back(t.id);
      continue;
    }
    std::set<std::size_t> hits;
    std::boyer_moore_horspool_searcher searcher(needle.begin(), needle.end());
    auto it = haystack.begin();
    while (true) {
      auto [b, e] = searcher(it, haystack.end());
      if (b == haystack.end()) break;
      auto offset = static_cast<std::size_t>(b - haystack.begin());
      auto rec = std::upper_bound(record_start.begin(), record_start.end(), offset) -
                 record_start.begin() - 1;
      hits.insert(static_cast<std::size_t>(rec));
      // Skip to the next record; further hits in this one add nothing.
      std::size_t next = static_cast<std::size_t>(rec) + 1 < record_start.size()
                             ? record_start[static_cast<std::size_t>(rec) + 1]
                             : haystack.size();
      it = haystack.begin() + static_cast<std::ptrdiff_t>(next);
    }
    for (std::size_t rec : hits) {
      report.findings.push_back({t.id, train[rec].pair_id,
                                 train_labels[rec] == needle ? LeakKind::kExactLabel
                                                             : LeakKind::kSubstring});
    }
  }
  return report;
}

OrderedJson to_json(const CompletionPair& p) {
  OrderedJson j;
  j["pair_id"] = p.pair_id;
  j["query"] = p.query;
  j["label"] = p.label;
  j["mask_len"] = p.mask_len();
  j["kind"] = to_string(p.kind);
  j["start_shift_bytes"] = p.start_shift_bytes;
  j["category"] = to_string(p.category);
  j["file_id"] = p.file_id;
  j["scope_start_byte"] = p.scope_start_byte;
  j["eot_token"] = p.eot_token;
  j["closer"] = p.closer;
  return j;
}

CompletionPair pair_from_json(const Json& j) {
  CompletionPair p;
  p.pair_id = j.at("pair_id").get<std::string>();
  p.query = j.at("query").get<std::string>();
  p.label = j.at("label").get<std::string>();
  p.kind = parse_pair_kind(j.at("kind").get<std::string>());
  p.start_shift_bytes = j.value("start_shift_bytes", std::size_t{0});
  p.category = parse_category(j.value("category", "unclassified"));
  p.file_id = j.value("file_id", "");
  p.scope_start_byte = j.value("scope_start_byte", std::size_t{0});
  p.eot_token = j.value("eot_token", std::string(kDefaultEotToken));
  p.closer = j.value("closer", "");
  return p;
}

OrderedJson to_json(const LeakageReport& r) {
  OrderedJson j;
  j["finding_count"] = r.findings.size();
  OrderedJson findings = OrderedJson::array();
  for (const auto& f : r.findings) {
    findings.push_back({{"test_id", f.test_id},
                        {"train_pair_id", f.train_pair_id},
                        {"match_kind", to_string(f.kind)}});
  }
  j["findings"] = findings;
  j["skipped_empty"] = r.skipped_empty;
  return j;
}

}  // namespace scopecomp
