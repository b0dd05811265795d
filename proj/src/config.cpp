#include "scopecomp/config.hpp"

#include <fstream>
#include <sstream>

namespace scopecomp {

namespace fs = std::filesystem;

namespace {

std::string join_diagnostics(const std::vector<FieldDiagnostic>& problems) {
  std::string out = "invalid config:";
  for (const auto& p : problems) out += "\n  " + p.field + ": " + p.message;
  return out;
}

/// Reads typed fields from one JSON object, recording problems instead of
/// throwing, and remembers which keys were consumed.
class FieldReader {
 public:
  FieldReader(const Json& obj, std::string prefix, std::vector<FieldDiagnostic>& problems)
      : obj_(obj), prefix_(std::move(prefix)), problems_(problems) {}

  std::string name(std::string_view key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
  }

  const Json* get(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void size(std::string_view key, std::size_t& out) {
    if (const Json* v = get(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        out = v->get<std::size_t>();
      } else {
        fail(key, "expected a non-negative integer, got " + v->dump());
      }
    }
  }
  void optional_size(std::string_view key, std::optional<std::size_t>& out) {
    if (get(key) != nullptr) {
      std::size_t v = 0;
      std::size_t before = problems_.size();
      size(key, v);
      if (problems_.size() == before) out = v;
    }
  }
  void u64(std::string_view key, std::uint64_t& out) {
    if (const Json* v = get(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        out = v->get<std::uint64_t>();
      } else {
        fail(key, "expected a non-negative integer, got " + v->dump());
      }
    }
  }
  void number(std::string_view key, double& out) {
    if (const Json* v = get(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        fail(key, "expected a number, got " + v->dump());
      }
    }
  }
  void boolean(std::string_view key, bool& out) {
    if (const Json* v = get(key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        fail(key, "expected true or false, got " + v->dump());
      }
    }
  }
  void string(std::string_view key, std::string& out) {
    if (const Json* v = get(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        fail(key, "expected a string, got " + v->dump());
      }
    }
  }
  void strings(std::string_view key, std::vector<std::string>& out) {
    if (const Json* v = get(key)) {
      bool ok = v->is_array();
      if (ok) {
        for (const auto& e : *v) ok = ok && e.is_string();
      }
      if (ok) {
        out = v->get<std::vector<std::string>>();
      } else {
        fail(key, "expected a list of strings, got " + v->dump());
      }
    }
  }
  const Json* object(std::string_view key) {
    const Json* v = get(key);
    if (v != nullptr && !v->is_object()) {
      fail(key, "expected an object, got " + v->dump());
      return nullptr;
    }
    return v;
  }

  void fail(std::string_view key, std::string message) {
    problems_.push_back({name(key), std::move(message)});
  }

  void reject_unknown() {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.contains(key)) fail(key, "unknown key");
    }
  }

 private:
  const Json& obj_;
  std::string prefix_;
  std::vector<FieldDiagnostic>& problems_;
  std::set<std::string, std::less<>> seen_;
};

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  if (!path.is_absolute() && !base_dir.empty()) path = base_dir / path;
  path = path.lexically_normal();
  // "dir/." normalizes to "dir/"; drop the trailing separator.
  if (path.has_parent_path() && path.filename().empty()) path = path.parent_path();
  return path;
}

}  // namespace

ConfigInvalid::ConfigInvalid(std::vector<FieldDiagnostic> problems)
    : std::runtime_error(join_diagnostics(problems)), problems_(std::move(problems)) {}

IngestOptions PipelineConfig::ingest_options() const {
  IngestOptions o;
  o.languages = languages;
  o.exclude_globs = exclude_globs;
  o.max_file_bytes = max_file_bytes;
  return o;
}

PairOptions PipelineConfig::pair_options() const {
  PairOptions o;
  o.eot_token = eot_token;
  o.include_closer = include_closer;
  return o;
}

std::set<std::string> PipelineConfig::holdout_paths() const {
  std::set<std::string> out(holdout.begin(), holdout.end());
  if (holdout_file) {
    std::istringstream in(read_file(*holdout_file));
    for (std::string line; std::getline(in, line);) {
      auto t = trim(line);
      if (!t.empty() && t[0] != '#') out.insert(t);
    }
  }
  return out;
}

std::string PipelineConfig::embedder_spec() const {
  if (embedder == "remote") return "remote:" + endpoints.embed;
  return embedder;
}

ClientOptions PipelineConfig::client_options() const {
  ClientOptions o;
  o.max_in_flight = generation.max_in_flight;
  o.retries = generation.retries;
  return o;
}

GenerationRequest PipelineConfig::generation_request() const {
  GenerationRequest r;
  r.max_new_tokens = generation.max_new_tokens;
  r.temperature = generation.temperature;
  r.timeout = std::chrono::milliseconds(generation.timeout_ms);
  r.stop_sequences = {eot_token};
  return r;
}

Json load_config_json(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw ConfigInvalid("<file>", "config file not found: " + path.string());
  }
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigInvalid("<file>", path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigInvalid("<file>", "config must be a JSON object");
  return doc;
}

PipelineConfig config_from_json(const Json& doc, const fs::path& base_dir, Validation level) {
  std::vector<FieldDiagnostic> problems;
  PipelineConfig cfg;
  FieldReader top(doc, "", problems);
  const bool complete = level == Validation::kComplete;

  std::string repo_root;
  top.string("repo_root", repo_root);
  if (!repo_root.empty()) {
    cfg.repo_root = resolve(base_dir, repo_root);
    if (complete && !fs::is_directory(cfg.repo_root)) {
      top.fail("repo_root", "not a directory: " + cfg.repo_root.string());
    }
  } else if (complete) {
    top.fail("repo_root", "required");
  }

  std::vector<std::string> langs;
  if (top.get("languages") != nullptr) {
    top.strings("languages", langs);
    cfg.languages.clear();
    for (const auto& l : langs) {
      try {
        Language lang = parse_language(l);
        if (lang == Language::kOther) {
          top.fail("languages", "'other' cannot be selected");
        } else {
          cfg.languages.insert(lang);
        }
      } catch (const std::invalid_argument& e) {
        top.fail("languages", e.what());
      }
    }
    if (cfg.languages.empty()) top.fail("languages", "must name at least one language");
  }
  top.strings("exclude_globs", cfg.exclude_globs);
  top.size("max_file_bytes", cfg.max_file_bytes);

  if (const Json* f = top.object("filters")) {
    FieldReader fr(*f, "filters", problems);
    fr.size("min_scope_bytes", cfg.filters.min_scope_bytes);
    fr.size("max_scope_bytes", cfg.filters.max_scope_bytes);
    fr.size("min_prefix_bytes", cfg.filters.min_prefix_bytes);
    fr.size("max_prefix_bytes", cfg.filters.max_prefix_bytes);
    fr.optional_size("max_depth", cfg.filters.max_depth);
    std::vector<std::string> cats;
    if (fr.get("categories") != nullptr) {
      fr.strings("categories", cats);
      std::set<ScopeCategory> allow;
      for (const auto& c : cats) {
        try {
          allow.insert(parse_category(c));
        } catch (const std::invalid_argument& e) {
          fr.fail("categories", e.what());
        }
      }
      cfg.filters.category_allowlist = allow;
    }
    fr.strings("exclude_keywords", cfg.filters.exclude_keywords);
    std::string after;
    fr.string("modified_after", after);
    if (!after.empty()) cfg.filters.modified_after = after;
    fr.reject_unknown();
  }
  for (const auto& v : cfg.filters.violations()) problems.push_back({"filters", v});

  top.strings("logging_patterns", cfg.logging_patterns);
  try {
    LoggingMatcher check(cfg.logging_patterns);
  } catch (const std::invalid_argument& e) {
    top.fail("logging_patterns", e.what());
  }

  top.size("random_starts", cfg.random_starts);
  top.u64("seed", cfg.seed);
  top.string("eot_token", cfg.eot_token);
  if (cfg.eot_token.empty()) top.fail("eot_token", "must not be empty");
  top.boolean("include_closer", cfg.include_closer);

  top.strings("holdout", cfg.holdout);
  std::string holdout_file;
  top.string("holdout_file", holdout_file);
  if (!holdout_file.empty()) {
    cfg.holdout_file = resolve(base_dir, holdout_file);
    if (!fs::is_regular_file(*cfg.holdout_file)) {
      top.fail("holdout_file", "file not found: " + cfg.holdout_file->string());
    }
  }

  if (const Json* e = top.object("endpoints")) {
    FieldReader er(*e, "endpoints", problems);
    er.string("embed", cfg.endpoints.embed);
    er.string("generate", cfg.endpoints.generate);
    for (auto [key, url] : {std::pair{"embed", &cfg.endpoints.embed},
                            std::pair{"generate", &cfg.endpoints.generate}}) {
      if (url->empty()) continue;
      try {
        Endpoint::parse(*url);
      } catch (const std::invalid_argument& ex) {
        er.fail(key, ex.what());
      }
    }
    er.reject_unknown();
  }

  top.string("embedder", cfg.embedder);
  if (cfg.embedder == "remote") {
    if (cfg.endpoints.embed.empty()) top.fail("embedder", "'remote' needs endpoints.embed");
  } else if (cfg.embedder != "builtin" && cfg.embedder.rfind("remote:", 0) != 0) {
    top.fail("embedder", "must be 'builtin', 'remote' or 'remote:<url>'");
  }

  if (const Json* r = top.object("rag")) {
    FieldReader rr(*r, "rag", problems);
    rr.size("n_neighbors", cfg.rag.n_neighbors);
    rr.size("budget_bytes", cfg.rag.budget_bytes);
    rr.reject_unknown();
  }
  if (cfg.rag.n_neighbors < 1) top.fail("rag.n_neighbors", "must be >= 1");

  if (const Json* g = top.object("generation")) {
    FieldReader gr(*g, "generation", problems);
    gr.size("max_new_tokens", cfg.generation.max_new_tokens);
    gr.number("temperature", cfg.generation.temperature);
    gr.size("timeout_ms", cfg.generation.timeout_ms);
    gr.size("max_in_flight", cfg.generation.max_in_flight);
    gr.size("retries", cfg.generation.retries);
    for (const auto& v : cfg.generation_request().violations()) gr.fail("", v);
    if (cfg.generation.max_in_flight < 1) gr.fail("max_in_flight", "must be >= 1");
    gr.reject_unknown();
  }

  if (const Json* m = top.object("metrics")) {
    FieldReader mr(*m, "metrics", problems);
    mr.boolean("bytes", cfg.metrics.bytes);
    mr.boolean("normalize_ws", cfg.metrics.normalize_ws);
    mr.reject_unknown();
  }

  std::string out_dir;
  top.string("output_dir", out_dir);
  if (!out_dir.empty()) cfg.output_dir = resolve(base_dir, out_dir);
  std::string predictions;
  top.string("predictions_file", predictions);
  if (!predictions.empty()) {
    cfg.predictions_file = resolve(base_dir, predictions);
    if (complete && !fs::is_regular_file(*cfg.predictions_file)) {
      top.fail("predictions_file", "file not found: " + cfg.predictions_file->string());
    }
  }
  top.size("test_max_samples", cfg.test_max_samples);

  top.reject_unknown();
  if (!problems.empty()) throw ConfigInvalid(std::move(problems));
  return cfg;
}

PipelineConfig validate_config(const fs::path& path, Validation level) {
  return config_from_json(load_config_json(path), path.parent_path(), level);
}

OrderedJson default_config_json() {
  PipelineConfig d;
  const FilterConfig& f = d.filters;
  OrderedJson j;
  j["repo_root"] = "";
  j["languages"] = {"c_cpp", "java"};
  j["exclude_globs"] = OrderedJson::array();
  j["max_file_bytes"] = d.max_file_bytes;
  j["filters"] = {{"min_scope_bytes", f.min_scope_bytes},
                  {"max_scope_bytes", f.max_scope_bytes},
                  {"min_prefix_bytes", f.min_prefix_bytes},
                  {"max_prefix_bytes", f.max_prefix_bytes},
                  {"max_depth", nullptr},
                  {"categories", nullptr},
                  {"exclude_keywords", OrderedJson::array()},
                  {"modified_after", nullptr}};
  j["logging_patterns"] = d.logging_patterns;
  j["random_starts"] = d.random_starts;
  j["seed"] = d.seed;
  j["eot_token"] = d.eot_token;
  j["include_closer"] = d.include_closer;
  j["holdout"] = OrderedJson::array();
  j["holdout_file"] = nullptr;
  j["embedder"] = d.embedder;
  j["rag"] = {{"n_neighbors", d.rag.n_neighbors}, {"budget_bytes", d.rag.budget_bytes}};
  j["endpoints"] = {{"embed", ""}, {"generate", ""}};
  j["generation"] = {{"max_new_tokens", d.generation.max_new_tokens},
                     {"temperature", d.generation.temperature},
                     {"timeout_ms", d.generation.timeout_ms},
                     {"max_in_flight", d.generation.max_in_flight},
                     {"retries", d.generation.retries}};
  j["metrics"] = {{"bytes", d.metrics.bytes}, {"normalize_ws", d.metrics.normalize_ws}};
  j["output_dir"] = d.output_dir.string();
  j["predictions_file"] = nullptr;
  j["test_max_samples"] = d.test_max_samples;
  return j;
}

void set_dotted(Json& doc, std::string_view dotted_key, std::string_view value_text) {
  Json value;
  try {
    value = Json::parse(value_text);
  } catch (const Json::parse_error&) {
    value = std::string(value_text);
  }
  Json* node = &doc;
  auto parts = split(dotted_key, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& child = (*node)[parts[i]];
    if (child.is_null()) child = Json::object();
    if (!child.is_object()) {
      throw std::invalid_argument("cannot set " + std::string(dotted_key) + ": " + parts[i] +
                                  " is not an object");
    }
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

}  // namespace scopecomp
