#include "scopecomp/pipeline.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace scopecomp {

namespace fs = std::filesystem;

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kRagEval:
      return "rag_eval";
    case RunMode::kFtExport:
      return "ft_export";
    case RunMode::kEvalOnly:
      break;
  }
  return "eval_only";
}

RunMode parse_run_mode(std::string_view name) {
  std::string n = to_lower(trim(name));
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "rag_eval") return RunMode::kRagEval;
  if (n == "ft_export") return RunMode::kFtExport;
  if (n == "eval_only") return RunMode::kEvalOnly;
  throw std::invalid_argument("unknown run mode: " + std::string(name));
}

OrderedJson to_json(const ArtifactManifest& m) {
  OrderedJson j;
  j["mode"] = m.mode;
  j["status"] = m.complete ? "complete" : "incomplete";
  j["stages"] = OrderedJson::array();
  auto refs = [](const std::vector<ArtifactRef>& v) {
    OrderedJson a = OrderedJson::array();
    for (const auto& r : v) a.push_back({{"path", r.path}, {"sha256", r.sha256}});
    return a;
  };
  for (const auto& s : m.stages) {
    OrderedJson sj;
    sj["name"] = s.name;
    sj["status"] = s.complete ? "complete" : "incomplete";
    sj["inputs"] = refs(s.inputs);
    sj["outputs"] = refs(s.outputs);
    if (!s.error.empty()) sj["error"] = s.error;
    j["stages"].push_back(std::move(sj));
  }
  return j;
}

ArtifactManifest artifact_manifest_from_json(const Json& j) {
  ArtifactManifest m;
  m.mode = j.at("mode").get<std::string>();
  m.complete = j.at("status") == "complete";
  auto refs = [](const Json& a) {
    std::vector<ArtifactRef> v;
    for (const auto& r : a) v.push_back({r.at("path"), r.at("sha256")});
    return v;
  };
  for (const auto& sj : j.at("stages")) {
    StageRecord s;
    s.name = sj.at("name");
    s.complete = sj.at("status") == "complete";
    s.inputs = refs(sj.at("inputs"));
    s.outputs = refs(sj.at("outputs"));
    s.error = sj.value("error", "");
    m.stages.push_back(std::move(s));
  }
  return m;
}

OrderedJson dataset_card(const std::vector<CompletionPair>& pairs, const PipelineConfig& cfg,
                         std::size_t holdout_removed) {
  std::map<ScopeCategory, std::pair<std::size_t, std::size_t>> per_cat;
  for (auto c : kAllCategories) per_cat[c] = {0, 0};
  std::size_t primary = 0;
  std::size_t query_bytes = 0;
  std::size_t label_bytes = 0;
  std::set<std::string> files;
  for (const auto& p : pairs) {
    auto& [prim, rand] = per_cat[p.category];
    if (p.kind == PairKind::kPrimary) {
      ++prim;
      ++primary;
    } else {
      ++rand;
    }
    query_bytes += p.query.size();
    label_bytes += p.label.size();
    files.insert(p.file_id);
  }

  OrderedJson card;
  card["total_pairs"] = pairs.size();
  card["by_kind"] = {{"primary", primary}, {"random_start", pairs.size() - primary}};
  OrderedJson by_cat;
  for (const auto& [cat, counts] : per_cat) {
    by_cat[std::string(to_string(cat))] = {{"primary", counts.first},
                                           {"random_start", counts.second},
                                           {"total", counts.first + counts.second}};
  }
  card["by_category"] = std::move(by_cat);
  card["source_files"] = files.size();
  card["holdout_removed_pairs"] = holdout_removed;
  card["mean_query_bytes"] = pairs.empty() ? 0.0 : double(query_bytes) / double(pairs.size());
  card["mean_label_bytes"] = pairs.empty() ? 0.0 : double(label_bytes) / double(pairs.size());
  card["filters"] = {{"min_scope_bytes", cfg.filters.min_scope_bytes},
                     {"max_scope_bytes", cfg.filters.max_scope_bytes},
                     {"min_prefix_bytes", cfg.filters.min_prefix_bytes},
                     {"max_prefix_bytes", cfg.filters.max_prefix_bytes}};
  if (cfg.filters.max_depth) card["filters"]["max_depth"] = *cfg.filters.max_depth;
  card["random_starts"] = cfg.random_starts;
  card["seed"] = cfg.seed;
  card["eot_token"] = cfg.eot_token;
  return card;
}

namespace {

/// Runs named stages, keeping artifacts.json current after each one.
class StageRunner {
 public:
  StageRunner(fs::path out_dir, RunMode mode) : out_dir_(std::move(out_dir)) {
    manifest_.mode = std::string(to_string(mode));
  }

  void run(const std::string& name, const std::function<void(StageRecord&)>& body) {
    manifest_.stages.push_back({name, {}, {}, false, {}});
    try {
      body(manifest_.stages.back());
      manifest_.stages.back().complete = true;
      flush();
    } catch (const ConfigInvalid&) {
      manifest_.stages.back().error = "invalid configuration";
      flush();
      throw;
    } catch (const std::exception& e) {
      manifest_.stages.back().error = e.what();
      flush();
      throw StageError(name, e.what());
    }
  }

  /// Records a file, hashing its current bytes.
  ArtifactRef ref(const fs::path& path) const {
    std::string shown = path.string();
    auto rel = path.lexically_relative(out_dir_);
    if (!rel.empty() && *rel.begin() != "..") shown = rel.generic_string();
    return {shown, sha256_file(path)};
  }

  void finish() {
    manifest_.complete = true;
    flush();
  }

  const ArtifactManifest& manifest() const { return manifest_; }
  const fs::path& out_dir() const { return out_dir_; }

 private:
  void flush() const {
    write_file(out_dir_ / kArtifactManifestFile, to_json(manifest_).dump(2) + "\n");
  }

  fs::path out_dir_;
  ArtifactManifest manifest_;
};

struct Corpus {
  IngestManifest manifest;
  SourceIndex sources;
  std::vector<ScopeCandidate> candidates;
  std::vector<CompletionPair> train;
  std::vector<CompletionPair> held_out;
  std::size_t holdout_removed = 0;
};

void ingest_stage(StageRunner& runner, const PipelineConfig& cfg, Corpus& c) {
  runner.run("ingest", [&](StageRecord& rec) {
    c.manifest = ingest_repository(cfg.repo_root, cfg.ingest_options());
    // The repository is a directory; its digest is that of the file listing
    // with content hashes.
    rec.inputs.push_back({cfg.repo_root.string(), sha256_hex(manifest_jsonl(c.manifest))});
    fs::path dir = runner.out_dir() / "ingest";
    write_manifest(c.manifest, dir);
    rec.outputs.push_back(runner.ref(dir / kManifestFile));
    rec.outputs.push_back(runner.ref(dir / kManifestMetaFile));
    c.sources = SourceIndex(c.manifest.files);
  });
}

void scopes_stage(StageRunner& runner, const PipelineConfig& cfg, Corpus& c) {
  runner.run("scopes", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(runner.out_dir() / "ingest" / kManifestFile));
    LoggingMatcher logging(cfg.logging_patterns);
    std::set<std::string> done;  // identical contents share a file_id
    std::vector<OrderedJson> lines;
    for (const auto& f : c.manifest.files) {
      if (!done.insert(f.file_id).second) continue;
      auto result = extract_scopes(f, logging);
      for (auto& cand : result.candidates) c.candidates.push_back(std::move(cand));
    }
    std::sort(c.candidates.begin(), c.candidates.end(), [](const auto& a, const auto& b) {
      return std::tie(a.file_id, a.start_byte) < std::tie(b.file_id, b.start_byte);
    });
    for (const auto& cand : c.candidates) lines.push_back(to_json(cand));
    fs::path out = runner.out_dir() / "scopes.jsonl";
    write_file(out, to_jsonl(lines));
    rec.outputs.push_back(runner.ref(out));
  });
}

void pairs_stage(StageRunner& runner, const PipelineConfig& cfg, Corpus& c) {
  runner.run("pairs", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(runner.out_dir() / "scopes.jsonl"));
    if (cfg.holdout_file) rec.inputs.push_back(runner.ref(*cfg.holdout_file));
    auto filtered = apply_filters(c.candidates, cfg.filters, c.sources);
    auto batch = generate_pairs(filtered, c.sources, cfg.filters, cfg.pair_options(),
                                cfg.random_starts, cfg.seed);
    auto split = exclude_holdout(batch.pairs, cfg.holdout_paths(), c.sources);
    c.train = std::move(split.kept);
    c.held_out = std::move(split.removed);
    c.holdout_removed = c.held_out.size();

    std::vector<OrderedJson> lines;
    lines.reserve(c.train.size());
    for (const auto& p : c.train) lines.push_back(to_json(p));
    fs::path out = runner.out_dir() / "train.jsonl";
    write_file(out, to_jsonl(lines));
    rec.outputs.push_back(runner.ref(out));

    OrderedJson card = dataset_card(c.train, cfg, c.holdout_removed);
    card["holdout_unknown_paths"] = split.unknown_paths;
    fs::path card_path = runner.out_dir() / "dataset_card.json";
    write_file(card_path, card.dump(2) + "\n");
    rec.outputs.push_back(runner.ref(card_path));
  });
}

struct TestCase {
  std::string test_id;
  std::string category;
  std::string query;
  std::string ground_truth;
  std::string prompt;
};

std::vector<EvalRecord> eval_stage(StageRunner& runner, const PipelineConfig& cfg,
                                   const fs::path& predictions, std::vector<CategoryReport>& report) {
  std::vector<EvalRecord> records;
  runner.run("eval", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(predictions));
    std::vector<EvalInput> inputs;
    std::size_t failed = 0;
    for (const auto& j : read_jsonl(predictions)) {
      if (j.contains("error_kind")) {
        ++failed;
        continue;
      }
      inputs.push_back(eval_input_from_json(j));
    }
    if (inputs.empty()) {
      throw std::runtime_error(failed > 0 ? "every prediction failed" : "no predictions to score");
    }
    records = evaluate(inputs, cfg.metrics);
    report = aggregate_report(records);

    std::vector<OrderedJson> lines;
    for (const auto& r : records) lines.push_back(to_json(r));
    fs::path rec_path = runner.out_dir() / "records.jsonl";
    write_file(rec_path, to_jsonl(lines));
    rec.outputs.push_back(runner.ref(rec_path));
    fs::path csv = runner.out_dir() / "report.csv";
    write_file(csv, report_csv(report));
    rec.outputs.push_back(runner.ref(csv));
  });
  return records;
}

void rag_eval(StageRunner& runner, const PipelineConfig& cfg, Corpus& c,
              std::vector<CategoryReport>& report) {
  std::vector<CompletionPair> index_pairs;
  std::vector<TestCase> tests;
  runner.run("split", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(runner.out_dir() / "train.jsonl"));
    for (const auto& p : c.train) {
      if (p.kind == PairKind::kPrimary) index_pairs.push_back(p);
    }
    for (const auto& p : c.held_out) {
      if (p.kind != PairKind::kPrimary) continue;
      if (cfg.test_max_samples != 0 && tests.size() == cfg.test_max_samples) break;
      tests.push_back({p.pair_id, std::string(to_string(p.category)), p.query,
                       std::string(p.label_without_eot()), {}});
    }
    if (tests.empty()) throw std::runtime_error("no held-out test scopes; check holdout paths");
    if (index_pairs.empty()) throw std::runtime_error("no training pairs to index");
  });

  auto embedder = make_embedder(cfg.embedder_spec());
  VectorIndex index;
  runner.run("index", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(runner.out_dir() / "train.jsonl"));
    index = index_build(index_pairs, *embedder);
    fs::path out = runner.out_dir() / "index.bin";
    index.save(out);
    rec.outputs.push_back(runner.ref(out));
  });

  fs::path tests_path = runner.out_dir() / "tests.jsonl";
  runner.run("augment", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(runner.out_dir() / "index.bin"));
    std::vector<std::string> queries;
    for (const auto& t : tests) queries.push_back(t.query);
    auto keys = embedder->embed_batch(queries);
    std::vector<OrderedJson> lines;
    for (std::size_t i = 0; i < tests.size(); ++i) {
      auto hits = knn_search(index, keys[i], cfg.rag.n_neighbors);
      auto aug = augment_query(tests[i].query, hits, index, cfg.rag.n_neighbors,
                               cfg.rag.budget_bytes);
      tests[i].prompt = std::move(aug.prompt);
      OrderedJson j;
      j["test_id"] = tests[i].test_id;
      j["category"] = tests[i].category;
      j["prompt"] = tests[i].prompt;
      j["ground_truth"] = tests[i].ground_truth;
      j["neighbors"] = OrderedJson::array();
      for (std::size_t r = 0; r < aug.neighbors_used; ++r) {
        j["neighbors"].push_back({{"pair_id", hits[r].pair_id}, {"similarity", hits[r].similarity}});
      }
      if (!aug.diagnostics.empty()) j["diagnostics"] = aug.diagnostics;
      lines.push_back(std::move(j));
    }
    write_file(tests_path, to_jsonl(lines));
    rec.outputs.push_back(runner.ref(tests_path));
  });

  fs::path predictions = runner.out_dir() / "predictions.jsonl";
  runner.run("predict", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(tests_path));
    InferenceClient client(cfg.endpoints.generate, cfg.client_options());
    std::vector<BatchItem> items;
    for (const auto& t : tests) items.push_back({t.test_id, t.prompt});
    auto outcomes = batch_predict(client, items, cfg.generation_request());
    std::vector<OrderedJson> lines;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      OrderedJson j = to_json(outcomes[i]);
      j["category"] = tests[i].category;
      j["ground_truth"] = tests[i].ground_truth;
      lines.push_back(std::move(j));
    }
    write_file(predictions, to_jsonl(lines));
    rec.outputs.push_back(runner.ref(predictions));
  });

  eval_stage(runner, cfg, predictions, report);

  runner.run("leak-scan", [&](StageRecord& rec) {
    rec.inputs.push_back(runner.ref(runner.out_dir() / "train.jsonl"));
    rec.inputs.push_back(runner.ref(tests_path));
    std::vector<TestLabel> labels;
    for (const auto& t : tests) labels.push_back({t.test_id, t.ground_truth});
    auto leaks = leakage_scan(c.train, labels, cfg.eot_token);
    fs::path out = runner.out_dir() / "leakage.json";
    write_file(out, to_json(leaks).dump(2) + "\n");
    rec.outputs.push_back(runner.ref(out));
  });
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg, RunMode mode) {
  std::vector<FieldDiagnostic> problems;
  if (mode == RunMode::kRagEval && cfg.endpoints.generate.empty()) {
    problems.push_back({"endpoints.generate", "required for rag_eval"});
  }
  if (mode == RunMode::kEvalOnly && !cfg.predictions_file) {
    problems.push_back({"predictions_file", "required for eval_only"});
  }
  if (!problems.empty()) throw ConfigInvalid(std::move(problems));

  fs::create_directories(cfg.output_dir);
  StageRunner runner(cfg.output_dir, mode);
  RunResult result;

  if (mode == RunMode::kEvalOnly) {
    eval_stage(runner, cfg, *cfg.predictions_file, result.report);
  } else {
    Corpus corpus;
    ingest_stage(runner, cfg, corpus);
    scopes_stage(runner, cfg, corpus);
    pairs_stage(runner, cfg, corpus);
    if (mode == RunMode::kRagEval) rag_eval(runner, cfg, corpus, result.report);
  }

  runner.finish();
  result.manifest = runner.manifest();
  return result;
}

SweepAxis parse_sweep_axis(std::string_view text) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size()) {
    throw std::invalid_argument("sweep axis must look like key=v1,v2: " + std::string(text));
  }
  SweepAxis axis{trim(text.substr(0, eq)), {}};
  for (auto& v : split(text.substr(eq + 1), ',')) axis.values.push_back(trim(v));
  return axis;
}

std::vector<SweepPoint> run_sweep(const Json& base_config, const fs::path& base_dir,
                                  const std::vector<SweepAxis>& axes) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();

  PipelineConfig base = config_from_json(base_config, base_dir);
  fs::path sweep_dir = base.output_dir / "sweep";
  std::vector<SweepPoint> points;
  std::vector<OrderedJson> summary;
  for (std::size_t i = 0; i < total; ++i) {
    Json doc = base_config;
    SweepPoint point;
    std::size_t rest = i;
    // Last axis varies fastest.
    std::vector<std::size_t> pick(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      pick[a] = rest % axes[a].values.size();
      rest /= axes[a].values.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      set_dotted(doc, axes[a].key, axes[a].values[pick[a]]);
      point.settings.emplace_back(axes[a].key, axes[a].values[pick[a]]);
    }
    point.output_dir = sweep_dir / ("point_" + std::to_string(i));
    doc["output_dir"] = point.output_dir.string();
    PipelineConfig cfg = config_from_json(doc, base_dir);
    run_pipeline(cfg, RunMode::kFtExport);
    point.card = OrderedJson::parse(read_file(point.output_dir / "dataset_card.json"));

    OrderedJson line;
    line["point"] = i;
    OrderedJson settings;
    for (const auto& [k, v] : point.settings) settings[k] = v;
    line["settings"] = std::move(settings);
    line["output_dir"] = point.output_dir.string();
    line["total_pairs"] = point.card["total_pairs"];
    line["by_kind"] = point.card["by_kind"];
    summary.push_back(std::move(line));
    points.push_back(std::move(point));
  }
  write_file(sweep_dir / "summary.jsonl", to_jsonl(summary));
  return points;
}

}  // namespace scopecomp
