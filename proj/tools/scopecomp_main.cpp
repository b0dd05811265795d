// scopecomp: command-line entry point for every pipeline stage.

#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "scopecomp/config.hpp"
#include "scopecomp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace scopecomp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

PipelineConfig load_partial(const std::string& config_path) {
  if (config_path.empty()) return config_from_json(Json::object(), {}, Validation::kPartial);
  return validate_config(config_path, Validation::kPartial);
}

std::set<std::string> read_path_list(const fs::path& path) {
  std::set<std::string> out;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    if (!t.empty() && t[0] != '#') out.insert(t);
  }
  return out;
}

std::vector<CompletionPair> read_pairs(const fs::path& path) {
  std::vector<CompletionPair> pairs;
  for (const auto& j : read_jsonl(path)) pairs.push_back(pair_from_json(j));
  return pairs;
}

template <typename T>
void write_docs(const fs::path& path, const std::vector<T>& items) {
  std::vector<OrderedJson> lines;
  lines.reserve(items.size());
  for (const auto& it : items) lines.push_back(to_json(it));
  write_file(path, to_jsonl(lines));
}

struct Args {
  std::string config;

  // ingest
  std::string root;
  std::vector<std::string> langs;
  std::vector<std::string> excludes;
  std::string out;

  // scopes / pairs
  std::string manifest;
  std::vector<std::string> logging_patterns;
  std::string scopes;
  std::string holdout;
  std::optional<std::size_t> random_starts;
  std::optional<std::uint64_t> seed;

  // leak-scan / eval / predict
  std::string train;
  std::string tests;
  std::string report;
  std::string normalize;
  bool bytes = false;
  std::string endpoint;

  // index
  std::string pairs;
  std::string embedder;
  std::string index;
  bool stdin_query = false;
  std::string query;
  std::size_t top = 5;

  // run / sweep
  std::string mode = "rag_eval";
  std::vector<std::string> grid;
};

int cmd_ingest(const Args& a) {
  PipelineConfig cfg = load_partial(a.config);
  fs::path root = a.root.empty() ? cfg.repo_root : fs::path(a.root);
  if (root.empty()) throw ConfigInvalid("--root", "required (or repo_root in --config)");
  IngestOptions opts = cfg.ingest_options();
  if (!a.langs.empty()) {
    opts.languages.clear();
    for (const auto& l : a.langs) opts.languages.insert(parse_language(l));
  }
  opts.exclude_globs.insert(opts.exclude_globs.end(), a.excludes.begin(), a.excludes.end());
  auto manifest = ingest_repository(root, opts);
  write_manifest(manifest, a.out);
  for (const auto& w : manifest.warnings) std::cerr << "warning: " << w.path << ": " << w.message << "\n";
  std::cerr << "ingested " << manifest.files.size() << " files into " << a.out << "\n";
  return kExitOk;
}

int cmd_scopes(const Args& a) {
  PipelineConfig cfg = load_partial(a.config);
  auto patterns = a.logging_patterns.empty() ? cfg.logging_patterns : a.logging_patterns;
  LoggingMatcher logging(patterns);
  auto manifest = read_manifest(a.manifest);
  std::vector<ScopeCandidate> all;
  std::set<std::string> done;
  std::size_t n_diag = 0;
  for (const auto& f : manifest.files) {
    if (!done.insert(f.file_id).second) continue;
    auto r = extract_scopes(f, logging);
    for (const auto& d : r.diagnostics) {
      std::cerr << "diagnostic: " << f.path << ": " << d.code << ": " << d.message << "\n";
    }
    n_diag += r.diagnostics.size();
    all.insert(all.end(), r.candidates.begin(), r.candidates.end());
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return std::tie(x.file_id, x.start_byte) < std::tie(y.file_id, y.start_byte);
  });
  write_docs(a.out, all);
  std::cerr << "wrote " << all.size() << " scopes (" << n_diag << " diagnostics) to " << a.out << "\n";
  return kExitOk;
}

int cmd_pairs(const Args& a) {
  PipelineConfig cfg = load_partial(a.config);
  std::vector<ScopeCandidate> candidates;
  for (const auto& j : read_jsonl(a.scopes)) candidates.push_back(scope_from_json(j));
  auto manifest = read_manifest(a.manifest);
  SourceIndex sources(manifest.files);

  std::size_t k = a.random_starts.value_or(cfg.random_starts);
  std::uint64_t seed = a.seed.value_or(cfg.seed);
  auto filtered = apply_filters(candidates, cfg.filters, sources);
  auto batch = generate_pairs(filtered, sources, cfg.filters, cfg.pair_options(), k, seed);
  for (const auto& d : batch.diagnostics) std::cerr << "diagnostic: " << d << "\n";

  std::set<std::string> holdout = cfg.holdout_paths();
  if (!a.holdout.empty()) holdout.merge(read_path_list(a.holdout));
  auto split = exclude_holdout(batch.pairs, holdout, sources);
  for (const auto& p : split.unknown_paths) {
    std::cerr << "warning: holdout path matches no ingested file: " << p << "\n";
  }
  write_docs(a.out, split.kept);
  std::cerr << "wrote " << split.kept.size() << " pairs to " << a.out << " (" << split.removed.size()
            << " held out)\n";
  return kExitOk;
}

int cmd_leak_scan(const Args& a) {
  PipelineConfig cfg = load_partial(a.config);
  auto train = read_pairs(a.train);
  std::vector<TestLabel> tests;
  for (const auto& j : read_jsonl(a.tests)) {
    // Either eval-style {test_id, ground_truth} or pair-style {pair_id, label}.
    TestLabel t;
    t.id = j.contains("test_id") ? j.at("test_id").get<std::string>()
                                 : j.at("pair_id").get<std::string>();
    t.label = j.contains("ground_truth") ? j.at("ground_truth").get<std::string>()
                                         : j.at("label").get<std::string>();
    tests.push_back(std::move(t));
  }
  auto report = leakage_scan(train, tests, cfg.eot_token);
  write_file(a.out, to_json(report).dump(2) + "\n");
  std::cerr << report.findings.size() << " leakage finding(s) written to " << a.out << "\n";
  return kExitOk;
}

int cmd_index_build(const Args& a) {
  PipelineConfig cfg = load_partial(a.config);
  std::string spec = a.embedder.empty() ? cfg.embedder_spec() : a.embedder;
  auto embedder = make_embedder(spec);
  std::vector<CompletionPair> primary;
  for (auto& p : read_pairs(a.pairs)) {
    if (p.kind == PairKind::kPrimary) primary.push_back(std::move(p));
  }
  auto index = index_build(primary, *embedder);
  for (const auto& d : embedder->take_diagnostics()) std::cerr << "diagnostic: " << d << "\n";
  index.save(a.out);
  std::cerr << "indexed " << index.size() << " pairs (dim " << index.dimension() << ") into "
            << a.out << "\n";
  return kExitOk;
}

int cmd_index_query(const Args& a) {
  auto index = VectorIndex::load(a.index);
  std::string query = a.query;
  if (a.stdin_query) {
    query.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  if (query.empty()) throw ConfigInvalid("--stdin-query", "no query text given");
  auto embedder = embedder_for_index(index.embedder_id());
  auto hits = knn_search(index, embedder->embed(query), a.top);
  for (std::size_t r = 0; r < hits.size(); ++r) {
    OrderedJson j;
    j["rank"] = r + 1;
    j["pair_id"] = hits[r].pair_id;
    j["similarity"] = hits[r].similarity;
    j["value"] = *index.value_of(hits[r].pair_id);
    std::cout << j.dump() << "\n";
  }
  return kExitOk;
}

int cmd_predict(const Args& a) {
  PipelineConfig cfg = load_partial(a.config);
  std::string url = a.endpoint.empty() ? cfg.endpoints.generate : a.endpoint;
  if (url.empty()) throw ConfigInvalid("--endpoint", "required (or endpoints.generate)");
  InferenceClient client(url, cfg.client_options());
  auto docs = read_jsonl(a.tests);
  std::vector<BatchItem> items;
  for (const auto& j : docs) {
    items.push_back({j.at("test_id").get<std::string>(), j.at("prompt").get<std::string>()});
  }
  auto outcomes = batch_predict(client, items, cfg.generation_request());
  std::vector<OrderedJson> lines;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    OrderedJson j = to_json(outcomes[i]);
    // Carry eval fields through so the output feeds `eval` directly.
    for (const char* key : {"category", "ground_truth"}) {
      if (docs[i].contains(key)) j[key] = docs[i][key];
    }
    if (!outcomes[i].result) {
      ++failed;
      std::cerr << "error: " << outcomes[i].test_id << ": " << outcomes[i].error << "\n";
    }
    lines.push_back(std::move(j));
  }
  write_file(a.out, to_jsonl(lines));
  std::cerr << "wrote " << outcomes.size() << " predictions (" << failed << " failed) to " << a.out
            << "\n";
  return failed == outcomes.size() && !outcomes.empty() ? kExitFailure : kExitOk;
}

int cmd_eval(const Args& a) {
  PipelineConfig cfg = load_partial(a.config);
  MetricOptions opts = cfg.metrics;
  if (a.bytes) opts.bytes = true;
  if (!a.normalize.empty()) {
    if (a.normalize != "ws") throw ConfigInvalid("--normalize", "only 'ws' is supported");
    opts.normalize_ws = true;
  }
  std::vector<EvalInput> inputs;
  std::size_t skipped = 0;
  for (const auto& j : read_jsonl(a.tests)) {
    if (j.contains("error_kind")) {
      ++skipped;
      continue;
    }
    inputs.push_back(eval_input_from_json(j));
  }
  auto records = evaluate(inputs, opts);
  write_docs(a.out, records);
  auto rows = aggregate_report(records);
  if (!a.report.empty()) write_file(a.report, report_csv(rows));
  std::cout << report_csv(rows);
  if (skipped > 0) std::cerr << "skipped " << skipped << " failed prediction(s)\n";
  return kExitOk;
}

int cmd_run(const Args& a) {
  RunMode mode;
  try {
    mode = parse_run_mode(a.mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigInvalid("mode", e.what());
  }
  PipelineConfig cfg = validate_config(a.config);
  auto result = run_pipeline(cfg, mode);
  if (!result.report.empty()) std::cout << report_csv(result.report);
  std::cerr << "artifacts: " << (cfg.output_dir / kArtifactManifestFile).string() << "\n";
  return result.exit_status;
}

int cmd_sweep(const Args& a) {
  std::vector<SweepAxis> axes;
  for (const auto& g : a.grid) axes.push_back(parse_sweep_axis(g));
  fs::path cfg_path(a.config);
  auto points = run_sweep(load_config_json(cfg_path), cfg_path.parent_path(), axes);
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::cout << "point_" << i;
    for (const auto& [k, v] : points[i].settings) std::cout << " " << k << "=" << v;
    std::cout << " pairs=" << points[i].card["total_pairs"] << "\n";
  }
  return kExitOk;
}

int cmd_config(const Args& a) {
  if (a.config.empty()) {
    std::cout << default_config_json().dump(2) << "\n";
    return kExitOk;
  }
  validate_config(a.config);
  std::cout << a.config << ": ok\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-scope code-completion dataset, retrieval and evaluation toolkit"};
  app.require_subcommand(1);
  Args a;
  std::function<int()> action;

  auto with_config = [&](CLI::App* sub, bool required = false) {
    auto* opt = sub->add_option("--config", a.config, "JSON config file");
    if (required) opt->required()->check(CLI::ExistingFile);
    return sub;
  };

  auto* ingest = with_config(app.add_subcommand("ingest", "select and record source files"));
  ingest->add_option("--root", a.root, "repository root");
  ingest->add_option("--lang", a.langs, "languages, e.g. c_cpp,java")->delimiter(',');
  ingest->add_option("--exclude", a.excludes, "glob of repo-relative paths to skip");
  ingest->add_option("--out", a.out, "output directory")->required();
  ingest->callback([&] { action = [&] { return cmd_ingest(a); }; });

  auto* scopes = with_config(app.add_subcommand("scopes", "extract scope candidates"));
  scopes->add_option("--manifest", a.manifest, "ingest directory or manifest.jsonl")->required();
  scopes->add_option("--logging-pattern", a.logging_patterns, "regex for logging callees");
  scopes->add_option("--out", a.out, "scopes JSONL")->required();
  scopes->callback([&] { action = [&] { return cmd_scopes(a); }; });

  auto* pairs = with_config(app.add_subcommand("pairs", "filter scopes and emit completion pairs"));
  pairs->add_option("--scopes", a.scopes, "scopes JSONL")->required();
  pairs->add_option("--manifest", a.manifest, "ingest directory")->required();
  pairs->add_option("--holdout", a.holdout, "file of repo-relative paths to hold out");
  pairs->add_option("--random-starts", a.random_starts, "random-start pairs per scope");
  pairs->add_option("--seed", a.seed, "seed for random-start shifts");
  pairs->add_option("--out", a.out, "pairs JSONL")->required();
  pairs->callback([&] { action = [&] { return cmd_pairs(a); }; });

  auto* leak = with_config(app.add_subcommand("leak-scan", "find test labels inside training data"));
  leak->add_option("--train", a.train, "training pairs JSONL")->required();
  leak->add_option("--tests", a.tests, "test JSONL")->required();
  leak->add_option("--out", a.out, "report JSON")->required();
  leak->callback([&] { action = [&] { return cmd_leak_scan(a); }; });

  auto* index = with_config(app.add_subcommand("index", "build or query the retrieval index"));
  index->require_subcommand(1);
  auto* build = with_config(index->add_subcommand("build", "embed primary pairs"));
  build->add_option("--pairs", a.pairs, "pairs JSONL")->required();
  build->add_option("--embedder", a.embedder, "builtin | remote:<url>");
  build->add_option("--out", a.out, "index file")->required();
  build->callback([&] { action = [&] { return cmd_index_build(a); }; });
  auto* query = with_config(index->add_subcommand("query", "nearest neighbours of a query"));
  query->add_option("--index", a.index, "index file")->required();
  query->add_flag("--stdin-query", a.stdin_query, "read the query text from stdin");
  query->add_option("--query", a.query, "query text");
  query->add_option("--top", a.top, "neighbours to return")->check(CLI::PositiveNumber);
  query->callback([&] { action = [&] { return cmd_index_query(a); }; });

  auto* predict = with_config(app.add_subcommand("predict", "query a generation endpoint"));
  predict->add_option("--endpoint", a.endpoint, "generation service base URL");
  predict->add_option("--tests", a.tests, "JSONL of {test_id, prompt}")->required();
  predict->add_option("--out", a.out, "predictions JSONL")->required();
  predict->callback([&] { action = [&] { return cmd_predict(a); }; });

  auto* eval = with_config(app.add_subcommand("eval", "score predictions"));
  eval->add_option("--tests", a.tests, "JSONL of {test_id, category, prediction, ground_truth}")
      ->required();
  eval->add_option("--out", a.out, "records JSONL")->required();
  eval->add_option("--report", a.report, "CSV report");
  eval->add_option("--normalize", a.normalize, "'ws' collapses whitespace before scoring");
  eval->add_flag("--bytes", a.bytes, "count bytes instead of characters");
  eval->callback([&] { action = [&] { return cmd_eval(a); }; });

  auto* run = with_config(app.add_subcommand("run", "run the pipeline end to end"), true);
  run->add_option("--mode", a.mode, "rag_eval | ft_export | eval_only");
  run->callback([&] { action = [&] { return cmd_run(a); }; });

  auto* sweep = with_config(app.add_subcommand("sweep", "grid over config values"), true);
  sweep->add_option("--grid", a.grid, "key=v1,v2 (repeatable)")->required();
  sweep->callback([&] { action = [&] { return cmd_sweep(a); }; });

  auto* config = with_config(app.add_subcommand("config", "print defaults or validate a config"));
  config->callback([&] { action = [&] { return cmd_config(a); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return action();
  } catch (const ConfigInvalid& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StageError& e) {
    std::cerr << "stage " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
