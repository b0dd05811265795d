#include "support.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "httplib.h"

namespace testsupport {

using scopecomp::DelimiterSpan;
using scopecomp::Language;

fs::path fixture_dir() { return SCOPECOMP_FIXTURE_DIR; }
fs::path corpus_dir() { return fixture_dir() / "corpus"; }
fs::path cli_path() { return SCOPECOMP_CLI_PATH; }

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("scopecomp-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void copy_tree(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

// ---------------------------------------------------------------------------
// Edit distance

std::size_t oracle_levenshtein(std::u32string_view a, std::u32string_view b) {
  // lev(i, j) = distance between the suffixes a[i..] and b[j..].
  std::vector<std::vector<std::size_t>> memo(a.size() + 1,
                                             std::vector<std::size_t>(b.size() + 1, SIZE_MAX));
  std::function<std::size_t(std::size_t, std::size_t)> lev = [&](std::size_t i, std::size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    std::size_t& m = memo[i][j];
    if (m != SIZE_MAX) return m;
    if (a[i] == b[j]) {
      m = lev(i + 1, j + 1);
    } else {
      m = 1 + std::min({lev(i + 1, j), lev(i, j + 1), lev(i + 1, j + 1)});
    }
    return m;
  };
  return lev(0, 0);
}

std::size_t oracle_opt(std::u32string_view prediction, std::u32string_view truth) {
  std::size_t best = SIZE_MAX;
  for (std::size_t len = 0; len <= prediction.size(); ++len) {
    best = std::min(best, oracle_levenshtein(prediction.substr(0, len), truth));
  }
  return best;
}

std::u32string random_string(std::mt19937_64& rng, std::size_t max_len, char32_t alphabet) {
  std::uniform_int_distribution<std::size_t> len_dist(0, max_len);
  std::uniform_int_distribution<std::uint32_t> ch(0, alphabet - 1);
  std::u32string s(len_dist(rng), U'a');
  for (auto& c : s) c = U'a' + ch(rng);
  return s;
}

// ---------------------------------------------------------------------------
// Nearest neighbours

std::vector<std::string> oracle_knn(const std::vector<RefEntry>& entries,
                                    const std::vector<float>& query, std::size_t n) {
  struct Scored {
    long double sim;
    std::string id;
  };
  auto norm = [](const std::vector<float>& v) {
    long double s = 0;
    for (float x : v) s += static_cast<long double>(x) * x;
    return std::sqrt(s);
  };
  const long double qn = norm(query);
  std::vector<Scored> scored;
  for (const auto& e : entries) {
    long double kn = norm(e.key);
    long double dot = 0;
    for (std::size_t d = 0; d < query.size(); ++d) dot += static_cast<long double>(query[d]) * e.key[d];
    long double sim = (qn == 0 || kn == 0) ? 0 : dot / (qn * kn);
    scored.push_back({sim, e.id});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, scored.size()); ++i) out.push_back(scored[i].id);
  return out;
}

// ---------------------------------------------------------------------------
// Scopes

namespace {

bool ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// A quote inside a numeric token such as 1'000 is a digit separator.
bool in_numeric_token(std::string_view s, std::size_t quote) {
  std::size_t b = quote;
  while (b > 0 && (ident(s[b - 1]) || s[b - 1] == '\'' || s[b - 1] == '.')) --b;
  return b < quote && std::isdigit(static_cast<unsigned char>(s[b])) && quote + 1 < s.size() &&
         std::isxdigit(static_cast<unsigned char>(s[quote + 1]));
}

}  // namespace

RefScan reference_scan(std::string_view s, Language lang) {
  RefScan out;
  out.code.assign(s.size(), false);
  const bool c_family = lang == Language::kCCpp;
  std::vector<std::size_t> braces, parens;
  bool line_has_code = false;

  std::size_t i = 0;
  auto skip_line = [&](bool continuation) {
    while (i < s.size() && s[i] != '\n') {
      if (continuation && s[i] == '\\' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
      ++i;
    }
  };
  while (i < s.size()) {
    char c = s[i];
    if (s.substr(i, 2) == "//") {
      skip_line(c_family);
      continue;
    }
    if (s.substr(i, 2) == "/*") {
      auto end = s.find("*/", i + 2);
      i = end == std::string_view::npos ? s.size() : end + 2;
      continue;
    }
    if (c_family && c == '#' && !line_has_code) {
      skip_line(true);
      continue;
    }
    if (c == '"') {
      if (lang == Language::kJava && s.substr(i, 3) == "\"\"\"") {
        auto end = s.find("\"\"\"", i + 3);
        i = end == std::string_view::npos ? s.size() : end + 3;
        continue;
      }
      ++i;
      while (i < s.size() && s[i] != '"' && s[i] != '\n') i += s[i] == '\\' ? 2 : 1;
      ++i;
      line_has_code = true;
      continue;
    }
    if (c == '\'' && !(c_family && in_numeric_token(s, i))) {
      ++i;
      while (i < s.size() && s[i] != '\'' && s[i] != '\n') i += s[i] == '\\' ? 2 : 1;
      ++i;
      line_has_code = true;
      continue;
    }

    out.code[i] = true;
    if (c == '\n') {
      line_has_code = false;
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      line_has_code = true;
    }
    if (c == '{') braces.push_back(i);
    if (c == '(') parens.push_back(i);
    if (c == '}' || c == ')') {
      auto& stack = c == '}' ? braces : parens;
      if (stack.empty()) {
        out.balanced = false;
      } else {
        out.spans.push_back({stack.back(), i, c == '}' ? '{' : '('});
        stack.pop_back();
      }
    }
    ++i;
  }
  if (!braces.empty() || !parens.empty()) out.balanced = false;
  std::sort(out.spans.begin(), out.spans.end(),
            [](const DelimiterSpan& a, const DelimiterSpan& b) { return a.open < b.open; });
  return out;
}

std::vector<Annotation> parse_annotations(const fs::path& root) {
  static const std::regex re(R"(@expect\s+([a-z_]+)\s+([{(])(?:\s+(\d+))?)");
  std::vector<Annotation> out;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    Language lang = scopecomp::detect_language(path.string());
    if (lang == Language::kOther) continue;
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RefScan ref = reference_scan(content, lang);
    std::size_t line_start = 0;
    std::size_t line_no = 1;
    while (line_start < content.size()) {
      std::size_t line_end = content.find('\n', line_start);
      if (line_end == std::string::npos) line_end = content.size();
      std::string line = content.substr(line_start, line_end - line_start);
      std::smatch m;
      if (std::regex_search(line, m, re)) {
        Annotation a;
        a.path = fs::relative(path, root).generic_string();
        a.line = line_no;
        a.expected = scopecomp::parse_category(m[1].str());
        a.delimiter = m[2].str()[0];
        std::size_t nth = m[3].matched ? std::stoul(m[3].str()) : 1;
        std::size_t seen = 0;
        bool found = false;
        for (std::size_t k = line_start; k < line_end; ++k) {
          if (ref.code[k] && content[k] == a.delimiter && ++seen == nth) {
            a.open = k;
            found = true;
            break;
          }
        }
        if (!found) {
          throw std::runtime_error("annotation names no opener: " + a.path + ":" +
                                   std::to_string(line_no));
        }
        out.push_back(a);
      }
      line_start = line_end + 1;
      ++line_no;
    }
  }
  return out;
}

std::vector<std::string> check_span_soundness(std::string_view content,
                                              const std::vector<DelimiterSpan>& spans) {
  std::vector<std::string> problems;
  auto where = [](const DelimiterSpan& s) {
    return "[" + std::to_string(s.open) + "," + std::to_string(s.close) + "]";
  };
  for (const auto& s : spans) {
    char closer = s.delimiter == '{' ? '}' : ')';
    if (s.open >= s.close || s.close >= content.size()) {
      problems.push_back("out of range " + where(s));
      continue;
    }
    if (content[s.open] != s.delimiter || content[s.close] != closer) {
      problems.push_back("delimiter bytes do not match " + where(s));
    }
  }
  // Laminar per class: sorted by open, a stack of enclosing closes must
  // contain each next span entirely or end before it.
  for (char cls : {'{', '('}) {
    std::vector<DelimiterSpan> v;
    for (const auto& s : spans) {
      if (s.delimiter == cls) v.push_back(s);
    }
    std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.open < b.open; });
    std::vector<std::size_t> stack;
    for (const auto& s : v) {
      while (!stack.empty() && stack.back() < s.open) stack.pop_back();
      if (!stack.empty() && s.close > stack.back()) {
        problems.push_back(std::string("crossing spans of class ") + cls + " at " + where(s));
      }
      stack.push_back(s.close);
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Pairs

std::vector<std::string> check_pair_bounds(const scopecomp::CompletionPair& p,
                                           std::string_view content,
                                           const scopecomp::FilterConfig& cfg) {
  std::vector<std::string> v;
  auto bad = [&](std::string msg) { v.push_back(p.pair_id + ": " + msg); };
  std::string_view label = p.label;
  if (label.size() < p.eot_token.size() ||
      label.substr(label.size() - p.eot_token.size()) != p.eot_token) {
    bad("label does not end with the eot token");
    return v;
  }
  label.remove_suffix(p.eot_token.size());
  if (label.size() < p.closer.size() || label.substr(label.size() - p.closer.size()) != p.closer) {
    bad("label does not end with its closer");
    return v;
  }
  const std::size_t scope_size = p.start_shift_bytes + label.size() - p.closer.size();
  if (scope_size < cfg.min_scope_bytes) bad("scope of " + std::to_string(scope_size) + " bytes is below the minimum");
  if (scope_size > cfg.max_scope_bytes) bad("scope of " + std::to_string(scope_size) + " bytes is above the maximum");
  if (p.scope_start_byte < cfg.min_prefix_bytes) bad("available prefix below the minimum");
  if (p.query.size() > cfg.max_prefix_bytes) bad("query longer than the maximum prefix");
  if (p.query.size() < std::min(cfg.min_prefix_bytes, p.scope_start_byte)) bad("query shorter than the minimum prefix");
  if (p.kind == scopecomp::PairKind::kPrimary && p.start_shift_bytes != 0) bad("primary pair with a shift");
  if (p.kind == scopecomp::PairKind::kRandomStart &&
      (p.start_shift_bytes == 0 || p.start_shift_bytes >= scope_size)) {
    bad("random-start shift outside the scope");
  }
  // Cross-check against the source: opener before, closer after the scope.
  const std::size_t end = p.scope_start_byte + scope_size;
  if (p.scope_start_byte == 0 || end + p.closer.size() > content.size()) {
    bad("scope outside its source file");
  } else {
    char opener = content[p.scope_start_byte - 1];
    if (opener != '{' && opener != '(') bad("scope does not follow an opening delimiter");
    if (!p.closer.empty() && content.substr(end, p.closer.size()) != p.closer) {
      bad("closer does not follow the scope");
    }
  }
  return v;
}

bool check_contiguity(const scopecomp::CompletionPair& p, std::string_view content) {
  std::string_view label = p.label;
  if (label.size() < p.eot_token.size()) return false;
  label.remove_suffix(p.eot_token.size());
  const std::size_t cut = p.scope_start_byte + p.start_shift_bytes;
  if (p.query.size() > cut) return false;
  const std::size_t begin = cut - p.query.size();
  if (begin + p.query.size() + label.size() > content.size()) return false;
  return content.substr(begin, p.query.size()) == p.query &&
         content.substr(cut, label.size()) == label;
}

void write_synthetic_repo(const fs::path& root, std::uint64_t seed, std::size_t n_files) {
  std::mt19937_64 rng(seed);
  auto word = [&](std::size_t len) {
    std::uniform_int_distribution<int> ch('a', 'z');
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w += static_cast<char>(ch(rng));
    return w;
  };
  std::uniform_int_distribution<int> num(1, 9999);
  for (std::size_t f = 0; f < n_files; ++f) {
    std::ostringstream src;
    src << "/*";
    for (int k = 0; k < 40; ++k) src << ' ' << word(6);
    src << " */\n\n#include <stdio.h>\n\n";
    for (int fn = 0; fn < 4; ++fn) {
      std::string a = word(10), b = word(10), name = word(12);
      src << "int " << name << "(int " << a << ")\n{\n"
          << "    int " << b << " = " << a << " * " << num(rng) << ";\n"
          << "    if (" << b << " > " << num(rng) << ") {\n"
          << "        " << b << " = " << word(9) << "(" << b << ", " << num(rng) << ");\n"
          << "    }\n"
          << "    return " << b << " + " << num(rng) << ";\n}\n\n";
    }
    write_text(root / ("gen_" + std::to_string(f) + ".c"), src.str());
  }
}

// ---------------------------------------------------------------------------
// Stub services

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<std::size_t> generate_calls{0};
  std::atomic<std::size_t> embed_calls{0};
};

StubServer::StubServer(GenerateFn generate, EmbedFn embed, std::size_t embed_dim)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Post("/generate", [this, generate](const httplib::Request& req,
                                                   httplib::Response& res) {
    ++impl_->generate_calls;
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json reply = {{"text", generate(body.at("prompt").get<std::string>())},
                            {"stop_reason", "end_of_stream"}};
    res.set_content(reply.dump(), "application/json");
  });
  impl_->server.Post("/embed", [this, embed, embed_dim](const httplib::Request& req,
                                                        httplib::Response& res) {
    ++impl_->embed_calls;
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (const auto& t : body.at("texts")) vectors.push_back(embed(t.get<std::string>()));
    res.set_content(nlohmann::json{{"vectors", vectors}, {"dim", embed_dim}}.dump(),
                    "application/json");
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("stub server could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubServer::url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }
std::size_t StubServer::generate_calls() const { return impl_->generate_calls; }
std::size_t StubServer::embed_calls() const { return impl_->embed_calls; }

StubServer::GenerateFn truth_plus_junk(std::vector<std::pair<std::string, std::string>> query_truth,
                                       std::string junk) {
  // Longest query first so a query that is a suffix of another loses.
  std::sort(query_truth.begin(), query_truth.end(),
            [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  return [query_truth = std::move(query_truth), junk = std::move(junk)](const std::string& prompt) {
    for (const auto& [query, truth] : query_truth) {
      if (prompt.size() >= query.size() &&
          prompt.compare(prompt.size() - query.size(), query.size(), query) == 0) {
        return truth + junk;
      }
    }
    return junk;
  };
}

StubServer::GenerateFn truth_plus_junk_from(fs::path tests_jsonl, std::string junk) {
  struct State {
    std::mutex mu;
    StubServer::GenerateFn fn;
  };
  auto state = std::make_shared<State>();
  return [state, tests_jsonl = std::move(tests_jsonl), junk = std::move(junk)](
             const std::string& prompt) {
    std::lock_guard lock(state->mu);
    if (!state->fn) {
      std::vector<std::pair<std::string, std::string>> qt;
      std::ifstream in(tests_jsonl);
      for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        qt.emplace_back(j.at("prompt").get<std::string>(), j.at("ground_truth").get<std::string>());
      }
      state->fn = truth_plus_junk(std::move(qt), junk);
    }
    return state->fn(prompt);
  };
}

int run_cli(const std::vector<std::string>& args, const fs::path& capture_dir,
            const std::string& stdin_text) {
  auto quote = [](const std::string& s) {
    std::string q = "'";
    for (char c : s) {
      if (c == '\'') {
        q += "'\\''";
      } else {
        q += c;
      }
    }
    return q + "'";
  };
  std::string cmd = quote(cli_path().string());
  for (const auto& a : args) cmd += " " + quote(a);
  if (!capture_dir.empty()) {
    fs::create_directories(capture_dir);
    if (!stdin_text.empty()) {
      write_text(capture_dir / "stdin.txt", stdin_text);
      cmd += " < " + quote((capture_dir / "stdin.txt").string());
    }
    cmd += " > " + quote((capture_dir / "stdout.txt").string());
    cmd += " 2> " + quote((capture_dir / "stderr.txt").string());
  }
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

}  // namespace testsupport
