#include "scopecomp/scopes.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace scopecomp {

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

bool is_ident_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_' || c == '$' || u >= 0x80;
}

// Words that can precede '(' without making it a call or a parameter list.
const std::unordered_set<std::string_view>& non_callee_keywords() {
  static const std::unordered_set<std::string_view> words = {
      "if",        "else",       "for",       "while",     "do",        "switch",
      "case",      "default",    "return",    "sizeof",    "alignof",   "decltype",
      "typeid",    "catch",      "try",       "throw",     "new",       "delete",
      "synchronized", "static_assert", "noexcept", "co_return", "co_await", "co_yield",
      "defined",   "alignas",    "__attribute__", "__declspec", "requires", "operator",
      "int",       "char",       "void",      "bool",      "float",     "double",
      "long",      "short",      "unsigned",  "signed",    "auto",      "const",
      "volatile",  "static",     "extern",    "inline",    "virtual",   "explicit",
      "public",    "private",    "protected", "final",     "abstract",  "template",
      "typename",  "class",      "struct",    "union",     "enum",      "namespace",
      "interface", "using",      "typedef",   "constexpr", "consteval", "constinit",
      "mutable",   "override",   "register",  "goto",      "break",     "continue",
      "instanceof", "assert",    "boolean",   "byte",      "import",    "package",
      "extends",   "implements", "throws",    "native",    "transient", "strictfp",
  };
  return words;
}

const std::unordered_set<std::string_view>& container_keywords() {
  static const std::unordered_set<std::string_view> words = {
      "namespace", "class", "struct", "union", "enum", "interface", "extern", "record",
  };
  return words;
}

// Words that may sit between a parameter list and a function body opener.
bool is_disqualifying_before_body(std::string_view w) {
  return w != "const" && w != "volatile" && w != "override" && w != "final" && w != "noexcept" &&
         w != "mutable" && w != "throws" && w != "throw" && w != "constexpr" && w != "auto" &&
         w != "int" && w != "void" && w != "bool" && w != "char" && w != "long" && w != "double" &&
         w != "float" && w != "short" && w != "unsigned" && w != "signed" &&
         non_callee_keywords().contains(w);
}

// Identifiers before a callee that still leave it in call position.
bool is_expression_keyword(std::string_view w) {
  return w == "return" || w == "new" || w == "throw" || w == "case" || w == "else" || w == "do" ||
         w == "co_return" || w == "co_await" || w == "co_yield" || w == "delete" || w == "and" ||
         w == "or" || w == "not" || w == "assert";
}

}  // namespace

std::string_view to_string(ScopeCategory cat) {
  switch (cat) {
    case ScopeCategory::kElseBody:
      return "else_body";
    case ScopeCategory::kForBody:
      return "for_body";
    case ScopeCategory::kFuncBody:
      return "func_body";
    case ScopeCategory::kIfBody:
      return "if_body";
    case ScopeCategory::kLogging:
      return "logging";
    case ScopeCategory::kFuncCall:
      return "func_call";
    case ScopeCategory::kUnclassified:
      break;
  }
  return "unclassified";
}

ScopeCategory parse_category(std::string_view name) {
  auto lower = to_lower(trim(name));
  for (auto cat : kAllCategories) {
    if (to_string(cat) == lower) return cat;
  }
  throw std::invalid_argument("unknown scope category: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Lexer

ScanResult scan_delimiters(std::string_view s, Language lang) {
  ScanResult out;
  const std::size_t n = s.size();
  out.modes.assign(n, LexMode::kCode);

  const bool c_family = lang == Language::kCCpp;
  std::vector<std::size_t> brace_stack;
  std::vector<std::size_t> paren_stack;
  std::vector<std::size_t> raw_string_suspects;
  std::vector<std::size_t> unterminated;

  LexMode mode = LexMode::kCode;
  LexMode resume = LexMode::kCode;  // mode to return to after a comment/literal
  bool line_start = true;
  bool in_number = false;
  bool text_block = false;  // Java """ ... """

  auto next = [&](std::size_t i) { return i + 1 < n ? s[i + 1] : '\0'; };

  std::size_t i = 0;
  while (i < n) {
    const char c = s[i];
    switch (mode) {
      case LexMode::kCode:
      case LexMode::kPreprocessor: {
        const bool pre = mode == LexMode::kPreprocessor;
        if (c == '/' && next(i) == '/') {
          out.modes[i] = out.modes[i + 1] = LexMode::kLineComment;
          mode = LexMode::kLineComment;
          i += 2;
          continue;
        }
        if (c == '/' && next(i) == '*') {
          out.modes[i] = out.modes[i + 1] = LexMode::kBlockComment;
          resume = mode;
          mode = LexMode::kBlockComment;
          i += 2;
          continue;
        }
        if (c == '"') {
          if (c_family && i > 0 && s[i - 1] == 'R') {
            std::size_t b = i - 1;
            while (b > 0 && is_ident_char(s[b - 1])) --b;
            auto prefix = s.substr(b, i - b);
            if (prefix == "R" || prefix == "u8R" || prefix == "uR" || prefix == "UR" ||
                prefix == "LR") {
              raw_string_suspects.push_back(i);
            }
          }
          resume = mode;
          mode = LexMode::kStringLit;
          text_block = lang == Language::kJava && next(i) == '"' && i + 2 < n && s[i + 2] == '"';
          std::size_t width = text_block ? 3 : 1;
          for (std::size_t k = 0; k < width; ++k) out.modes[i + k] = LexMode::kStringLit;
          i += width;
          in_number = false;
          line_start = false;
          continue;
        }
        if (c == '\'' && !pre) {
          if (in_number && std::isxdigit(static_cast<unsigned char>(next(i)))) {
            out.modes[i] = mode;  // C++14 digit separator
            ++i;
            continue;
          }
          resume = mode;
          mode = LexMode::kCharLit;
          out.modes[i] = LexMode::kCharLit;
          ++i;
          in_number = false;
          line_start = false;
          continue;
        }
        if (pre) {
          out.modes[i] = LexMode::kPreprocessor;
          if (c == '\\' && (next(i) == '\n' || (next(i) == '\r' && i + 2 < n && s[i + 2] == '\n'))) {
            std::size_t width = next(i) == '\n' ? 2 : 3;
            for (std::size_t k = 0; k < width; ++k) out.modes[i + k] = LexMode::kPreprocessor;
            i += width;
            continue;
          }
          if (c == '\n') {
            out.modes[i] = LexMode::kCode;
            mode = LexMode::kCode;
            line_start = true;
          }
          ++i;
          continue;
        }
        if (c == '#' && c_family && line_start) {
          out.modes[i] = LexMode::kPreprocessor;
          mode = LexMode::kPreprocessor;
          line_start = false;
          in_number = false;
          ++i;
          continue;
        }

        if (c == '\n') {
          line_start = true;
        } else if (c != ' ' && c != '\t' && c != '\r' && c != '\f' && c != '\v') {
          line_start = false;
        }

        if (in_number) {
          in_number = is_ident_char(c) || c == '.';
        } else if (std::isdigit(static_cast<unsigned char>(c)) &&
                   (i == 0 || !is_ident_char(s[i - 1]))) {
          in_number = true;
        }

        switch (c) {
          case '{':
            brace_stack.push_back(i);
            break;
          case '(':
            paren_stack.push_back(i);
            break;
          case '}':
            if (brace_stack.empty()) {
              out.orphan_closers.push_back(i);
            } else {
              out.spans.push_back({brace_stack.back(), i, '{'});
              brace_stack.pop_back();
            }
            break;
          case ')':
            if (paren_stack.empty()) {
              out.orphan_closers.push_back(i);
            } else {
              out.spans.push_back({paren_stack.back(), i, '('});
              paren_stack.pop_back();
            }
            break;
          default:
            break;
        }
        ++i;
        continue;
      }

      case LexMode::kLineComment:
        out.modes[i] = LexMode::kLineComment;
        if (c == '\\' && c_family && next(i) == '\n') {
          out.modes[i + 1] = LexMode::kLineComment;
          i += 2;
          continue;
        }
        if (c == '\n') {
          out.modes[i] = LexMode::kCode;
          mode = LexMode::kCode;
          line_start = true;
          in_number = false;
        }
        ++i;
        continue;

      case LexMode::kBlockComment:
        out.modes[i] = LexMode::kBlockComment;
        if (c == '*' && next(i) == '/') {
          out.modes[i + 1] = LexMode::kBlockComment;
          mode = resume;
          i += 2;
          continue;
        }
        ++i;
        continue;

      case LexMode::kStringLit:
      case LexMode::kCharLit: {
        const char quote = mode == LexMode::kStringLit ? '"' : '\'';
        out.modes[i] = mode;
        if (c == '\\' && i + 1 < n) {
          out.modes[i + 1] = mode;
          i += 2;
          continue;
        }
        if (text_block && mode == LexMode::kStringLit) {
          if (c == '"' && next(i) == '"' && i + 2 < n && s[i + 2] == '"') {
            out.modes[i + 1] = out.modes[i + 2] = mode;
            text_block = false;
            mode = resume;
            i += 3;
            continue;
          }
          ++i;
          continue;
        }
        if (c == quote) {
          mode = resume;
          ++i;
          continue;
        }
        if (c == '\n') {
          // Unterminated literal; recover at end of line.
          unterminated.push_back(i);
          out.modes[i] = LexMode::kCode;
          mode = resume == LexMode::kPreprocessor ? LexMode::kCode : resume;
          line_start = true;
        }
        ++i;
        continue;
      }
    }
  }

  if (mode == LexMode::kBlockComment) {
    out.diagnostics.push_back({"unterminated_comment", "block comment runs to end of file", {}});
  }
  if (mode == LexMode::kStringLit || mode == LexMode::kCharLit || !unterminated.empty()) {
    out.diagnostics.push_back(
        {"unterminated_literal", "string or char literal not closed on its line", unterminated});
  }
  if (!raw_string_suspects.empty()) {
    out.diagnostics.push_back({"suspected_raw_string",
                               "raw string literal lexed as an ordinary string",
                               raw_string_suspects});
  }

  out.orphan_openers = brace_stack;
  out.orphan_openers.insert(out.orphan_openers.end(), paren_stack.begin(), paren_stack.end());
  std::sort(out.orphan_openers.begin(), out.orphan_openers.end());
  std::sort(out.orphan_closers.begin(), out.orphan_closers.end());
  if (!out.orphan_openers.empty() || !out.orphan_closers.empty()) {
    std::vector<std::size_t> all = out.orphan_openers;
    all.insert(all.end(), out.orphan_closers.begin(), out.orphan_closers.end());
    std::sort(all.begin(), all.end());
    out.diagnostics.push_back({"unbalanced_delimiters",
                               std::to_string(out.orphan_openers.size()) + " unmatched opener(s), " +
                                   std::to_string(out.orphan_closers.size()) +
                                   " unmatched closer(s)",
                               std::move(all)});
  }

  std::sort(out.spans.begin(), out.spans.end(),
            [](const DelimiterSpan& a, const DelimiterSpan& b) { return a.open < b.open; });
  return out;
}

// ---------------------------------------------------------------------------
// Logging patterns

LoggingMatcher::LoggingMatcher() : LoggingMatcher({std::string(kDefaultLoggingPattern)}) {}

LoggingMatcher::LoggingMatcher(std::vector<std::string> patterns) : patterns_(std::move(patterns)) {
  for (const auto& p : patterns_) {
    std::string body = p;
    auto flags = std::regex::ECMAScript;
    if (body.rfind("(?i)", 0) == 0) {
      body = body.substr(4);
      flags |= std::regex::icase;
    }
    try {
      compiled_.emplace_back(body, flags);
    } catch (const std::regex_error& e) {
      throw std::invalid_argument("invalid logging pattern '" + p + "': " + e.what());
    }
  }
}

bool LoggingMatcher::matches(std::string_view callee) const {
  return std::any_of(compiled_.begin(), compiled_.end(), [&](const std::regex& re) {
    return std::regex_search(callee.begin(), callee.end(), re);
  });
}

// ---------------------------------------------------------------------------
// Classifier

ScopeClassifier::ScopeClassifier(std::string_view content, Language lang, const ScanResult& scan,
                                 const LoggingMatcher& logging)
    : content_(content), lang_(lang), scan_(scan), logging_(logging) {
  const auto& spans = scan_.spans;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    close_to_open_[spans[i].close] = spans[i].open;
    open_to_index_[spans[i].open] = i;
  }

  // spans are sorted by open; a stack of open braces yields the innermost
  // enclosing brace of every span.
  enclosing_brace_.assign(spans.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    while (!stack.empty() && spans[stack.back()].close < spans[i].open) stack.pop_back();
    if (!stack.empty()) enclosing_brace_[i] = static_cast<std::ptrdiff_t>(stack.back());
    if (spans[i].delimiter == '{') stack.push_back(i);
  }

  categories_.assign(spans.size(), ScopeCategory::kUnclassified);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].delimiter != '{') continue;
    std::size_t params = npos;
    categories_[i] = classify_brace(i, &params);
    if (params != npos) param_lists_.insert(params);
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].delimiter == '(') categories_[i] = classify_paren(i);
  }
}

bool ScopeClassifier::has_token_before(std::size_t pos) const {
  while (pos > 0) {
    char c = content_[pos - 1];
    if (scan_.modes[pos - 1] == LexMode::kCode && !std::isspace(static_cast<unsigned char>(c))) {
      return true;
    }
    --pos;
  }
  return false;
}

// Caller must check has_token_before(pos) first.
ScopeClassifier::Token ScopeClassifier::token_before(std::size_t pos) const {
  auto is_code = [&](std::size_t k) { return scan_.modes[k] == LexMode::kCode; };
  while (pos > 0 &&
         (!is_code(pos - 1) || std::isspace(static_cast<unsigned char>(content_[pos - 1])))) {
    --pos;
  }
  Token t;
  t.end = pos;
  if (pos == 0) return t;
  if (is_ident_char(content_[pos - 1])) {
    std::size_t b = pos - 1;
    while (b > 0 && is_code(b - 1) && is_ident_char(content_[b - 1])) --b;
    t.begin = b;
    t.ident = !std::isdigit(static_cast<unsigned char>(content_[b]));
  } else if (pos >= 2 && is_code(pos - 2)) {
    auto two = content_.substr(pos - 2, 2);
    bool op = two == "::" || two == "->" || two == "&&" || two == "||" || two == "<<";
    t.begin = op ? pos - 2 : pos - 1;
  } else {
    t.begin = pos - 1;
  }
  t.text = content_.substr(t.begin, t.end - t.begin);
  return t;
}

std::size_t ScopeClassifier::matching_open(std::size_t close) const {
  auto it = close_to_open_.find(close);
  return it == close_to_open_.end() ? npos : it->second;
}

bool ScopeClassifier::is_callee_name(const Token& t) const {
  return t.ident && !non_callee_keywords().contains(t.text);
}

bool ScopeClassifier::is_container(std::size_t brace_index) const {
  const auto& span = scan_.spans[brace_index];
  if (!has_token_before(span.open)) return false;
  Token t = token_before(span.open);
  if (t.text == ")") {
    // Java anonymous class body: new Foo(...) { ... }
    std::size_t open = matching_open(t.begin);
    if (open == npos || !has_token_before(open)) return false;
    Token callee = token_before(open);
    if (callee.text == ">") {
      // new Foo<Bar>() {
      int angle = 0;
      std::size_t pos = callee.end;
      for (int guard = 0; guard < 32 && has_token_before(pos); ++guard) {
        Token u = token_before(pos);
        if (u.text == ">") ++angle;
        if (u.text == "<") --angle;
        pos = u.begin;
        if (angle == 0) break;
      }
      if (!has_token_before(pos)) return false;
      callee = token_before(pos);
    }
    if (!callee.ident) return false;
    std::size_t pos = callee.begin;
    while (has_token_before(pos)) {
      Token u = token_before(pos);
      if (u.text == "." && has_token_before(u.begin)) {
        pos = token_before(u.begin).begin;
        continue;
      }
      return u.text == "new";
    }
    return false;
  }
  std::size_t pos = span.open;
  for (int guard = 0; guard < 64 && has_token_before(pos); ++guard) {
    Token u = token_before(pos);
    if (u.text == ";" || u.text == "{" || u.text == "}") return false;
    if (u.ident && container_keywords().contains(u.text)) return true;
    pos = u.begin;
  }
  return false;
}

bool ScopeClassifier::param_list_callee_ok(std::size_t paren_open) const {
  if (!has_token_before(paren_open)) return false;
  Token t = token_before(paren_open);
  if (is_callee_name(t)) return true;
  // operator==( / operator()( / operator new(
  std::size_t pos = paren_open;
  for (int guard = 0; guard < 4 && has_token_before(pos); ++guard) {
    Token u = token_before(pos);
    if (u.text == "operator") return true;
    if (u.text == ")") {
      std::size_t open = matching_open(u.begin);
      if (open == npos) return false;
      pos = open;
      continue;
    }
    if (u.ident && u.text != "new" && u.text != "delete") return false;
    pos = u.begin;
  }
  return false;
}

std::size_t ScopeClassifier::function_param_list(std::size_t brace_index) const {
  auto parent = enclosing_brace_[brace_index];
  if (parent >= 0 && !is_container(static_cast<std::size_t>(parent))) return npos;

  std::size_t pos = scan_.spans[brace_index].open;
  for (int guard = 0; guard < 64 && has_token_before(pos); ++guard) {
    Token t = token_before(pos);
    if (t.text == ")") {
      std::size_t open = matching_open(t.begin);
      if (open == npos || !has_token_before(open)) return npos;
      Token before = token_before(open);
      if (before.text == "noexcept" || before.text == "throw" || before.text == "__attribute__" ||
          before.text == "__declspec" || before.text == "alignas" || before.text == "requires") {
        pos = before.begin;
        continue;
      }
      if (!param_list_callee_ok(open)) return npos;
      // Constructor initializer list: skip `, member(args)` / `: member(args)`.
      std::size_t chain = before.begin;
      while (has_token_before(chain)) {
        Token q = token_before(chain);
        if (q.text != "::" || !has_token_before(q.begin)) break;
        Token owner = token_before(q.begin);
        if (!owner.ident) break;
        chain = owner.begin;
      }
      if (has_token_before(chain)) {
        Token lead = token_before(chain);
        if (lead.text == "," || lead.text == ":") {
          pos = lead.begin;
          continue;
        }
      }
      return open;
    }
    if (t.ident) {
      if (is_disqualifying_before_body(t.text) || container_keywords().contains(t.text)) {
        return npos;
      }
      pos = t.begin;
      continue;
    }
    if (t.text == "::" || t.text == "->" || t.text == "," || t.text == "." || t.text == "<" ||
        t.text == ">" || t.text == "*" || t.text == "&" || t.text == "&&") {
      pos = t.begin;
      continue;
    }
    return npos;
  }
  return npos;
}

ScopeCategory ScopeClassifier::classify_brace(std::size_t i, std::size_t* params) const {
  const auto& span = scan_.spans[i];
  if (!has_token_before(span.open)) return ScopeCategory::kUnclassified;
  Token t = token_before(span.open);
  if (t.text == "else") return ScopeCategory::kElseBody;
  if (t.text == ")") {
    std::size_t open = matching_open(t.begin);
    if (open != npos && has_token_before(open)) {
      Token kw = token_before(open);
      if (kw.text == "constexpr" && has_token_before(kw.begin)) kw = token_before(kw.begin);
      if (kw.text == "if") return ScopeCategory::kIfBody;
      if (kw.text == "for") return ScopeCategory::kForBody;
      if (kw.ident && non_callee_keywords().contains(kw.text)) return ScopeCategory::kUnclassified;
    }
  }
  *params = function_param_list(i);
  if (*params != npos) return ScopeCategory::kFuncBody;
  return ScopeCategory::kUnclassified;
}

ScopeCategory ScopeClassifier::classify_paren(std::size_t i) const {
  const auto& span = scan_.spans[i];
  if (param_lists_.contains(span.open)) return ScopeCategory::kUnclassified;
  if (!has_token_before(span.open)) return ScopeCategory::kUnclassified;
  Token callee = token_before(span.open);
  if (callee.text == ">") {
    // Explicit template arguments: name<...>(
    int angle = 0;
    std::size_t pos = span.open;
    for (int steps = 0; steps < 64 && has_token_before(pos); ++steps) {
      Token t = token_before(pos);
      pos = t.begin;
      if (t.text == ">") ++angle;
      if (t.text == "<") --angle;
      if (t.text == ";" || t.text == "{" || t.text == "}" || t.text == "&&" || t.text == "||") break;
      if (angle == 0) {
        if (has_token_before(pos)) callee = token_before(pos);
        break;
      }
    }
  }
  if (!is_callee_name(callee)) return ScopeCategory::kUnclassified;

  // Extend over a qualified / member-access chain: a.b->c::d(
  std::size_t chain_begin = callee.begin;
  std::string name(callee.text);
  while (has_token_before(chain_begin)) {
    Token sep = token_before(chain_begin);
    if (sep.text != "." && sep.text != "->" && sep.text != "::") break;
    if (!has_token_before(sep.begin)) break;
    Token owner = token_before(sep.begin);
    name.insert(0, std::string(owner.text) + std::string(sep.text));
    chain_begin = owner.begin;
    if (!owner.ident) break;  // call().member( ends the chain
  }

  bool call = true;
  auto parent = enclosing_brace_[i];
  bool container_ctx = parent < 0 || is_container(static_cast<std::size_t>(parent));
  if (has_token_before(chain_begin)) {
    Token pre = token_before(chain_begin);
    if (pre.text == "@") {
      call = false;  // Java annotation
    } else if (pre.ident) {
      call = is_expression_keyword(pre.text);
    } else if (pre.text == ">" || pre.text == "~") {
      call = false;
    } else if (container_ctx) {
      call = pre.text != ";" && pre.text != "{" && pre.text != "}" && pre.text != "*" &&
             pre.text != "&" && pre.text != "&&" && pre.text != ")";
    }
  } else {
    call = !container_ctx;
  }
  if (!call) return ScopeCategory::kUnclassified;
  return logging_.matches(name) ? ScopeCategory::kLogging : ScopeCategory::kFuncCall;
}

ScopeCategory ScopeClassifier::classify(const DelimiterSpan& span) const {
  auto it = open_to_index_.find(span.open);
  if (it == open_to_index_.end() || !(scan_.spans[it->second] == span)) {
    return ScopeCategory::kUnclassified;
  }
  return categories_[it->second];
}

ScopeCategory classify_scope(const FileRecord& record, const ScanResult& scan,
                             const DelimiterSpan& span, const LoggingMatcher& logging) {
  ScopeClassifier classifier(record.content, record.language, scan, logging);
  return classifier.classify(span);
}

// ---------------------------------------------------------------------------
// Extraction

std::vector<std::size_t> nesting_depths(const std::vector<DelimiterSpan>& spans) {
  const std::size_t n = spans.size();
  std::vector<std::size_t> depth(n, 0);
  if (n == 0) return depth;

  std::vector<std::size_t> opens(n);
  for (std::size_t i = 0; i < n; ++i) opens[i] = spans[i].open;
  std::sort(opens.begin(), opens.end());

  // Max segment tree over compressed open offsets; value = depth + 1.
  std::size_t size = 1;
  while (size < n) size <<= 1;
  std::vector<std::size_t> tree(2 * size, 0);
  auto update = [&](std::size_t idx, std::size_t value) {
    idx += size;
    tree[idx] = std::max(tree[idx], value);
    for (idx >>= 1; idx > 0; idx >>= 1) tree[idx] = std::max(tree[2 * idx], tree[2 * idx + 1]);
  };
  auto query = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
    std::size_t best = 0;
    for (lo += size, hi += size; lo < hi; lo >>= 1, hi >>= 1) {
      if (lo & 1) best = std::max(best, tree[lo++]);
      if (hi & 1) best = std::max(best, tree[--hi]);
    }
    return best;
  };

  std::vector<std::size_t> by_close(n);
  for (std::size_t i = 0; i < n; ++i) by_close[i] = i;
  std::sort(by_close.begin(), by_close.end(),
            [&](std::size_t a, std::size_t b) { return spans[a].close < spans[b].close; });

  // Every span inserted so far closes before the current one, so any of them
  // opening inside (open, close) lies strictly inside it.
  for (std::size_t idx : by_close) {
    const auto& s = spans[idx];
    auto lo = static_cast<std::size_t>(std::upper_bound(opens.begin(), opens.end(), s.open) - opens.begin());
    auto hi = static_cast<std::size_t>(std::lower_bound(opens.begin(), opens.end(), s.close) - opens.begin());
    depth[idx] = lo < hi ? query(lo, hi) : 0;
    auto pos = static_cast<std::size_t>(std::lower_bound(opens.begin(), opens.end(), s.open) - opens.begin());
    update(pos, depth[idx] + 1);
  }
  return depth;
}

ExtractResult extract_scopes(const FileRecord& record, const LoggingMatcher& logging) {
  ExtractResult out;
  if (record.language == Language::kOther) {
    out.diagnostics.push_back({"unsupported_language", "no scope lexer for language 'other'", {}});
    return out;
  }
  ScanResult scan = scan_delimiters(record);
  ScopeClassifier classifier(record.content, record.language, scan, logging);
  auto depths = nesting_depths(scan.spans);

  out.candidates.reserve(scan.spans.size());
  for (std::size_t i = 0; i < scan.spans.size(); ++i) {
    const auto& span = scan.spans[i];
    ScopeCandidate c;
    c.file_id = record.file_id;
    c.category = classifier.category_at(i);
    c.start_byte = span.open + 1;
    c.end_byte = span.close;
    c.depth = depths[i];
    c.size_bytes = c.end_byte - c.start_byte;
    c.prefix_available_bytes = c.start_byte;
    out.candidates.push_back(std::move(c));
  }
  // spans are sorted by open, so candidates are already sorted by start_byte.
  out.diagnostics = std::move(scan.diagnostics);
  return out;
}

OrderedJson to_json(const ScopeCandidate& c) {
  OrderedJson j;
  j["file_id"] = c.file_id;
  j["category"] = to_string(c.category);
  j["start_byte"] = c.start_byte;
  j["end_byte"] = c.end_byte;
  j["depth"] = c.depth;
  j["size_bytes"] = c.size_bytes;
  j["prefix_available_bytes"] = c.prefix_available_bytes;
  return j;
}

ScopeCandidate scope_from_json(const Json& j) {
  ScopeCandidate c;
  c.file_id = j.at("file_id").get<std::string>();
  c.category = parse_category(j.at("category").get<std::string>());
  c.start_byte = j.at("start_byte").get<std::size_t>();
  c.end_byte = j.at("end_byte").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.size_bytes = j.value("size_bytes", c.end_byte - c.start_byte);
  c.prefix_available_bytes = j.value("prefix_available_bytes", c.start_byte);
  return c;
}

}  // namespace scopecomp
