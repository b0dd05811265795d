#include "scopecomp/client.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include "httplib.h"

namespace scopecomp {

Endpoint Endpoint::parse(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw std::invalid_argument("endpoint URL needs a scheme: " + std::string(url));
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw std::invalid_argument("unsupported URL scheme: " + std::string(url));
  }
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    std::string_view prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.remove_suffix(1);
    e.path_prefix = std::string(prefix);
  }
  return e;
}

std::vector<std::string> GenerationRequest::violations() const {
  std::vector<std::string> out;
  if (max_new_tokens < 1) out.push_back("max_new_tokens must be >= 1");
  if (temperature < 0) out.push_back("temperature must be >= 0");
  if (timeout.count() <= 0) out.push_back("timeout must be positive");
  return out;
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kStopSequence:
      return "stop_sequence";
    case StopReason::kMaxTokens:
      return "max_tokens";
    case StopReason::kEndOfStream:
      break;
  }
  return "end_of_stream";
}

namespace {

StopReason parse_stop_reason(std::string_view s) {
  if (s == "stop_sequence" || s == "stop") return StopReason::kStopSequence;
  if (s == "max_tokens" || s == "length") return StopReason::kMaxTokens;
  return StopReason::kEndOfStream;
}

std::optional<std::string> env_token() {
  const char* v = std::getenv(kAuthTokenEnv);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace

Json post_json(const Endpoint& endpoint, std::string_view route, const Json& body,
               std::chrono::milliseconds timeout, const ClientOptions& opts) {
  using Clock = std::chrono::steady_clock;
  const std::string payload = body.dump();
  const std::string path = endpoint.path(route);
  httplib::Headers headers;
  auto token = opts.bearer_token ? opts.bearer_token : env_token();
  if (token) headers.emplace("Authorization", "Bearer " + *token);

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= opts.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(opts.retry_backoff * attempt);

    httplib::Client cli(endpoint.scheme_host_port);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(opts.connect_timeout));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    auto started = Clock::now();
    auto res = cli.Post(path, headers, payload, "application/json");
    auto elapsed = Clock::now() - started;

    if (!res) {
      if (res.error() == httplib::Error::Read && elapsed >= timeout * 9 / 10) {
        throw RequestTimeout("request to " + endpoint.scheme_host_port + path + " timed out after " +
                             std::to_string(timeout.count()) + " ms");
      }
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw EndpointUnavailable(endpoint.scheme_host_port + path + " returned HTTP " +
                                std::to_string(res->status));
    }
    try {
      return Json::parse(res->body);
    } catch (const Json::parse_error& e) {
      throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
  }
  throw EndpointUnavailable(endpoint.scheme_host_port + path + " unavailable after " +
                            std::to_string(opts.retries + 1) + " attempt(s): " + last_error);
}

bool truncate_at_stop(std::string& text, const std::vector<std::string>& stops) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stops) {
    if (s.empty()) continue;
    cut = std::min(cut, text.find(s));
  }
  if (cut == std::string::npos) return false;
  text.resize(cut);
  return true;
}

InferenceClient::InferenceClient(std::string url, ClientOptions opts)
    : url_(std::move(url)), endpoint_(Endpoint::parse(url_)), opts_(std::move(opts)) {
  if (opts_.max_in_flight == 0) opts_.max_in_flight = 1;
}

GenerationResult InferenceClient::complete(const GenerationRequest& req) const {
  if (auto problems = req.violations(); !problems.empty()) {
    throw std::invalid_argument("invalid generation request: " + problems.front());
  }
  Json body = {{"prompt", req.prompt},
               {"max_new_tokens", req.max_new_tokens},
               {"stop", req.stop_sequences},
               {"temperature", req.temperature}};

  auto started = std::chrono::steady_clock::now();
  Json reply = post_json(endpoint_, "/generate", body, req.timeout, opts_);
  GenerationResult result;
  result.latency = std::chrono::steady_clock::now() - started;

  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
    throw MalformedResponse("generate response lacks a string 'text' field");
  }
  result.text = reply["text"].get<std::string>();
  result.stop_reason = parse_stop_reason(reply.value("stop_reason", "end_of_stream"));
  if (truncate_at_stop(result.text, req.stop_sequences)) {
    result.stop_reason = StopReason::kStopSequence;
  }
  return result;
}

std::vector<BatchOutcome> batch_predict(const InferenceClient& client,
                                        const std::vector<BatchItem>& tests,
                                        const GenerationRequest& request_template) {
  std::vector<BatchOutcome> out(tests.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < tests.size(); i = next++) {
      BatchOutcome& o = out[i];
      o.test_id = tests[i].test_id;
      GenerationRequest req = request_template;
      req.prompt = tests[i].prompt;
      try {
        o.result = client.complete(req);
      } catch (const RequestTimeout& e) {
        o.error_kind = "timeout";
        o.error = e.what();
      } catch (const MalformedResponse& e) {
        o.error_kind = "malformed_response";
        o.error = e.what();
      } catch (const std::exception& e) {
        o.error_kind = "endpoint_unavailable";
        o.error = e.what();
      }
    }
  };

  std::size_t n_threads = std::min(client.options().max_in_flight, tests.size());
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

OrderedJson to_json(const BatchOutcome& o) {
  OrderedJson j;
  j["test_id"] = o.test_id;
  if (o.result) {
    j["prediction"] = o.result->text;
    j["stop_reason"] = to_string(o.result->stop_reason);
    j["latency_ms"] = o.result->latency.count();
  } else {
    j["error_kind"] = o.error_kind;
    j["error"] = o.error;
  }
  return j;
}

}  // namespace scopecomp
