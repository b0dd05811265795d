#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scopecomp/util.hpp"

namespace scopecomp {

/// "http://host:port/prefix" split into what httplib::Client wants.
struct Endpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path_prefix;       // "" or "/prefix" without trailing slash

  static Endpoint parse(std::string_view url);
  std::string path(std::string_view route) const { return path_prefix + std::string(route); }
};

/// Environment variable holding a bearer token sent with every request.
inline constexpr const char* kAuthTokenEnv = "SCOPECOMP_API_TOKEN";

class ClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EndpointUnavailable : public ClientError {
 public:
  using ClientError::ClientError;
};
class RequestTimeout : public ClientError {
 public:
  using ClientError::ClientError;
};
class MalformedResponse : public ClientError {
 public:
  using ClientError::ClientError;
};

struct GenerationRequest {
  std::string prompt;
  std::size_t max_new_tokens = 256;
  std::vector<std::string> stop_sequences{"<|endoftext|>"};
  double temperature = 0.0;
  std::chrono::milliseconds timeout{120'000};

  std::vector<std::string> violations() const;
};

enum class StopReason { kStopSequence, kMaxTokens, kEndOfStream };
std::string_view to_string(StopReason r);

struct GenerationResult {
  std::string text;
  std::chrono::duration<double, std::milli> latency{0};
  StopReason stop_reason = StopReason::kEndOfStream;
};

struct ClientOptions {
  std::size_t retries = 2;  // extra attempts after a transport error or 5xx
  std::chrono::milliseconds retry_backoff{200};
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds connect_timeout{5'000};
  std::optional<std::string> bearer_token;  // defaults to $SCOPECOMP_API_TOKEN
};

/// Client for a generation endpoint speaking
///   POST /generate {"prompt","max_new_tokens","stop","temperature"}
///     -> {"text","stop_reason"}
/// Shareable across threads; each call opens its own connection.
class InferenceClient {
 public:
  explicit InferenceClient(std::string url, ClientOptions opts = {});

  /// Throws EndpointUnavailable, RequestTimeout or MalformedResponse.
  GenerationResult complete(const GenerationRequest& req) const;

  const std::string& url() const { return url_; }
  const ClientOptions& options() const { return opts_; }

 private:
  std::string url_;
  Endpoint endpoint_;
  ClientOptions opts_;
};

/// Cuts `text` at the earliest stop sequence. Returns true when it cut.
bool truncate_at_stop(std::string& text, const std::vector<std::string>& stops);

struct BatchItem {
  std::string test_id;
  std::string prompt;
};

struct BatchOutcome {
  std::string test_id;
  std::optional<GenerationResult> result;
  std::string error_kind;  // "", "endpoint_unavailable", "timeout", "malformed_response"
  std::string error;
};

/// One outcome per input, in input order; at most opts.max_in_flight
/// requests run concurrently. Failures never abort the batch.
std::vector<BatchOutcome> batch_predict(const InferenceClient& client,
                                        const std::vector<BatchItem>& tests,
                                        const GenerationRequest& request_template);

OrderedJson to_json(const BatchOutcome& o);

/// POSTs JSON and returns the parsed body. Retries transport errors and 5xx
/// per `opts`; shared by the generation and embedding clients.
Json post_json(const Endpoint& endpoint, std::string_view route, const Json& body,
               std::chrono::milliseconds timeout, const ClientOptions& opts);

}  // namespace scopecomp
