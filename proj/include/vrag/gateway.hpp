#pragma once

// Chat-completion client for the policy, teacher, and judge models, plus a
// deterministic scripted/rule-based responder for tests and dry runs.
//
// Wire format (HTTP POST, JSON):
//   request  {"model", "messages": [{"role", "content": [{"type": "text", "text"} |
//            {"type": "image_url", "image_url": {"url"}}]}], "temperature",
//            "max_tokens", "logprobs", "top_logprobs"?}
//   response {"choices": [{"message": {"content"}, "logprobs": {"content": [
//            {"token", "logprob", "top_logprobs": [{"token", "logprob"}]}]}}],
//            "usage": {"prompt_tokens", "completion_tokens"}}

#include "vrag/common.hpp"
#include "vrag/prompt.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace vrag::gateway {

using prompt::Role;

struct TextPart {
  std::string text;
  bool operator==(const TextPart&) const = default;
};

/// A local path or URL; an inline payload, when present, is sent as a data URL.
struct ImagePart {
  std::string ref;
  std::optional<std::string> base64;
  std::string mime_type = "image/jpeg";
  bool operator==(const ImagePart&) const = default;
};

using Part = std::variant<TextPart, ImagePart>;

struct ChatMessage {
  Role role = Role::User;
  std::vector<Part> parts;

  static ChatMessage text(Role role, std::string text);
  void validate() const;  // >= 1 part, text parts non-empty
};

/// Rendered prompt messages as chat messages; the image, if given, is attached
/// to the last user message.
std::vector<ChatMessage> to_chat(const std::vector<prompt::Message>& messages,
                                 const std::optional<std::string>& image_ref = std::nullopt);

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  bool want_logprobs = false;
  int top_logprobs = 5;
  std::string request_id;

  void validate() const;  // throws InvalidArgument
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
  std::vector<std::pair<std::string, double>> top;  // alternatives, incl. the token
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  Usage usage;
  double latency_ms = 0.0;
  int attempts = 0;  // 0 when served from the cache
};

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_base_ms = 200.0;
  double backoff_multiplier = 2.0;
  double max_backoff_ms = 10'000.0;
  bool jitter = true;
};

struct GatewayConfig {
  std::string endpoint_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model_id = "default";
  std::string auth_token_env_var;  // empty: no Authorization header
  int timeout_ms = 60'000;
  RetryPolicy retry;
  int max_inflight = 4;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::filesystem::path> cache_dir;

  void validate() const;  // throws InvalidArgument
};

GatewayConfig gateway_config_from_json(const nlohmann::json& j, GatewayConfig defaults = {});
nlohmann::json to_json(const GatewayConfig& config);

/// Request body as sent on the wire.
nlohmann::json wire_request(const ChatRequest& request);

/// Digest of the wire body (model, messages, decoding parameters); request_id
/// is not part of it.
std::string fingerprint(const ChatRequest& request);
std::string fingerprint_wire(const nlohmann::json& wire_body);

/// Throws MalformedPayload.
ChatResponse parse_wire_response(std::string_view body);
nlohmann::json wire_response(const ChatResponse& response);

struct HttpReply {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// One POST. Throws Error(Transport) for connection failures and timeouts.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& path, const std::string& body, const Headers& headers,
                         int timeout_ms) = 0;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string endpoint_url);
  HttpReply post(const std::string& path, const std::string& body, const Headers& headers,
                 int timeout_ms) override;

 private:
  std::string endpoint_url_;
};

/// Result slot of a batch call: exactly one of the two is set.
struct BatchOutcome {
  std::optional<ChatResponse> response;
  std::optional<Error> error;

  bool ok() const { return response.has_value(); }
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  /// Output order equals input order; failures are reported per position.
  virtual std::vector<BatchOutcome> complete_batch(const std::vector<ChatRequest>& requests);
};

/// Counting semaphore with an observable high-water mark.
class InflightLimiter {
 public:
  explicit InflightLimiter(int limit);
  void acquire();
  void release();
  int limit() const noexcept { return limit_; }
  int peak() const;

 private:
  int limit_;
  int current_ = 0;
  int peak_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

/// Delays before attempts 2..max_attempts: base * multiplier^(n-1), capped,
/// with jitter drawn from [0.5, 1] of the nominal value and then clamped so
/// the sequence never decreases.
std::vector<double> backoff_schedule(const RetryPolicy& policy, std::mt19937_64& rng);

class Gateway final : public ChatClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper = {},
          std::uint64_t jitter_seed = 0);

  /// Retries timeouts, connection failures, 429 and 5xx; other 4xx fail at
  /// once. Throws Transport, Remote, MalformedPayload, InvalidArgument.
  ChatResponse complete(const ChatRequest& request) override;
  std::vector<BatchOutcome> complete_batch(const std::vector<ChatRequest>& requests) override;

  const GatewayConfig& config() const noexcept { return config_; }
  int peak_inflight() const { return limiter_.peak(); }

  /// A request with the configured model and decoding defaults.
  ChatRequest make_request(std::vector<ChatMessage> messages, bool want_logprobs = false) const;

 private:
  std::optional<ChatResponse> cache_lookup(const std::string& fp) const;
  void cache_store(const std::string& fp, const ChatResponse& response) const;

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  Headers headers_;
  InflightLimiter limiter_;
  std::mt19937_64 jitter_rng_;
  std::mutex rng_mu_;
  mutable std::atomic<std::uint64_t> next_request_id_{0};
};

/// Scripted or rule-based stand-in for a model endpoint.
struct MockOptions {
  std::map<std::string, std::string> script;  // fingerprint -> completion text
  bool strict = false;                         // unscripted requests fail
  bool rules = true;                           // generate replies when unscripted
  std::uint64_t seed = 0;
  /// Artificial latency per call (call index, fingerprint), for ordering and
  /// concurrency tests.
  std::function<int(std::size_t, const std::string&)> delay_ms;
};

class MockResponder final : public Transport {
 public:
  explicit MockResponder(MockOptions options = {});

  /// Throws UnscriptedRequest (strict mode, unknown fingerprint).
  HttpReply post(const std::string& path, const std::string& body, const Headers& headers,
                 int timeout_ms) override;

  /// The completion for a decoded request; a pure function of (seed, body).
  std::string reply_text(const nlohmann::json& wire_body) const;

  std::size_t calls() const noexcept { return calls_.load(); }
  int peak_inflight() const noexcept { return peak_.load(); }

 private:
  MockOptions options_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<int> inflight_{0};
  std::atomic<int> peak_{0};
};

/// Rule-mode generators, exposed so tests can build expected outputs.
namespace rules {
/// Label named by a `Ground_Truth_Label: X` line, if any.
MaybeLabel ground_truth_in(std::string_view prompt);
/// Majority of `("Real:` / `("Fake:` evidence lines; nullopt when none or tied.
MaybeLabel evidence_majority(std::string_view prompt);
std::pair<int, int> evidence_counts(std::string_view prompt);  // (real, fake)
}  // namespace rules

}  // namespace vrag::gateway
