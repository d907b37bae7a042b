#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "vrag/gateway.hpp"

#include "vrag/digest.hpp"
#include "vrag/jsonl.hpp"
#include "vrag/random.hpp"
#include "vrag/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace vrag::gateway {

using nlohmann::json;

ChatMessage ChatMessage::text(Role role, std::string text) {
  return {role, {TextPart{std::move(text)}}};
}

void ChatMessage::validate() const {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "chat message has no parts");
  for (const auto& part : parts) {
    if (const auto* t = std::get_if<TextPart>(&part); t && t->text.empty()) {
      throw Error(ErrorCode::InvalidArgument, "chat message has an empty text part");
    }
    if (const auto* img = std::get_if<ImagePart>(&part); img && img->ref.empty() && !img->base64) {
      throw Error(ErrorCode::InvalidArgument, "image part has neither a reference nor a payload");
    }
  }
}

std::vector<ChatMessage> to_chat(const std::vector<prompt::Message>& messages,
                                 const std::optional<std::string>& image_ref) {
  std::vector<ChatMessage> out;
  for (const auto& m : messages) out.push_back(ChatMessage::text(m.role, m.text));
  if (image_ref) {
    auto it = std::find_if(out.rbegin(), out.rend(),
                           [](const ChatMessage& m) { return m.role == Role::User; });
    if (it == out.rend()) {
      out.push_back({Role::User, {}});
      it = out.rbegin();
    }
    it->parts.push_back(ImagePart{*image_ref, std::nullopt, "image/jpeg"});
  }
  return out;
}

void ChatRequest::validate() const {
  if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "request has no model id");
  if (messages.empty()) throw Error(ErrorCode::InvalidArgument, "request has no messages");
  for (const auto& m : messages) m.validate();
  if (!std::isfinite(temperature) || temperature < 0) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be a non-negative number");
  }
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
  if (top_logprobs < 0) throw Error(ErrorCode::InvalidArgument, "top_logprobs must be >= 0");
}

void GatewayConfig::validate() const {
  if (endpoint_url.empty()) throw Error(ErrorCode::InvalidArgument, "endpoint_url is empty");
  if (path.empty() || path.front() != '/') {
    throw Error(ErrorCode::InvalidArgument, "path must start with '/'");
  }
  if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "model_id is empty");
  if (timeout_ms <= 0) throw Error(ErrorCode::InvalidArgument, "timeout_ms must be positive");
  if (retry.max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
  if (retry.backoff_base_ms < 0 || retry.max_backoff_ms < 0 || retry.backoff_multiplier < 1) {
    throw Error(ErrorCode::InvalidArgument, "backoff must be non-negative with multiplier >= 1");
  }
  if (max_inflight < 1) throw Error(ErrorCode::InvalidArgument, "max_inflight must be >= 1");
  if (!std::isfinite(temperature) || temperature < 0) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be a non-negative number");
  }
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
}

namespace {

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("gateway config field '") + key +
                                                "': " + e.what());
  }
}

}  // namespace

GatewayConfig gateway_config_from_json(const json& j, GatewayConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "gateway config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "endpoint_url") c.endpoint_url = get_as<std::string>(j, "endpoint_url");
    else if (key == "path") c.path = get_as<std::string>(j, "path");
    else if (key == "model_id") c.model_id = get_as<std::string>(j, "model_id");
    else if (key == "auth_token_env_var") c.auth_token_env_var = get_as<std::string>(j, "auth_token_env_var");
    else if (key == "timeout_ms") c.timeout_ms = get_as<int>(j, "timeout_ms");
    else if (key == "max_inflight") c.max_inflight = get_as<int>(j, "max_inflight");
    else if (key == "temperature") c.temperature = get_as<double>(j, "temperature");
    else if (key == "max_tokens") c.max_tokens = get_as<int>(j, "max_tokens");
    else if (key == "cache_dir") {
      if (value.is_null()) c.cache_dir.reset();
      else c.cache_dir = get_as<std::string>(j, "cache_dir");
    } else if (key == "retry") {
      if (!value.is_object()) throw Error(ErrorCode::InvalidArgument, "retry must be an object");
      for (const auto& [rk, rv] : value.items()) {
        if (rk == "max_attempts") c.retry.max_attempts = get_as<int>(value, "max_attempts");
        else if (rk == "backoff_base_ms") c.retry.backoff_base_ms = get_as<double>(value, "backoff_base_ms");
        else if (rk == "backoff_multiplier") c.retry.backoff_multiplier = get_as<double>(value, "backoff_multiplier");
        else if (rk == "max_backoff_ms") c.retry.max_backoff_ms = get_as<double>(value, "max_backoff_ms");
        else if (rk == "jitter") c.retry.jitter = get_as<bool>(value, "jitter");
        else throw Error(ErrorCode::InvalidArgument, "unknown retry field '" + rk + "'");
      }
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown gateway config field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

json to_json(const GatewayConfig& c) {
  return {{"endpoint_url", c.endpoint_url},
          {"path", c.path},
          {"model_id", c.model_id},
          {"auth_token_env_var", c.auth_token_env_var},
          {"timeout_ms", c.timeout_ms},
          {"max_inflight", c.max_inflight},
          {"temperature", c.temperature},
          {"max_tokens", c.max_tokens},
          {"cache_dir", c.cache_dir ? json(c.cache_dir->string()) : json(nullptr)},
          {"retry",
           {{"max_attempts", c.retry.max_attempts},
            {"backoff_base_ms", c.retry.backoff_base_ms},
            {"backoff_multiplier", c.retry.backoff_multiplier},
            {"max_backoff_ms", c.retry.max_backoff_ms},
            {"jitter", c.retry.jitter}}}};
}

json wire_request(const ChatRequest& r) {
  json messages = json::array();
  for (const auto& m : r.messages) {
    json content = json::array();
    for (const auto& part : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        content.push_back({{"type", "text"}, {"text", t->text}});
      } else {
        const auto& img = std::get<ImagePart>(part);
        const auto url = img.base64 ? "data:" + img.mime_type + ";base64," + *img.base64 : img.ref;
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      }
    }
    messages.push_back({{"role", to_string(m.role)}, {"content", std::move(content)}});
  }
  json body = {{"model", r.model_id},
               {"messages", std::move(messages)},
               {"temperature", r.temperature},
               {"max_tokens", r.max_tokens},
               {"logprobs", r.want_logprobs}};
  if (r.want_logprobs) body["top_logprobs"] = r.top_logprobs;
  return body;
}

std::string fingerprint_wire(const json& wire_body) { return sha256_hex(jsonl::dump(wire_body)); }

std::string fingerprint(const ChatRequest& request) {
  return fingerprint_wire(wire_request(request));
}

ChatResponse parse_wire_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedPayload,
                "response body is not JSON: '" + std::string(body.substr(0, 120)) + "'");
  }
  ChatResponse r;
  try {
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (content.is_string()) {
      r.text = content.get<std::string>();
    } else {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") r.text += part.at("text").get<std::string>();
      }
    }
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      std::vector<TokenLogprob> tokens;
      for (const auto& t : choice["logprobs"]["content"]) {
        TokenLogprob tl;
        tl.token = t.at("token").get<std::string>();
        tl.logprob = t.at("logprob").get<double>();
        if (t.contains("top_logprobs")) {
          for (const auto& alt : t["top_logprobs"]) {
            tl.top.emplace_back(alt.at("token").get<std::string>(), alt.at("logprob").get<double>());
          }
        }
        tokens.push_back(std::move(tl));
      }
      r.token_logprobs = std::move(tokens);
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      r.usage.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedPayload, std::string("unexpected response shape: ") + e.what());
  }
  return r;
}

json wire_response(const ChatResponse& r) {
  json choice = {{"index", 0},
                 {"message", {{"role", "assistant"}, {"content", r.text}}},
                 {"finish_reason", "stop"}};
  if (r.token_logprobs) {
    json content = json::array();
    for (const auto& t : *r.token_logprobs) {
      json top = json::array();
      for (const auto& [tok, lp] : t.top) top.push_back({{"token", tok}, {"logprob", lp}});
      content.push_back({{"token", t.token}, {"logprob", t.logprob}, {"top_logprobs", top}});
    }
    choice["logprobs"] = {{"content", std::move(content)}};
  }
  return {{"choices", json::array({std::move(choice)})},
          {"usage",
           {{"prompt_tokens", r.usage.prompt_tokens},
            {"completion_tokens", r.usage.completion_tokens}}}};
}

HttpTransport::HttpTransport(std::string endpoint_url) : endpoint_url_(std::move(endpoint_url)) {}

HttpReply HttpTransport::post(const std::string& path, const std::string& body,
                              const Headers& headers, int timeout_ms) {
  httplib::Client client(endpoint_url_);
  if (!client.is_valid()) {
    throw Error(ErrorCode::InvalidArgument, "unusable endpoint url '" + endpoint_url_ + "'");
  }
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    throw Error(ErrorCode::Transport,
                "POST " + endpoint_url_ + path + " failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

std::vector<BatchOutcome> ChatClient::complete_batch(const std::vector<ChatRequest>& requests) {
  std::vector<BatchOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].response = complete(requests[i]);
    } catch (const Error& e) {
      out[i].error = e;
    }
  }
  return out;
}

InflightLimiter::InflightLimiter(int limit) : limit_(limit) {
  if (limit < 1) throw Error(ErrorCode::InvalidArgument, "in-flight limit must be >= 1");
}

void InflightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return current_ < limit_; });
  ++current_;
  peak_ = std::max(peak_, current_);
}

void InflightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --current_;
  }
  cv_.notify_one();
}

int InflightLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

std::vector<double> backoff_schedule(const RetryPolicy& policy, std::mt19937_64& rng) {
  std::vector<double> delays;
  double nominal = policy.backoff_base_ms;
  double previous = 0.0;
  for (int n = 1; n < policy.max_attempts; ++n) {
    double d = std::min(nominal, policy.max_backoff_ms);
    if (policy.jitter) d *= 0.5 + 0.5 * uniform_unit(rng);
    d = std::max(d, previous);
    delays.push_back(d);
    previous = d;
    nominal *= policy.backoff_multiplier;
  }
  return delays;
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper,
                 std::uint64_t jitter_seed)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      limiter_(config_.max_inflight),
      jitter_rng_(jitter_seed) {
  config_.validate();
  if (!transport_) throw Error(ErrorCode::InvalidArgument, "gateway needs a transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!config_.auth_token_env_var.empty()) {
    if (const char* token = std::getenv(config_.auth_token_env_var.c_str())) {
      headers_.emplace_back("Authorization", std::string("Bearer ") + token);
    }
  }
}

ChatRequest Gateway::make_request(std::vector<ChatMessage> messages, bool want_logprobs) const {
  ChatRequest r;
  r.model_id = config_.model_id;
  r.messages = std::move(messages);
  r.temperature = config_.temperature;
  r.max_tokens = config_.max_tokens;
  r.want_logprobs = want_logprobs;
  r.request_id = "req-" + std::to_string(next_request_id_++);
  return r;
}

std::optional<ChatResponse> Gateway::cache_lookup(const std::string& fp) const {
  if (!config_.cache_dir) return std::nullopt;
  const auto file = *config_.cache_dir / (fp + ".json");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(file, ec)) return std::nullopt;
  auto r = parse_wire_response(jsonl::read_file(file));
  r.attempts = 0;
  return r;
}

void Gateway::cache_store(const std::string& fp, const ChatResponse& response) const {
  if (!config_.cache_dir) return;
  std::filesystem::create_directories(*config_.cache_dir);
  const auto file = *config_.cache_dir / (fp + ".json");
  const auto tmp = *config_.cache_dir / (fp + ".json.tmp");
  jsonl::write_file(tmp, jsonl::dump(wire_response(response)) + "\n");
  std::filesystem::rename(tmp, file);
}

namespace {

struct SlotGuard {
  InflightLimiter& limiter;
  explicit SlotGuard(InflightLimiter& l) : limiter(l) { limiter.acquire(); }
  ~SlotGuard() { limiter.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;
};

std::string excerpt(std::string_view body) {
  constexpr std::size_t kMax = 200;
  std::string out(body.substr(0, kMax));
  if (body.size() > kMax) out += "...";
  return out;
}

}  // namespace

ChatResponse Gateway::complete(const ChatRequest& request) {
  request.validate();
  const auto wire = wire_request(request);
  const auto body = jsonl::dump(wire);
  const auto fp = fingerprint_wire(wire);
  if (auto cached = cache_lookup(fp)) return *cached;

  std::vector<double> delays;
  {
    std::lock_guard lock(rng_mu_);
    delays = backoff_schedule(config_.retry, jitter_rng_);
  }
  const auto start = std::chrono::steady_clock::now();
  std::optional<Error> last;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      sleeper_(std::chrono::milliseconds(std::llround(delays[static_cast<std::size_t>(attempt - 2)])));
    }
    HttpReply reply;
    try {
      SlotGuard slot(limiter_);
      reply = transport_->post(config_.path, body, headers_, config_.timeout_ms);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Transport) throw;
      last = e;
      continue;
    }
    if (reply.status >= 200 && reply.status < 300) {
      auto response = parse_wire_response(reply.body);
      response.attempts = attempt;
      response.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
              .count();
      cache_store(fp, response);
      return response;
    }
    Error remote(ErrorCode::Remote,
                 "HTTP " + std::to_string(reply.status) + ": " + excerpt(reply.body));
    if (reply.status == 429 || reply.status >= 500) {
      last = remote;
      continue;
    }
    throw remote;
  }
  throw Error(last->code(), last->detail() + " (after " +
                                std::to_string(config_.retry.max_attempts) + " attempts)");
}

std::vector<BatchOutcome> Gateway::complete_batch(const std::vector<ChatRequest>& requests) {
  std::vector<BatchOutcome> out(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < requests.size(); i = next++) {
      try {
        out[i].response = complete(requests[i]);
      } catch (const Error& e) {
        out[i].error = e;
      } catch (const std::exception& e) {
        out[i].error = Error(ErrorCode::Transport, e.what());
      }
    }
  };
  const auto n = std::min<std::size_t>(requests.size(), static_cast<std::size_t>(config_.max_inflight));
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  return out;
}

// ---------------------------------------------------------------------------
// Mock responder

namespace rules {

namespace {

// Labels of numbered evidence lines: `<n>. ("<Label>: ...`.
std::vector<Label> evidence_labels(std::string_view prompt) {
  std::vector<Label> labels;
  for (const auto& raw : text::split_lines(prompt)) {
    auto line = text::trim(raw);
    std::size_t p = 0;
    while (p < line.size() && line[p] >= '0' && line[p] <= '9') ++p;
    if (p == 0 || p + 1 >= line.size() || line[p] != '.') continue;
    auto rest = text::trim(line.substr(p + 1));
    if (rest.substr(0, 2) != "(\"") continue;
    rest.remove_prefix(2);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) continue;
    if (const auto label = parse_label(rest.substr(0, colon))) labels.push_back(*label);
  }
  return labels;
}

}  // namespace

MaybeLabel ground_truth_in(std::string_view prompt) {
  static constexpr std::string_view kKey = "Ground_Truth_Label:";
  MaybeLabel found;
  std::size_t pos = 0;
  while ((pos = prompt.find(kKey, pos)) != std::string_view::npos) {
    pos += kKey.size();
    auto rest = prompt.substr(pos);
    const auto eol = rest.find('\n');
    if (const auto label = parse_label(rest.substr(0, eol))) found = label;
  }
  return found;
}

std::pair<int, int> evidence_counts(std::string_view prompt) {
  int real = 0;
  int fake = 0;
  for (auto l : evidence_labels(prompt)) (l == Label::Real ? real : fake)++;
  return {real, fake};
}

MaybeLabel evidence_majority(std::string_view prompt) {
  const auto [real, fake] = evidence_counts(prompt);
  if (real == fake) return std::nullopt;
  return real > fake ? Label::Real : Label::Fake;
}

}  // namespace rules

namespace {

struct RuleReply {
  std::string text;
  std::optional<double> p_fake;  // confidence behind the answer, when there is one
};

std::string prompt_text(const json& wire) {
  std::string out;
  for (const auto& m : wire.at("messages")) {
    for (const auto& part : m.at("content")) {
      if (part.value("type", "") == "text") {
        out += part.at("text").get<std::string>();
        out += '\n';
      }
    }
  }
  return out;
}

template <std::size_t N>
const char* pick(std::mt19937_64& rng, const std::array<const char*, N>& options) {
  return options[uniform_below(rng, N)];
}

std::string fake_annotation(std::string_view prompt, std::mt19937_64& rng) {
  struct Finding {
    const char* region;
    const char* description;
  };
  static const std::array<Finding, 6> kFindings{{
      {"Facial Contour", "Blending seam along the jaw with a faint halo against the background."},
      {"Mouth", "Lip border is blurred and the lip texture is missing."},
      {"Skin", "Cheek tone is cooler than the neck, exposing a blending boundary."},
      {"Eyebrows", "Doubled eyebrow edge from misaligned keypoints."},
      {"Eyes", "Iris detail is smeared and the eyelid line is soft."},
      {"Facial Skin", "Pores and fine wrinkles are smoothed away across the face."},
  }};
  std::size_t first = uniform_below(rng, kFindings.size());
  std::size_t second = (first + 1 + uniform_below(rng, kFindings.size() - 1)) % kFindings.size();
  if (prompt.find("NeuralTextures") != std::string_view::npos) first = 5;
  if (first == second) second = (second + 1) % kFindings.size();
  const auto& a = kFindings[first];
  const auto& b = kFindings[second];
  return std::string("Manipulated Regions: ") + a.region + ", " + b.region +
         "\nForgery Artifacts: [" + a.region + "]: " + a.description + " [" + b.region +
         "]: " + b.description;
}

std::string real_annotation(std::mt19937_64& rng) {
  static const std::array<const char*, 3> kStructure{
      "[Facial Structure]: Features sit in anatomically plausible positions with no overlap.",
      "[Contour Transitions]: The jaw line blends into the neck without seams or hard edges.",
      "[Lip Shape]: The lips keep a natural curvature and a soft shadow below the lower lip."};
  static const std::array<const char*, 3> kLighting{
      "[Lighting Consistency]: Light falls from one direction on both face and neck.",
      "[Skin Tone]: Base tone is uniform from forehead to neck with no colour patches.",
      "[Skin Texture Details]: Pores and fine lines are visible and match the neck."};
  return std::string("Indicators of Authenticity:\n") + pick(rng, kStructure) + "\n" +
         pick(rng, kLighting);
}

std::string fcot_text(Label answer, const MaybeLabel& initial, int real, int fake,
                      std::mt19937_64& rng) {
  static const std::array<const char*, 4> kLooks{
      "The face is frontal and evenly lit; the skin, eye region and mouth are in focus.",
      "The face is slightly turned; texture around the cheeks and lips is visible.",
      "The image is mildly compressed; the contour, eyes and mouth can still be inspected.",
      "The face fills most of the frame; hairline and jaw contour are both visible."};
  std::string pre = pick(rng, kLooks);
  if (initial) pre += "\nInitial Judgment: " + std::string(to_string(*initial));
  const int total = real + fake;
  const std::string rag = "The retrieval report lists " + std::to_string(total) +
                          " references: " + std::to_string(fake) +
                          " describe manipulation artifacts and " + std::to_string(real) +
                          " describe authentic faces. The higher-scoring references are weighed "
                          "against the visible details.";
  const std::string fusion =
      "After re-checking the regions the references point to, the visual details and the "
      "weighted evidence support the decision " +
      std::string(to_string(answer)) + ".";
  return "<Preliminary Visual Analysis>\n" + pre + "\n</Preliminary Visual Analysis>\n" +
         "<RAG Reference Information Analysis>\n" + rag +
         "\n</RAG Reference Information Analysis>\n" + "<Fusion, Reasoning, and Decision>\n" +
         fusion + "\n</Fusion, Reasoning, and Decision>\n" + "<Answer> " +
         std::string(to_string(answer)) + " </Answer>\n";
}

RuleReply rule_reply(const json& wire, std::uint64_t seed) {
  const auto prompt = prompt_text(wire);
  const auto fp = fingerprint_wire(wire);
  std::mt19937_64 rng(seed ^ std::stoull(fp.substr(0, 16), nullptr, 16));

  if (prompt.find("accuracy: <0-3>") != std::string::npos) {
    const auto a = 2 + uniform_below(rng, 2);
    const auto f = 2 + uniform_below(rng, 2);
    const auto p = 1 + uniform_below(rng, 3);
    return {"accuracy: " + std::to_string(a) + "\nfaithfulness: " + std::to_string(f) +
                "\nprofessionalism: " + std::to_string(p),
            std::nullopt};
  }
  if (prompt.find("[Manipulated Image]:") != std::string::npos) {
    return {fake_annotation(prompt, rng), std::nullopt};
  }
  if (prompt.find("[Real Image]:") != std::string::npos) return {real_annotation(rng), std::nullopt};

  const auto [real, fake] = rules::evidence_counts(prompt);
  const double p_fake = (fake + 0.5) / (real + fake + 1.0);
  if (prompt.find("Answer with one word") != std::string::npos) {
    const Label guess = uniform_below(rng, 2) ? Label::Fake : Label::Real;
    return {std::string(to_string(guess)), guess == Label::Fake ? 0.9 : 0.1};
  }
  if (const auto gt = rules::ground_truth_in(prompt)) {
    // Teacher request: the gold preliminary judgment is attached by the builder.
    return {fcot_text(*gt, std::nullopt, real, fake, rng), std::nullopt};
  }
  Label answer = uniform_below(rng, 2) ? Label::Fake : Label::Real;
  if (const auto majority = rules::evidence_majority(prompt)) answer = *majority;
  return {fcot_text(answer, answer, real, fake, rng), p_fake};
}

std::int64_t word_count(std::string_view s) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = text::is_space(c);
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace

MockResponder::MockResponder(MockOptions options) : options_(std::move(options)) {}

std::string MockResponder::reply_text(const json& wire_body) const {
  return rule_reply(wire_body, options_.seed).text;
}

HttpReply MockResponder::post(const std::string&, const std::string& body, const Headers&, int) {
  const auto index = calls_++;
  const int now = ++inflight_;
  int peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { --n; }
  } leave{inflight_};

  json wire;
  try {
    wire = json::parse(body);
  } catch (const json::exception&) {
    return {400, R"({"error":"request body is not JSON"})"};
  }
  const auto fp = fingerprint_wire(wire);
  if (options_.delay_ms) {
    const int d = options_.delay_ms(index, fp);
    if (d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
  }

  ChatResponse response;
  if (const auto it = options_.script.find(fp); it != options_.script.end()) {
    if (it->second.empty()) return {200, ""};
    response.text = it->second;
  } else if (options_.strict || !options_.rules) {
    throw Error(ErrorCode::UnscriptedRequest, "no scripted reply for request " + fp.substr(0, 16));
  } else {
    const auto reply = rule_reply(wire, options_.seed);
    response.text = reply.text;
    if (wire.value("logprobs", false) && reply.p_fake) {
      const double pf = *reply.p_fake;
      const double lf = std::log(pf);
      const double lr = std::log1p(-pf);
      const auto parsed = fcot::parse_fcot(reply.text, fcot::ParseMode::Lenient);
      const bool says_fake = parsed.answer ? *parsed.answer == Label::Fake : pf >= 0.5;
      TokenLogprob answer{says_fake ? " Fake" : " Real", says_fake ? lf : lr,
                          {{" Fake", lf}, {" Real", lr}}};
      response.token_logprobs = std::vector<TokenLogprob>{
          {"<Answer>", 0.0, {{"<Answer>", 0.0}}}, answer, {" </Answer>", 0.0, {{" </Answer>", 0.0}}}};
    }
  }
  response.usage.prompt_tokens = word_count(prompt_text(wire));
  response.usage.completion_tokens = word_count(response.text);
  return {200, jsonl::dump(wire_response(response))};
}

}  // namespace vrag::gateway
