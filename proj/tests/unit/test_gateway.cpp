#include "vrag/gateway.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace vrag::gateway {
namespace {

using vrag::testing::fast_config;
using vrag::testing::no_sleep;
using vrag::testing::ok_reply;
using vrag::testing::SequenceTransport;

ChatRequest request_for(const Gateway& gw, const std::string& text) {
  return gw.make_request({ChatMessage::text(Role::User, text)});
}

TEST(Wire, RequestShape) {
  ChatRequest r;
  r.model_id = "m";
  r.messages = to_chat({{Role::System, "sys"}, {Role::User, "look"}}, "frames/a.png");
  r.want_logprobs = true;
  const auto j = wire_request(r);
  EXPECT_EQ(j.at("model"), "m");
  EXPECT_EQ(j.at("messages").size(), 2U);
  EXPECT_EQ(j.at("messages")[1].at("content")[1].at("type"), "image_url");
  EXPECT_TRUE(j.at("logprobs").get<bool>());
  EXPECT_EQ(j.at("top_logprobs"), 5);
}

TEST(Wire, FingerprintIgnoresRequestId) {
  ChatRequest a;
  a.messages = {ChatMessage::text(Role::User, "x")};
  auto b = a;
  a.request_id = "1";
  b.request_id = "2";
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  b.temperature = 0.5;
  EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(Wire, ResponseRoundTripAndMalformed) {
  ChatResponse r;
  r.text = "hello";
  r.token_logprobs = std::vector<TokenLogprob>{{" Fake", -0.1, {{" Fake", -0.1}, {" Real", -2.3}}}};
  r.usage = {10, 2};
  const auto back = parse_wire_response(wire_response(r).dump());
  EXPECT_EQ(back.text, "hello");
  ASSERT_TRUE(back.token_logprobs.has_value());
  EXPECT_EQ(back.token_logprobs->at(0).top.size(), 2U);
  EXPECT_EQ(back.usage.completion_tokens, 2);
  EXPECT_THROW(parse_wire_response(""), Error);
  EXPECT_THROW(parse_wire_response(R"({"choices": []})"), Error);
}

TEST(Gateway, ScriptedMockIsReturnedVerbatim) {
  MockOptions opt;
  opt.strict = true;
  auto probe = std::make_shared<MockResponder>();
  Gateway tmp(fast_config(), probe);
  const auto req = request_for(tmp, "describe");
  opt.script[fingerprint(req)] = "canned reply";
  auto mock = std::make_shared<MockResponder>(opt);
  Gateway gw(fast_config(), mock, no_sleep());
  const auto r = gw.complete(req);
  EXPECT_EQ(r.text, "canned reply");
  EXPECT_EQ(r.attempts, 1);
  EXPECT_EQ(mock->calls(), 1U);
}

TEST(Gateway, RetriesRateLimitThenSucceeds) {
  auto t = std::make_shared<SequenceTransport>(
      std::vector<HttpReply>{{429, "slow down"}, {429, "slow down"}, ok_reply("done")});
  auto cfg = fast_config();
  Gateway gw(cfg, t, no_sleep());
  const auto r = gw.complete(request_for(gw, "q"));
  EXPECT_EQ(r.text, "done");
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(t->calls(), 3U);
}

TEST(Gateway, ClientErrorIsNotRetried) {
  auto t = std::make_shared<SequenceTransport>(std::vector<HttpReply>{{400, "bad"}, ok_reply("never")});
  Gateway gw(fast_config(), t, no_sleep());
  try {
    gw.complete(request_for(gw, "q"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Remote);
  }
  EXPECT_EQ(t->calls(), 1U);
}

TEST(Gateway, ExhaustedRetriesReportLastError) {
  auto t = std::make_shared<SequenceTransport>(std::vector<HttpReply>{{503, "down"}});
  Gateway gw(fast_config(), t, no_sleep());
  EXPECT_THROW(gw.complete(request_for(gw, "q")), Error);
  EXPECT_EQ(t->calls(), 3U);
}

TEST(Gateway, EmptyScriptedBodyIsMalformed) {
  auto probe = std::make_shared<MockResponder>();
  Gateway tmp(fast_config(), probe);
  const auto req = request_for(tmp, "q");
  MockOptions opt;
  opt.script[fingerprint(req)] = "";
  Gateway gw(fast_config(), std::make_shared<MockResponder>(opt), no_sleep());
  try {
    gw.complete(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedPayload);
  }
}

TEST(Gateway, InflightCapHoldsAndOrderIsPreserved) {
  MockOptions opt;
  opt.delay_ms = [](std::size_t, const std::string&) { return 20; };
  auto mock = std::make_shared<MockResponder>(opt);
  auto cfg = fast_config();
  cfg.max_inflight = 4;
  Gateway gw(cfg, mock, no_sleep());
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 10; ++i) reqs.push_back(request_for(gw, "question " + std::to_string(i)));
  const auto out = gw.complete_batch(reqs);
  ASSERT_EQ(out.size(), 10U);
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_TRUE(out[i].ok());
    EXPECT_EQ(out[i].response->text, mock->reply_text(wire_request(reqs[i])));
  }
  EXPECT_LE(mock->peak_inflight(), 4);
  EXPECT_LE(gw.peak_inflight(), 4);
}

TEST(Gateway, BatchReportsFailuresPerPosition) {
  MockOptions opt;
  opt.strict = true;
  auto probe = std::make_shared<MockResponder>();
  Gateway tmp(fast_config(), probe);
  const auto a = request_for(tmp, "a");
  const auto b = request_for(tmp, "b");
  opt.script[fingerprint(a)] = "A";
  Gateway gw(fast_config(), std::make_shared<MockResponder>(opt), no_sleep());
  const auto out = gw.complete_batch({a, b});
  ASSERT_TRUE(out[0].ok());
  EXPECT_EQ(out[0].response->text, "A");
  ASSERT_FALSE(out[1].ok());
  EXPECT_EQ(out[1].error->code(), ErrorCode::UnscriptedRequest);
}

TEST(Mock, RuleRepliesAreDeterministic) {
  MockOptions opt;
  opt.seed = 5;
  Gateway g1(fast_config(), std::make_shared<MockResponder>(opt), no_sleep());
  Gateway g2(fast_config(), std::make_shared<MockResponder>(opt), no_sleep());
  const std::string prompt = "Evidence:\n1. (\"Fake: blur\", 0.90)\n2. (\"Fake: seam\", 0.80)\n3. (\"Real: ok\", 0.70)\n";
  EXPECT_EQ(g1.complete(request_for(g1, prompt)).text, g2.complete(request_for(g2, prompt)).text);
}

TEST(Mock, TeacherRuleFollowsGroundTruth) {
  Gateway gw(fast_config(), std::make_shared<MockResponder>(), no_sleep());
  const auto text = gw.complete(request_for(gw, "Ground_Truth_Label: Fake\nwrite the chain")).text;
  const auto parsed = fcot::parse_fcot(text, fcot::ParseMode::Lenient);
  ASSERT_TRUE(parsed.answer.has_value());
  EXPECT_EQ(*parsed.answer, Label::Fake);
  EXPECT_EQ(rules::ground_truth_in("x\nGround_Truth_Label: Real\n"), Label::Real);
  EXPECT_EQ(rules::evidence_majority("(\"Real: a\", 0.5)\n(\"Fake: b\", 0.4)"), std::nullopt);
}

TEST(Backoff, NonDecreasingWithinBounds) {
  RetryPolicy p;
  p.max_attempts = 8;
  p.backoff_base_ms = 100;
  p.max_backoff_ms = 1000;
  std::mt19937_64 rng(1);
  const auto d = backoff_schedule(p, rng);
  ASSERT_EQ(d.size(), 7U);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_GE(d[i], d[i - 1]);
  for (double x : d) {
    EXPECT_GE(x, 50.0);
    EXPECT_LE(x, 1000.0);
  }
}

TEST(Gateway, AuthHeaderFromEnvironment) {
  ::setenv("VRAG_TEST_TOKEN", "s3cret", 1);
  auto t = std::make_shared<SequenceTransport>(std::vector<HttpReply>{ok_reply("x")});
  auto cfg = fast_config();
  cfg.auth_token_env_var = "VRAG_TEST_TOKEN";
  Gateway gw(cfg, t, no_sleep());
  gw.complete(request_for(gw, "q"));
  const auto h = t->last_headers();
  ASSERT_EQ(h.size(), 1U);
  EXPECT_EQ(h[0].second, "Bearer s3cret");
  ::unsetenv("VRAG_TEST_TOKEN");
}

TEST(Gateway, CacheServesRepeatRequests) {
  vrag::testing::TempDir dir("cache");
  auto t = std::make_shared<SequenceTransport>(std::vector<HttpReply>{ok_reply("first"), ok_reply("second")});
  auto cfg = fast_config();
  cfg.cache_dir = dir.path();
  Gateway gw(cfg, t, no_sleep());
  const auto req = request_for(gw, "q");
  EXPECT_EQ(gw.complete(req).text, "first");
  const auto again = gw.complete(request_for(gw, "q"));
  EXPECT_EQ(again.text, "first");
  EXPECT_EQ(again.attempts, 0);
  EXPECT_EQ(t->calls(), 1U);
}

TEST(HttpTransport, TalksToLocalServer) {
  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    ChatResponse r;
    r.text = "echo " + body.at("model").get<std::string>();
    res.set_content(wire_response(r).dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  auto cfg = fast_config();
  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model_id = "local";
  Gateway gw(cfg, std::make_shared<HttpTransport>(cfg.endpoint_url), no_sleep());
  EXPECT_EQ(gw.complete(request_for(gw, "hi")).text, "echo local");
  server.stop();
  th.join();
}

TEST(HttpTransport, UnreachableEndpointIsTransportError) {
  auto cfg = fast_config();
  cfg.endpoint_url = "http://127.0.0.1:1";
  cfg.timeout_ms = 500;
  Gateway gw(cfg, std::make_shared<HttpTransport>(cfg.endpoint_url), no_sleep());
  try {
    gw.complete(request_for(gw, "hi"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Transport);
  }
}

}  // namespace
}  // namespace vrag::gateway
