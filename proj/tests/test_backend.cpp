#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "httplib.h"
#include "valstab/backend.hpp"
#include "valstab/error.hpp"
#include "valstab/http_backend.hpp"
#include "valstab/scripted_backend.hpp"

using namespace valstab;
using nlohmann::json;

namespace {

Request question_request(std::string persona, int item, std::string order) {
  Request r;
  r.prompt.text = "prompt for item " + std::to_string(item);
  r.prompt.turns = {{Speaker::kUser, r.prompt.text}};
  r.meta.persona = std::move(persona);
  r.meta.topic = "joke";
  r.meta.instrument = Instrument::kPvq;
  r.meta.item = item;
  r.meta.presented_order = std::move(order);
  return r;
}

// A local OpenAI-style server with a few misbehaving routes.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      json choice{{"text", " B) because\n[INST] more"}};
      if (last_body.contains("logprobs")) {
        choice["logprobs"] = {{"top_logprobs", json::array({{{" B", -0.2}, {"B", -2.5}, {"A", -1.9}, {"x", 0.0000001}}})}};
      }
      res.set_content(json{{"choices", json::array({choice})}}.dump(), "application/json");
    });
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = json::parse(req.body);
      json choice{{"message", {{"role", "assistant"}, {"content", "C"}}}};
      if (last_body.value("logprobs", false)) {
        choice["logprobs"] = {
            {"content", json::array({{{"token", "C"},
                                      {"logprob", -0.1},
                                      {"top_logprobs", json::array({{{"token", "C"}, {"logprob", -0.1}},
                                                                    {{"token", "A"}, {"logprob", -2.4}}})}}})}};
      }
      res.set_content(json{{"choices", json::array({choice})}}.dump(), "application/json");
    });
    server_.Post("/flaky/completions", [this](const httplib::Request&, httplib::Response& res) {
      if (++flaky_calls < 3) {
        res.status = 503;
        return;
      }
      res.set_content(R"({"choices":[{"text":"A"}]})", "application/json");
    });
    server_.Post("/limited/completions", [](const httplib::Request&, httplib::Response& res) { res.status = 429; });
    server_.Post("/slow/completions", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(400));
      res.set_content(R"({"choices":[{"text":"A"}]})", "application/json");
    });
    server_.Post("/nolp/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[{"text":"A","logprobs":null}]})", "application/json");
    });
    server_.Post("/garbage/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  BackendConfig config(const std::string& path, Dialect dialect = Dialect::kCompletions) const {
    BackendConfig c;
    c.name = "fake";
    c.model_id = "fake-model";
    c.dialect = dialect;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + path;
    c.retry.max_attempts = 3;
    c.retry.backoff = std::chrono::milliseconds(1);
    c.request_timeout = std::chrono::milliseconds(2000);
    return c;
  }

  json last_body;
  std::string last_auth;
  std::atomic<int> flaky_calls{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

}  // namespace

TEST(Letters, ArgmaxAggregatesSpaceVariants) {
  TokenDistribution d;
  d.entries = {{"A", -0.1}, {"B", -3.0}, {" B", -2.9}, {"C", -5.0}};
  EXPECT_EQ(argmax_letter(d, "ABCDEF"), 'A');
  EXPECT_NEAR(d.letter_logprob('B'), std::log(std::exp(-3.0) + std::exp(-2.9)), 1e-12);
  EXPECT_TRUE(std::isinf(d.letter_logprob('F')));
  TokenDistribution bad;
  bad.entries = {{"A", 0.5}};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Letters, ExtractFromReplies) {
  EXPECT_EQ(extract_letter("B) Somewhat like me", "ABCDEF"), 'B');
  EXPECT_EQ(extract_letter("  (E)", "ABCDEF"), 'E');
  EXPECT_EQ(extract_letter("I would pick (C) here.", "ABCDEF"), 'C');
  EXPECT_EQ(extract_letter("Absolutely!", "ABCDEF"), std::nullopt);
  EXPECT_EQ(extract_letter("G", "ABCDEF"), std::nullopt);
}

TEST(Letters, TrimAtStop) {
  EXPECT_EQ(trim_at_stop("\nHello there\nUSER: hi", {"\n"}), "Hello there");
  EXPECT_EQ(trim_at_stop("Fine.</s>junk", {"</s>"}), "Fine.");
}

TEST(Config, JsonRoundTripAndValidation) {
  BackendConfig c = scripted_config(ScriptedPolicy::kDriftAfterK, 9);
  c.scripted.table.push_back({"Gandalf", Instrument::kPvq, 3, 'D'});
  json j = c;
  EXPECT_EQ(j.get<BackendConfig>(), c);
  BackendConfig http;
  http.model_id = "m";
  EXPECT_THROW(http.validate(), Error);  // no endpoint
}

TEST(Scripted, FixedPerPersonaPutsAllMassOnTableLetter) {
  auto cfg = scripted_config(ScriptedPolicy::kFixedPerPersona);
  cfg.scripted.table.push_back({"Gandalf", Instrument::kPvq, 1, 'E'});
  ScriptedBackend b(cfg);
  const auto d = b.next_token_distribution(question_request("Gandalf", 1, "CADFEB"));
  ASSERT_EQ(d.entries.size(), 1u);
  EXPECT_EQ(d.entries.begin()->first, "E");  // canonical E is presented at position E
  const auto d2 = b.next_token_distribution(question_request("Gandalf", 1, "EABCDF"));
  EXPECT_EQ(d2.entries.begin()->first, "A");
  EXPECT_EQ(b.calls(), 2u);
}

TEST(Scripted, DeterministicAndBounded) {
  ScriptedBackend b(scripted_config(ScriptedPolicy::kUniformRandom));
  const auto r = question_request("Frodo", 2, "ABCDEF");
  const auto d = b.next_token_distribution(r);
  EXPECT_EQ(d, b.next_token_distribution(r));
  double mass = 0.0;
  for (const auto& [t, lp] : d.entries) {
    EXPECT_LE(lp, 0.0);
    mass += std::exp(lp);
  }
  EXPECT_LE(mass, 1.0 + 1e-9);
  Request chat;
  chat.prompt.text = "hello";
  chat.meta.side = Side::kInterlocutor;
  EXPECT_EQ(b.complete(chat), b.complete(chat));
}

TEST(Scripted, DriftProbabilityShape) {
  ScriptedBackend b(scripted_config(ScriptedPolicy::kDriftAfterK));
  EXPECT_EQ(b.drift_probability(0), 0.0);
  EXPECT_EQ(b.drift_probability(3), 0.0);
  double last = 0.0;
  for (int n = 4; n <= 43; ++n) {
    const double p = b.drift_probability(n);
    EXPECT_GT(p, last);
    EXPECT_LT(p, 1.0);
    last = p;
  }
}

TEST(Http, CompletionsDialect) {
  FakeServer s;
  ::setenv("VALSTAB_TEST_KEY", "sekret", 1);
  auto cfg = s.config("/v1");
  cfg.api_key_env = "VALSTAB_TEST_KEY";
  HttpBackend b(cfg);
  Request r;
  r.prompt.text = "[INST] hi [/INST]";
  r.prompt.stop = {"[INST]"};
  EXPECT_EQ(b.complete(r), "B) because");
  EXPECT_EQ(s.last_auth, "Bearer sekret");
  EXPECT_EQ(s.last_body.at("prompt"), r.prompt.text);
  EXPECT_EQ(s.last_body.at("model"), "fake-model");

  const auto d = b.next_token_distribution(r);
  EXPECT_EQ(s.last_body.at("max_tokens"), 1);
  EXPECT_EQ(s.last_body.at("temperature"), 0.0);
  EXPECT_EQ(argmax_letter(d, "ABCDEF"), 'B');
  EXPECT_LE(d.entries.at("x"), 0.0);  // rounding noise clipped
}

TEST(Http, ChatDialect) {
  FakeServer s;
  HttpBackend b(s.config("/v1", Dialect::kChat));
  Request r;
  r.prompt.text = "unused";
  r.prompt.turns = {{Speaker::kSystem, "be brief"}, {Speaker::kUser, "Q"}};
  r.prompt.prefill = "Answer:\n(";
  EXPECT_EQ(b.complete(r), "C");
  ASSERT_EQ(s.last_body.at("messages").size(), 3u);
  EXPECT_EQ(s.last_body.at("messages")[0].at("role"), "system");
  EXPECT_EQ(s.last_body.at("messages")[2].at("content"), "Answer:\n(");
  const auto d = b.next_token_distribution(r);
  EXPECT_EQ(s.last_body.at("top_logprobs"), 20);
  EXPECT_EQ(argmax_letter(d, "ABCDEF"), 'C');
}

TEST(Http, RetriesServerErrors) {
  FakeServer s;
  HttpBackend b(s.config("/flaky"));
  Request r;
  r.prompt.text = "x";
  EXPECT_EQ(b.complete(r), "A");
  EXPECT_EQ(s.flaky_calls.load(), 3);
  EXPECT_EQ(b.calls(), 3u);
}

TEST(Http, ErrorKinds) {
  FakeServer s;
  Request r;
  r.prompt.text = "x";
  HttpBackend limited(s.config("/limited"));
  EXPECT_EQ(code_of([&] { limited.complete(r); }), ErrorCode::kRateLimited);
  EXPECT_EQ(limited.calls(), 3u);

  auto slow_cfg = s.config("/slow");
  slow_cfg.request_timeout = std::chrono::milliseconds(100);
  slow_cfg.retry.max_attempts = 2;
  HttpBackend slow(slow_cfg);
  EXPECT_EQ(code_of([&] { slow.complete(r); }), ErrorCode::kTransport);
  EXPECT_EQ(slow.calls(), 2u);

  HttpBackend nolp(s.config("/nolp"));
  EXPECT_EQ(code_of([&] { nolp.next_token_distribution(r); }), ErrorCode::kUnsupportedByEndpoint);
  HttpBackend garbage(s.config("/garbage"));
  EXPECT_EQ(code_of([&] { garbage.complete(r); }), ErrorCode::kMalformedResponse);

  auto closed = s.config("/v1");
  closed.endpoint = "http://127.0.0.1:1/v1";
  closed.retry.max_attempts = 1;
  HttpBackend refused(closed);
  EXPECT_EQ(code_of([&] { refused.complete(r); }), ErrorCode::kTransport);
}

TEST(Http, AuditLogRecordsExchanges) {
  FakeServer s;
  auto cfg = s.config("/v1");
  cfg.audit_log = ::testing::TempDir() + "valstab_audit.jsonl";
  std::remove(cfg.audit_log.c_str());
  {
    HttpBackend b(cfg);
    Request r;
    r.prompt.text = "x";
    b.complete(r);
  }
  std::ifstream in(cfg.audit_log);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  const auto entry = json::parse(line);
  EXPECT_EQ(entry.at("status"), 200);
  EXPECT_EQ(entry.at("request").at("prompt"), "x");
}
