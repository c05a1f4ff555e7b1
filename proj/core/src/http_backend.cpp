#include "valstab/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "valstab/error.hpp"

namespace valstab {

namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::kInvalidArgument, "endpoint must be a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

const nlohmann::json& first_choice(const nlohmann::json& response) {
  if (!response.contains("choices") || !response.at("choices").is_array() ||
      response.at("choices").empty()) {
    fail(ErrorCode::kMalformedResponse, "response has no choices");
  }
  return response.at("choices").at(0);
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config)
    : Backend(std::move(config)), in_flight_(this->config().max_in_flight) {
  const auto url = split_url(this->config().endpoint);
  scheme_host_port_ = url.scheme_host_port;
  base_path_ = url.path;
  if (!this->config().audit_log.empty()) {
    audit_.open(this->config().audit_log, std::ios::app);
    if (!audit_) fail(ErrorCode::kIo, "cannot open audit log " + this->config().audit_log.string());
  }
}

HttpBackend::~HttpBackend() = default;

nlohmann::json HttpBackend::completion_body(const Request& request, bool logprobs) const {
  const auto& cfg = config();
  nlohmann::json body{{"model", cfg.model_id}, {"seed", request.meta.seed}};
  if (logprobs) {
    body["max_tokens"] = 1;
    body["temperature"] = 0.0;
  } else {
    body["max_tokens"] = cfg.sampling.max_tokens;
    body["temperature"] = cfg.sampling.temperature;
    body["top_p"] = cfg.sampling.top_p;
    if (!request.prompt.stop.empty()) body["stop"] = request.prompt.stop;
  }

  if (cfg.dialect == Dialect::kChat) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& turn : request.prompt.turns) {
      messages.push_back({{"role", to_string(turn.speaker)}, {"content", turn.text}});
    }
    if (request.prompt.prefill) {
      messages.push_back({{"role", "assistant"}, {"content", *request.prompt.prefill}});
      body["continue_final_message"] = true;
      body["add_generation_prompt"] = false;
    }
    body["messages"] = std::move(messages);
    if (logprobs) {
      body["logprobs"] = true;
      body["top_logprobs"] = cfg.top_logprobs;
    }
  } else {
    body["prompt"] = request.prompt.text;
    if (logprobs) body["logprobs"] = cfg.top_logprobs;
  }
  return body;
}

void HttpBackend::audit(const nlohmann::json& entry) {
  if (!audit_.is_open()) return;
  std::lock_guard lock(audit_mutex_);
  audit_ << entry.dump() << '\n';
  audit_.flush();
}

nlohmann::json HttpBackend::post(const std::string& path, const nlohmann::json& body) {
  const auto& cfg = config();
  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(cfg.request_timeout);
  const auto sec = static_cast<time_t>(timeout.count() / 1000000);
  const auto usec = static_cast<time_t>(timeout.count() % 1000000);
  const std::string payload = body.dump();

  ErrorCode last_code = ErrorCode::kTransport;
  std::string last_message;
  auto backoff = cfg.retry.backoff;
  for (int attempt = 1; attempt <= cfg.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    httplib::Result result;
    {
      SlotGuard slot(in_flight_);
      count_call();
      result = client.Post(base_path_ + path, headers, payload, "application/json");
    }
    if (!result) {
      last_code = ErrorCode::kTransport;
      last_message = "request to " + scheme_host_port_ + base_path_ + path +
                     " failed: " + httplib::to_string(result.error());
      audit({{"path", path}, {"request", body}, {"error", last_message}, {"attempt", attempt}});
      continue;
    }
    audit({{"path", path}, {"request", body}, {"status", result->status}, {"response", result->body},
           {"attempt", attempt}});
    if (result->status == 429) {
      last_code = ErrorCode::kRateLimited;
      last_message = "rate limited (HTTP 429)";
      continue;
    }
    if (result->status >= 500) {
      last_code = ErrorCode::kTransport;
      last_message = "server error HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      fail(ErrorCode::kMalformedResponse,
           "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 512));
    }
    try {
      return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kMalformedResponse, std::string("response is not JSON: ") + e.what());
    }
  }
  fail(last_code, last_message + " after " + std::to_string(cfg.retry.max_attempts) + " attempt(s)");
}

std::string HttpBackend::complete(const Request& request) {
  if (request.prompt.text.empty()) fail(ErrorCode::kInvalidArgument, "empty prompt");
  const bool chat = config().dialect == Dialect::kChat;
  const auto response = post(chat ? "/chat/completions" : "/completions", completion_body(request, false));
  const auto& choice = first_choice(response);
  try {
    const std::string raw = chat ? choice.at("message").at("content").get<std::string>()
                                 : choice.at("text").get<std::string>();
    return trim_at_stop(raw, request.prompt.stop);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedResponse, std::string("unexpected completion shape: ") + e.what());
  }
}

TokenDistribution HttpBackend::next_token_distribution(const Request& request) {
  if (request.prompt.text.empty()) fail(ErrorCode::kInvalidArgument, "empty prompt");
  const bool chat = config().dialect == Dialect::kChat;
  const auto response = post(chat ? "/chat/completions" : "/completions", completion_body(request, true));
  const auto& choice = first_choice(response);
  if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
    fail(ErrorCode::kUnsupportedByEndpoint, "endpoint returned no log-probabilities");
  }
  TokenDistribution dist;
  try {
    const auto& lp = choice.at("logprobs");
    if (chat) {
      const auto& content = lp.at("content");
      if (content.empty()) fail(ErrorCode::kUnsupportedByEndpoint, "empty logprobs content");
      for (const auto& entry : content.at(0).at("top_logprobs")) {
        dist.entries[entry.at("token").get<std::string>()] = entry.at("logprob").get<double>();
      }
    } else {
      const auto& top = lp.at("top_logprobs");
      if (top.empty() || top.at(0).is_null()) fail(ErrorCode::kUnsupportedByEndpoint, "empty top_logprobs");
      for (const auto& [token, value] : top.at(0).items()) dist.entries[token] = value.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedResponse, std::string("unexpected logprobs shape: ") + e.what());
  }
  // Servers occasionally report tiny positive values from rounding.
  for (auto& [token, value] : dist.entries) value = std::min(value, 0.0);
  dist.validate();
  return dist;
}

}  // namespace valstab
