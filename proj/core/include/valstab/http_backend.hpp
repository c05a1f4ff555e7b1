#pragma once

#include <fstream>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

#include "valstab/backend.hpp"

namespace valstab {

/// Chat/completions-style HTTP+JSON client. Two dialects share the transport:
///   completions  POST {endpoint}/completions with the rendered text prompt
///   chat         POST {endpoint}/chat/completions with the turn list; a query
///                string prefill is sent as a trailing assistant message with
///                continue_final_message set
/// In-flight requests are bounded by max_in_flight. Transport failures,
/// 429 and 5xx responses are retried with exponential backoff.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  ~HttpBackend() override;

  std::string complete(const Request& request) override;
  TokenDistribution next_token_distribution(const Request& request) override;

  nlohmann::json completion_body(const Request& request, bool logprobs) const;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  void audit(const nlohmann::json& entry);

  std::string scheme_host_port_;
  std::string base_path_;
  std::counting_semaphore<1024> in_flight_;
  std::mutex audit_mutex_;
  std::ofstream audit_;
};

}  // namespace valstab
