#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "valstab/domain.hpp"
#include "valstab/prompting.hpp"

namespace valstab {

struct SamplingConfig {
  double temperature = 0.7;
  double top_p = 1.0;
  int max_tokens = 128;

  bool operator==(const SamplingConfig&) const = default;
};

struct RetryConfig {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt

  bool operator==(const RetryConfig&) const = default;
};

/// Wire protocol spoken to the endpoint. `kScripted` never touches the network.
enum class Dialect { kCompletions, kChat, kScripted };
std::string_view to_string(Dialect dialect);

enum class ScriptedPolicy { kFixedPerPersona, kUniformRandom, kDriftAfterK };
std::string_view to_string(ScriptedPolicy policy);

struct ScriptedConfig {
  ScriptedPolicy policy = ScriptedPolicy::kFixedPerPersona;
  std::uint64_t rng_seed = 0;
  int drift_k = 3;             // DriftAfterK: persona answers kept up to k exchanged messages
  double drift_scale = 20.0;   // DriftAfterK: p(drift) = 1 - exp(-(n - k) / scale)

  struct Entry {
    std::string persona;  // empty: the no-persona (neutral) answer sheet
    Instrument instrument = Instrument::kPvq;
    int item = 0;
    char letter = 'A';  // canonical letter

    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> table;  // explicit answers; everything else is hash-derived

  bool operator==(const ScriptedConfig&) const = default;
};

struct BackendConfig {
  std::string name = "model";
  Dialect dialect = Dialect::kCompletions;
  std::string endpoint;  // e.g. http://localhost:8000/v1
  std::string api_key_env;
  std::string model_id;
  PromptTemplate prompt_template;
  SamplingConfig sampling;
  std::chrono::milliseconds request_timeout{60000};
  RetryConfig retry;
  int top_logprobs = 20;
  int max_in_flight = 4;
  std::filesystem::path audit_log;  // empty: no audit
  ScriptedConfig scripted;

  void validate() const;
  bool operator==(const BackendConfig&) const = default;
};

void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);
BackendConfig load_backend_config(const std::filesystem::path& path);
/// Ready-made offline configuration used by tests and examples.
BackendConfig scripted_config(ScriptedPolicy policy, std::uint64_t seed = 7,
                              PromptTemplate tmpl = PromptTemplate::preset("mistral"));

struct TokenDistribution {
  std::map<std::string, double> entries;  // token -> log-probability

  void validate() const;
  /// Log-probability mass of a single answer letter, pooling token variants
  /// that differ only in surrounding whitespace ("A", " A"). Missing: -inf.
  double letter_logprob(char letter) const;

  bool operator==(const TokenDistribution&) const = default;
};

void to_json(nlohmann::json& j, const TokenDistribution& d);
void from_json(const nlohmann::json& j, TokenDistribution& d);

/// Most probable letter among `letters`; nullopt when none has any mass.
/// Ties go to the earlier letter.
std::optional<char> argmax_letter(const TokenDistribution& dist, std::string_view letters);

/// Text-parsing fallback for endpoints without log-probabilities.
std::optional<char> extract_letter(std::string_view reply, std::string_view letters);

/// Out-of-band description of a request. Network backends ignore it; the
/// scripted backend answers from it instead of reading the prompt.
struct RequestMeta {
  Side side = Side::kTested;
  std::optional<std::string> persona;
  std::string topic;
  int n_exchanged = 0;
  int turn = 0;
  std::uint64_t seed = 0;
  std::optional<Instrument> instrument;
  int item = 0;
  std::string presented_order;
};

struct Request {
  RenderedPrompt prompt;
  RequestMeta meta;
};

class Backend {
 public:
  explicit Backend(BackendConfig config) : config_(std::move(config)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  /// One generated message, trimmed at the template's turn boundary.
  virtual std::string complete(const Request& request) = 0;
  /// Top-K next-token log-probabilities; throws UnsupportedByEndpoint when
  /// the endpoint cannot report them.
  virtual TokenDistribution next_token_distribution(const Request& request) = 0;

  const BackendConfig& config() const { return config_; }
  std::uint64_t calls() const { return calls_.load(); }

 protected:
  void count_call() { ++calls_; }

 private:
  BackendConfig config_;
  std::atomic<std::uint64_t> calls_{0};
};

std::shared_ptr<Backend> make_backend(const BackendConfig& config);

/// Cuts a raw generation at the first stop string and trims whitespace.
std::string trim_at_stop(std::string_view text, const std::vector<std::string>& stop);

}  // namespace valstab
