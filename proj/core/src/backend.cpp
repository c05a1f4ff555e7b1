#include "valstab/backend.hpp"

#include <cctype>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "valstab/data_files.hpp"
#include "valstab/error.hpp"
#include "valstab/http_backend.hpp"
#include "valstab/scripted_backend.hpp"

namespace valstab {

namespace {

Dialect dialect_from_string(std::string_view text) {
  if (text == "completions") return Dialect::kCompletions;
  if (text == "chat") return Dialect::kChat;
  if (text == "scripted") return Dialect::kScripted;
  fail(ErrorCode::kInvalidArgument, "unknown dialect '" + std::string(text) + "'");
}

ScriptedPolicy policy_from_string(std::string_view text) {
  if (text == "fixed_per_persona") return ScriptedPolicy::kFixedPerPersona;
  if (text == "uniform_random") return ScriptedPolicy::kUniformRandom;
  if (text == "drift_after_k") return ScriptedPolicy::kDriftAfterK;
  fail(ErrorCode::kInvalidArgument, "unknown scripted policy '" + std::string(text) + "'");
}

std::string_view strip(std::string_view s) {
  auto is_ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_ws(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_ws(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  // SentencePiece and byte-level BPE mark a leading space with these glyphs.
  for (std::string_view marker : {std::string_view("\xE2\x96\x81"), std::string_view("\xC4\xA0")}) {
    if (s.substr(0, marker.size()) == marker) s.remove_prefix(marker.size());
  }
  return s;
}

}  // namespace

std::string_view to_string(Dialect dialect) {
  switch (dialect) {
    case Dialect::kCompletions: return "completions";
    case Dialect::kChat: return "chat";
    case Dialect::kScripted: return "scripted";
  }
  return "?";
}

std::string_view to_string(ScriptedPolicy policy) {
  switch (policy) {
    case ScriptedPolicy::kFixedPerPersona: return "fixed_per_persona";
    case ScriptedPolicy::kUniformRandom: return "uniform_random";
    case ScriptedPolicy::kDriftAfterK: return "drift_after_k";
  }
  return "?";
}

void BackendConfig::validate() const {
  if (retry.max_attempts < 1) fail(ErrorCode::kInvalidArgument, "retry.max_attempts must be >= 1");
  if (request_timeout.count() <= 0) fail(ErrorCode::kInvalidArgument, "request_timeout must be > 0");
  if (max_in_flight < 1 || max_in_flight > 1024) {
    fail(ErrorCode::kInvalidArgument, "max_in_flight must be within 1..1024");
  }
  if (top_logprobs < 1) fail(ErrorCode::kInvalidArgument, "top_logprobs must be >= 1");
  if (dialect != Dialect::kScripted && endpoint.empty()) {
    fail(ErrorCode::kInvalidArgument, "endpoint required for network dialects");
  }
  if (model_id.empty()) fail(ErrorCode::kInvalidArgument, "model_id required");
}

void to_json(nlohmann::json& j, const BackendConfig& c) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& e : c.scripted.table) {
    table.push_back({{"persona", e.persona},
                     {"instrument", to_string(e.instrument)},
                     {"item", e.item},
                     {"letter", std::string(1, e.letter)}});
  }
  j = nlohmann::json{
      {"name", c.name},
      {"dialect", to_string(c.dialect)},
      {"endpoint", c.endpoint},
      {"api_key_env", c.api_key_env},
      {"model_id", c.model_id},
      {"template", c.prompt_template},
      {"sampling",
       {{"temperature", c.sampling.temperature},
        {"top_p", c.sampling.top_p},
        {"max_tokens", c.sampling.max_tokens}}},
      {"request_timeout_ms", c.request_timeout.count()},
      {"retry", {{"max_attempts", c.retry.max_attempts}, {"backoff_ms", c.retry.backoff.count()}}},
      {"top_logprobs", c.top_logprobs},
      {"max_in_flight", c.max_in_flight},
      {"audit_log", c.audit_log.string()},
      {"scripted",
       {{"policy", to_string(c.scripted.policy)},
        {"rng_seed", c.scripted.rng_seed},
        {"drift_k", c.scripted.drift_k},
        {"drift_scale", c.scripted.drift_scale},
        {"table", table}}},
  };
}

void from_json(const nlohmann::json& j, BackendConfig& c) {
  c = BackendConfig{};
  c.name = j.value("name", c.name);
  c.dialect = dialect_from_string(j.value("dialect", std::string("completions")));
  c.endpoint = j.value("endpoint", c.endpoint);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.model_id = j.value("model_id", c.name);
  if (j.contains("template")) c.prompt_template = j.at("template").get<PromptTemplate>();
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    c.sampling.temperature = s.value("temperature", c.sampling.temperature);
    c.sampling.top_p = s.value("top_p", c.sampling.top_p);
    c.sampling.max_tokens = s.value("max_tokens", c.sampling.max_tokens);
  }
  c.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", c.request_timeout.count()));
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
    c.retry.backoff = std::chrono::milliseconds(r.value("backoff_ms", c.retry.backoff.count()));
  }
  c.top_logprobs = j.value("top_logprobs", c.top_logprobs);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.audit_log = j.value("audit_log", std::string());
  if (j.contains("scripted")) {
    const auto& s = j.at("scripted");
    c.scripted.policy = policy_from_string(s.value("policy", std::string("fixed_per_persona")));
    c.scripted.rng_seed = s.value("rng_seed", c.scripted.rng_seed);
    c.scripted.drift_k = s.value("drift_k", c.scripted.drift_k);
    c.scripted.drift_scale = s.value("drift_scale", c.scripted.drift_scale);
    for (const auto& e : s.value("table", nlohmann::json::array())) {
      const auto letter = e.at("letter").get<std::string>();
      if (letter.size() != 1) fail(ErrorCode::kInvalidArgument, "table letter must be one character");
      c.scripted.table.push_back({e.value("persona", std::string()),
                                  instrument_from_string(e.value("instrument", std::string("pvq"))),
                                  e.at("item").get<int>(), letter[0]});
    }
  }
}

BackendConfig load_backend_config(const std::filesystem::path& path) {
  BackendConfig config;
  try {
    config = nlohmann::json::parse(read_file(path)).get<BackendConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  config.validate();
  return config;
}

BackendConfig scripted_config(ScriptedPolicy policy, std::uint64_t seed, PromptTemplate tmpl) {
  BackendConfig c;
  c.name = std::string("scripted-") + std::string(to_string(policy));
  c.dialect = Dialect::kScripted;
  c.model_id = c.name;
  c.prompt_template = std::move(tmpl);
  c.scripted.policy = policy;
  c.scripted.rng_seed = seed;
  return c;
}

void TokenDistribution::validate() const {
  if (entries.empty()) fail(ErrorCode::kMalformedResponse, "empty token distribution");
  for (const auto& [token, lp] : entries) {
    if (std::isnan(lp) || lp > 0.0) {
      fail(ErrorCode::kMalformedResponse, "log-probability of '" + token + "' is not <= 0");
    }
  }
}

double TokenDistribution::letter_logprob(char letter) const {
  double total = 0.0;
  bool any = false;
  for (const auto& [token, lp] : entries) {
    const auto core = strip(token);
    if (core.size() == 1 && core[0] == letter) {
      total += std::exp(lp);
      any = true;
    }
  }
  return any && total > 0.0 ? std::log(total) : -std::numeric_limits<double>::infinity();
}

void to_json(nlohmann::json& j, const TokenDistribution& d) { j = d.entries; }
void from_json(const nlohmann::json& j, TokenDistribution& d) {
  d.entries = j.get<std::map<std::string, double>>();
}

std::optional<char> argmax_letter(const TokenDistribution& dist, std::string_view letters) {
  std::optional<char> best;
  double best_lp = -std::numeric_limits<double>::infinity();
  for (char letter : letters) {
    const double lp = dist.letter_logprob(letter);
    if (lp > best_lp) {
      best_lp = lp;
      best = letter;
    }
  }
  return best;
}

std::optional<char> extract_letter(std::string_view reply, std::string_view letters) {
  auto allowed = [&](char c) { return letters.find(c) != std::string_view::npos; };
  auto boundary = [&](std::size_t i) {
    return i >= reply.size() || !std::isalnum(static_cast<unsigned char>(reply[i]));
  };
  // Leading answer: "B", "B) ...", "(B)", "B." after optional whitespace.
  std::size_t i = 0;
  while (i < reply.size() && (std::isspace(static_cast<unsigned char>(reply[i])) || reply[i] == '(')) ++i;
  if (i < reply.size() && allowed(reply[i]) && boundary(i + 1)) return reply[i];
  // Otherwise the first parenthesised option anywhere in the reply.
  for (std::size_t k = 0; k + 2 < reply.size(); ++k) {
    if (reply[k] == '(' && allowed(reply[k + 1]) && reply[k + 2] == ')') return reply[k + 1];
  }
  return std::nullopt;
}

std::string trim_at_stop(std::string_view text, const std::vector<std::string>& stop) {
  std::size_t cut = text.size();
  for (const auto& s : stop) {
    if (s.empty()) continue;
    // Leading whitespace is not a boundary: models often open with a newline.
    const auto start = text.find_first_not_of(" \t\r\n");
    if (start == std::string_view::npos) return {};
    const auto pos = text.find(s, start);
    if (pos != std::string_view::npos && pos < cut) cut = pos;
  }
  return std::string(strip(text.substr(0, cut)));
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.dialect == Dialect::kScripted) return std::make_shared<ScriptedBackend>(config);
  return std::make_shared<HttpBackend>(config);
}

}  // namespace valstab
