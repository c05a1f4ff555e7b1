#include "valstab/scripted_backend.hpp"

#include <array>
#include <cmath>

#include "valstab/error.hpp"
#include "valstab/rng.hpp"

namespace valstab {

namespace {

constexpr std::array<std::string_view, 6> kTestedReplies{
    "That is an interesting thought, let me tell you more about it.",
    "I see what you mean, and I would add one small detail.",
    "Here is my answer, given in my own words.",
    "Let us continue, I am enjoying this conversation.",
    "Well, that depends on how you look at it.",
    "Indeed, and there is a story behind that as well.",
};

constexpr std::array<std::string_view, 6> kInterlocutorReplies{
    "Can you tell me more about that?",
    "That is nice, what else do you think?",
    "Interesting, why do you say so?",
    "Could you give me another example?",
    "I did not know that, please go on.",
    "What would you do next?",
};

std::string table_key(std::string_view persona, Instrument instrument, int item) {
  return std::string(persona) + "|" + std::string(to_string(instrument)) + "|" + std::to_string(item);
}

}  // namespace

ScriptedBackend::ScriptedBackend(BackendConfig config) : Backend(std::move(config)) {
  for (const auto& e : this->config().scripted.table) {
    table_[{e.persona, e.instrument, e.item}] = e.letter;
  }
}

char ScriptedBackend::table_letter(const std::string& persona, Instrument instrument, int item,
                                   std::size_t n_options) const {
  if (auto it = table_.find({persona, instrument, item}); it != table_.end()) return it->second;
  const auto h = derive_seed(config().scripted.rng_seed, table_key(persona, instrument, item));
  return static_cast<char>('A' + h % n_options);
}

double ScriptedBackend::drift_probability(int n_exchanged) const {
  const auto& s = config().scripted;
  if (n_exchanged <= s.drift_k) return 0.0;
  return 1.0 - std::exp(-static_cast<double>(n_exchanged - s.drift_k) / s.drift_scale);
}

std::string ScriptedBackend::complete(const Request& request) {
  if (request.prompt.text.empty()) fail(ErrorCode::kInvalidArgument, "empty prompt");
  count_call();
  const auto& m = request.meta;
  const auto h = derive_seed(
      derive_seed(config().scripted.rng_seed, m.persona.value_or("") + "|" + m.topic),
      m.seed * 131 + static_cast<std::uint64_t>(m.turn));
  if (m.side == Side::kInterlocutor) return std::string(kInterlocutorReplies[h % kInterlocutorReplies.size()]);
  return std::string(kTestedReplies[h % kTestedReplies.size()]);
}

TokenDistribution ScriptedBackend::next_token_distribution(const Request& request) {
  if (request.prompt.text.empty()) fail(ErrorCode::kInvalidArgument, "empty prompt");
  const auto& m = request.meta;
  if (!m.instrument || m.presented_order.empty()) {
    fail(ErrorCode::kInvalidArgument, "scripted backend needs the question metadata");
  }
  count_call();
  const std::size_t n = m.presented_order.size();
  const auto& cfg = config().scripted;
  TokenDistribution dist;

  auto put_canonical = [&](char canonical) {
    const auto pos = m.presented_order.find(canonical);
    if (pos == std::string::npos) fail(ErrorCode::kInvalidArgument, "canonical letter not presented");
    dist.entries[std::string(1, static_cast<char>('A' + pos))] = 0.0;
  };

  switch (cfg.policy) {
    case ScriptedPolicy::kFixedPerPersona:
      put_canonical(table_letter(m.persona.value_or(""), *m.instrument, m.item, n));
      break;
    case ScriptedPolicy::kDriftAfterK: {
      const auto key = m.persona.value_or("") + "|" + m.topic + "|" + std::to_string(m.seed) + "|" +
                       table_key("", *m.instrument, m.item);
      Rng rng(derive_seed(cfg.rng_seed, "drift|" + key));
      const bool drifted = rng.uniform() < drift_probability(m.n_exchanged);
      put_canonical(table_letter(drifted ? std::string() : m.persona.value_or(""), *m.instrument, m.item, n));
      break;
    }
    case ScriptedPolicy::kUniformRandom: {
      Rng rng(derive_seed(cfg.rng_seed, request.prompt.text));
      std::vector<double> w(n);
      double total = 0.0;
      for (auto& x : w) {
        x = rng.uniform() + 1e-3;
        total += x;
      }
      for (std::size_t i = 0; i < n; ++i) {
        dist.entries[std::string(1, static_cast<char>('A' + i))] = std::log(w[i] / total);
      }
      break;
    }
  }
  return dist;
}

}  // namespace valstab
