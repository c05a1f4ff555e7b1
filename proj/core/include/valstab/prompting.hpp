#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "valstab/domain.hpp"

namespace valstab {

enum class TemplateKind { kBase, kTunedWithSystem, kTunedWithoutSystem };
std::string_view to_string(TemplateKind kind);
TemplateKind template_kind_from_string(std::string_view text);

enum class Side { kTested, kInterlocutor };

/// Model-specific structural markers. Base models ignore everything but bos.
struct TemplateTags {
  std::string bos;
  std::string system_prefix;
  std::string system_suffix;
  std::string user_prefix;
  std::string user_suffix;
  std::string assistant_prefix;
  std::string assistant_suffix;

  bool operator==(const TemplateTags&) const = default;
};

struct PromptTemplate {
  TemplateKind kind = TemplateKind::kTunedWithoutSystem;
  TemplateTags tags;
  // Appended after the final query to push next-token mass onto answer letters.
  std::string query_string = "Answer:\n(";
  // Manual reply to a persona instruction given as a user message.
  // "{name}" expands to the persona name.
  std::string acknowledgment = "I understand. I will answer as {name}.";
  bool requires_persona = false;

  /// Built-in tag sets: "base", "chatml", "zephyr", "mistral".
  static PromptTemplate preset(std::string_view name);

  bool operator==(const PromptTemplate&) const = default;
};

void to_json(nlohmann::json& j, const PromptTemplate& t);
/// Accepts {"preset": name, ...overrides} or a fully spelled-out template.
void from_json(const nlohmann::json& j, PromptTemplate& t);

enum class Speaker { kSystem, kUser, kAssistant };
std::string_view to_string(Speaker speaker);

struct ChatTurn {
  Speaker speaker = Speaker::kUser;
  std::string text;

  bool operator==(const ChatTurn&) const = default;
};

/// A prompt in both forms: the flat text for completion endpoints and the
/// turn list for chat endpoints. `prefill` holds the query string that opens
/// the model's answer turn when a final query is present.
struct RenderedPrompt {
  std::string text;
  std::vector<ChatTurn> turns;
  std::optional<std::string> prefill;
  std::vector<std::string> stop;
};

std::string interlocutor_instruction(const std::optional<Persona>& persona);

RenderedPrompt build_prompt(const PromptTemplate& tmpl, Side side,
                            const std::optional<Persona>& persona, const Transcript& transcript,
                            const std::optional<std::string>& final_query = std::nullopt);

std::string render(const PromptTemplate& tmpl, Side side, const std::optional<Persona>& persona,
                   const Transcript& transcript,
                   const std::optional<std::string>& final_query = std::nullopt);

struct ParsedPrompt {
  std::vector<ChatTurn> turns;
  std::string tail;  // content of the open answer turn (query string or empty)
};

/// Inverse of render() using the template's own delimiters.
ParsedPrompt parse_rendered(const PromptTemplate& tmpl, Side side,
                            const std::optional<Persona>& persona, std::string_view text);

/// "(A) label" lines for the options in presentation order. `presented_order`
/// holds, for each shown letter, the canonical letter of the option shown.
std::string format_query(const Question& question, std::string_view presented_order);

}  // namespace valstab
