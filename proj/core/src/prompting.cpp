#include "valstab/prompting.hpp"

#include <nlohmann/json.hpp>

#include "valstab/error.hpp"

namespace valstab {

namespace {

constexpr std::string_view kInterlocutorBase = "You are simulating a human using a chatbot.";
constexpr std::string_view kInterlocutorOneSentence = "Your every reply must be in one sentence only.";

void check_persona(const PromptTemplate& tmpl, const std::optional<Persona>& persona) {
  if (persona && persona->name.empty()) fail(ErrorCode::kMissingPersonaName, "persona has an empty name");
  if (tmpl.requires_persona && !persona) fail(ErrorCode::kMissingPersonaName, "template requires a persona");
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
  return text;
}

std::string trim_trailing_spaces(std::string s) {
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

// The persona as a noun phrase: the instruction minus its leading "You are ".
std::string persona_description(const Persona& persona) {
  constexpr std::string_view kLead = "You are ";
  std::string_view text = persona.instruction;
  if (text.substr(0, kLead.size()) == kLead) text.remove_prefix(kLead.size());
  return std::string(text);
}

struct Frame {
  TemplateTags tags;
  std::vector<ChatTurn> header;
  Speaker first;  // speaker of the transcript opener in this side's view
};

// Resolves tags and header turns for one side of the conversation.
Frame make_frame(const PromptTemplate& tmpl, Side side, const std::optional<Persona>& persona) {
  Frame f;
  f.tags = tmpl.tags;
  const bool tested = side == Side::kTested;
  f.first = tested ? Speaker::kUser : Speaker::kAssistant;

  if (tmpl.kind == TemplateKind::kBase) {
    f.tags.system_prefix.clear();
    f.tags.system_suffix = "\n";
    f.tags.user_suffix = "\n";
    f.tags.assistant_suffix = "\n";
    if (tested) {
      f.tags.user_prefix = "USER: ";
      f.tags.assistant_prefix = persona ? persona->name + ": " : "ASSISTANT: ";
      f.header.push_back({Speaker::kSystem,
                          "CONTEXT: The following is a conversation with " +
                              (persona ? persona_description(*persona) : std::string("an AI assistant."))});
    } else {
      f.tags.assistant_prefix = "HUMAN: ";
      f.tags.user_prefix = persona ? persona->name + " (CHATBOT): " : "CHATBOT: ";
      std::string context = "CONTEXT: The following is a conversation between a human and a chatbot.";
      if (persona) context += " The chatbot is pretending to be " + persona->name + ".";
      context += " The human's every reply must be in one sentence only.";
      f.header.push_back({Speaker::kSystem, std::move(context)});
    }
    return f;
  }

  std::optional<std::string> instruction;
  if (!tested) {
    instruction = interlocutor_instruction(persona);
  } else if (persona) {
    instruction = persona->instruction;
  }
  if (!instruction) return f;

  if (tmpl.kind == TemplateKind::kTunedWithSystem) {
    f.header.push_back({Speaker::kSystem, *instruction});
  } else if (tested) {
    f.header.push_back({Speaker::kUser, *instruction});
    f.header.push_back({Speaker::kAssistant, replace_all(tmpl.acknowledgment, "{name}", persona->name)});
  } else {
    // The interlocutor's opener answers its own instruction turn.
    f.header.push_back({Speaker::kUser, *instruction});
  }
  return f;
}

const std::string& prefix_of(const TemplateTags& t, Speaker s) {
  switch (s) {
    case Speaker::kSystem: return t.system_prefix;
    case Speaker::kUser: return t.user_prefix;
    case Speaker::kAssistant: return t.assistant_prefix;
  }
  return t.user_prefix;
}

const std::string& suffix_of(const TemplateTags& t, Speaker s) {
  switch (s) {
    case Speaker::kSystem: return t.system_suffix;
    case Speaker::kUser: return t.user_suffix;
    case Speaker::kAssistant: return t.assistant_suffix;
  }
  return t.user_suffix;
}

Speaker other(Speaker s) { return s == Speaker::kUser ? Speaker::kAssistant : Speaker::kUser; }

void push_merged(std::vector<ChatTurn>& turns, Speaker speaker, const std::string& text) {
  if (!turns.empty() && turns.back().speaker == speaker) {
    turns.back().text += "\n" + text;
  } else {
    turns.push_back({speaker, text});
  }
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kBase: return "base";
    case TemplateKind::kTunedWithSystem: return "tuned_with_system";
    case TemplateKind::kTunedWithoutSystem: return "tuned_without_system";
  }
  return "?";
}

TemplateKind template_kind_from_string(std::string_view text) {
  if (text == "base") return TemplateKind::kBase;
  if (text == "tuned_with_system") return TemplateKind::kTunedWithSystem;
  if (text == "tuned_without_system") return TemplateKind::kTunedWithoutSystem;
  fail(ErrorCode::kInvalidArgument, "unknown template kind '" + std::string(text) + "'");
}

std::string_view to_string(Speaker speaker) {
  switch (speaker) {
    case Speaker::kSystem: return "system";
    case Speaker::kUser: return "user";
    case Speaker::kAssistant: return "assistant";
  }
  return "?";
}

PromptTemplate PromptTemplate::preset(std::string_view name) {
  PromptTemplate t;
  if (name == "base") {
    t.kind = TemplateKind::kBase;
  } else if (name == "chatml") {
    t.kind = TemplateKind::kTunedWithSystem;
    t.tags = {"", "<|im_start|>system\n", "<|im_end|>\n", "<|im_start|>user\n", "<|im_end|>\n",
              "<|im_start|>assistant\n", "<|im_end|>\n"};
  } else if (name == "zephyr") {
    t.kind = TemplateKind::kTunedWithSystem;
    t.tags = {"", "<|system|>\n", "</s>\n", "<|user|>\n", "</s>\n", "<|assistant|>\n", "</s>\n"};
  } else if (name == "mistral") {
    t.kind = TemplateKind::kTunedWithoutSystem;
    t.tags = {"<s>", "", "", "[INST] ", " [/INST]", "", "</s>"};
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown template preset '" + std::string(name) + "'");
  }
  return t;
}

void to_json(nlohmann::json& j, const PromptTemplate& t) {
  j = nlohmann::json{{"kind", to_string(t.kind)},
                     {"tags",
                      {{"bos", t.tags.bos},
                       {"system_prefix", t.tags.system_prefix},
                       {"system_suffix", t.tags.system_suffix},
                       {"user_prefix", t.tags.user_prefix},
                       {"user_suffix", t.tags.user_suffix},
                       {"assistant_prefix", t.tags.assistant_prefix},
                       {"assistant_suffix", t.tags.assistant_suffix}}},
                     {"query_string", t.query_string},
                     {"acknowledgment", t.acknowledgment},
                     {"requires_persona", t.requires_persona}};
}

void from_json(const nlohmann::json& j, PromptTemplate& t) {
  if (j.is_string()) {
    t = PromptTemplate::preset(j.get<std::string>());
    return;
  }
  t = j.contains("preset") ? PromptTemplate::preset(j.at("preset").get<std::string>()) : PromptTemplate{};
  if (j.contains("kind")) t.kind = template_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("tags")) {
    const auto& g = j.at("tags");
    t.tags.bos = g.value("bos", t.tags.bos);
    t.tags.system_prefix = g.value("system_prefix", t.tags.system_prefix);
    t.tags.system_suffix = g.value("system_suffix", t.tags.system_suffix);
    t.tags.user_prefix = g.value("user_prefix", t.tags.user_prefix);
    t.tags.user_suffix = g.value("user_suffix", t.tags.user_suffix);
    t.tags.assistant_prefix = g.value("assistant_prefix", t.tags.assistant_prefix);
    t.tags.assistant_suffix = g.value("assistant_suffix", t.tags.assistant_suffix);
  }
  t.query_string = j.value("query_string", t.query_string);
  t.acknowledgment = j.value("acknowledgment", t.acknowledgment);
  t.requires_persona = j.value("requires_persona", t.requires_persona);
}

std::string interlocutor_instruction(const std::optional<Persona>& persona) {
  std::string out(kInterlocutorBase);
  if (persona) {
    if (persona->name.empty()) fail(ErrorCode::kMissingPersonaName, "persona has an empty name");
    out += " The chatbot is pretending to be " + persona->name + ".";
  }
  out += " ";
  out += kInterlocutorOneSentence;
  return out;
}

RenderedPrompt build_prompt(const PromptTemplate& tmpl, Side side, const std::optional<Persona>& persona,
                            const Transcript& transcript, const std::optional<std::string>& final_query) {
  check_persona(tmpl, persona);
  Frame frame = make_frame(tmpl, side, persona);

  RenderedPrompt out;
  out.turns = frame.header;
  const Role own = side == Side::kTested ? Role::kTestedModel : Role::kInterlocutor;
  for (const auto& m : transcript.messages) {
    if (m.role == Role::kSystem) continue;
    push_merged(out.turns, m.role == own ? Speaker::kAssistant : Speaker::kUser, m.text);
  }
  if (final_query) push_merged(out.turns, Speaker::kUser, *final_query);

  const auto& tags = frame.tags;
  out.text = tags.bos;
  for (const auto& turn : out.turns) {
    out.text += prefix_of(tags, turn.speaker) + turn.text + suffix_of(tags, turn.speaker);
  }
  if (final_query) {
    out.prefill = tmpl.query_string;
    out.text += tags.assistant_prefix + tmpl.query_string;
  } else {
    out.text += trim_trailing_spaces(tags.assistant_prefix);
  }

  if (tmpl.kind == TemplateKind::kBase) {
    out.stop = {"\n"};
  } else {
    if (!tags.assistant_suffix.empty()) out.stop.push_back(tags.assistant_suffix);
    if (!tags.user_prefix.empty()) out.stop.push_back(tags.user_prefix);
  }
  return out;
}

std::string render(const PromptTemplate& tmpl, Side side, const std::optional<Persona>& persona,
                   const Transcript& transcript, const std::optional<std::string>& final_query) {
  return build_prompt(tmpl, side, persona, transcript, final_query).text;
}

ParsedPrompt parse_rendered(const PromptTemplate& tmpl, Side side, const std::optional<Persona>& persona,
                            std::string_view text) {
  check_persona(tmpl, persona);
  const Frame frame = make_frame(tmpl, side, persona);
  const auto& tags = frame.tags;
  auto malformed = [](const std::string& why) -> ParsedPrompt {
    fail(ErrorCode::kInvalidArgument, "cannot parse rendered prompt: " + why);
  };

  ParsedPrompt parsed;
  std::size_t pos = 0;
  if (text.substr(0, tags.bos.size()) != tags.bos) return malformed("missing bos");
  pos = tags.bos.size();

  const bool has_system = !frame.header.empty() && frame.header.front().speaker == Speaker::kSystem;
  Speaker speaker = has_system ? Speaker::kSystem
                    : frame.header.empty() ? frame.first
                                           : frame.header.front().speaker;
  auto next_after = [&](Speaker s) {
    if (s != Speaker::kSystem) return other(s);
    return frame.header.size() > 1 ? frame.header[1].speaker : frame.first;
  };

  while (pos < text.size()) {
    const auto& prefix = prefix_of(tags, speaker);
    const auto& suffix = suffix_of(tags, speaker);
    auto rest = text.substr(pos);
    if (rest == trim_trailing_spaces(tags.assistant_prefix)) return parsed;  // open generation turn
    if (rest.substr(0, prefix.size()) != prefix) return malformed("expected prefix '" + prefix + "'");
    const std::size_t body = pos + prefix.size();
    const Speaker next = next_after(speaker);
    const std::string terminator = suffix + prefix_of(tags, next);
    // The last closed turn is followed by the open answer turn, whoever spoke it.
    const std::string end_terminator = suffix + trim_trailing_spaces(tags.assistant_prefix);

    std::size_t end = text.find(terminator, body);
    if (end == std::string_view::npos && text.size() >= body + end_terminator.size() &&
        text.substr(text.size() - end_terminator.size()) == end_terminator) {
      end = text.size() - end_terminator.size();
    }
    if (end == std::string_view::npos) {
      if (speaker != Speaker::kAssistant) return malformed("unterminated turn");
      parsed.tail = std::string(text.substr(body));
      return parsed;
    }
    parsed.turns.push_back({speaker, std::string(text.substr(body, end - body))});
    pos = end + suffix.size();
    speaker = next;
  }
  return parsed;
}

std::string format_query(const Question& question, std::string_view presented_order) {
  if (presented_order.size() != question.options.size()) {
    fail(ErrorCode::kInvalidArgument, "presented order does not match the option count");
  }
  std::string out = question.stem;
  for (std::size_t i = 0; i < presented_order.size(); ++i) {
    const auto canonical = static_cast<std::size_t>(presented_order[i] - 'A');
    if (canonical >= question.options.size()) fail(ErrorCode::kInvalidArgument, "bad presented order");
    out += "\n(";
    out += static_cast<char>('A' + i);
    out += ") " + question.options[canonical];
  }
  return out;
}

}  // namespace valstab
