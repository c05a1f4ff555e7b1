#include "valstab/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "valstab/error.hpp"
#include "valstab/rng.hpp"

namespace valstab {

namespace {

constexpr std::string_view kLetters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

std::string_view to_string(ScaleKind kind) { return kind == ScaleKind::kLikert6 ? "likert6" : "likert5"; }

ScaleKind scale_from_string(std::string_view text) {
  if (text == "likert6" || text == "6") return ScaleKind::kLikert6;
  if (text == "likert5" || text == "5") return ScaleKind::kLikert5;
  fail(ErrorCode::kInvalidArgument, "unknown scale '" + std::string(text) + "'");
}

std::string_view to_string(OrderMode mode) {
  return mode == OrderMode::kPerItem ? "per_item" : "per_administration";
}

OrderMode order_mode_from_string(std::string_view text) {
  if (text == "per_item") return OrderMode::kPerItem;
  if (text == "per_administration") return OrderMode::kPerAdministration;
  fail(ErrorCode::kInvalidArgument, "unknown order mode '" + std::string(text) + "'");
}

Role role_from_string(std::string_view text) {
  if (text == "tested") return Role::kTestedModel;
  if (text == "interlocutor") return Role::kInterlocutor;
  if (text == "system") return Role::kSystem;
  fail(ErrorCode::kInvalidArgument, "unknown role '" + std::string(text) + "'");
}

nlohmann::json persona_json(const Persona& p) {
  return {{"name", p.name},
          {"population", to_string(p.population)},
          {"gender", to_string(p.gender)},
          {"instruction", p.instruction}};
}

Persona persona_from_json(const nlohmann::json& j) {
  Persona p;
  p.name = j.at("name").get<std::string>();
  p.population = population_from_string(j.at("population").get<std::string>());
  p.gender = gender_from_string(j.at("gender").get<std::string>());
  p.instruction = j.at("instruction").get<std::string>();
  return p;
}

nlohmann::json topic_json(const Topic& t) {
  return {{"id", t.id}, {"opener", t.opener}, {"canonical", t.canonical}};
}

Topic topic_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto id = j.get<std::string>();
    if (id == "none") return no_context_topic();
    return DomainData::embedded().topic(id);
  }
  return Topic{j.at("id").get<std::string>(), j.value("opener", std::string()), j.value("canonical", false)};
}

nlohmann::json cell_json(const CellId& c) {
  return {{"model", c.model_id}, {"seed", c.seed}, {"topic", c.topic}, {"participant", c.participant}};
}

CellId cell_from_json(const nlohmann::json& j) {
  return CellId{j.at("model").get<std::string>(), j.at("seed").get<std::uint64_t>(),
                j.at("topic").get<std::string>(), j.at("participant").get<std::string>()};
}

// Everything about the model that can change what it generates. Operational
// settings (endpoint, timeouts, retries) are deliberately left out so a
// cache survives moving a model to a different server.
nlohmann::json model_identity(const BackendConfig& c) {
  nlohmann::json full = c;
  nlohmann::json id{{"model_id", c.model_id},
                    {"dialect", full.at("dialect")},
                    {"template", full.at("template")},
                    {"sampling", full.at("sampling")},
                    {"top_logprobs", c.top_logprobs}};
  if (c.dialect == Dialect::kScripted) id["scripted"] = full.at("scripted");
  return id;
}

std::optional<std::string> persona_name(const Participant& p) {
  if (!p.persona) return std::nullopt;
  return p.persona->name;
}

std::size_t items_per_participant(const RunSpec& spec, const DomainData& data) {
  if (auto task = task_of(spec.instrument)) return data.downstream_bank(*task, spec.scoring).size();
  return data.pvq_bank().size();
}

}  // namespace

void RunSpec::validate() const {
  model.validate();
  if (topics.empty()) fail(ErrorCode::kInvalidArgument, "run needs at least one topic");
  std::set<std::string> ids;
  for (const auto& t : topics) {
    if (!ids.insert(t.id).second) fail(ErrorCode::kInvalidArgument, "duplicate topic '" + t.id + "'");
    if (t.opener.empty() && n_messages != 0) {
      fail(ErrorCode::kInvalidArgument, "topic '" + t.id + "' has no opener and needs n_messages = 0");
    }
  }
  if (n_messages < 0) fail(ErrorCode::kInvalidArgument, "n_messages must be >= 0");
  if (persona_mode()) {
    if (seeds.empty()) fail(ErrorCode::kInvalidArgument, "persona mode needs at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      fail(ErrorCode::kInvalidArgument, "seeds must be distinct");
    }
  } else if (permutations < 1) {
    fail(ErrorCode::kInvalidArgument, "no-persona mode needs permutations >= 1");
  }
  if (model.prompt_template.requires_persona && !persona_mode()) {
    fail(ErrorCode::kMissingPersonaName, "template requires a persona but the run has none");
  }
}

void to_json(nlohmann::json& j, const RunSpec& spec) {
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : spec.topics) topics.push_back(topic_json(t));
  j = nlohmann::json{
      {"model", spec.model},
      {"population", spec.population ? nlohmann::json(to_string(*spec.population)) : nlohmann::json()},
      {"topics", topics},
      {"n_messages", spec.n_messages},
      {"seeds", spec.seeds},
      {"permutations", spec.permutations},
      {"instrument", to_string(spec.instrument)},
      {"max_personas", spec.max_personas},
      {"scale", to_string(spec.scale)},
      {"order_mode", to_string(spec.order_mode)},
      {"scoring", {{"stealing", spec.scoring.stealing}, {"religion", spec.scoring.religion}}},
  };
}

void from_json(const nlohmann::json& j, RunSpec& spec) {
  spec = RunSpec{};
  spec.model = j.at("model").get<BackendConfig>();
  if (j.contains("population") && !j.at("population").is_null()) {
    spec.population = population_from_string(j.at("population").get<std::string>());
  }
  for (const auto& t : j.value("topics", nlohmann::json::array())) spec.topics.push_back(topic_from_json(t));
  spec.n_messages = j.value("n_messages", spec.n_messages);
  spec.seeds = j.value("seeds", spec.seeds);
  spec.permutations = j.value("permutations", spec.permutations);
  spec.instrument = instrument_from_string(j.value("instrument", std::string("pvq")));
  spec.max_personas = j.value("max_personas", spec.max_personas);
  spec.scale = scale_from_string(j.value("scale", std::string("likert6")));
  spec.order_mode = order_mode_from_string(j.value("order_mode", std::string("per_item")));
  if (j.contains("scoring")) {
    const auto& s = j.at("scoring");
    spec.scoring.stealing = s.value("stealing", spec.scoring.stealing);
    spec.scoring.religion = s.value("religion", spec.scoring.religion);
  }
}

std::vector<Participant> participants(const RunSpec& spec, const DomainData& data) {
  std::vector<Participant> out;
  if (spec.population) {
    for (auto& p : data.population(*spec.population)) {
      if (spec.max_personas != 0 && out.size() == spec.max_personas) break;
      out.push_back(Participant{p.name, p, p.gender});
    }
    return out;
  }
  // No-persona mode: each answer-order permutation is a participant; the
  // first half takes the male questionnaire, the rest the female one.
  const int male = (spec.permutations + 1) / 2;
  for (int i = 0; i < spec.permutations; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "perm-%03d", i);
    out.push_back(Participant{id, std::nullopt, i < male ? Gender::kMale : Gender::kFemale});
  }
  return out;
}

std::string CellId::label() const {
  return model_id + "/seed=" + std::to_string(seed) + "/topic=" + topic + "/" + participant;
}

char AnswerRecord::canonical_letter() const {
  if (!chosen_letter) fail(ErrorCode::kInvalidArgument, "answer record has no chosen letter");
  const auto pos = static_cast<std::size_t>(*chosen_letter - 'A');
  if (pos >= presented_order.size()) fail(ErrorCode::kOutOfRange, "chosen letter outside presented order");
  return presented_order[pos];
}

void to_json(nlohmann::json& j, const AnswerRecord& r) {
  j = nlohmann::json{
      {"cell", cell_json(r.cell)},
      {"instrument", to_string(r.instrument)},
      {"item", r.item},
      {"group", r.group},
      {"presented_order", r.presented_order},
      {"chosen_letter", r.chosen_letter ? nlohmann::json(std::string(1, *r.chosen_letter)) : nlohmann::json()},
      {"chosen_code", r.chosen_code},
      {"chosen_score", r.chosen_score},
      {"raw_distribution", r.raw_distribution ? nlohmann::json(*r.raw_distribution) : nlohmann::json()},
  };
  if (!r.reply.empty()) j["reply"] = r.reply;
  if (!r.error.empty()) j["error"] = r.error;
}

void from_json(const nlohmann::json& j, AnswerRecord& r) {
  r = AnswerRecord{};
  r.cell = cell_from_json(j.at("cell"));
  r.instrument = instrument_from_string(j.at("instrument").get<std::string>());
  r.item = j.at("item").get<int>();
  r.group = j.value("group", std::string());
  r.presented_order = j.at("presented_order").get<std::string>();
  if (const auto& l = j.at("chosen_letter"); !l.is_null()) {
    const auto s = l.get<std::string>();
    if (s.size() != 1) fail(ErrorCode::kMalformedResponse, "chosen_letter must be one character");
    r.chosen_letter = s[0];
  }
  r.chosen_code = j.value("chosen_code", 0);
  r.chosen_score = j.value("chosen_score", 0.0);
  if (j.contains("raw_distribution") && !j.at("raw_distribution").is_null()) {
    r.raw_distribution = j.at("raw_distribution").get<TokenDistribution>();
  }
  r.reply = j.value("reply", std::string());
  r.error = j.value("error", std::string());
}

void to_json(nlohmann::json& j, const Transcript& t) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : t.messages) messages.push_back({{"role", to_string(m.role)}, {"text", m.text}});
  j = nlohmann::json{{"persona", t.persona ? persona_json(*t.persona) : nlohmann::json()},
                     {"topic", topic_json(t.topic)},
                     {"seed", t.seed},
                     {"n_exchanged", t.n_exchanged},
                     {"messages", messages}};
}

void from_json(const nlohmann::json& j, Transcript& t) {
  t = Transcript{};
  if (const auto& p = j.at("persona"); !p.is_null()) t.persona = persona_from_json(p);
  t.topic = topic_from_json(j.at("topic"));
  t.seed = j.at("seed").get<std::uint64_t>();
  t.n_exchanged = j.at("n_exchanged").get<int>();
  for (const auto& m : j.at("messages")) {
    t.messages.push_back({role_from_string(m.at("role").get<std::string>()), m.at("text").get<std::string>()});
  }
}

std::size_t ScoreDataset::record_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.answers.size();
  return n;
}

std::string serialize_dataset(const ScoreDataset& d) {
  nlohmann::json missing = nlohmann::json::array();
  for (const auto& m : d.missing) missing.push_back({{"cell", cell_json(m.cell)}, {"error", m.error}});
  const nlohmann::json header{{"kind", "valstab.dataset"},
                              {"version", 1},
                              {"model_id", d.model_id},
                              {"instrument", to_string(d.instrument)},
                              {"persona_mode", d.persona_mode},
                              {"n_messages", d.n_messages},
                              {"topics", d.topics},
                              {"seeds", d.seeds},
                              {"participants", d.participants},
                              {"missing", missing}};
  std::string out = header.dump() + "\n";
  for (const auto& c : d.cells) {
    const nlohmann::json line{
        {"cell", cell_json(c.cell)}, {"gender", to_string(c.gender)}, {"answers", c.answers}};
    out += line.dump() + "\n";
  }
  return out;
}

ScoreDataset parse_dataset(std::string_view text) {
  ScoreDataset d;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("kind", std::string()) != "valstab.dataset") {
          fail(ErrorCode::kIo, "not a valstab dataset");
        }
        d.model_id = j.at("model_id").get<std::string>();
        d.instrument = instrument_from_string(j.at("instrument").get<std::string>());
        d.persona_mode = j.at("persona_mode").get<bool>();
        d.n_messages = j.at("n_messages").get<int>();
        d.topics = j.at("topics").get<std::vector<std::string>>();
        d.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        d.participants = j.at("participants").get<std::vector<std::string>>();
        for (const auto& m : j.at("missing")) {
          d.missing.push_back({cell_from_json(m.at("cell")), m.at("error").get<std::string>()});
        }
        have_header = true;
        continue;
      }
      CellResult c;
      c.cell = cell_from_json(j.at("cell"));
      c.gender = gender_from_string(j.at("gender").get<std::string>());
      c.answers = j.at("answers").get<std::vector<AnswerRecord>>();
      d.cells.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kIo, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) fail(ErrorCode::kIo, "dataset is empty");
  return d;
}

std::size_t count_answer_slots(const RunSpec& spec, const DomainData& data) {
  spec.validate();
  const std::size_t people = participants(spec, data).size();
  const std::size_t seeds = spec.persona_mode() ? spec.seeds.size() : 1;
  return seeds * spec.topics.size() * people * items_per_participant(spec, data);
}

Simulator::Simulator(RunSpec spec, std::shared_ptr<Backend> backend, Cache& cache, const DomainData& data)
    : spec_(std::move(spec)), backend_(std::move(backend)), cache_(cache), data_(data) {
  if (!backend_) fail(ErrorCode::kInvalidArgument, "simulator needs a backend");
  spec_.validate();
}

std::string Simulator::transcript_key(const Participant& participant, const Topic& topic,
                                      std::uint64_t seed) const {
  return content_key({{"kind", "transcript"},
                      {"model", model_identity(backend_->config())},
                      {"persona", participant.persona ? persona_json(*participant.persona) : nlohmann::json()},
                      {"topic", topic_json(topic)},
                      {"seed", seed},
                      {"n", spec_.n_messages}});
}

Transcript Simulator::simulate_conversation(const Participant& participant, const Topic& topic,
                                            std::uint64_t seed) {
  const auto conv_seed =
      derive_seed(derive_seed(derive_seed(seed, "participant:" + participant.id), "topic:" + topic.id),
                  "conversation");
  const auto key = transcript_key(participant, topic, conv_seed);
  if (auto hit = cache_.find(Cache::Kind::kTranscript, key)) return hit->get<Transcript>();

  Transcript t;
  t.persona = participant.persona;
  t.topic = topic;
  t.seed = conv_seed;
  if (!topic.opener.empty()) {
    t.messages.push_back({Role::kInterlocutor, topic.opener});
    const auto& tmpl = backend_->config().prompt_template;
    for (int turn = 1; turn <= spec_.n_messages; ++turn) {
      const bool tested = turn % 2 == 1;
      Request req;
      req.prompt = build_prompt(tmpl, tested ? Side::kTested : Side::kInterlocutor, participant.persona, t);
      req.meta.side = tested ? Side::kTested : Side::kInterlocutor;
      req.meta.persona = persona_name(participant);
      req.meta.topic = topic.id;
      req.meta.n_exchanged = spec_.n_messages;
      req.meta.turn = turn;
      req.meta.seed = derive_seed(conv_seed, static_cast<std::uint64_t>(turn));
      std::string reply = backend_->complete(req);
      // An empty generation would break role alternation.
      if (reply.empty()) reply = "...";
      t.messages.push_back({tested ? Role::kTestedModel : Role::kInterlocutor, std::move(reply)});
      ++t.n_exchanged;
    }
  }
  t.validate();
  cache_.put(Cache::Kind::kTranscript, key, t);
  return t;
}

std::vector<Question> Simulator::questions_for(const Participant& participant) const {
  if (auto task = task_of(spec_.instrument)) {
    std::vector<Question> out;
    for (const auto& q : data_.downstream_bank(*task, spec_.scoring)) out.push_back(to_question(q));
    return out;
  }
  return data_.pvq_items(participant.gender, spec_.scale);
}

std::string Simulator::presented_order(const Participant& participant, std::uint64_t seed,
                                       const Question& q) const {
  if (q.options.size() > kLetters.size()) fail(ErrorCode::kOutOfRange, "too many answer options");
  const auto root = derive_seed(derive_seed(seed, "participant:" + participant.id), "answer-order");
  const std::string instrument(to_string(q.instrument));
  const auto stream = spec_.order_mode == OrderMode::kPerItem
                          ? derive_seed(root, instrument + ":" + std::to_string(q.index))
                          : derive_seed(root, instrument);
  std::vector<char> letters(kLetters.begin(), kLetters.begin() + static_cast<std::ptrdiff_t>(q.options.size()));
  Rng rng(stream);
  rng.shuffle(letters);
  return std::string(letters.begin(), letters.end());
}

std::vector<AnswerRecord> Simulator::administer(const CellId& cell, const Participant& participant,
                                                const Transcript& transcript,
                                                const std::vector<Question>& questions) {
  const auto& cfg = backend_->config();
  const auto identity = model_identity(cfg);
  std::vector<AnswerRecord> out;
  out.reserve(questions.size());
  for (const auto& q : questions) {
    AnswerRecord rec;
    rec.cell = cell;
    rec.instrument = q.instrument;
    rec.item = q.index;
    rec.group = q.group;
    rec.presented_order = presented_order(participant, cell.seed, q);
    const std::string_view letters = kLetters.substr(0, q.options.size());

    // Every item is appended to the same transcript on its own.
    Request req;
    req.prompt = build_prompt(cfg.prompt_template, Side::kTested, participant.persona, transcript,
                              format_query(q, rec.presented_order));
    req.meta.side = Side::kTested;
    req.meta.persona = persona_name(participant);
    req.meta.topic = transcript.topic.id;
    req.meta.n_exchanged = transcript.n_exchanged;
    req.meta.turn = transcript.n_exchanged + 1;
    req.meta.seed = derive_seed(transcript.seed, std::string(to_string(q.instrument)) + ":" + std::to_string(q.index));
    req.meta.instrument = q.instrument;
    req.meta.item = q.index;
    req.meta.presented_order = rec.presented_order;

    const auto key = content_key({{"kind", "answer"},
                                  {"model", identity},
                                  {"prompt", req.prompt.text},
                                  {"persona", req.meta.persona ? nlohmann::json(*req.meta.persona) : nlohmann::json()},
                                  {"topic", req.meta.topic},
                                  {"seed", req.meta.seed},
                                  {"item", q.index},
                                  {"presented_order", rec.presented_order}});

    nlohmann::json answer;
    if (auto hit = cache_.find(Cache::Kind::kAnswer, key)) {
      answer = *hit;
    } else {
      try {
        const auto dist = backend_->next_token_distribution(req);
        answer["distribution"] = dist;
        if (auto letter = argmax_letter(dist, letters)) answer["letter"] = std::string(1, *letter);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnsupportedByEndpoint) throw;
      }
      if (!answer.contains("letter")) {
        const auto reply = backend_->complete(req);
        answer["reply"] = reply;
        // The prompt already ends with the opening parenthesis, so a bare
        // leading letter counts.
        if (auto letter = extract_letter(reply, letters)) answer["letter"] = std::string(1, *letter);
      }
      if (answer.contains("letter")) cache_.put(Cache::Kind::kAnswer, key, answer);
    }

    if (answer.contains("distribution")) rec.raw_distribution = answer.at("distribution").get<TokenDistribution>();
    rec.reply = answer.value("reply", std::string());
    if (answer.contains("letter")) {
      rec.chosen_letter = answer.at("letter").get<std::string>().at(0);
      const auto canonical = static_cast<std::size_t>(rec.canonical_letter() - 'A');
      rec.chosen_score = q.scores.at(canonical);
      rec.chosen_code = q.instrument == Instrument::kPvq ? static_cast<int>(q.scores.at(canonical))
                                                        : static_cast<int>(canonical) + 1;
    } else {
      rec.error = "ExtractionFailed: no answer letter in distribution or reply";
    }
    out.push_back(std::move(rec));
  }
  return out;
}

ScoreDataset Simulator::run(const RunOptions& options) {
  const auto people = participants(spec_, data_);
  ScoreDataset d;
  d.model_id = backend_->config().model_id;
  d.instrument = spec_.instrument;
  d.persona_mode = spec_.persona_mode();
  d.n_messages = spec_.n_messages;
  for (const auto& t : spec_.topics) d.topics.push_back(t.id);
  for (const auto& p : people) d.participants.push_back(p.id);

  struct Job {
    CellId cell;
    const Participant* participant;
    const Topic* topic;
  };
  std::vector<Job> jobs;
  if (spec_.persona_mode()) {
    d.seeds = spec_.seeds;
    for (auto seed : spec_.seeds)
      for (const auto& topic : spec_.topics)
        for (const auto& p : people) jobs.push_back({{d.model_id, seed, topic.id, p.id}, &p, &topic});
  } else {
    // The permutation index doubles as the seed of its cells.
    for (std::size_t i = 0; i < people.size(); ++i) d.seeds.push_back(i);
    for (const auto& topic : spec_.topics)
      for (std::size_t i = 0; i < people.size(); ++i)
        jobs.push_back({{d.model_id, i, topic.id, people[i].id}, &people[i], &topic});
  }

  std::vector<std::optional<CellResult>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& job = jobs[i];
      try {
        const auto transcript = simulate_conversation(*job.participant, *job.topic, job.cell.seed);
        CellResult r{job.cell, job.participant->gender,
                     administer(job.cell, *job.participant, transcript, questions_for(*job.participant))};
        results[i] = std::move(r);
      } catch (const Error& e) {
        errors[i] = job.cell.label() + ": " + e.what();
      } catch (const std::exception& e) {
        errors[i] = job.cell.label() + ": " + e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(options.workers, static_cast<int>(jobs.size())));
  std::vector<std::jthread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (results[i]) {
      d.cells.push_back(std::move(*results[i]));
    } else {
      d.missing.push_back({jobs[i].cell, errors[i]});
    }
  }
  return d;
}

}  // namespace valstab
