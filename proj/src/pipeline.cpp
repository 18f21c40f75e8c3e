#include "ambres/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ambres/render.hpp"
#include "ambres/rng.hpp"
#include "json.hpp"

namespace ambres {

namespace {

using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string call_reasoner(Reasoner& reasoner, const ReasonerQuery& query,
                          const SchemaRuntime& runtime) {
  std::string text;
  try {
    text = reasoner.answer(query);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ReasonerFailure(std::string("reasoner threw: ") + e.what());
  }
  // decoder-backed reasoners satisfy this by construction; symbolic ones
  // are checked here
  if (!runtime.compiled_for(*query.schema).dfa.accepts(text))
    throw ReasonerFailure("reasoner output does not conform to the stage schema: " + text);
  return text;
}

std::vector<std::string> parse_string_array(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(v.get<std::string>());
  return out;
}

std::optional<std::array<int, 2>> parse_point(std::string_view s) {
  size_t i = 0;
  auto skip_spaces = [&] {
    while (i < s.size() && s[i] == ' ') ++i;
  };
  auto parse_int = [&]() -> std::optional<int> {
    size_t start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == start || i - start > 6) return std::nullopt;
    int v = 0;
    for (size_t k = start; k < i; ++k) v = v * 10 + (s[k] - '0');
    return v;
  };
  if (i >= s.size() || s[i] != '(') return std::nullopt;
  ++i;
  skip_spaces();
  auto x = parse_int();
  if (!x) return std::nullopt;
  skip_spaces();
  if (i >= s.size() || s[i] != ',') return std::nullopt;
  ++i;
  skip_spaces();
  auto y = parse_int();
  if (!y) return std::nullopt;
  skip_spaces();
  if (i >= s.size() || s[i] != ')') return std::nullopt;
  ++i;
  if (i != s.size()) return std::nullopt;
  return std::array<int, 2>{*x, *y};
}

std::string objects_slot(const std::vector<std::string>& objects) {
  return objects.empty() ? "(none)" : join(objects, ", ");
}

ReasonerQuery base_query(Stage stage, std::string prompt, const std::optional<ImageRef>& image,
                         const SchemaNode* schema, const std::string& task_id) {
  ReasonerQuery q;
  q.stage = stage;
  q.prompt = std::move(prompt);
  q.image = image;
  q.schema = schema;
  q.task_id = task_id;
  return q;
}

}  // namespace

// ---- prompt templates -----------------------------------------------------

const PromptTemplates& default_prompt_templates() {
  static const PromptTemplates templates = {
      // ground
      "You are a robot assistant looking at a tabletop scene.\n"
      "List every object that the task refers to.\n"
      "Task: {task}\n"
      "Answer with a JSON list of short object descriptions.\n",
      // classify
      "You are a robot assistant looking at a tabletop scene.\n"
      "Decide whether the task is ambiguous, i.e. whether any requested object\n"
      "matches more than one object in the scene.\n"
      "Task: {task}\n"
      "Requested objects: {objects}\n"
      "Answer with a JSON object with keys ambiguity, explanation and\n"
      "clarifying_question. Leave clarifying_question empty when the task is clear.\n",
      // resolve
      "You are a robot assistant looking at a tabletop scene.\n"
      "The user has answered your clarifying question.\n"
      "Task: {task}\n"
      "Question: {question}\n"
      "User answer: {answer}\n"
      "Answer with a JSON list of the now unambiguous object descriptions.\n",
      // locate
      "You are a robot assistant looking at a tabletop scene.\n"
      "Point at each of the following objects in the image.\n"
      "Objects: {objects}\n"
      "Answer with a JSON list of \"(x, y)\" pixel points, one per object.\n"};
  return templates;
}

PromptTemplates load_prompt_templates(const std::filesystem::path& dir) {
  auto slurp = [&](const char* name) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw MissingFile("missing prompt template " + (dir / name).string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  return PromptTemplates{slurp("ground.txt"), slurp("classify.txt"), slurp("resolve.txt"),
                         slurp("locate.txt")};
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  for (size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      size_t end = tmpl.find('}', i);
      if (end != std::string::npos) {
        auto it = slots.find(tmpl.substr(i + 1, end - i - 1));
        if (it != slots.end()) {
          out += it->second;
          i = end + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

// ---- schema runtime ---------------------------------------------------------

namespace {

CompiledSchema compile_bundle(SchemaNode schema, const Vocabulary& vocab) {
  CompiledSchema cs;
  cs.schema = std::move(schema);
  cs.pattern = compile_schema(cs.schema);
  cs.dfa = compile_regex(cs.pattern);
  cs.index = build_token_index(cs.dfa, vocab);
  return cs;
}

// single chars 0x20..0x7E at ids 0..94, then multi-char fragments, eos last
std::vector<std::string> demo_tokens() {
  std::vector<std::string> tokens;
  for (int c = 0x20; c <= 0x7e; ++c) tokens.push_back(std::string(1, static_cast<char>(c)));
  static const char* fragments[] = {
      "true", "false", "tru",  "als",   "block", "bowl",  "cup",   "red",   "green", "blue",
      "yellow", "orange", "purple", "leftmost", "rightmost", "frontmost", "backmost", "the ",
      " one", "\"]", "[\"", "\", \"", ", ", "{\"", "\"}", "\": ", "ambiguity",
      "explanation", "clarifying_question", "which ", " do you mean", "truefalse", "]]", "[[",
      ",,", "  ", "((", "))"};
  for (const char* f : fragments) tokens.emplace_back(f);
  tokens.emplace_back("");  // eos
  return tokens;
}

}  // namespace

SchemaRuntime::SchemaRuntime() : vocab_(Vocabulary{}), extra_mutex_(std::make_unique<std::mutex>()) {
  std::vector<std::string> tokens = demo_tokens();
  const int32_t eos = static_cast<int32_t>(tokens.size()) - 1;
  vocab_ = Vocabulary::make(std::move(tokens), eos);
  BuiltinSchemas builtin = builtin_schemas();
  grounding_ = compile_bundle(std::move(builtin.grounding), vocab_);
  ambiguity_ = compile_bundle(std::move(builtin.ambiguity), vocab_);
}

const CompiledSchema& SchemaRuntime::compiled_for(const SchemaNode& schema) const {
  if (schema == grounding_.schema) return grounding_;
  if (schema == ambiguity_.schema) return ambiguity_;
  const std::string pattern = compile_schema(schema);
  std::lock_guard<std::mutex> lock(*extra_mutex_);
  auto it = extra_.find(pattern);
  if (it == extra_.end()) {
    auto cs = std::make_unique<CompiledSchema>(compile_bundle(schema, vocab_));
    it = extra_.emplace(pattern, std::move(cs)).first;
  }
  return *it->second;
}

std::vector<int32_t> SchemaRuntime::tokenize_chars(std::string_view text) const {
  std::vector<int32_t> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) {
    if (c < 0x20 || c > 0x7e) throw Error("text contains a character outside the demo vocabulary");
    ids.push_back(static_cast<int32_t>(c) - 0x20);
  }
  return ids;
}

const SchemaRuntime& default_schema_runtime() {
  static const SchemaRuntime runtime;
  return runtime;
}

std::string json_escape_string(std::string_view text) {
  std::string out;
  int units = 0;
  for (char raw : text) {
    if (units >= kMaxStringContentLength) break;
    unsigned char c = static_cast<unsigned char>(raw);
    if (c == '"') out += "\\\"";
    else if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else if (c >= 0x20 && c <= 0x7e) out.push_back(raw);
    else out.push_back(' ');
    ++units;
  }
  return out;
}

// ---- transcripts ------------------------------------------------------------

std::string transcript_to_json(const ReasoningTranscript& t) {
  ordered_json j;
  j["task_id"] = t.task_id;
  j["grounded"] = t.grounded;
  j["verdict"] = {{"ambiguous", t.verdict.ambiguous},
                  {"explanation", t.verdict.explanation},
                  {"clarifying_question", t.verdict.clarifying_question}};
  if (t.user_answer) j["user_answer"] = *t.user_answer;
  else j["user_answer"] = nullptr;
  j["resolved"] = t.resolved;
  ordered_json points = ordered_json::array();
  for (const auto& p : t.points) points.push_back({p[0], p[1]});
  j["points"] = std::move(points);
  j["warnings"] = t.warnings;
  j["timings"] = {{"ground_ms", t.timings.ground_ms},
                  {"classify_ms", t.timings.classify_ms},
                  {"resolve_ms", t.timings.resolve_ms},
                  {"locate_ms", t.timings.locate_ms}};
  return j.dump();
}

ReasoningTranscript transcript_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  ReasoningTranscript t;
  t.task_id = j.at("task_id").get<std::string>();
  t.grounded = j.at("grounded").get<std::vector<std::string>>();
  t.verdict.ambiguous = j.at("verdict").at("ambiguous").get<bool>();
  t.verdict.explanation = j.at("verdict").at("explanation").get<std::string>();
  t.verdict.clarifying_question = j.at("verdict").at("clarifying_question").get<std::string>();
  if (!j.at("user_answer").is_null()) t.user_answer = j.at("user_answer").get<std::string>();
  t.resolved = j.at("resolved").get<std::vector<std::string>>();
  for (const auto& p : j.at("points")) t.points.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  t.warnings = j.at("warnings").get<std::vector<std::string>>();
  t.timings.ground_ms = j.at("timings").at("ground_ms").get<double>();
  t.timings.classify_ms = j.at("timings").at("classify_ms").get<double>();
  t.timings.resolve_ms = j.at("timings").at("resolve_ms").get<double>();
  t.timings.locate_ms = j.at("timings").at("locate_ms").get<double>();
  return t;
}

// ---- users -------------------------------------------------------------------

std::string SimulatedUser::clarify(const TaskInstance& task, const Scene& scene,
                                   const AmbiguityVerdict& verdict) {
  return simulate_user_answer(task, scene, verdict);
}

std::string InteractiveUser::clarify(const TaskInstance&, const Scene&,
                                     const AmbiguityVerdict& verdict) {
  out_ << "question: " << verdict.clarifying_question << "\n> " << std::flush;
  std::string line;
  std::getline(in_, line);
  return line;
}

// ---- pipeline operations --------------------------------------------------------

std::vector<std::string> ground_task_objects(Reasoner& reasoner,
                                             const std::optional<ImageRef>& image,
                                             const std::string& task_text,
                                             const std::string& task_id,
                                             const SchemaRuntime& runtime,
                                             const PromptTemplates& prompts) {
  ReasonerQuery q = base_query(Stage::Ground,
                               render_template(prompts.ground, {{"task", task_text}}), image,
                               &runtime.grounding().schema, task_id);
  q.task_text = task_text;
  std::vector<std::string> out;
  for (const std::string& s : parse_string_array(call_reasoner(reasoner, q, runtime)))
    out.push_back(normalize(s));
  return out;
}

ClassifyResult classify_ambiguity(Reasoner& reasoner, const std::optional<ImageRef>& image,
                                  const std::string& task_text,
                                  const std::vector<std::string>& grounded,
                                  const std::string& task_id, const SchemaRuntime& runtime,
                                  const PromptTemplates& prompts) {
  ReasonerQuery q = base_query(
      Stage::Classify,
      render_template(prompts.classify, {{"task", task_text}, {"objects", objects_slot(grounded)}}),
      image, &runtime.ambiguity().schema, task_id);
  q.task_text = task_text;
  q.grounded = grounded;

  ordered_json j = ordered_json::parse(call_reasoner(reasoner, q, runtime));
  ClassifyResult result;
  result.verdict.ambiguous = j.at("ambiguity").get<bool>();
  result.verdict.explanation = j.at("explanation").get<std::string>();
  result.verdict.clarifying_question = j.at("clarifying_question").get<std::string>();

  if (result.verdict.explanation.empty())
    result.warnings.push_back("classification explanation is empty");
  if (!result.verdict.ambiguous && !result.verdict.clarifying_question.empty())
    result.warnings.push_back("clarifying question present on a non-ambiguous verdict");
  if (result.verdict.ambiguous) {
    if (result.verdict.clarifying_question.empty()) {
      result.warnings.push_back("ambiguous verdict without a clarifying question");
    } else {
      const std::string q_norm = normalize(result.verdict.clarifying_question);
      bool mentions = false;
      for (const std::string& g : grounded)
        if (!g.empty() && q_norm.find(g) != std::string::npos) mentions = true;
      if (!mentions)
        result.warnings.push_back("clarifying question does not mention a grounded object");
    }
  }
  return result;
}

std::string simulate_user_answer(const TaskInstance& task, const Scene& scene,
                                 const AmbiguityVerdict& verdict) {
  if (!verdict.ambiguous)
    throw Error("simulate_user_answer requires an ambiguous verdict");
  if (task.intended.size() != task.referents.size())
    throw Error("task intended/referent cardinality mismatch");

  // first referent that is actually ambiguous; fall back to the first
  // referent for false-positive verdicts on clear tasks
  size_t idx = 0;
  std::set<std::string> matched;
  for (size_t i = 0; i < task.referents.size(); ++i) {
    std::set<std::string> m = match_expression(task.referents[i], scene);
    if (i == 0) matched = m;
    if (m.size() >= 2) {
      idx = i;
      matched = std::move(m);
      break;
    }
  }

  const std::string& intended_id = task.intended[idx];
  const SceneObject* intended = scene.find(intended_id);
  if (!intended) throw Error("intended object " + intended_id + " not in scene");

  int same_color = 0;
  for (const std::string& id : matched)
    if (scene.find(id)->color == intended->color) ++same_color;
  if (matched.count(intended_id) && same_color == 1)
    return "the " + to_string(intended->color) + " one";

  for (Ordinal ord : kAllOrdinals)
    if (!matched.empty() && ordinal_pick(matched, ord, scene) == intended_id)
      return "the " + to_string(ord) + " one";

  throw NoDistinguishingAttribute("no color or ordinal singles out " + intended_id +
                                  " among the matched set");
}

namespace {

// first color or ordinal word carried by a clarification phrase
struct AnswerAttribute {
  std::optional<Color> color;
  std::optional<Ordinal> ordinal;
};

AnswerAttribute parse_answer_attribute(const std::string& answer) {
  AnswerAttribute attr;
  std::istringstream in(normalize(answer));
  for (std::string word; in >> word;) {
    if (auto c = parse_color(word)) {
      attr.color = *c;
      return attr;
    }
    if (auto o = parse_ordinal(word)) {
      attr.ordinal = *o;
      return attr;
    }
  }
  return attr;
}

}  // namespace

std::vector<std::string> resolve(Reasoner& reasoner, const std::optional<ImageRef>& image,
                                 const std::string& task_text, const AmbiguityVerdict& verdict,
                                 const std::optional<std::string>& user_answer,
                                 const std::vector<std::string>& grounded,
                                 const std::string& task_id, const SchemaRuntime& runtime,
                                 const PromptTemplates& prompts) {
  if (!verdict.ambiguous) return grounded;  // identity path, no reasoner call
  if (!user_answer)
    throw Error("resolve requires a user answer for an ambiguous verdict");

  ReasonerQuery q = base_query(
      Stage::Resolve,
      render_template(prompts.resolve, {{"task", task_text},
                                        {"question", verdict.clarifying_question},
                                        {"answer", *user_answer}}),
      image, &runtime.grounding().schema, task_id);
  q.task_text = task_text;
  q.question = verdict.clarifying_question;
  q.user_answer = *user_answer;
  q.grounded = grounded;

  std::vector<std::string> out;
  for (const std::string& s : parse_string_array(call_reasoner(reasoner, q, runtime))) {
    std::string n = normalize(s);
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(std::move(n));
  }
  return out;
}

std::vector<std::array<int, 2>> locate_objects(Reasoner& reasoner,
                                               const std::optional<ImageRef>& image,
                                               const Scene& scene,
                                               const std::vector<std::string>& resolved,
                                               const std::string& task_id,
                                               const SchemaRuntime& runtime,
                                               const PromptTemplates& prompts) {
  if (resolved.empty()) return {};
  ReasonerQuery q = base_query(
      Stage::Locate, render_template(prompts.locate, {{"objects", objects_slot(resolved)}}), image,
      &runtime.grounding().schema, task_id);
  q.objects = resolved;

  std::vector<std::string> texts = parse_string_array(call_reasoner(reasoner, q, runtime));
  if (texts.size() != resolved.size())
    throw CardinalityMismatch("expected " + std::to_string(resolved.size()) + " points, got " +
                              std::to_string(texts.size()));
  std::vector<std::array<int, 2>> points;
  for (const std::string& s : texts) {
    auto p = parse_point(s);
    if (!p) throw CardinalityMismatch("point entry is not an \"(x, y)\" pair: " + s);
    if ((*p)[0] < 0 || (*p)[0] >= kImageSize || (*p)[1] < 0 || (*p)[1] >= kImageSize)
      throw OutOfBounds("point (" + std::to_string((*p)[0]) + ", " + std::to_string((*p)[1]) +
                        ") is outside the image");
    points.push_back(*p);
  }
  return points;
}

ReasoningTranscript run_episode(Reasoner& reasoner, User& user, const TaskInstance& task,
                                const Scene& scene, const std::optional<ImageRef>& image,
                                const SchemaRuntime& runtime, const PromptTemplates& prompts) {
  if (task.scene_id != scene.scene_id)
    throw Error("task " + task.task_id + " does not belong to scene " + scene.scene_id);

  ReasoningTranscript t;
  t.task_id = task.task_id;

  auto t0 = Clock::now();
  t.grounded = ground_task_objects(reasoner, image, task.text, task.task_id, runtime, prompts);
  t.timings.ground_ms = ms_since(t0);

  t0 = Clock::now();
  ClassifyResult cls =
      classify_ambiguity(reasoner, image, task.text, t.grounded, task.task_id, runtime, prompts);
  t.verdict = cls.verdict;
  t.warnings = std::move(cls.warnings);
  t.timings.classify_ms = ms_since(t0);

  t0 = Clock::now();
  if (t.verdict.ambiguous) {
    t.user_answer = user.clarify(task, scene, t.verdict);
    try {
      t.resolved = resolve(reasoner, image, task.text, t.verdict, t.user_answer, t.grounded,
                           task.task_id, runtime, prompts);
    } catch (const UnresolvedAmbiguity& e) {
      t.warnings.push_back(std::string("resolution failed: ") + e.what());
      t.resolved = t.grounded;
    }
  } else {
    t.resolved = t.grounded;
  }
  t.timings.resolve_ms = ms_since(t0);

  t0 = Clock::now();
  try {
    t.points = locate_objects(reasoner, image, scene, t.resolved, task.task_id, runtime, prompts);
  } catch (const OutOfBounds& e) {
    t.warnings.push_back(std::string("localization failed: ") + e.what());
  } catch (const CardinalityMismatch& e) {
    t.warnings.push_back(std::string("localization failed: ") + e.what());
  }
  t.timings.locate_ms = ms_since(t0);
  return t;
}

// ---- reasoners -------------------------------------------------------------------

namespace {

class OracleReasoner final : public Reasoner {
 public:
  OracleReasoner(Scene scene, TaskInstance task, const SchemaRuntime& runtime)
      : scene_(std::move(scene)), task_(std::move(task)), runtime_(runtime) {}

  std::string answer(const ReasonerQuery& q) override {
    switch (q.stage) {
      case Stage::Ground:
        return emit(array_json(ground_descriptions()), runtime_.grounding(), q);
      case Stage::Classify:
        return emit(classify_json(), runtime_.ambiguity(), q);
      case Stage::Resolve:
        return emit(array_json(resolve_descriptions(q.user_answer)), runtime_.grounding(), q);
      case Stage::Locate:
        return emit(array_json(point_strings(q.objects)), runtime_.grounding(), q);
    }
    throw Error("unknown reasoning stage");
  }

 private:
  std::vector<std::string> ground_descriptions() const {
    std::vector<std::string> out;
    for (const ReferringExpression& r : task_.referents) {
      std::string d = realize_expression(r);
      if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(std::move(d));
    }
    return out;
  }

  std::string classify_json() const {
    const bool ambiguous = ambiguity_label(task_, scene_);
    std::string explanation, question;
    if (ambiguous) {
      for (const ReferringExpression& r : task_.referents) {
        std::set<std::string> m = match_expression(r, scene_);
        if (m.size() >= 2) {
          const std::string d = realize_expression(r);
          explanation = std::to_string(m.size()) + " objects match the " + d;
          question = "which " + d + " do you mean?";
          break;
        }
      }
    } else {
      explanation = "each requested object matches exactly one object in the scene";
    }
    return std::string("{\"ambiguity\": ") + (ambiguous ? "true" : "false") +
           ", \"explanation\": \"" + json_escape_string(explanation) +
           "\", \"clarifying_question\": \"" + json_escape_string(question) + "\"}";
  }

  std::vector<std::string> resolve_descriptions(const std::string& user_answer) const {
    size_t amb_idx = task_.referents.size();
    for (size_t i = 0; i < task_.referents.size(); ++i) {
      if (match_expression(task_.referents[i], scene_).size() >= 2) {
        amb_idx = i;
        break;
      }
    }
    if (amb_idx == task_.referents.size()) return ground_descriptions();

    AnswerAttribute attr = parse_answer_attribute(user_answer);
    if (!attr.color && !attr.ordinal)
      throw UnresolvedAmbiguity("user answer carries no color or ordinal: " + user_answer);
    ReferringExpression merged = task_.referents[amb_idx];
    if (attr.color) merged.color = *attr.color;
    if (attr.ordinal) merged.ordinal = *attr.ordinal;
    if (match_expression(merged, scene_).size() != 1)
      throw UnresolvedAmbiguity("merged description still matches several objects: " +
                                realize_expression(merged));

    std::vector<std::string> out;
    for (size_t i = 0; i < task_.referents.size(); ++i) {
      std::string d =
          realize_expression(i == amb_idx ? merged : task_.referents[i]);
      if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(std::move(d));
    }
    return out;
  }

  std::vector<std::string> point_strings(const std::vector<std::string>& descriptions) const {
    std::vector<std::string> out;
    for (const std::string& d : descriptions) {
      auto expr = parse_description(d);
      if (!expr) throw CardinalityMismatch("description is not groundable: " + d);
      std::set<std::string> m = match_expression(*expr, scene_);
      if (m.size() != 1)
        throw CardinalityMismatch("description matches " + std::to_string(m.size()) +
                                  " objects: " + d);
      const auto [x, y] = cell_center(scene_.find(*m.begin())->cell);
      out.push_back("(" + std::to_string(x) + ", " + std::to_string(y) + ")");
    }
    return out;
  }

  static std::string array_json(const std::vector<std::string>& items) {
    std::string out = "[";
    for (size_t i = 0; i < items.size(); ++i) {
      if (i) out += ", ";
      out += "\"" + json_escape_string(items[i]) + "\"";
    }
    return out + "]";
  }

  // serialize through the scripted backend + constrained decoder so the
  // oracle exercises the same FSM path as a model
  std::string emit(const std::string& target, const CompiledSchema& cs,
                   const ReasonerQuery& q) const {
    auto backend = scripted_backend(runtime_.tokenize_chars(target), runtime_.vocab().size(),
                                    runtime_.vocab().eos_id);
    PromptContext ctx{q.prompt, q.image, {{"task_id", q.task_id}}};
    DecodeResult res = decode(cs.index, runtime_.vocab(), *backend, DecodePolicy::greedy(),
                              static_cast<int>(target.size()) + 8, ctx);
    if (res.terminated_by != TerminationReason::Eos || res.text != target)
      throw Error("oracle produced text outside the schema language: " + target);
    return res.text;
  }

  Scene scene_;
  TaskInstance task_;
  const SchemaRuntime& runtime_;
};

class DecoderReasoner final : public Reasoner {
 public:
  DecoderReasoner(std::shared_ptr<TokenBackend> backend, const SchemaRuntime& runtime,
                  int max_tokens)
      : backend_(std::move(backend)), runtime_(runtime), max_tokens_(max_tokens) {}

  std::string answer(const ReasonerQuery& q) override {
    const CompiledSchema& cs = runtime_.compiled_for(*q.schema);
    PromptContext ctx{q.prompt, q.image, {{"task_id", q.task_id}}};
    DecodeResult res =
        decode(cs.index, runtime_.vocab(), *backend_, DecodePolicy::greedy(), max_tokens_, ctx);
    if (res.terminated_by != TerminationReason::Eos)
      throw ReasonerFailure("decode hit max_tokens before completing a schema instance");
    return res.text;
  }

 private:
  std::shared_ptr<TokenBackend> backend_;
  const SchemaRuntime& runtime_;
  int max_tokens_;
};

class FunctionReasoner final : public Reasoner {
 public:
  explicit FunctionReasoner(std::function<std::string(const ReasonerQuery&)> fn)
      : fn_(std::move(fn)) {}
  std::string answer(const ReasonerQuery& q) override { return fn_(q); }

 private:
  std::function<std::string(const ReasonerQuery&)> fn_;
};

}  // namespace

std::unique_ptr<Reasoner> oracle_reasoner(const Scene& scene, const TaskInstance& task,
                                          const SchemaRuntime& runtime) {
  if (task.scene_id != scene.scene_id)
    throw Error("oracle reasoner needs a consistent (scene, task) pair");
  return std::make_unique<OracleReasoner>(scene, task, runtime);
}

std::unique_ptr<Reasoner> decoder_reasoner(std::shared_ptr<TokenBackend> backend,
                                           const SchemaRuntime& runtime, int max_tokens) {
  return std::make_unique<DecoderReasoner>(std::move(backend), runtime, max_tokens);
}

std::unique_ptr<Reasoner> function_reasoner(std::function<std::string(const ReasonerQuery&)> fn) {
  return std::make_unique<FunctionReasoner>(std::move(fn));
}

// ---- multiple-choice baseline ------------------------------------------------------

bool knowno_decision(const std::array<double, 4>& scores, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must lie in (0,1)");
  double max_score = *std::max_element(scores.begin(), scores.end());
  std::array<double, 4> probs{};
  double total = 0;
  for (size_t i = 0; i < 4; ++i) {
    probs[i] = std::exp(scores[i] - max_score);
    total += probs[i];
  }
  int exceed = 0;
  for (double p : probs)
    if (p / total > threshold) ++exceed;
  return exceed >= 2;
}

bool knowno_baseline(TokenBackend& backend, const std::string& task_text,
                     const std::array<std::string, 4>& options, double threshold) {
  static const char* labels[] = {"A", "B", "C", "D"};
  std::string prompt = "Task: " + task_text + "\nProposed robot actions:\n";
  for (size_t i = 0; i < 4; ++i) prompt += std::string(labels[i]) + ") " + options[i] + "\n";
  prompt += "Which action should the robot execute? Answer with a single letter.\n";

  PromptContext ctx{prompt, std::nullopt, {}};
  std::vector<double> scores = backend.score({}, ctx);
  if (scores.size() != 4)
    throw BackendFailure("knowno backend must score exactly the four option letters");
  return knowno_decision({scores[0], scores[1], scores[2], scores[3]}, threshold);
}

}  // namespace ambres
