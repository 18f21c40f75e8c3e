#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ambres/dataset.hpp"
#include "ambres/decoder.hpp"
#include "ambres/schema.hpp"
#include "ambres/sim_world.hpp"

namespace ambres {

enum class Stage { Ground, Classify, Resolve, Locate };

// One reasoning request. The rendered prompt plus image and target
// schema form the model-facing surface; the structured slots mirror the
// prompt's contents so symbolic reasoners and wrappers need not parse
// prompt text.
struct ReasonerQuery {
  Stage stage = Stage::Ground;
  std::string prompt;
  std::optional<ImageRef> image;
  const SchemaNode* schema = nullptr;
  std::string task_id;

  std::string task_text;
  std::vector<std::string> grounded;
  std::string question;
  std::string user_answer;
  std::vector<std::string> objects;  // locate: descriptions to point at
};

// Answers every stage with JSON text valid under the query's schema.
class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual std::string answer(const ReasonerQuery& query) = 0;
};

struct AmbiguityVerdict {
  bool ambiguous = false;
  std::string explanation;
  std::string clarifying_question;
};

struct StageTimings {
  double ground_ms = 0;
  double classify_ms = 0;
  double resolve_ms = 0;
  double locate_ms = 0;
};

// Full record of one episode.
struct ReasoningTranscript {
  std::string task_id;
  std::vector<std::string> grounded;
  AmbiguityVerdict verdict;
  std::optional<std::string> user_answer;
  std::vector<std::string> resolved;
  std::vector<std::array<int, 2>> points;
  std::vector<std::string> warnings;
  StageTimings timings;
};

std::string transcript_to_json(const ReasoningTranscript& transcript);
ReasoningTranscript transcript_from_json(const std::string& text);

// ---- prompt templates -------------------------------------------------

struct PromptTemplates {
  std::string ground;    // slots: {task}
  std::string classify;  // slots: {task} {objects}
  std::string resolve;   // slots: {task} {question} {answer}
  std::string locate;    // slots: {objects}
};

const PromptTemplates& default_prompt_templates();
PromptTemplates load_prompt_templates(const std::filesystem::path& dir);
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& slots);

// ---- shared decoding state --------------------------------------------

struct CompiledSchema {
  SchemaNode schema;
  std::string pattern;
  Dfa dfa;
  TokenIndex index;
};

// Built-in schemas compiled once, plus the character-level demo
// vocabulary every bundled backend scores over. Immutable and shareable
// across concurrent episodes.
class SchemaRuntime {
 public:
  SchemaRuntime();

  const Vocabulary& vocab() const { return vocab_; }
  const CompiledSchema& grounding() const { return grounding_; }
  const CompiledSchema& ambiguity() const { return ambiguity_; }
  const CompiledSchema& compiled_for(const SchemaNode& schema) const;

  /// Token ids of a text under the single-character slice of the vocabulary.
  std::vector<int32_t> tokenize_chars(std::string_view text) const;

 private:
  Vocabulary vocab_;
  CompiledSchema grounding_;
  CompiledSchema ambiguity_;
  mutable std::map<std::string, std::unique_ptr<CompiledSchema>> extra_;
  mutable std::unique_ptr<std::mutex> extra_mutex_;
};

const SchemaRuntime& default_schema_runtime();

/// Serializes text as schema-compatible JSON string content: keeps the
/// four supported escapes, replaces other problem characters, truncates.
std::string json_escape_string(std::string_view text);

// ---- users -------------------------------------------------------------

class User {
 public:
  virtual ~User() = default;
  virtual std::string clarify(const TaskInstance& task, const Scene& scene,
                              const AmbiguityVerdict& verdict) = 0;
};

// Answers from ground truth; never parses the question text.
class SimulatedUser final : public User {
 public:
  std::string clarify(const TaskInstance& task, const Scene& scene,
                      const AmbiguityVerdict& verdict) override;
};

// Prints the clarifying question and consumes one input line. Single-session.
class InteractiveUser final : public User {
 public:
  InteractiveUser(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  std::string clarify(const TaskInstance& task, const Scene& scene,
                      const AmbiguityVerdict& verdict) override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

// ---- pipeline operations ------------------------------------------------

std::vector<std::string> ground_task_objects(
    Reasoner& reasoner, const std::optional<ImageRef>& image, const std::string& task_text,
    const std::string& task_id = "", const SchemaRuntime& runtime = default_schema_runtime(),
    const PromptTemplates& prompts = default_prompt_templates());

struct ClassifyResult {
  AmbiguityVerdict verdict;
  std::vector<std::string> warnings;
};

ClassifyResult classify_ambiguity(
    Reasoner& reasoner, const std::optional<ImageRef>& image, const std::string& task_text,
    const std::vector<std::string>& grounded, const std::string& task_id = "",
    const SchemaRuntime& runtime = default_schema_runtime(),
    const PromptTemplates& prompts = default_prompt_templates());

// Minimal distinguishing phrase for the intended object of the first
// ambiguous referent: "the <color> one" when color singles it out within
// the matched set, otherwise "the <ordinal> one".
std::string simulate_user_answer(const TaskInstance& task, const Scene& scene,
                                 const AmbiguityVerdict& verdict);

std::vector<std::string> resolve(
    Reasoner& reasoner, const std::optional<ImageRef>& image, const std::string& task_text,
    const AmbiguityVerdict& verdict, const std::optional<std::string>& user_answer,
    const std::vector<std::string>& grounded, const std::string& task_id = "",
    const SchemaRuntime& runtime = default_schema_runtime(),
    const PromptTemplates& prompts = default_prompt_templates());

std::vector<std::array<int, 2>> locate_objects(
    Reasoner& reasoner, const std::optional<ImageRef>& image, const Scene& scene,
    const std::vector<std::string>& resolved, const std::string& task_id = "",
    const SchemaRuntime& runtime = default_schema_runtime(),
    const PromptTemplates& prompts = default_prompt_templates());

// ground -> classify -> (clarify if ambiguous) -> resolve -> locate.
// Semantic mistakes become transcript warnings and metric failures;
// only transport/contract errors raise.
ReasoningTranscript run_episode(Reasoner& reasoner, User& user, const TaskInstance& task,
                                const Scene& scene, const std::optional<ImageRef>& image = {},
                                const SchemaRuntime& runtime = default_schema_runtime(),
                                const PromptTemplates& prompts = default_prompt_templates());

// ---- reasoners -----------------------------------------------------------

// Ground-truth reasoner: computes each stage symbolically and serializes
// the result through the scripted backend and the constrained decoder,
// exercising the same FSM path as a model-backed reasoner.
std::unique_ptr<Reasoner> oracle_reasoner(const Scene& scene, const TaskInstance& task,
                                          const SchemaRuntime& runtime = default_schema_runtime());

/// Reasoner that decodes through the FSM index with the given backend.
std::unique_ptr<Reasoner> decoder_reasoner(std::shared_ptr<TokenBackend> backend,
                                           const SchemaRuntime& runtime = default_schema_runtime(),
                                           int max_tokens = kDefaultMaxTokens);

/// Wraps a plain function as a Reasoner (tests, scripted behaviors).
std::unique_ptr<Reasoner> function_reasoner(
    std::function<std::string(const ReasonerQuery&)> fn);

// ---- multiple-choice baseline --------------------------------------------

/// Softmax the four option scores; ambiguous iff >= 2 exceed the threshold.
bool knowno_decision(const std::array<double, 4>& scores, double threshold);

// Prompts the backend once with the four labeled options (A to D) and
// applies knowno_decision to the returned option scores. The backend
// must be configured with a vocabulary of exactly the four letters.
bool knowno_baseline(TokenBackend& backend, const std::string& task_text,
                     const std::array<std::string, 4>& options, double threshold);

}  // namespace ambres
