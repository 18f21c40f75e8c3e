#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "ambres/dataset.hpp"
#include "ambres/decoder.hpp"
#include "ambres/eval.hpp"
#include "ambres/pipeline.hpp"
#include "ambres/render.hpp"
#include "ambres/rng.hpp"

namespace {

using namespace ambres;

int http_timeout_ms() {
  if (const char* env = std::getenv("AMBRES_HTTP_TIMEOUT_MS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw Error("AMBRES_HTTP_TIMEOUT_MS must be an integer");
    }
  }
  return 30000;
}

// backend selector mini-language: oracle | mock[:seed] | noisy:<p> | http:<url>
struct BackendSpec {
  enum class Kind { Oracle, Mock, Noisy, Http };
  Kind kind = Kind::Oracle;
  uint64_t mock_seed = 0;
  bool mock_seed_set = false;
  double flip_prob = 0;
  std::string url;
};

BackendSpec parse_backend_spec(const std::string& spec) {
  BackendSpec b;
  if (spec == "oracle") {
    b.kind = BackendSpec::Kind::Oracle;
  } else if (spec == "mock") {
    b.kind = BackendSpec::Kind::Mock;
  } else if (spec.rfind("mock:", 0) == 0) {
    b.kind = BackendSpec::Kind::Mock;
    try {
      b.mock_seed = std::stoull(spec.substr(5));
    } catch (const std::exception&) {
      throw Error("mock seed must be an unsigned integer: " + spec);
    }
    b.mock_seed_set = true;
  } else if (spec.rfind("noisy:", 0) == 0) {
    b.kind = BackendSpec::Kind::Noisy;
    try {
      b.flip_prob = std::stod(spec.substr(6));
    } catch (const std::exception&) {
      throw Error("noisy flip probability must be a number: " + spec);
    }
    if (b.flip_prob < 0 || b.flip_prob > 1) throw Error("noisy flip probability must lie in [0,1]");
  } else if (spec.rfind("http:", 0) == 0) {
    b.kind = BackendSpec::Kind::Http;
    b.url = spec.substr(5);
    if (b.url.rfind("//", 0) == 0) b.url = "http:" + b.url;  // allow full http://host URLs
    if (b.url.empty()) throw Error("http backend needs a URL");
  } else {
    throw Error("unknown backend spec \"" + spec + "\" (use oracle | mock[:seed] | noisy:<p> | http:<url>)");
  }
  return b;
}

ReasonerFactory make_factory(const BackendSpec& spec, uint64_t seed) {
  const SchemaRuntime& runtime = default_schema_runtime();
  switch (spec.kind) {
    case BackendSpec::Kind::Oracle:
      return [&runtime](const TaskInstance& task, const Scene& scene) {
        return oracle_reasoner(scene, task, runtime);
      };
    case BackendSpec::Kind::Noisy: {
      double p = spec.flip_prob;
      return [&runtime, p, seed](const TaskInstance& task, const Scene& scene) {
        return noisy_wrapper(std::shared_ptr<Reasoner>(oracle_reasoner(scene, task, runtime)), p,
                             seed);
      };
    }
    case BackendSpec::Kind::Mock: {
      const uint64_t base = spec.mock_seed_set ? spec.mock_seed : seed;
      return [&runtime, base](const TaskInstance& task, const Scene&) {
        auto backend = std::shared_ptr<TokenBackend>(
            mock_backend(derive_seed(base, fnv1a64(task.task_id)), runtime.vocab().size()));
        return decoder_reasoner(backend, runtime, 4096);
      };
    }
    case BackendSpec::Kind::Http: {
      std::string url = spec.url;
      int timeout = http_timeout_ms();
      return [&runtime, url, timeout](const TaskInstance&, const Scene&) {
        auto backend = std::shared_ptr<TokenBackend>(
            http_backend(url, runtime.vocab().size(), timeout));
        return decoder_reasoner(backend, runtime, 4096);
      };
    }
  }
  throw Error("unreachable backend kind");
}

int cmd_gen(int scenes, int tasks_per_scene, uint64_t seed, const std::string& out_dir) {
  DatasetConfig config;
  config.n_scenes = scenes;
  config.tasks_per_scene = tasks_per_scene;
  config.master_seed = seed;
  Dataset dataset = generate_dataset(config);
  write_dataset(dataset, out_dir);
  int ambiguous = 0;
  for (const TaskInstance& t : dataset.tasks) ambiguous += t.ambiguous;
  std::cout << "seed: " << seed << "\n"
            << "scenes: " << dataset.scenes.size() << "\n"
            << "tasks: " << dataset.tasks.size() << " (" << ambiguous << " ambiguous)\n"
            << "checksum: " << dataset.checksum << "\n"
            << "wrote: " << out_dir << "\n";
  return 0;
}

int cmd_render(const std::string& scene_file, const std::string& out_png, uint64_t seed) {
  std::cout << "seed: " << seed << "\n";
  std::ifstream in(scene_file, std::ios::binary);
  if (!in) throw MissingFile("missing scene file " + scene_file);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Scene scene = scene_from_json(text);
  write_png(out_png, render_scene(scene));
  std::cout << "wrote: " << out_png << "\n";
  return 0;
}

int cmd_eval(const std::string& dataset_dir, const std::string& backend, const std::string& split,
             int jobs, uint64_t seed, const std::string& report_file) {
  Dataset dataset = read_dataset(dataset_dir);
  auto split_v = parse_split(split);
  if (!split_v) throw Error("split must be train or test");
  BackendSpec spec = parse_backend_spec(backend);
  ReasonerFactory factory = make_factory(spec, seed);
  SimulatedUser user;
  EvalReport report = evaluate(dataset, factory, user, *split_v, jobs);
  report.condition = backend + "/" + split;
  std::cout << "seed: " << seed << "\n" << format_report_table(report);
  if (!report_file.empty()) {
    std::ofstream out(report_file, std::ios::trunc);
    if (!out) throw Error("cannot open " + report_file + " for writing");
    out << report_to_json(report) << "\n";
    std::cout << "report: " << report_file << "\n";
  }
  return 0;
}

int cmd_decode(const std::string& schema_arg, const std::string& backend, uint64_t seed,
               int max_tokens) {
  const SchemaRuntime& runtime = default_schema_runtime();
  SchemaNode schema;
  if (schema_arg == "grounding") {
    schema = builtin_schemas().grounding;
  } else if (schema_arg == "ambiguity") {
    schema = builtin_schemas().ambiguity;
  } else {
    std::ifstream in(schema_arg, std::ios::binary);
    if (!in) throw MissingFile("missing schema file " + schema_arg);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    schema = parse_schema(text);
  }

  BackendSpec spec = parse_backend_spec(backend);
  std::unique_ptr<TokenBackend> token_backend;
  switch (spec.kind) {
    case BackendSpec::Kind::Mock:
      token_backend = mock_backend(spec.mock_seed_set ? spec.mock_seed : seed,
                                   runtime.vocab().size());
      break;
    case BackendSpec::Kind::Http:
      token_backend = http_backend(spec.url, runtime.vocab().size(), http_timeout_ms());
      break;
    default:
      throw Error("decode accepts token-level backends only: mock[:seed] | http:<url>");
  }

  const CompiledSchema& cs = runtime.compiled_for(schema);
  PromptContext ctx{"decode demo for the " + schema_arg + " schema", std::nullopt, {}};
  DecodeResult result =
      decode(cs.index, runtime.vocab(), *token_backend, DecodePolicy::greedy(), max_tokens, ctx);
  std::cout << "seed: " << seed << "\n"
            << result.text << "\n"
            << "steps: " << result.steps << " terminated_by: "
            << (result.terminated_by == TerminationReason::Eos ? "eos" : "max_tokens") << "\n";
  return 0;
}

int cmd_interact(const std::string& dataset_dir, const std::string& task_id,
                 const std::string& backend, uint64_t seed) {
  Dataset dataset = read_dataset(dataset_dir);
  const TaskInstance* task = nullptr;
  for (const TaskInstance& t : dataset.tasks)
    if (t.task_id == task_id) task = &t;
  if (!task) throw Error("task " + task_id + " not in dataset");
  const Scene& scene = dataset.scene_by_id(task->scene_id);

  BackendSpec spec = parse_backend_spec(backend);
  std::unique_ptr<Reasoner> reasoner = make_factory(spec, seed)(*task, scene);
  std::optional<ImageRef> image;
  auto image_path = std::filesystem::path(dataset_dir) / "images" / (scene.scene_id + ".png");
  if (std::filesystem::exists(image_path)) image = ImageRef::from_path(image_path.string());

  std::cout << "seed: " << seed << "\n"
            << "task: " << task->task_id << "\n"
            << "text: " << task->text << "\n" << std::flush;
  InteractiveUser user(std::cin, std::cout);
  ReasoningTranscript t = run_episode(*reasoner, user, *task, scene, image);

  std::cout << "grounded:";
  for (const std::string& g : t.grounded) std::cout << " \"" << g << "\"";
  std::cout << "\nambiguous: " << (t.verdict.ambiguous ? "true" : "false") << "\n"
            << "explanation: " << t.verdict.explanation << "\n";
  if (t.verdict.ambiguous) {
    std::cout << "question: " << t.verdict.clarifying_question << "\n"
              << "answer: " << (t.user_answer ? *t.user_answer : "") << "\n";
  }
  std::cout << "resolved:";
  for (const std::string& r : t.resolved) std::cout << " \"" << r << "\"";
  std::cout << "\npoints:";
  for (const auto& p : t.points) std::cout << " (" << p[0] << ", " << p[1] << ")";
  std::cout << "\n";
  for (const std::string& w : t.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

int cmd_knowno(const std::vector<std::string>& options, const std::vector<double>& scores,
               double threshold, uint64_t seed) {
  std::cout << "seed: " << seed << "\n";
  if (options.size() != 4) throw Error("knowno needs exactly 4 options");
  if (scores.size() != 4) throw Error("knowno needs exactly 4 scores");
  const bool ambiguous =
      knowno_decision({scores[0], scores[1], scores[2], scores[3]}, threshold);
  static const char* labels[] = {"A", "B", "C", "D"};
  for (size_t i = 0; i < 4; ++i)
    std::cout << labels[i] << ") " << options[i] << "  score=" << scores[i] << "\n";
  std::cout << "threshold: " << threshold << "\n"
            << "ambiguous: " << (ambiguous ? "true" : "false") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-ambiguity resolution toolkit"};
  app.require_subcommand(1);

  uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen", "generate a dataset directory");
  int gen_scenes = 40;
  int gen_tasks = 20;
  std::string gen_out;
  gen->add_option("--scenes", gen_scenes, "number of scenes");
  gen->add_option("--tasks-per-scene", gen_tasks, "task descriptions per scene");
  gen->add_option("--seed", seed, "master seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* render = app.add_subcommand("render", "render a scene JSON to PNG");
  std::string render_scene_file, render_out;
  render->add_option("--scene", render_scene_file, "scene JSON file")->required();
  render->add_option("--out", render_out, "output PNG path")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a backend on a dataset split");
  std::string eval_dataset, eval_backend, eval_split = "test", eval_report;
  int eval_jobs = 1;
  eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval->add_option("--backend", eval_backend, "oracle | mock[:seed] | noisy:<p> | http:<url>")
      ->required();
  eval->add_option("--split", eval_split, "train | test");
  eval->add_option("--jobs", eval_jobs, "parallel episodes");
  eval->add_option("--seed", seed, "seed for seeded backends");
  eval->add_option("--report", eval_report, "write the JSON report here");

  auto* decode_cmd = app.add_subcommand("decode", "constrained decoding demo");
  std::string decode_schema, decode_backend = "mock";
  int decode_max_tokens = kDefaultMaxTokens;
  decode_cmd->add_option("--schema", decode_schema, "grounding | ambiguity | schema file")
      ->required();
  decode_cmd->add_option("--backend", decode_backend, "mock[:seed] | http:<url>");
  decode_cmd->add_option("--seed", seed, "mock backend seed");
  decode_cmd->add_option("--max-tokens", decode_max_tokens, "decode step limit");

  auto* interact = app.add_subcommand("interact", "run one clarification episode interactively");
  std::string interact_dataset, interact_task, interact_backend = "oracle";
  interact->add_option("--dataset", interact_dataset, "dataset directory")->required();
  interact->add_option("--task", interact_task, "task id")->required();
  interact->add_option("--backend", interact_backend, "reasoner backend spec");
  interact->add_option("--seed", seed, "seed for seeded backends");

  auto* knowno = app.add_subcommand("knowno", "multiple-choice ambiguity baseline");
  std::vector<std::string> knowno_options;
  std::vector<double> knowno_scores;
  double knowno_threshold = 0.3;
  knowno->add_option("--options", knowno_options, "four action strings")->expected(4)->required();
  knowno->add_option("--scores", knowno_scores, "four option scores")->expected(4)->required();
  knowno->add_option("--threshold", knowno_threshold, "probability threshold in (0,1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors -> 2
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_scenes, gen_tasks, seed, gen_out);
    if (render->parsed()) return cmd_render(render_scene_file, render_out, seed);
    if (eval->parsed())
      return cmd_eval(eval_dataset, eval_backend, eval_split, eval_jobs, seed, eval_report);
    if (decode_cmd->parsed())
      return cmd_decode(decode_schema, decode_backend, seed, decode_max_tokens);
    if (interact->parsed())
      return cmd_interact(interact_dataset, interact_task, interact_backend, seed);
    if (knowno->parsed()) return cmd_knowno(knowno_options, knowno_scores, knowno_threshold, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
