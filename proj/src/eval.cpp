#include "ambres/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

#include "ambres/rng.hpp"
#include "json.hpp"

namespace ambres {

namespace {

using ordered_json = nlohmann::ordered_json;

std::set<std::string> resolved_ids(const ReasoningTranscript& t, const Scene& scene) {
  std::set<std::string> ids;
  for (const std::string& desc : t.resolved) {
    auto expr = parse_description(desc);
    if (!expr) continue;  // ungroundable description counts as a miss
    for (const std::string& id : match_expression(*expr, scene)) ids.insert(id);
  }
  return ids;
}

}  // namespace

double set_iou(const std::set<std::string>& pred, const std::set<std::string>& gt) {
  if (pred.empty() && gt.empty()) return 1.0;
  size_t inter = 0;
  for (const std::string& p : pred) inter += gt.count(p);
  const size_t uni = pred.size() + gt.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

ClassificationMetrics classification_metrics(const std::vector<bool>& preds,
                                             const std::vector<bool>& gts) {
  if (preds.size() != gts.size())
    throw LengthMismatch("prediction and ground-truth lists differ in length");
  ClassificationMetrics m;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && gts[i]) ++m.confusion.tp;
    else if (preds[i] && !gts[i]) ++m.confusion.fp;
    else if (!preds[i] && gts[i]) ++m.confusion.fn;
    else ++m.confusion.tn;
  }
  if (m.confusion.tp + m.confusion.fp > 0)
    m.precision = static_cast<double>(m.confusion.tp) / (m.confusion.tp + m.confusion.fp);
  else
    m.precision_degenerate = true;
  if (m.confusion.tp + m.confusion.fn > 0)
    m.recall = static_cast<double>(m.confusion.tp) / (m.confusion.tp + m.confusion.fn);
  else
    m.recall_degenerate = true;
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else
    m.f1_degenerate = true;
  return m;
}

std::set<std::string> grounding_ground_truth(const TaskInstance& task) {
  std::set<std::string> out;
  for (const ReferringExpression& r : task.referents) out.insert(normalize(realize_expression(r)));
  return out;
}

double resolution_success(const std::vector<ReasoningTranscript>& transcripts,
                          const Dataset& dataset, bool over_all_tasks) {
  if (transcripts.empty()) throw Error("resolution_success over an empty transcript list");
  std::map<std::string, const TaskInstance*> by_id;
  for (const TaskInstance& t : dataset.tasks) by_id[t.task_id] = &t;

  int episodes = 0;
  int successes = 0;
  for (const ReasoningTranscript& tr : transcripts) {
    auto it = by_id.find(tr.task_id);
    if (it == by_id.end()) throw Error("transcript for unknown task " + tr.task_id);
    const TaskInstance& task = *it->second;
    if (!over_all_tasks && !task.ambiguous) continue;
    const Scene& scene = dataset.scene_by_id(task.scene_id);  // MissingScene if absent
    ++episodes;
    std::set<std::string> gt(task.intended.begin(), task.intended.end());
    if (resolved_ids(tr, scene) == gt) ++successes;
  }
  if (episodes == 0) throw Error("no episodes in the resolution denominator");
  return static_cast<double>(successes) / episodes;
}

EvalReport evaluate(const Dataset& dataset, const ReasonerFactory& factory, User& user,
                    Split split, int jobs, bool resolution_over_all,
                    std::vector<ReasoningTranscript>* transcripts_out,
                    const SchemaRuntime& runtime) {
  std::vector<const TaskInstance*> tasks;
  for (const TaskInstance& t : dataset.tasks)
    if (t.split == split) tasks.push_back(&t);
  if (tasks.empty()) throw Error("split contains no tasks");

  std::vector<ReasoningTranscript> transcripts(tasks.size());
  auto run_one = [&](size_t i) {
    const TaskInstance& task = *tasks[i];
    const Scene& scene = dataset.scene_by_id(task.scene_id);
    std::unique_ptr<Reasoner> reasoner = factory(task, scene);
    transcripts[i] = run_episode(*reasoner, user, task, scene, std::nullopt, runtime);
  };

  if (jobs <= 1) {
    for (size_t i = 0; i < tasks.size(); ++i) run_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (int k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  EvalReport report;
  report.episode_count = static_cast<int>(tasks.size());

  double iou_sum = 0;
  std::vector<bool> preds, gts;
  preds.reserve(tasks.size());
  gts.reserve(tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    std::set<std::string> pred(transcripts[i].grounded.begin(), transcripts[i].grounded.end());
    iou_sum += set_iou(pred, grounding_ground_truth(*tasks[i]));
    preds.push_back(transcripts[i].verdict.ambiguous);
    gts.push_back(tasks[i]->ambiguous);
  }
  report.grounding_iou_mean = iou_sum / static_cast<double>(tasks.size());
  report.classification = classification_metrics(preds, gts);

  int resolution_episodes = 0;
  for (const TaskInstance* t : tasks)
    if (resolution_over_all || t->ambiguous) ++resolution_episodes;
  report.resolution_episode_count = resolution_episodes;
  report.resolution_success_rate =
      resolution_episodes > 0 ? resolution_success(transcripts, dataset, resolution_over_all) : 0.0;

  if (transcripts_out) *transcripts_out = std::move(transcripts);
  return report;
}

namespace {

class NoisyReasoner final : public Reasoner {
 public:
  NoisyReasoner(std::shared_ptr<Reasoner> inner, double flip_prob, uint64_t seed)
      : inner_(std::move(inner)), flip_prob_(flip_prob), seed_(seed) {
    if (flip_prob_ < 0.0 || flip_prob_ > 1.0) throw Error("flip_prob must lie in [0,1]");
  }

  std::string answer(const ReasonerQuery& q) override {
    std::string raw = inner_->answer(q);
    if (q.stage != Stage::Classify || flip_prob_ == 0.0) return raw;

    Rng rng(derive_seed(seed_, fnv1a64(q.task_id)));
    if (!rng.bernoulli(flip_prob_)) return raw;

    ordered_json j = ordered_json::parse(raw);
    const bool flipped = !j.at("ambiguity").get<bool>();
    std::string explanation = j.at("explanation").get<std::string>();
    std::string question = j.at("clarifying_question").get<std::string>();
    if (flipped) {
      if (question.empty()) question = "which one do you mean?";
    } else {
      question.clear();
    }
    return std::string("{\"ambiguity\": ") + (flipped ? "true" : "false") +
           ", \"explanation\": \"" + json_escape_string(explanation) +
           "\", \"clarifying_question\": \"" + json_escape_string(question) + "\"}";
  }

 private:
  std::shared_ptr<Reasoner> inner_;
  double flip_prob_;
  uint64_t seed_;
};

std::string format2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::unique_ptr<Reasoner> noisy_wrapper(std::shared_ptr<Reasoner> inner, double flip_prob,
                                        uint64_t seed) {
  return std::make_unique<NoisyReasoner>(std::move(inner), flip_prob, seed);
}

std::string format_report_table(const EvalReport& report) {
  std::string out;
  out += "Condition            | Grounding | Ambiguity Classification | Resolution\n";
  out += "                     | IoU       | Precision Recall  F1     | Success\n";
  out += "---------------------+-----------+--------------------------+-----------\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s | %-9s | %-9s %-7s %-6s | %s (%d eps)\n",
                report.condition.c_str(), format2(report.grounding_iou_mean).c_str(),
                format2(report.classification.precision).c_str(),
                format2(report.classification.recall).c_str(),
                format2(report.classification.f1).c_str(),
                format2(report.resolution_success_rate).c_str(), report.resolution_episode_count);
  out += line;
  return out;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["condition"] = report.condition;
  j["episode_count"] = report.episode_count;
  j["grounding_iou_mean"] = report.grounding_iou_mean;
  j["precision"] = report.classification.precision;
  j["recall"] = report.classification.recall;
  j["f1"] = report.classification.f1;
  j["confusion"] = {{"tp", report.classification.confusion.tp},
                    {"fp", report.classification.confusion.fp},
                    {"tn", report.classification.confusion.tn},
                    {"fn", report.classification.confusion.fn}};
  j["accuracy"] = report.classification.confusion.accuracy();
  j["resolution_success_rate"] = report.resolution_success_rate;
  j["resolution_episode_count"] = report.resolution_episode_count;
  return j.dump(2);
}

}  // namespace ambres
