#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ambres/dataset.hpp"
#include "ambres/pipeline.hpp"

namespace ambres {

struct Confusion {
  int tp = 0;
  int fp = 0;
  int tn = 0;
  int fn = 0;

  int total() const { return tp + fp + tn + fn; }
  double accuracy() const { return total() ? static_cast<double>(tp + tn) / total() : 0.0; }
};

struct ClassificationMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Confusion confusion;
  // set when the respective denominator was zero and the value was pinned to 0
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
};

/// |a n b| / |a u b|; 1.0 when both sets are empty.
double set_iou(const std::set<std::string>& pred, const std::set<std::string>& gt);

/// Ambiguous is the positive class. Throws LengthMismatch.
ClassificationMetrics classification_metrics(const std::vector<bool>& preds,
                                             const std::vector<bool>& gts);

/// Ground-truth grounding set for a task: its normalized referent descriptions.
std::set<std::string> grounding_ground_truth(const TaskInstance& task);

// An episode succeeds iff its resolved descriptions, re-matched against
// the scene, denote exactly the ground-truth intended ids. By default the
// denominator is the ambiguous episodes; set over_all_tasks for the
// alternative reading.
double resolution_success(const std::vector<ReasoningTranscript>& transcripts,
                          const Dataset& dataset, bool over_all_tasks = false);

struct EvalReport {
  std::string condition;
  int episode_count = 0;
  double grounding_iou_mean = 0;
  ClassificationMetrics classification;
  double resolution_success_rate = 0;
  int resolution_episode_count = 0;
};

using ReasonerFactory =
    std::function<std::unique_ptr<Reasoner>(const TaskInstance&, const Scene&)>;

// Runs one episode per task of the split and aggregates grounding IoU
// (macro mean), classification metrics, and resolution success. Episodes
// may run on several threads; aggregation order is fixed by task order.
EvalReport evaluate(const Dataset& dataset, const ReasonerFactory& factory, User& user,
                    Split split, int jobs = 1, bool resolution_over_all = false,
                    std::vector<ReasoningTranscript>* transcripts_out = nullptr,
                    const SchemaRuntime& runtime = default_schema_runtime());

// Delegates to the wrapped reasoner; flips the classification verdict
// with probability flip_prob (seeded per task id) and re-emits a
// schema-valid record. Other stages pass through untouched.
std::unique_ptr<Reasoner> noisy_wrapper(std::shared_ptr<Reasoner> inner, double flip_prob,
                                        uint64_t seed);

std::string format_report_table(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

}  // namespace ambres
