#include "ambres/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <openssl/evp.h>

#include "ambres/errors.hpp"
#include "ambres/render.hpp"
#include "ambres/rng.hpp"
#include "json.hpp"

namespace ambres {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kTaskAttempts = 200;
constexpr int kSceneRetries = 10;
constexpr const char* kDatasetVersion = "1";

std::string scene_label(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", index);
  return buf;
}

std::string task_label(const std::string& scene_id, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_t%02d", index);
  return scene_id + buf;
}

// Candidates the simulated user can single out: unique color within the
// matched set, or the extremum of some ordinal over it.
std::vector<std::string> distinguishable_candidates(const std::set<std::string>& matched,
                                                    const Scene& scene) {
  std::vector<std::string> out;
  for (const std::string& id : matched) {
    const SceneObject* obj = scene.find(id);
    int same_color = 0;
    for (const std::string& other : matched)
      if (scene.find(other)->color == obj->color) ++same_color;
    bool ok = same_color == 1;
    if (!ok) {
      for (Ordinal ord : kAllOrdinals) {
        if (ordinal_pick(matched, ord, scene) == id) {
          ok = true;
          break;
        }
      }
    }
    if (ok) out.push_back(id);
  }
  return out;
}

std::optional<TaskInstance> attempt_task(const Scene& scene, bool target_ambiguous, Rng& rng) {
  const TaskTemplate tmpl =
      std::array{TaskTemplate::Pick, TaskTemplate::MoveTo, TaskTemplate::Stack}[rng.uniform(3)];
  const size_t n_refs = tmpl == TaskTemplate::Pick ? 1 : 2;
  const size_t amb_slot = target_ambiguous ? rng.uniform(n_refs) : n_refs;  // n_refs = none

  std::vector<ReferringExpression> referents;
  std::vector<std::string> intended;
  for (size_t slot = 0; slot < n_refs; ++slot) {
    const SceneObject& anchor = rng.pick(scene.objects);
    ReferringExpression expr;
    expr.category = anchor.category;
    if (rng.uniform(2) == 0) expr.color = anchor.color;

    std::set<std::string> matched = match_expression(expr, scene);
    if (slot == amb_slot) {
      if (matched.size() < 2) return std::nullopt;
      std::vector<std::string> candidates = distinguishable_candidates(matched, scene);
      std::erase_if(candidates, [&](const std::string& id) {
        return std::find(intended.begin(), intended.end(), id) != intended.end();
      });
      if (candidates.empty()) return std::nullopt;
      intended.push_back(candidates[rng.uniform(candidates.size())]);
    } else {
      if (matched.size() != 1) return std::nullopt;
      const std::string& id = *matched.begin();
      if (std::find(intended.begin(), intended.end(), id) != intended.end()) return std::nullopt;
      intended.push_back(id);
    }
    referents.push_back(expr);
  }

  TaskInstance task;
  task.scene_id = scene.scene_id;
  task.tmpl = tmpl;
  task.referents = std::move(referents);
  task.intended = std::move(intended);
  task.text = render_task_text(task.tmpl, task.referents);
  task.ambiguous = ambiguity_label(task, scene);
  if (task.ambiguous != target_ambiguous) return std::nullopt;
  return task;
}

// ambiguous first, strictly alternating while both labels remain
std::vector<bool> label_targets(int total, double ambiguous_fraction) {
  int n_amb = static_cast<int>(std::llround(total * ambiguous_fraction));
  int n_clear = total - n_amb;
  std::vector<bool> targets;
  targets.reserve(static_cast<size_t>(total));
  bool want_amb = true;
  while (n_amb > 0 || n_clear > 0) {
    if ((want_amb && n_amb > 0) || n_clear == 0) {
      targets.push_back(true);
      --n_amb;
    } else {
      targets.push_back(false);
      --n_clear;
    }
    want_amb = !want_amb;
  }
  return targets;
}

std::optional<std::vector<TaskInstance>> make_scene_tasks(const Scene& scene,
                                                          const DatasetConfig& config,
                                                          uint64_t task_seed) {
  Rng rng(task_seed);
  const std::vector<bool> targets = label_targets(config.tasks_per_scene, config.ambiguous_fraction);
  std::vector<TaskInstance> tasks;
  for (int k = 0; k < config.tasks_per_scene; ++k) {
    std::optional<TaskInstance> task;
    for (int attempt = 0; attempt < kTaskAttempts && !task; ++attempt)
      task = attempt_task(scene, targets[static_cast<size_t>(k)], rng);
    if (!task) return std::nullopt;
    task->task_id = task_label(scene.scene_id, k);
    tasks.push_back(std::move(*task));
  }
  return tasks;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("missing file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

std::string dataset_checksum(const Dataset& dataset) {
  const std::string blob = scenes_jsonl(dataset) + tasks_jsonl(dataset);
  return sha256_hex(std::span(reinterpret_cast<const uint8_t*>(blob.data()), blob.size()));
}

ordered_json config_to_json(const DatasetConfig& c) {
  ordered_json j;
  j["n_scenes"] = c.n_scenes;
  j["tasks_per_scene"] = c.tasks_per_scene;
  j["ambiguous_fraction"] = c.ambiguous_fraction;
  j["split_fraction"] = c.split_fraction;
  j["master_seed"] = c.master_seed;
  return j;
}

DatasetConfig config_from_json(const ordered_json& j) {
  DatasetConfig c;
  c.n_scenes = j.at("n_scenes").get<int>();
  c.tasks_per_scene = j.at("tasks_per_scene").get<int>();
  c.ambiguous_fraction = j.at("ambiguous_fraction").get<double>();
  c.split_fraction = j.at("split_fraction").get<double>();
  c.master_seed = j.at("master_seed").get<uint64_t>();
  return c;
}

}  // namespace

const Scene& Dataset::scene_by_id(std::string_view scene_id) const {
  for (const Scene& s : scenes)
    if (s.scene_id == scene_id) return s;
  throw MissingScene("scene " + std::string(scene_id) + " not in dataset");
}

Dataset generate_dataset(const DatasetConfig& config) {
  if (config.n_scenes < 1 || config.tasks_per_scene < 1)
    throw Error("dataset sizes must be positive");
  if (config.ambiguous_fraction <= 0 || config.ambiguous_fraction >= 1 ||
      config.split_fraction <= 0 || config.split_fraction >= 1)
    throw Error("dataset fractions must lie in (0,1)");

  Dataset dataset;
  dataset.config = config;

  for (int i = 0; i < config.n_scenes; ++i) {
    bool done = false;
    for (int retry = 0; retry <= kSceneRetries && !done; ++retry) {
      const uint64_t scene_seed = derive_seed(config.master_seed, static_cast<uint64_t>(i), retry);
      Scene scene = sample_scene(kGridCols, kGridRows, 2, 8, scene_seed, scene_label(i));
      const uint64_t task_seed =
          derive_seed(config.master_seed ^ 0x7a35c5d1u, static_cast<uint64_t>(i), retry);
      if (auto tasks = make_scene_tasks(scene, config, task_seed)) {
        dataset.scenes.push_back(std::move(scene));
        dataset.tasks.insert(dataset.tasks.end(), tasks->begin(), tasks->end());
        done = true;
      }
    }
    if (!done)
      throw GenerationExhausted("scene " + scene_label(i) + " cannot satisfy the label mix after " +
                                std::to_string(kSceneRetries + 1) + " scene resamples");
  }

  // scene-disjoint split: first ceil(n * split_fraction) shuffled scenes -> train
  std::vector<size_t> order(dataset.scenes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(config.master_seed, 0x51a17u));
  split_rng.shuffle(order);
  const size_t n_train =
      static_cast<size_t>(std::ceil(config.split_fraction * static_cast<double>(order.size())));
  std::map<std::string, Split> split_of;
  for (size_t i = 0; i < order.size(); ++i)
    split_of[dataset.scenes[order[i]].scene_id] = i < n_train ? Split::Train : Split::Test;
  for (TaskInstance& t : dataset.tasks) t.split = split_of.at(t.scene_id);

  dataset.checksum = dataset_checksum(dataset);
  return dataset;
}

std::string scenes_jsonl(const Dataset& dataset) {
  std::string out;
  for (const Scene& s : dataset.scenes) out += scene_to_json(s) + "\n";
  return out;
}

std::string tasks_jsonl(const Dataset& dataset) {
  std::string out;
  for (const TaskInstance& t : dataset.tasks) out += task_to_json(t) + "\n";
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");

  ordered_json manifest;
  manifest["version"] = kDatasetVersion;
  manifest["config"] = config_to_json(dataset.config);
  manifest["checksum"] = dataset.checksum;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "scenes.jsonl", scenes_jsonl(dataset));
  write_file(dir / "tasks.jsonl", tasks_jsonl(dataset));
  for (const Scene& s : dataset.scenes)
    write_png(dir / "images" / (s.scene_id + ".png"), render_scene(s));
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const std::string manifest_text = read_file(dir / "manifest.json");
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(manifest_text);
  } catch (const ordered_json::exception& e) {
    throw Error(std::string("bad manifest: ") + e.what());
  }

  Dataset dataset;
  dataset.config = config_from_json(manifest.at("config"));
  dataset.checksum = manifest.at("checksum").get<std::string>();

  const std::string scenes_text = read_file(dir / "scenes.jsonl");
  const std::string tasks_text = read_file(dir / "tasks.jsonl");
  const std::string blob = scenes_text + tasks_text;
  const std::string actual =
      sha256_hex(std::span(reinterpret_cast<const uint8_t*>(blob.data()), blob.size()));
  if (actual != dataset.checksum)
    throw ChecksumMismatch("dataset checksum mismatch in " + dir.string());

  std::istringstream scenes_in(scenes_text);
  for (std::string line; std::getline(scenes_in, line);)
    if (!line.empty()) dataset.scenes.push_back(scene_from_json(line));
  std::istringstream tasks_in(tasks_text);
  for (std::string line; std::getline(tasks_in, line);)
    if (!line.empty()) dataset.tasks.push_back(task_from_json(line));
  return dataset;
}

std::string sha256_hex(std::span<const uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace ambres
