#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ambres/sim_world.hpp"

namespace ambres {

struct DatasetConfig {
  int n_scenes = 40;
  int tasks_per_scene = 20;
  double ambiguous_fraction = 0.5;
  double split_fraction = 0.5;  // fraction of scenes assigned to train
  uint64_t master_seed = 0;
  bool operator==(const DatasetConfig&) const = default;
};

struct Dataset {
  DatasetConfig config;
  std::vector<Scene> scenes;
  std::vector<TaskInstance> tasks;
  std::string checksum;  // sha256 over scenes.jsonl + tasks.jsonl bytes
  bool operator==(const Dataset&) const = default;

  const Scene& scene_by_id(std::string_view scene_id) const;
};

// Balanced ambiguous/unambiguous task generation over seeded scenes,
// with a scene-disjoint train/test split. Fully deterministic per
// master_seed: repeated runs produce byte-identical serializations.
Dataset generate_dataset(const DatasetConfig& config);

// Directory layout: manifest.json, scenes.jsonl, tasks.jsonl,
// images/<scene_id>.png. The manifest checksum is verified on read.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

std::string sha256_hex(std::span<const uint8_t> bytes);

std::string scenes_jsonl(const Dataset& dataset);
std::string tasks_jsonl(const Dataset& dataset);

}  // namespace ambres
