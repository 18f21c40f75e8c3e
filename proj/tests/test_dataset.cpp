#include "ambres/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

using namespace ambres;
namespace fs = std::filesystem;

namespace {

DatasetConfig small_config(uint64_t seed = 0) {
  DatasetConfig c;
  c.n_scenes = 6;
  c.tasks_per_scene = 10;
  c.master_seed = seed;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("default generation yields 40 scenes and 800 balanced tasks") {
  Dataset ds = generate_dataset(DatasetConfig{});
  CHECK(ds.scenes.size() == 40);
  CHECK(ds.tasks.size() == 800);

  int ambiguous = 0;
  for (const TaskInstance& t : ds.tasks) ambiguous += t.ambiguous;
  CHECK(ambiguous >= 360);  // +-0.05 around the 0.5 target
  CHECK(ambiguous <= 440);

  std::set<std::string> train_scenes, test_scenes;
  for (const TaskInstance& t : ds.tasks)
    (t.split == Split::Train ? train_scenes : test_scenes).insert(t.scene_id);
  CHECK(train_scenes.size() == 20);
  CHECK(test_scenes.size() == 20);
  for (const std::string& id : train_scenes) CHECK(test_scenes.count(id) == 0);
}

TEST_CASE("generation is deterministic per master seed") {
  Dataset a = generate_dataset(small_config(42));
  Dataset b = generate_dataset(small_config(42));
  CHECK(a.checksum == b.checksum);
  CHECK(a == b);
  Dataset c = generate_dataset(small_config(43));
  CHECK(a.checksum != c.checksum);
}

TEST_CASE("persisted labels survive re-verification against their scenes") {
  Dataset ds = generate_dataset(small_config(7));
  for (const TaskInstance& t : ds.tasks) {
    const Scene& scene = ds.scene_by_id(t.scene_id);
    CHECK(t.ambiguous == ambiguity_label(t, scene));
    CHECK(t.intended.size() == t.referents.size());
    std::set<std::string> distinct(t.intended.begin(), t.intended.end());
    CHECK(distinct.size() == t.intended.size());
    int ambiguous_referents = 0;
    for (size_t i = 0; i < t.referents.size(); ++i) {
      std::set<std::string> matched = match_expression(t.referents[i], scene);
      CHECK(matched.size() >= 1);
      CHECK(matched.count(t.intended[i]) == 1);
      if (matched.size() >= 2) ++ambiguous_referents;
    }
    CHECK(ambiguous_referents == (t.ambiguous ? 1 : 0));
    CHECK(t.text == render_task_text(t.tmpl, t.referents));
  }
}

TEST_CASE("write/read round-trips the dataset") {
  TempDir dir("ambres_test_roundtrip");
  Dataset ds = generate_dataset(small_config(3));
  write_dataset(ds, dir.path);
  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(fs::exists(dir.path / "scenes.jsonl"));
  CHECK(fs::exists(dir.path / "tasks.jsonl"));
  for (const Scene& s : ds.scenes) CHECK(fs::exists(dir.path / "images" / (s.scene_id + ".png")));

  Dataset back = read_dataset(dir.path);
  CHECK(back == ds);
}

TEST_CASE("corrupting a persisted byte trips the checksum") {
  TempDir dir("ambres_test_corrupt");
  Dataset ds = generate_dataset(small_config(4));
  write_dataset(ds, dir.path);

  std::string tasks = slurp(dir.path / "tasks.jsonl");
  tasks[tasks.size() / 2] = tasks[tasks.size() / 2] == 'a' ? 'b' : 'a';
  std::ofstream(dir.path / "tasks.jsonl", std::ios::binary | std::ios::trunc) << tasks;
  CHECK_THROWS_AS(read_dataset(dir.path), ChecksumMismatch);
}

TEST_CASE("reading an incomplete directory reports the missing file") {
  TempDir dir("ambres_test_missing");
  CHECK_THROWS_AS(read_dataset(dir.path), MissingFile);

  Dataset ds = generate_dataset(small_config(5));
  write_dataset(ds, dir.path);
  fs::remove(dir.path / "scenes.jsonl");
  CHECK_THROWS_AS(read_dataset(dir.path), MissingFile);
}

TEST_CASE("repeated writes are byte-identical") {
  TempDir a("ambres_test_bytes_a");
  TempDir b("ambres_test_bytes_b");
  Dataset ds1 = generate_dataset(small_config(8));
  Dataset ds2 = generate_dataset(small_config(8));
  write_dataset(ds1, a.path);
  write_dataset(ds2, b.path);
  CHECK(slurp(a.path / "manifest.json") == slurp(b.path / "manifest.json"));
  CHECK(slurp(a.path / "scenes.jsonl") == slurp(b.path / "scenes.jsonl"));
  CHECK(slurp(a.path / "tasks.jsonl") == slurp(b.path / "tasks.jsonl"));
  for (const Scene& s : ds1.scenes)
    CHECK(slurp(a.path / "images" / (s.scene_id + ".png")) ==
          slurp(b.path / "images" / (s.scene_id + ".png")));
}

TEST_CASE("config validation") {
  DatasetConfig c = small_config();
  c.ambiguous_fraction = 0.0;
  CHECK_THROWS_AS(generate_dataset(c), Error);
  c = small_config();
  c.split_fraction = 1.0;
  CHECK_THROWS_AS(generate_dataset(c), Error);
  c = small_config();
  c.n_scenes = 0;
  CHECK_THROWS_AS(generate_dataset(c), Error);
}

TEST_CASE("per-scene task ids are stable and unique") {
  Dataset ds = generate_dataset(small_config(6));
  std::set<std::string> ids;
  for (const TaskInstance& t : ds.tasks) {
    CHECK(ids.insert(t.task_id).second);
    CHECK(t.task_id.rfind(t.scene_id + "_t", 0) == 0);
  }
  CHECK(ds.tasks.size() == ids.size());
}

TEST_CASE("split fractions other than one half stay within one scene of the target") {
  DatasetConfig c = small_config(9);
  c.n_scenes = 7;
  c.split_fraction = 0.4;  // ceil(2.8) = 3 train scenes
  Dataset ds = generate_dataset(c);
  std::set<std::string> train;
  for (const TaskInstance& t : ds.tasks)
    if (t.split == Split::Train) train.insert(t.scene_id);
  CHECK(train.size() == 3);
}
