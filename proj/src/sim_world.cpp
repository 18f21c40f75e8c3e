#include "ambres/sim_world.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "ambres/rng.hpp"
#include "json.hpp"

namespace ambres {

namespace {

using ordered_json = nlohmann::ordered_json;

template <class Enum, size_t N>
std::optional<Enum> parse_enum(std::string_view s, const std::array<std::pair<const char*, Enum>, N>& table) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  return std::nullopt;
}

constexpr std::array<std::pair<const char*, Category>, 2> kCategoryNames{{
    {"block", Category::Block}, {"bowl", Category::Bowl}}};
constexpr std::array<std::pair<const char*, Color>, 6> kColorNames{{
    {"red", Color::Red}, {"green", Color::Green}, {"blue", Color::Blue},
    {"yellow", Color::Yellow}, {"orange", Color::Orange}, {"purple", Color::Purple}}};
constexpr std::array<std::pair<const char*, Ordinal>, 4> kOrdinalNames{{
    {"leftmost", Ordinal::Leftmost}, {"rightmost", Ordinal::Rightmost},
    {"frontmost", Ordinal::Frontmost}, {"backmost", Ordinal::Backmost}}};
constexpr std::array<std::pair<const char*, TaskTemplate>, 3> kTemplateNames{{
    {"pick", TaskTemplate::Pick}, {"move_to", TaskTemplate::MoveTo}, {"stack", TaskTemplate::Stack}}};
constexpr std::array<std::pair<const char*, Split>, 2> kSplitNames{{
    {"train", Split::Train}, {"test", Split::Test}}};

template <class Enum, size_t N>
std::string enum_name(Enum v, const std::array<std::pair<const char*, Enum>, N>& table) {
  for (const auto& [name, value] : table)
    if (v == value) return name;
  throw Error("unknown enum value");
}

ReferringExpression referent_from_json(const ordered_json& j) {
  ReferringExpression expr;
  auto cat = parse_category(j.at("category").get<std::string>());
  if (!cat) throw Error("bad referent category");
  expr.category = *cat;
  if (j.contains("color")) {
    auto col = parse_color(j.at("color").get<std::string>());
    if (!col) throw Error("bad referent color");
    expr.color = *col;
  }
  if (j.contains("ordinal")) {
    auto ord = parse_ordinal(j.at("ordinal").get<std::string>());
    if (!ord) throw Error("bad referent ordinal");
    expr.ordinal = *ord;
  }
  return expr;
}

ordered_json referent_to_json(const ReferringExpression& expr) {
  ordered_json j;
  j["category"] = to_string(expr.category);
  if (expr.color) j["color"] = to_string(*expr.color);
  if (expr.ordinal) j["ordinal"] = to_string(*expr.ordinal);
  return j;
}

}  // namespace

std::string to_string(Category c) { return enum_name(c, kCategoryNames); }
std::string to_string(Color c) { return enum_name(c, kColorNames); }
std::string to_string(Ordinal o) { return enum_name(o, kOrdinalNames); }
std::string to_string(TaskTemplate t) { return enum_name(t, kTemplateNames); }
std::string to_string(Split s) { return enum_name(s, kSplitNames); }
std::optional<Category> parse_category(std::string_view s) { return parse_enum(s, kCategoryNames); }
std::optional<Color> parse_color(std::string_view s) { return parse_enum(s, kColorNames); }
std::optional<Ordinal> parse_ordinal(std::string_view s) { return parse_enum(s, kOrdinalNames); }
std::optional<TaskTemplate> parse_template(std::string_view s) { return parse_enum(s, kTemplateNames); }
std::optional<Split> parse_split(std::string_view s) { return parse_enum(s, kSplitNames); }

const SceneObject* Scene::find(std::string_view id) const {
  for (const SceneObject& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

Scene sample_scene(int cols, int rows, int min_objects, int max_objects, uint64_t seed,
                   std::string scene_id) {
  if (cols < 1 || rows < 1 || min_objects < 1 || max_objects < min_objects ||
      max_objects > cols * rows)
    throw Error("invalid scene sampling ranges");

  Rng rng(seed);
  Scene scene;
  scene.scene_id = scene_id.empty() ? "scene_seed_" + std::to_string(seed) : std::move(scene_id);
  scene.cols = cols;
  scene.rows = rows;
  scene.seed = seed;

  const int count = rng.uniform_int(min_objects, max_objects);
  std::vector<Cell> free_cells;
  free_cells.reserve(static_cast<size_t>(cols * rows));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) free_cells.push_back(Cell{c, r});

  for (int i = 0; i < count; ++i) {
    SceneObject obj;
    obj.id = "obj_" + std::to_string(i);
    obj.category = rng.uniform(2) == 0 ? Category::Block : Category::Bowl;
    obj.color = kAllColors[rng.uniform(6)];
    size_t pick = static_cast<size_t>(rng.uniform(free_cells.size()));
    obj.cell = free_cells[pick];
    free_cells.erase(free_cells.begin() + static_cast<ptrdiff_t>(pick));
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

std::set<std::string> match_expression(const ReferringExpression& expr, const Scene& scene) {
  std::set<std::string> ids;
  for (const SceneObject& o : scene.objects) {
    if (o.category != expr.category) continue;
    if (expr.color && o.color != *expr.color) continue;
    ids.insert(o.id);
  }
  if (expr.ordinal && !ids.empty()) return {ordinal_pick(ids, *expr.ordinal, scene)};
  return ids;
}

std::string ordinal_pick(const std::set<std::string>& candidates, Ordinal ordinal,
                         const Scene& scene) {
  if (candidates.empty()) throw Error("ordinal_pick over empty candidate set");
  const SceneObject* best = nullptr;
  auto better = [&](const SceneObject& a, const SceneObject& b) {
    switch (ordinal) {
      case Ordinal::Leftmost:
        return a.cell.col != b.cell.col ? a.cell.col < b.cell.col : a.cell.row < b.cell.row;
      case Ordinal::Rightmost:
        return a.cell.col != b.cell.col ? a.cell.col > b.cell.col : a.cell.row < b.cell.row;
      case Ordinal::Frontmost:  // closest to the viewer = largest row
        return a.cell.row != b.cell.row ? a.cell.row > b.cell.row : a.cell.col < b.cell.col;
      case Ordinal::Backmost:
        return a.cell.row != b.cell.row ? a.cell.row < b.cell.row : a.cell.col < b.cell.col;
    }
    return false;
  };
  for (const std::string& id : candidates) {
    const SceneObject* o = scene.find(id);
    if (!o) throw Error("ordinal_pick candidate not in scene: " + id);
    if (!best || better(*o, *best)) best = o;
  }
  return best->id;
}

bool ambiguity_label(const TaskInstance& task, const Scene& scene) {
  bool ambiguous = false;
  for (const ReferringExpression& ref : task.referents) {
    size_t n = match_expression(ref, scene).size();
    if (n == 0)
      throw UnmatchableReferent("referent \"" + realize_expression(ref) + "\" matches no object in " +
                                scene.scene_id);
    if (n >= 2) ambiguous = true;
  }
  return ambiguous;
}

std::string canonical_name(const SceneObject& obj) {
  return to_string(obj.color) + " " + to_string(obj.category);
}

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string realize_expression(const ReferringExpression& expr) {
  std::string out;
  if (expr.ordinal) out += to_string(*expr.ordinal) + " ";
  if (expr.color) out += to_string(*expr.color) + " ";
  out += to_string(expr.category);
  return out;
}

std::optional<ReferringExpression> parse_description(std::string_view description) {
  const std::string norm = normalize(description);
  std::vector<std::string> words;
  size_t start = 0;
  while (start < norm.size()) {
    size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    words.push_back(norm.substr(start, end - start));
    start = end + 1;
  }
  if (words.empty() || words.size() > 3) return std::nullopt;

  ReferringExpression expr;
  auto cat = parse_category(words.back());
  if (!cat) return std::nullopt;
  expr.category = *cat;
  words.pop_back();
  if (!words.empty()) {
    if (auto col = parse_color(words.back())) {
      expr.color = *col;
      words.pop_back();
    }
  }
  if (!words.empty()) {
    auto ord = parse_ordinal(words.back());
    if (!ord) return std::nullopt;
    expr.ordinal = *ord;
    words.pop_back();
  }
  if (!words.empty()) return std::nullopt;
  return expr;
}

std::string render_task_text(TaskTemplate tmpl, std::span<const ReferringExpression> referents) {
  auto ref = [&](size_t i) { return realize_expression(referents[i]); };
  switch (tmpl) {
    case TaskTemplate::Pick:
      if (referents.size() != 1) throw Error("pick template takes one referent");
      return "pick up the " + ref(0);
    case TaskTemplate::MoveTo:
      if (referents.size() != 2) throw Error("move_to template takes two referents");
      return "move the " + ref(0) + " to the " + ref(1);
    case TaskTemplate::Stack:
      if (referents.size() != 2) throw Error("stack template takes two referents");
      return "stack the " + ref(0) + " on the " + ref(1);
  }
  throw Error("unknown task template");
}

std::string scene_to_json(const Scene& scene) {
  ordered_json j;
  j["scene_id"] = scene.scene_id;
  j["grid"] = {scene.cols, scene.rows};
  j["seed"] = scene.seed;
  ordered_json objs = ordered_json::array();
  for (const SceneObject& o : scene.objects) {
    ordered_json jo;
    jo["id"] = o.id;
    jo["category"] = to_string(o.category);
    jo["color"] = to_string(o.color);
    jo["cell"] = {o.cell.col, o.cell.row};
    objs.push_back(std::move(jo));
  }
  j["objects"] = std::move(objs);
  return j.dump();
}

Scene scene_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  Scene scene;
  scene.scene_id = j.at("scene_id").get<std::string>();
  scene.cols = j.at("grid").at(0).get<int>();
  scene.rows = j.at("grid").at(1).get<int>();
  scene.seed = j.at("seed").get<uint64_t>();
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    o.id = jo.at("id").get<std::string>();
    auto cat = parse_category(jo.at("category").get<std::string>());
    auto col = parse_color(jo.at("color").get<std::string>());
    if (!cat || !col) throw Error("bad scene object enum in " + scene.scene_id);
    o.category = *cat;
    o.color = *col;
    o.cell = Cell{jo.at("cell").at(0).get<int>(), jo.at("cell").at(1).get<int>()};
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

std::string task_to_json(const TaskInstance& task) {
  ordered_json j;
  j["task_id"] = task.task_id;
  j["scene_id"] = task.scene_id;
  j["template"] = to_string(task.tmpl);
  j["text"] = task.text;
  ordered_json refs = ordered_json::array();
  for (const ReferringExpression& r : task.referents) refs.push_back(referent_to_json(r));
  j["referents"] = std::move(refs);
  j["intended"] = task.intended;
  j["ambiguous"] = task.ambiguous;
  j["split"] = to_string(task.split);
  return j.dump();
}

TaskInstance task_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  TaskInstance task;
  task.task_id = j.at("task_id").get<std::string>();
  task.scene_id = j.at("scene_id").get<std::string>();
  auto tmpl = parse_template(j.at("template").get<std::string>());
  auto split = parse_split(j.at("split").get<std::string>());
  if (!tmpl || !split) throw Error("bad task enum in " + task.task_id);
  task.tmpl = *tmpl;
  task.split = *split;
  task.text = j.at("text").get<std::string>();
  for (const auto& jr : j.at("referents")) task.referents.push_back(referent_from_json(jr));
  task.intended = j.at("intended").get<std::vector<std::string>>();
  task.ambiguous = j.at("ambiguous").get<bool>();
  return task;
}

}  // namespace ambres
