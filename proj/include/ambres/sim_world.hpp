#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ambres/errors.hpp"

namespace ambres {

enum class Category { Block, Bowl };
enum class Color { Red, Green, Blue, Yellow, Orange, Purple };
enum class Ordinal { Leftmost, Rightmost, Frontmost, Backmost };
enum class TaskTemplate { Pick, MoveTo, Stack };
enum class Split { Train, Test };

inline constexpr int kGridCols = 6;
inline constexpr int kGridRows = 4;

struct Cell {
  int col = 0;
  int row = 0;
  auto operator<=>(const Cell&) const = default;
};

struct SceneObject {
  std::string id;
  Category category = Category::Block;
  Color color = Color::Red;
  Cell cell;
  bool operator==(const SceneObject&) const = default;
};

struct Scene {
  std::string scene_id;
  int cols = kGridCols;
  int rows = kGridRows;
  uint64_t seed = 0;
  std::vector<SceneObject> objects;
  bool operator==(const Scene&) const = default;

  const SceneObject* find(std::string_view id) const;
};

// Category with optional color attribute and optional ordinal; the
// ordinal applies after attribute filtering and selects a unique
// extremum by cell coordinate.
struct ReferringExpression {
  Category category = Category::Block;
  std::optional<Color> color;
  std::optional<Ordinal> ordinal;
  bool operator==(const ReferringExpression&) const = default;
};

struct TaskInstance {
  std::string task_id;
  std::string scene_id;
  TaskTemplate tmpl = TaskTemplate::Pick;
  std::string text;
  std::vector<ReferringExpression> referents;
  std::vector<std::string> intended;  // ground-truth object ids, aligned with referents
  bool ambiguous = false;
  Split split = Split::Train;
  bool operator==(const TaskInstance&) const = default;
};

// enum <-> string names used in task text and serialization
std::string to_string(Category c);
std::string to_string(Color c);
std::string to_string(Ordinal o);
std::string to_string(TaskTemplate t);
std::string to_string(Split s);
std::optional<Category> parse_category(std::string_view s);
std::optional<Color> parse_color(std::string_view s);
std::optional<Ordinal> parse_ordinal(std::string_view s);
std::optional<TaskTemplate> parse_template(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

inline constexpr Color kAllColors[] = {Color::Red,    Color::Green,  Color::Blue,
                                       Color::Yellow, Color::Orange, Color::Purple};
inline constexpr Ordinal kAllOrdinals[] = {Ordinal::Leftmost, Ordinal::Rightmost,
                                           Ordinal::Frontmost, Ordinal::Backmost};

/// Seeded uniform sampling of object count, categories, colors, and
/// distinct cells; byte-identical result for equal arguments.
Scene sample_scene(int cols, int rows, int min_objects, int max_objects, uint64_t seed,
                   std::string scene_id = "");

/// Object ids matching the expression: filter by category, then color,
/// then reduce to the ordinal extremum if one is present.
std::set<std::string> match_expression(const ReferringExpression& expr, const Scene& scene);

/// Of the ids in `candidates`, the one the ordinal selects (leftmost =
/// min col, ties by min row; rightmost = max col, ties by min row;
/// frontmost = max row, ties by min col; backmost = min row, ties by min col).
std::string ordinal_pick(const std::set<std::string>& candidates, Ordinal ordinal,
                         const Scene& scene);

/// True iff some referent matches two or more objects. Throws
/// UnmatchableReferent when a referent matches nothing (generator bug).
bool ambiguity_label(const TaskInstance& task, const Scene& scene);

/// Lowercase "<color> <category>" description of an object.
std::string canonical_name(const SceneObject& obj);

/// Trim, lowercase, collapse internal whitespace.
std::string normalize(std::string_view text);

/// "leftmost blue block" style rendering of an expression.
std::string realize_expression(const ReferringExpression& expr);

/// Inverse of realize_expression over normalized descriptions.
std::optional<ReferringExpression> parse_description(std::string_view description);

std::string render_task_text(TaskTemplate tmpl, std::span<const ReferringExpression> referents);

// JSON (de)serialization; format documented in the dataset layout
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
std::string task_to_json(const TaskInstance& task);
TaskInstance task_from_json(const std::string& text);

}  // namespace ambres
