// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <set>
#include <sstream>

#include "vat/error.hpp"
#include "vat/harness.hpp"

namespace vat {

namespace {

using ojson = nlohmann::ordered_json;

// Thrown from field helpers; carries the field name until the line is known.
struct FieldError {
  std::string field;
  std::string what;
};

const ojson& require(const ojson& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) throw FieldError{field, "missing required field"};
  return *it;
}

std::string as_text(const ojson& v, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw FieldError{field, "expected a string"};
}

int as_coord(const ojson& v, const char* field) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > (1 << 30)) {
    throw FieldError{field, "expected a non-negative integer"};
  }
  return static_cast<int>(v.get<std::int64_t>());
}

BoundingBox as_box(const ojson& v) {
  if (!v.is_array() || v.size() != 4) throw FieldError{"gt_boxes", "each box is [x0, y0, x1, y1]"};
  BoundingBox b{as_coord(v[0], "gt_boxes"), as_coord(v[1], "gt_boxes"), as_coord(v[2], "gt_boxes"),
                as_coord(v[3], "gt_boxes")};
  if (b.x0 >= b.x1 || b.y0 >= b.y1) throw FieldError{"gt_boxes", "box has no area"};
  return b;
}

bool is_box(const ojson& v) {
  return v.is_array() && v.size() == 4 && v[0].is_number();
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

TaskInstance parse_task(const ojson& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw FieldError{"", "record must be an object"};
  TaskInstance t;
  t.id = as_text(require(j, "id"), "id");
  if (t.id.empty()) throw FieldError{"id", "must not be empty"};
  t.benchmark = as_text(require(j, "benchmark"), "benchmark");
  if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
    t.category = as_text(*it, "category");
  }

  const auto& images = require(j, "images");
  if (!images.is_array() || images.empty()) throw FieldError{"images", "need at least one image path"};
  for (const auto& img : images) {
    if (!img.is_string() || img.get<std::string>().empty()) throw FieldError{"images", "paths must be strings"};
    std::filesystem::path p = img.get<std::string>();
    t.images.push_back(p.is_absolute() ? p : base_dir / p);
  }

  t.question = as_text(require(j, "question"), "question");
  t.ground_truth = as_text(require(j, "ground_truth"), "ground_truth");
  if (t.ground_truth.empty()) throw FieldError{"ground_truth", "must not be empty"};

  if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
    std::set<std::string> seen;
    auto add = [&](std::string label, std::string text) {
      if (label.empty()) throw FieldError{"options", "empty option label"};
      if (!seen.insert(label).second) throw FieldError{"options", "duplicate option label '" + label + "'"};
      t.options.push_back({std::move(label), std::move(text)});
    };
    if (it->is_object()) {
      for (const auto& [label, text] : it->items()) add(label, as_text(text, "options"));
    } else if (it->is_array()) {
      for (const auto& o : *it) {
        if (o.is_object()) {
          add(as_text(require(o, "label"), "options"), as_text(require(o, "text"), "options"));
        } else if (o.is_array() && o.size() == 2) {
          add(as_text(o[0], "options"), as_text(o[1], "options"));
        } else {
          throw FieldError{"options", "expected {label: text} entries"};
        }
      }
    } else {
      throw FieldError{"options", "expected an object"};
    }
  }

  if (auto it = j.find("gt_boxes"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw FieldError{"gt_boxes", "expected a list of boxes"};
    if (!it->empty() && is_box((*it)[0])) {
      // Flat list: boxes of the first image.
      std::vector<BoundingBox> boxes;
      for (const auto& b : *it) boxes.push_back(as_box(b));
      t.gt_boxes.push_back(std::move(boxes));
    } else {
      for (const auto& per_image : *it) {
        if (!per_image.is_array()) throw FieldError{"gt_boxes", "expected a list of boxes per image"};
        std::vector<BoundingBox> boxes;
        for (const auto& b : per_image) boxes.push_back(as_box(b));
        t.gt_boxes.push_back(std::move(boxes));
      }
    }
    if (t.gt_boxes.size() > t.images.size()) throw FieldError{"gt_boxes", "more box lists than images"};
  }

  if (auto it = j.find("grid_hint"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2) throw FieldError{"grid_hint", "expected [rows, cols]"};
    GridHint hint{as_coord((*it)[0], "grid_hint"), as_coord((*it)[1], "grid_hint")};
    if (hint.rows < 1 || hint.cols < 1) throw FieldError{"grid_hint", "rows and cols must be >= 1"};
    t.grid_hint = hint;
  }
  return t;
}

}  // namespace

TaskInstance task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    return parse_task(ojson::parse(j.dump()), base_dir);
  } catch (const FieldError& e) {
    throw SchemaError(0, e.field, e.what);
  }
}

nlohmann::json to_json(const TaskInstance& task, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  j["id"] = task.id;
  j["benchmark"] = task.benchmark;
  j["category"] = task.category;
  j["images"] = nlohmann::json::array();
  for (const auto& p : task.images) {
    std::filesystem::path out = p;
    if (!base_dir.empty()) {
      const auto rel = p.lexically_relative(base_dir);
      if (!rel.empty() && *rel.begin() != "..") out = rel;
    }
    j["images"].push_back(out.string());
  }
  j["question"] = task.question;
  j["ground_truth"] = task.ground_truth;
  if (!task.options.empty()) {
    auto opts = nlohmann::json::array();
    for (const auto& o : task.options) opts.push_back({{"label", o.label}, {"text", o.text}});
    j["options"] = opts;
  }
  if (!task.gt_boxes.empty()) {
    auto all = nlohmann::json::array();
    for (const auto& boxes : task.gt_boxes) {
      auto list = nlohmann::json::array();
      for (const auto& b : boxes) list.push_back({b.x0, b.y0, b.x1, b.y1});
      all.push_back(list);
    }
    j["gt_boxes"] = all;
  }
  if (task.grid_hint) j["grid_hint"] = {task.grid_hint->rows, task.grid_hint->cols};
  return j;
}

std::vector<TaskInstance> parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                                         bool check_images) {
  std::vector<TaskInstance> tasks;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
      throw SchemaError(lineno, "", std::string("malformed JSON: ") + e.what());
    }
    TaskInstance task;
    try {
      task = parse_task(j, base_dir);
    } catch (const FieldError& e) {
      throw SchemaError(lineno, e.field, e.what);
    }
    if (lower(task.benchmark).rfind("mme", 0) == 0) {
      throw UnsupportedBenchmark("line " + std::to_string(lineno) + ": benchmark '" + task.benchmark +
                                 "' uses a scoring rule this harness does not implement");
    }
    if (!ids.insert(task.id).second) throw SchemaError(lineno, "id", "duplicate task id '" + task.id + "'");
    if (check_images) {
      for (const auto& p : task.images) {
        if (!std::filesystem::is_regular_file(p)) {
          throw MissingImage("line " + std::to_string(lineno) + ": image not found: " + p.string());
        }
      }
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<TaskInstance> load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("manifest not found: " + path.string());
  }
  return parse_manifest(read_file(path), path.parent_path());
}

}  // namespace vat
