#include "mfq/questionnaire.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mfq/error.hpp"

namespace mfq {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string capitalized(std::string_view s) {
  std::string out = lower(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string where(const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.is_null()) return "document";
  return "line " + std::to_string(mark.line + 1);
}

std::string require_string(const YAML::Node& parent, const char* field, const std::string& ctx) {
  const YAML::Node node = parent[field];
  if (!node) throw FormatError(ctx + ": missing field '" + field + "'");
  if (!node.IsScalar()) throw FormatError(where(node) + ": field '" + field + "' must be a scalar");
  return node.as<std::string>();
}

}  // namespace

std::string_view to_string(Foundation f) {
  switch (f) {
    case Foundation::Harm: return "harm";
    case Foundation::Fairness: return "fairness";
    case Foundation::Loyalty: return "loyalty";
    case Foundation::Authority: return "authority";
    case Foundation::Purity: return "purity";
  }
  return "?";
}

std::string_view to_string(Part p) { return p == Part::Relevance ? "relevance" : "agreement"; }

std::string to_string(const ItemKey& key) {
  return key.is_catch ? std::string("catch") : std::string(to_string(key.foundation));
}

std::optional<Foundation> parse_foundation(std::string_view s) {
  const auto l = lower(s);
  for (auto f : kFoundations)
    if (l == to_string(f)) return f;
  return std::nullopt;
}

std::optional<Part> parse_part(std::string_view s) {
  const auto l = lower(s);
  for (auto p : kParts)
    if (l == to_string(p)) return p;
  return std::nullopt;
}

std::optional<ItemKey> parse_item_key(std::string_view s) {
  if (lower(s) == "catch") return ItemKey::catch_item();
  if (auto f = parse_foundation(s)) return ItemKey::of(*f);
  return std::nullopt;
}

std::optional<int> LikertScale::value_of(std::string_view label) const {
  const auto l = lower(label);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (lower(labels[i]) == l) return static_cast<int>(i);
  return std::nullopt;
}

const std::string& LikertScale::label_of(int value) const {
  if (value < 0 || value > kScaleMax)
    throw ContractViolation("scale value out of range: " + std::to_string(value));
  return labels[static_cast<std::size_t>(value)];
}

std::string LikertScale::legend() const {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += "[" + std::to_string(i) + "] " + labels[i];
  }
  return out;
}

ItemKey standard_mfq_key(Part, int index) {
  // Both parts share the same cyclic layout: five foundations, catch at 5.
  switch (index) {
    case 5: return ItemKey::catch_item();
    case 0: case 6: case 11: return ItemKey::of(Foundation::Harm);
    case 1: case 7: case 12: return ItemKey::of(Foundation::Fairness);
    case 2: case 8: case 13: return ItemKey::of(Foundation::Loyalty);
    case 3: case 9: case 14: return ItemKey::of(Foundation::Authority);
    case 4: case 10: case 15: return ItemKey::of(Foundation::Purity);
    default: throw ContractViolation("item index out of range: " + std::to_string(index));
  }
}

Questionnaire::Questionnaire(std::vector<QuestionnaireItem> items,
                             std::array<LikertScale, 2> scales)
    : items_(std::move(items)), scales_(std::move(scales)) {
  std::vector<std::string> errors;

  for (auto p : kParts) {
    const auto& scale = scales_[static_cast<std::size_t>(p)];
    if (scale.part != p)
      errors.push_back("scale for " + std::string(to_string(p)) + " is tagged with the wrong part");
    std::set<std::string> seen;
    for (const auto& label : scale.labels) {
      if (label.empty()) errors.push_back(std::string(to_string(p)) + " scale has an empty label");
      if (!seen.insert(lower(label)).second)
        errors.push_back(std::string(to_string(p)) + " scale repeats label '" + label + "'");
    }
  }

  std::set<std::string> ids;
  std::map<Part, std::set<int>> indices;
  std::map<Part, int> per_part;
  std::map<Part, int> catches;
  std::map<std::pair<Part, Foundation>, int> per_foundation;
  for (const auto& item : items_) {
    const std::string part_name = capitalized(to_string(item.part));
    if (item.id.empty()) errors.push_back(part_name + " item " + std::to_string(item.index) + " has an empty id");
    if (!ids.insert(item.id).second) errors.push_back("duplicate item id '" + item.id + "'");
    if (item.index < 0 || item.index >= static_cast<int>(kItemsPerPart))
      errors.push_back("item '" + item.id + "' index " + std::to_string(item.index) + " outside 0..15");
    if (!indices[item.part].insert(item.index).second)
      errors.push_back("duplicate " + part_name + " index " + std::to_string(item.index));
    if (item.text.empty()) errors.push_back("item '" + item.id + "' has empty text");
    ++per_part[item.part];
    if (item.key.is_catch)
      ++catches[item.part];
    else
      ++per_foundation[{item.part, item.key.foundation}];
  }

  for (auto p : kParts) {
    const std::string part_name = capitalized(to_string(p));
    if (per_part[p] != static_cast<int>(kItemsPerPart))
      errors.push_back("expected 16 " + part_name + " items, found " + std::to_string(per_part[p]));
    if (catches[p] != 1)
      errors.push_back("expected 1 " + part_name + " catch item, found " + std::to_string(catches[p]));
    for (auto f : kFoundations) {
      const int n = per_foundation[{p, f}];
      if (n != 3)
        errors.push_back("expected 3 " + part_name + " items for " + std::string(to_string(f)) +
                         ", found " + std::to_string(n));
    }
  }

  if (!errors.empty()) throw ValidationError(std::move(errors));

  std::stable_sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) {
    return std::pair(a.part, a.index) < std::pair(b.part, b.index);
  });
}

const QuestionnaireItem* Questionnaire::find(std::string_view id) const {
  for (const auto& item : items_)
    if (item.id == id) return &item;
  return nullptr;
}

const QuestionnaireItem& Questionnaire::at(std::string_view id) const {
  if (const auto* item = find(id)) return *item;
  throw ContractViolation("unknown item id '" + std::string(id) + "'");
}

std::size_t Questionnaire::position(std::string_view id) const {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].id == id) return i;
  return npos;
}

const QuestionnaireItem& Questionnaire::catch_item(Part p) const {
  for (const auto& item : items_)
    if (item.part == p && item.key.is_catch) return item;
  throw ContractViolation("questionnaire has no catch item");  // unreachable after validation
}

std::vector<const QuestionnaireItem*> Questionnaire::items_of(Foundation f) const {
  std::vector<const QuestionnaireItem*> out;
  for (const auto& item : items_)
    if (!item.key.is_catch && item.key.foundation == f) out.push_back(&item);
  return out;
}

ItemKey foundation_of(const QuestionnaireItem& item) { return item.key; }

Questionnaire load_questionnaire(std::string_view source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(source));
  } catch (const YAML::Exception& e) {
    throw FormatError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw FormatError("questionnaire document must be a mapping");

  const YAML::Node scales_node = root["scales"];
  if (!scales_node || !scales_node.IsMap()) throw FormatError("document: missing table 'scales'");
  std::array<LikertScale, 2> scales;
  for (auto p : kParts) {
    const std::string name(to_string(p));
    const YAML::Node s = scales_node[name];
    if (!s || !s.IsMap()) throw FormatError(where(scales_node) + ": missing scale table '" + name + "'");
    LikertScale scale;
    scale.part = p;
    scale.task = require_string(s, "task", "scale '" + name + "'");
    const YAML::Node labels = s["labels"];
    if (!labels || !labels.IsSequence())
      throw FormatError(where(s) + ": scale '" + name + "' field 'labels' must be a list");
    if (labels.size() != 6)
      throw FormatError(where(labels) + ": scale '" + name + "' needs 6 labels, found " +
                        std::to_string(labels.size()));
    for (std::size_t i = 0; i < 6; ++i) scale.labels[i] = labels[i].as<std::string>();
    scales[static_cast<std::size_t>(p)] = std::move(scale);
  }

  const YAML::Node items_node = root["items"];
  if (!items_node || !items_node.IsSequence()) throw FormatError("document: missing list 'items'");
  std::vector<QuestionnaireItem> items;
  for (const auto& rec : items_node) {
    const std::string ctx = where(rec);
    if (!rec.IsMap()) throw FormatError(ctx + ": item record must be a mapping");
    QuestionnaireItem item;
    item.id = require_string(rec, "id", ctx);
    const auto part = parse_part(require_string(rec, "part", ctx));
    if (!part) throw FormatError(where(rec["part"]) + ": field 'part' must be relevance|agreement");
    item.part = *part;
    try {
      item.index = rec["index"].as<int>();
    } catch (const YAML::Exception&) {
      throw FormatError(ctx + ": field 'index' must be an integer");
    }
    item.text = require_string(rec, "text", ctx);
    const auto key = parse_item_key(require_string(rec, "foundation", ctx));
    if (!key)
      throw FormatError(where(rec["foundation"]) +
                        ": field 'foundation' must be harm|fairness|loyalty|authority|purity|catch");
    item.key = *key;
    items.push_back(std::move(item));
  }
  return Questionnaire(std::move(items), std::move(scales));
}

Questionnaire load_questionnaire_file(const std::filesystem::path& path) {
  return load_questionnaire(read_text_file(path));
}

std::string serialize_questionnaire(const Questionnaire& q) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "scales" << YAML::Value << YAML::BeginMap;
  for (auto p : kParts) {
    const auto& s = q.scale(p);
    out << YAML::Key << std::string(to_string(p)) << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "task" << YAML::Value << YAML::DoubleQuoted << s.task;
    out << YAML::Key << "labels" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& l : s.labels) out << YAML::DoubleQuoted << l;
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::Key << "items" << YAML::Value << YAML::BeginSeq;
  for (const auto& item : q.items()) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << YAML::DoubleQuoted << item.id;
    out << YAML::Key << "part" << YAML::Value << std::string(to_string(item.part));
    out << YAML::Key << "index" << YAML::Value << item.index;
    out << YAML::Key << "text" << YAML::Value << YAML::DoubleQuoted << item.text;
    out << YAML::Key << "foundation" << YAML::Value << to_string(item.key);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::filesystem::path bundled_questionnaire_path() {
  return std::filesystem::path(MFQ_DATA_DIR) / "mfq.yaml";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mfq
