#include "mfq/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <yaml-cpp/yaml.h>

#include "mfq/error.hpp"

namespace mfq {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<int> answer(const SurveySample& s, const std::string& id) {
  const auto it = s.answers.find(id);
  if (it == s.answers.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> catch_reasons(const SurveySample& s, const Questionnaire& q,
                                       const CatchPolicy& policy, bool& unknown) {
  std::vector<std::string> reasons;
  unknown = false;
  const auto rel = answer(s, q.catch_item(Part::Relevance).id);
  const auto agr = answer(s, q.catch_item(Part::Agreement).id);
  if (!rel || !agr) unknown = true;
  if (rel && *rel > policy.relevance_max)
    reasons.push_back("relevance catch exceeds " + std::to_string(policy.relevance_max));
  if (agr && *agr < policy.agreement_min)
    reasons.push_back("agreement catch below " + std::to_string(policy.agreement_min));
  return reasons;
}

struct Key {
  std::string row;
  std::string column;
  bool is_catch;
  friend auto operator<=>(const Key&, const Key&) = default;
};

Key group_key(Grouping g, const Population& p, const QuestionnaireItem& item) {
  const bool c = item.key.is_catch;
  switch (g) {
    case Grouping::Model: return {p.cell.endpoint, {}, c};
    case Grouping::Persona: return {p.cell.persona, {}, c};
    case Grouping::ModelPersona: return {p.cell.endpoint, p.cell.persona, c};
    case Grouping::FoundationPersona: return {to_string(item.key), p.cell.persona, c};
    case Grouping::QuestionModel: return {item.id, p.cell.endpoint, c};
    case Grouping::QuestionPersona: return {item.id, p.cell.persona, c};
  }
  return {};
}

enum class Axis { Model, Persona, Foundation, Item, None };

std::pair<Axis, Axis> axes(Grouping g) {
  switch (g) {
    case Grouping::Model: return {Axis::Model, Axis::None};
    case Grouping::Persona: return {Axis::Persona, Axis::None};
    case Grouping::ModelPersona: return {Axis::Model, Axis::Persona};
    case Grouping::FoundationPersona: return {Axis::Foundation, Axis::Persona};
    case Grouping::QuestionModel: return {Axis::Item, Axis::Model};
    case Grouping::QuestionPersona: return {Axis::Item, Axis::Persona};
  }
  return {Axis::None, Axis::None};
}

// Sort key for one label on an axis: (rank, label).
std::pair<long, std::string> axis_rank(Axis a, const std::string& label, const Questionnaire& q) {
  switch (a) {
    case Axis::Persona: return {persona_rank(label), label};
    case Axis::Foundation: {
      if (auto f = parse_foundation(label)) return {static_cast<long>(*f), label};
      return {static_cast<long>(kFoundations.size()), label};
    }
    case Axis::Item: return {static_cast<long>(q.position(label)), label};
    case Axis::Model:
    case Axis::None: return {0, label};
  }
  return {0, label};
}

void sort_cells(std::vector<VarianceCell>& cells, Grouping g, const Questionnaire& q) {
  const auto [ra, ca] = axes(g);
  std::stable_sort(cells.begin(), cells.end(), [&, ra = ra, ca = ca](const auto& x, const auto& y) {
    const auto kx = std::pair(axis_rank(ra, x.row, q), axis_rank(ca, x.column, q));
    const auto ky = std::pair(axis_rank(ra, y.row, q), axis_rank(ca, y.column, q));
    return kx < ky;
  });
}

std::optional<double> find_value(const std::vector<VarianceCell>& cells, std::string_view row,
                                 std::string_view column) {
  for (const auto& c : cells)
    if (c.row == row && c.column == column) return c.value;
  return std::nullopt;
}

}  // namespace

CatchPolicy parse_catch_policy(std::string_view spec) {
  CatchPolicy policy;
  std::string_view rest = spec;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view part = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw ConfigError("catch policy: expected key=value, got '" + std::string(part) + "'");
    const std::string key = lower(part.substr(0, eq));
    const std::string value(part.substr(eq + 1));
    int v = 0;
    try {
      std::size_t used = 0;
      v = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("catch policy: '" + key + "' needs an integer, got '" + value + "'");
    }
    if (v < 0 || v > kScaleMax) throw ConfigError("catch policy: '" + key + "' must be within 0..5");
    if (key == "relevance_max")
      policy.relevance_max = v;
    else if (key == "agreement_min")
      policy.agreement_min = v;
    else
      throw ConfigError("catch policy: unknown key '" + key + "'");
  }
  return policy;
}

CatchVerdict catch_validity(const SurveySample& sample, const Questionnaire& q, const CatchPolicy& policy) {
  if (!sample.complete())
    throw ContractViolation("catch validity needs a complete sample (" + sample.cell.label() + " #" +
                            std::to_string(sample.sample_index) + " is partial)");
  bool unknown = false;
  CatchVerdict v;
  v.reasons = catch_reasons(sample, q, policy, unknown);
  v.valid = v.reasons.empty();
  return v;
}

std::vector<const SurveySample*> included_samples(const Population& p, const Questionnaire& q,
                                                  const AnalysisOptions& options,
                                                  std::string_view item_id) {
  std::vector<const SurveySample*> out;
  const std::string id(item_id);
  for (const auto& s : p.samples) {
    if (!s.complete() && !options.include_partial) continue;
    if (!id.empty() && !s.answers.count(id)) continue;
    if (options.exclude_flagged) {
      bool unknown = false;
      if (!catch_reasons(s, q, *options.exclude_flagged, unknown).empty() || unknown) continue;
    }
    out.push_back(&s);
  }
  return out;
}

double question_variance(const Population& p, std::string_view item_id, const Questionnaire& q,
                         const AnalysisOptions& options) {
  const auto samples = included_samples(p, q, options, item_id);
  const std::size_t n = samples.size();
  if (n == 0)
    throw EmptyPopulationError("population " + p.cell.label() + " has no included samples for '" +
                               std::string(item_id) + "'");
  if (options.estimator == VarianceEstimator::Sample && n < 2)
    throw EmptyPopulationError("population " + p.cell.label() +
                               " needs at least 2 samples for the sample variance");
  const std::string id(item_id);
  double mean = 0.0;
  for (const auto* s : samples) mean += s->answers.at(id);
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const auto* s : samples) {
    const double d = s->answers.at(id) - mean;
    ss += d * d;
  }
  const double denom = options.estimator == VarianceEstimator::Population ? static_cast<double>(n)
                                                                           : static_cast<double>(n - 1);
  return ss / denom;
}

std::string_view to_string(Grouping g) {
  switch (g) {
    case Grouping::Model: return "model";
    case Grouping::Persona: return "persona";
    case Grouping::ModelPersona: return "model-persona";
    case Grouping::FoundationPersona: return "foundation-persona";
    case Grouping::QuestionModel: return "question-model";
    case Grouping::QuestionPersona: return "question-persona";
  }
  return "?";
}

std::optional<Grouping> parse_grouping(std::string_view s) {
  for (auto g : {Grouping::Model, Grouping::Persona, Grouping::ModelPersona, Grouping::FoundationPersona,
                 Grouping::QuestionModel, Grouping::QuestionPersona})
    if (to_string(g) == lower(s)) return g;
  return std::nullopt;
}

std::optional<double> VarianceTable::scored_value(std::string_view row, std::string_view column) const {
  return find_value(scored, row, column);
}

std::optional<double> VarianceTable::catch_value(std::string_view row, std::string_view column) const {
  return find_value(catch_items, row, column);
}

int persona_rank(std::string_view persona_id) {
  const std::string id = lower(persona_id);
  if (id == "none" || id == "unmodified" || id == "base" || id == "default") return 0;
  if (id.find("liberal") != std::string::npos) return 1;
  if (id.find("moderate") != std::string::npos) return 2;
  if (id.find("conservative") != std::string::npos) return 3;
  return 4;
}

VarianceTable aggregate_variance(const std::vector<Population>& populations, Grouping grouping,
                                 const Questionnaire& q, const AnalysisOptions& options) {
  std::map<Key, std::pair<double, std::size_t>> acc;
  VarianceTable table;
  table.grouping = grouping;
  for (const auto& p : populations) {
    for (const auto& item : q.items()) {
      auto& slot = acc[group_key(grouping, p, item)];
      try {
        slot.first += question_variance(p, item.id, q, options);
        ++slot.second;
      } catch (const EmptyPopulationError&) {
      }
    }
  }
  for (const auto& [key, value] : acc) {
    if (value.second == 0) {
      table.warnings.push_back("group " + key.row + (key.column.empty() ? "" : "/" + key.column) +
                               (key.is_catch ? " (catch)" : "") + " omitted: no included samples");
      continue;
    }
    VarianceCell cell{key.row, key.column, value.first / static_cast<double>(value.second), value.second};
    (key.is_catch ? table.catch_items : table.scored).push_back(std::move(cell));
  }
  sort_cells(table.scored, grouping, q);
  sort_cells(table.catch_items, grouping, q);
  return table;
}

FoundationScores sample_foundation_scores(const SurveySample& sample, const Questionnaire& q,
                                          ScoreAggregation aggregation) {
  if (!sample.complete())
    throw ContractViolation("foundation scores need a complete sample (" + sample.cell.label() + " #" +
                            std::to_string(sample.sample_index) + " is partial)");
  FoundationScores out{};
  for (auto f : kFoundations) {
    const auto items = q.items_of(f);
    double sum = 0.0;
    for (const auto* item : items) sum += sample.answers.at(item->id);
    out[static_cast<std::size_t>(f)] =
        aggregation == ScoreAggregation::Mean ? sum / static_cast<double>(items.size()) : sum;
  }
  return out;
}

FoundationScores population_foundation_scores(const Population& p, const Questionnaire& q,
                                              const AnalysisOptions& options) {
  AnalysisOptions complete_only = options;
  complete_only.include_partial = false;
  const auto samples = included_samples(p, q, complete_only);
  if (samples.empty())
    throw EmptyPopulationError("population " + p.cell.label() + " has no included complete samples");
  FoundationScores acc{};
  for (const auto* s : samples) {
    const auto scores = sample_foundation_scores(*s, q, options.aggregation);
    for (std::size_t f = 0; f < acc.size(); ++f) acc[f] += scores[f];
  }
  for (auto& v : acc) v /= static_cast<double>(samples.size());
  return acc;
}

double cross_distance(const FoundationScores& a, const FoundationScores& b) {
  double d = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) d += std::abs(a[f] - b[f]);
  return d;
}

HumanReferenceSet load_human_references(std::string_view source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(source));
  } catch (const YAML::Exception& e) {
    throw FormatError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  HumanReferenceSet set;
  if (root.IsMap() && root["aggregation"]) {
    const auto a = lower(root["aggregation"].as<std::string>());
    if (a == "sum")
      set.aggregation = ScoreAggregation::Sum;
    else if (a != "mean")
      throw FormatError("references: aggregation must be mean|sum");
  }
  const YAML::Node list = root.IsSequence() ? root : root["references"];
  if (!list || !list.IsSequence()) throw FormatError("references: expected a list 'references'");

  const double max = set.aggregation == ScoreAggregation::Mean ? kScaleMax : 6.0 * kScaleMax;
  std::vector<std::string> errors;
  std::set<std::string> labels;
  for (const auto& rec : list) {
    const std::string where = "line " + std::to_string(rec.Mark().line + 1);
    HumanReferenceGroup g;
    try {
      g.origin = rec["origin"].as<std::string>();
      g.ideology = rec["ideology"].as<std::string>();
      g.source = rec["source"] ? rec["source"].as<std::string>() : std::string();
      for (auto f : kFoundations) {
        const YAML::Node v = rec[std::string(to_string(f))];
        if (!v) throw FormatError(where + ": missing field '" + std::string(to_string(f)) + "'");
        g.scores[static_cast<std::size_t>(f)] = v.as<double>();
      }
    } catch (const YAML::Exception&) {
      throw FormatError(where + ": reference record needs origin, ideology and five numeric scores");
    }
    if (!labels.insert(g.label()).second) errors.push_back(where + ": duplicate group '" + g.label() + "'");
    for (auto f : kFoundations) {
      const double v = g.scores[static_cast<std::size_t>(f)];
      if (!(v >= 0.0 && v <= max))
        errors.push_back(where + ": " + std::string(to_string(f)) + " score out of range");
    }
    set.groups.push_back(std::move(g));
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return set;
}

HumanReferenceSet load_human_references_file(const std::filesystem::path& path) {
  return load_human_references(read_text_file(path));
}

CrossAlignmentMatrix cross_matrix(const std::vector<Population>& populations,
                                  const HumanReferenceSet& references, const Questionnaire& q,
                                  const AnalysisOptions& options) {
  if (references.groups.empty()) throw ContractViolation("cross matrix needs at least one reference group");
  if (references.aggregation != options.aggregation)
    throw ContractViolation("reference scores and population scores use different aggregations");

  std::vector<const Population*> rows;
  for (const auto& p : populations) rows.push_back(&p);
  std::stable_sort(rows.begin(), rows.end(), [](const Population* a, const Population* b) {
    return std::tuple(a->cell.endpoint, persona_rank(a->cell.persona), a->cell.persona) <
           std::tuple(b->cell.endpoint, persona_rank(b->cell.persona), b->cell.persona);
  });

  CrossAlignmentMatrix m;
  for (const auto& g : references.groups) m.columns.push_back(g.label());
  for (const auto* p : rows) {
    const auto scores = population_foundation_scores(*p, q, options);
    std::vector<double> row;
    for (const auto& g : references.groups) row.push_back(cross_distance(scores, g.scores));
    const auto best = static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
    m.rows.push_back(p->cell);
    m.entries.push_back(std::move(row));
    m.closest.push_back(best);
  }
  return m;
}

}  // namespace mfq
