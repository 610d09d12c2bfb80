#include "mfq/value_statements.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <yaml-cpp/yaml.h>

#include "mfq/error.hpp"

namespace mfq {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_terminal_punct(char c) { return c == '.' || c == '!' || c == '?' || c == ';' || c == ':'; }

std::string strip_terminal(std::string_view s) {
  std::string out = trim(s);
  while (!out.empty() && (is_terminal_punct(out.back()) ||
                          std::isspace(static_cast<unsigned char>(out.back()))))
    out.pop_back();
  return out;
}

std::string scalar(const YAML::Node& parent, const char* field) {
  const YAML::Node n = parent[field];
  if (!n || !n.IsScalar()) return {};
  return trim(n.as<std::string>());
}

}  // namespace

std::string_view to_string(CorrelationDirection d) {
  return d == CorrelationDirection::Positive ? "positive" : "negative";
}

std::optional<Foundation> parse_dimension(std::string_view s) {
  static const std::map<std::string, Foundation> aliases = {
      {"harm", Foundation::Harm},           {"care", Foundation::Harm},
      {"fairness", Foundation::Fairness},   {"reciprocity", Foundation::Fairness},
      {"cheating", Foundation::Fairness},   {"loyalty", Foundation::Loyalty},
      {"ingroup", Foundation::Loyalty},     {"betrayal", Foundation::Loyalty},
      {"authority", Foundation::Authority}, {"respect", Foundation::Authority},
      {"subversion", Foundation::Authority}, {"purity", Foundation::Purity},
      {"sanctity", Foundation::Purity},     {"degradation", Foundation::Purity},
  };
  std::optional<Foundation> found;
  std::string_view rest = s;
  while (true) {
    const auto slash = rest.find('/');
    const auto part = lower(trim(rest.substr(0, slash)));
    const auto it = aliases.find(part);
    if (it == aliases.end()) return std::nullopt;
    if (found && *found != it->second) return std::nullopt;
    found = it->second;
    if (slash == std::string_view::npos) break;
    rest = rest.substr(slash + 1);
  }
  return found;
}

std::vector<ValueStatement> lint_catalog(std::string_view source, const Questionnaire& q,
                                         std::vector<std::string>* warnings) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(source));
  } catch (const YAML::Exception& e) {
    throw FormatError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  const YAML::Node list = root.IsSequence() ? root : root["statements"];
  if (!list || !list.IsSequence()) throw FormatError("catalog: expected a list 'statements'");

  std::vector<ValueStatement> out;
  std::vector<std::string> errors;
  std::set<std::string> seen_refs;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const YAML::Node rec = list[i];
    ValueStatement vs;
    vs.reference = rec.IsMap() ? scalar(rec, "reference") : std::string();
    const std::string where = "entry " + std::to_string(i) + " (" +
                              (vs.reference.empty() ? std::string("?") : vs.reference) + ", line " +
                              std::to_string(rec.Mark().line + 1) + ")";
    if (!rec.IsMap()) {
      errors.push_back(where + ": entry must be a mapping");
      continue;
    }
    const std::size_t before = errors.size();

    vs.statement = scalar(rec, "statement");
    vs.aspect = scalar(rec, "aspect");
    const std::string dimension = scalar(rec, "dimension");
    if (vs.reference.empty()) errors.push_back(where + ": missing reference");
    if (vs.statement.empty()) errors.push_back(where + ": missing statement");
    if (vs.aspect.empty()) errors.push_back(where + ": missing aspect");

    if (dimension.empty()) {
      errors.push_back(where + ": missing dimension");
    } else if (auto d = parse_dimension(dimension)) {
      vs.dimension = *d;
    } else {
      errors.push_back(where + ": unknown dimension '" + dimension + "'");
    }

    const YAML::Node est = rec["estimate"];
    if (!est || !est.IsMap()) {
      errors.push_back(where + ": missing estimate");
    } else {
      vs.estimate.axis = scalar(est, "axis");
      vs.estimate.source = scalar(est, "source");
      const std::string dir = lower(scalar(est, "direction"));
      if (vs.estimate.axis.empty()) errors.push_back(where + ": missing estimate.axis");
      if (vs.estimate.source.empty()) errors.push_back(where + ": missing estimate.source");
      if (dir.empty())
        errors.push_back(where + ": missing estimate.direction");
      else if (dir == "positive")
        vs.estimate.direction = CorrelationDirection::Positive;
      else if (dir == "negative")
        vs.estimate.direction = CorrelationDirection::Negative;
      else
        errors.push_back(where + ": estimate.direction must be positive|negative, got '" + dir + "'");
    }

    if (!vs.reference.empty()) {
      if (!seen_refs.insert(vs.reference).second)
        errors.push_back(where + ": duplicate reference");
      const auto* item = q.find(vs.reference);
      if (!item) {
        errors.push_back(where + ": reference does not resolve to a questionnaire item");
      } else if (item->key.is_catch) {
        errors.push_back(where + ": reference is a catch item");
      } else {
        if (!dimension.empty() && parse_dimension(dimension) && vs.dimension != item->key.foundation)
          errors.push_back(where + ": dimension '" + dimension + "' but scoring key says " +
                           std::string(to_string(item->key.foundation)));
        if (warnings && !vs.statement.empty() &&
            lower(strip_terminal(vs.statement)) != lower(strip_terminal(item->text)))
          warnings->push_back(where + ": statement differs from the item text");
      }
    }
    if (errors.size() == before) out.push_back(std::move(vs));
  }
  if (!errors.empty()) throw CatalogLintError(std::move(errors));
  return out;
}

std::vector<ValueStatement> lint_catalog_file(const std::filesystem::path& path,
                                              const Questionnaire& q,
                                              std::vector<std::string>* warnings) {
  return lint_catalog(read_text_file(path), q, warnings);
}

const ModifierVocabulary& default_modifiers() {
  static const ModifierVocabulary v = {"strongly do not", "moderately do not", "slightly do not",
                                       "slightly",        "moderately",        "strongly"};
  return v;
}

std::string statement_clause(std::string_view statement) {
  std::string s = strip_terminal(statement);
  if (s.empty()) return s;
  const auto word_end = s.find_first_of(" \t’'");
  const std::string first = s.substr(0, word_end);
  const bool pronoun_i = first == "I";
  const bool acronym = first.size() > 1 && std::all_of(first.begin(), first.end(), [](char c) {
                         return !std::islower(static_cast<unsigned char>(c));
                       });
  if (!pronoun_i && !acronym && s[0] >= 'A' && s[0] <= 'Z') s[0] = static_cast<char>(s[0] - 'A' + 'a');
  return s;
}

StatementInstruction render_statement_instruction(const ValueStatement& s, int level,
                                                  const ModifierVocabulary& vocab) {
  if (level < 0 || level > kScaleMax)
    throw ContractViolation("statement level must be 0..5, got " + std::to_string(level));
  return {s.reference, level,
          "You " + vocab[static_cast<std::size_t>(level)] + " agree that " +
              statement_clause(s.statement) + "."};
}

std::vector<std::pair<int, std::string>> parse_statement_instructions(std::string_view text,
                                                                      const ModifierVocabulary& vocab) {
  struct Hit {
    std::size_t begin;
    std::size_t clause_begin;
    int level;
  };
  std::vector<Hit> hits;
  for (std::size_t lvl = 0; lvl < vocab.size(); ++lvl) {
    const std::string prefix = "You " + vocab[lvl] + " agree that ";
    for (auto pos = text.find(prefix); pos != std::string_view::npos; pos = text.find(prefix, pos + 1))
      hits.push_back({pos, pos + prefix.size(), static_cast<int>(lvl)});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.begin < b.begin; });
  std::vector<std::pair<int, std::string>> out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t end = i + 1 < hits.size() ? hits[i + 1].begin : text.size();
    out.emplace_back(hits[i].level,
                     strip_terminal(text.substr(hits[i].clause_begin, end - hits[i].clause_begin)));
  }
  return out;
}

ProfileDocument load_profile(std::string_view source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(source));
  } catch (const YAML::Exception& e) {
    throw FormatError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ProfileDocument doc;
  if (root.IsNull()) return doc;
  if (!root.IsMap()) throw FormatError("profile must be a mapping");
  const YAML::Node levels = root["levels"] ? root["levels"] : root;
  for (const auto& kv : levels) {
    const auto key = kv.first.as<std::string>();
    if (!root["levels"] && key == "axis") continue;
    int level = 0;
    try {
      level = kv.second.as<int>();
    } catch (const YAML::Exception&) {
      throw FormatError("line " + std::to_string(kv.second.Mark().line + 1) + ": level for '" + key +
                        "' must be an integer");
    }
    doc.levels[key] = level;
  }
  if (const YAML::Node axis = root["axis"]) {
    AxisPosition pos;
    pos.axis = scalar(axis, "name");
    const std::string where = lower(scalar(axis, "position"));
    if (pos.axis.empty() || (where != "high" && where != "low"))
      throw FormatError("profile axis needs 'name' and 'position: high|low'");
    pos.sign = where == "high" ? 1 : -1;
    doc.axis = pos;
  }
  return doc;
}

ProfileDocument load_profile_file(const std::filesystem::path& path) {
  return load_profile(read_text_file(path));
}

StatementPersona build_statement_persona(const std::vector<ValueStatement>& catalog,
                                         const StatementProfile& profile,
                                         const ModifierVocabulary& vocab) {
  for (const auto& [ref, level] : profile) {
    const bool known = std::any_of(catalog.begin(), catalog.end(),
                                   [&](const ValueStatement& s) { return s.reference == ref; });
    if (!known) throw ContractViolation("profile references unknown statement '" + ref + "'");
  }
  StatementPersona persona;
  for (const auto& s : catalog) {
    const auto it = profile.find(s.reference);
    if (it == profile.end()) continue;
    auto instr = render_statement_instruction(s, it->second, vocab);
    if (!persona.system_text.empty()) persona.system_text += ' ';
    persona.system_text += instr.text;
    persona.constituents.push_back(std::move(instr));
  }
  return persona;
}

std::size_t ConsistencyReport::within_count() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                [](const auto& e) { return e.within_tolerance; }));
}

double ConsistencyReport::fraction_within() const {
  if (entries.empty()) return 1.0;
  return static_cast<double>(within_count()) / static_cast<double>(entries.size());
}

ConsistencyReport consistency_check(const StatementPersona& persona,
                                    const std::vector<ValueStatement>& catalog,
                                    const Population& population, const ConsistencyOptions& options) {
  ConsistencyReport report;
  report.tolerance = options.tolerance;
  for (const auto& instr : persona.constituents) {
    std::size_t n = 0;
    double sum = 0.0;
    for (const auto& sample : population.samples) {
      if (!sample.complete() && !options.include_partial) continue;
      const auto it = sample.answers.find(instr.statement_ref);
      if (it == sample.answers.end()) continue;
      sum += it->second;
      ++n;
    }
    if (n == 0)
      throw ContractViolation("population " + population.cell.label() + " has no answers for '" +
                              instr.statement_ref + "'");
    ConsistencyEntry e;
    e.reference = instr.statement_ref;
    e.instructed = instr.level;
    e.samples = n;
    e.observed_mean = sum / static_cast<double>(n);
    e.deviation = std::abs(e.observed_mean - instr.level);
    e.within_tolerance = e.deviation <= options.tolerance;
    if (options.axis) {
      const auto st = std::find_if(catalog.begin(), catalog.end(),
                                   [&](const ValueStatement& s) { return s.reference == instr.statement_ref; });
      if (st != catalog.end() && lower(st->estimate.axis) == lower(options.axis->axis)) {
        const int expected =
            (st->estimate.direction == CorrelationDirection::Positive ? 1 : -1) * options.axis->sign;
        const double mid = kScaleMax / 2.0;
        const int observed = e.observed_mean > mid ? 1 : (e.observed_mean < mid ? -1 : 0);
        e.directional_agreement = observed == expected;
      }
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace mfq
