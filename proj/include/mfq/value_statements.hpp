#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfq/error.hpp"
#include "mfq/persona.hpp"
#include "mfq/population.hpp"
#include "mfq/questionnaire.hpp"

namespace mfq {

enum class CorrelationDirection { Positive, Negative };

std::string_view to_string(CorrelationDirection d);

/// Literature-grounded expectation of how agreement with a statement moves along an axis.
struct Estimate {
  std::string axis;  // e.g. "conservative ideology", "income and wealth"
  CorrelationDirection direction = CorrelationDirection::Positive;
  std::string source;
};

struct ValueStatement {
  std::string reference;  // questionnaire item id, e.g. "Agreement#9"
  std::string statement;
  Foundation dimension = Foundation::Harm;
  std::string aspect;
  Estimate estimate;
};

/// Accepts the bare foundation names and the usual MFT aliases
/// ("care/harm", "fairness/reciprocity", "authority/respect", ...).
std::optional<Foundation> parse_dimension(std::string_view s);

/// Thrown by lint_catalog; the message lists every violation with its entry locator.
class CatalogLintError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Parses and checks a catalog against the questionnaire's scoring key. Non-fatal
/// findings (statement text differing from the item text) go to `warnings`.
std::vector<ValueStatement> lint_catalog(std::string_view source, const Questionnaire& q,
                                         std::vector<std::string>* warnings = nullptr);
std::vector<ValueStatement> lint_catalog_file(const std::filesystem::path& path,
                                              const Questionnaire& q,
                                              std::vector<std::string>* warnings = nullptr);

/// Modifier for each level 0..5 in "You {modifier} agree that {statement}."
using ModifierVocabulary = std::array<std::string, 6>;
const ModifierVocabulary& default_modifiers();

struct StatementInstruction {
  std::string statement_ref;
  int level = 0;
  std::string text;
};

/// Statement as it sits after "agree that": first letter lowered (except "I" and
/// acronyms), trailing punctuation removed.
std::string statement_clause(std::string_view statement);

StatementInstruction render_statement_instruction(const ValueStatement& s, int level,
                                                  const ModifierVocabulary& vocab = default_modifiers());

/// Recovers (level, clause) pairs from a rendered system text.
std::vector<std::pair<int, std::string>> parse_statement_instructions(
    std::string_view system_text, const ModifierVocabulary& vocab = default_modifiers());

struct StatementPersona {
  std::string system_text;
  std::vector<StatementInstruction> constituents;

  Persona as_persona(std::string id) const { return Persona{std::move(id), std::nullopt, system_text}; }
};

/// statement reference -> instructed level 0..5
using StatementProfile = std::map<std::string, int>;

/// Where a persona sits on an estimate axis: +1 high end, -1 low end.
struct AxisPosition {
  std::string axis;
  int sign = 1;
};

struct ProfileDocument {
  StatementProfile levels;
  std::optional<AxisPosition> axis;
};

ProfileDocument load_profile(std::string_view source);
ProfileDocument load_profile_file(const std::filesystem::path& path);

StatementPersona build_statement_persona(const std::vector<ValueStatement>& catalog,
                                         const StatementProfile& profile,
                                         const ModifierVocabulary& vocab = default_modifiers());

struct ConsistencyEntry {
  std::string reference;
  int instructed = 0;
  double observed_mean = 0.0;
  double deviation = 0.0;
  bool within_tolerance = false;
  std::size_t samples = 0;
  std::optional<bool> directional_agreement;
};

struct ConsistencyReport {
  std::vector<ConsistencyEntry> entries;
  double tolerance = 1.0;

  std::size_t within_count() const;
  /// 1.0 for an empty report.
  double fraction_within() const;
  bool consistent() const { return within_count() == entries.size(); }
};

struct ConsistencyOptions {
  double tolerance = 1.0;
  std::optional<AxisPosition> axis;
  bool include_partial = false;
};

/// Compares each instructed level to the population's mean score on the referenced item.
ConsistencyReport consistency_check(const StatementPersona& persona,
                                    const std::vector<ValueStatement>& catalog,
                                    const Population& population,
                                    const ConsistencyOptions& options = {});

}  // namespace mfq
