#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfq/questionnaire.hpp"

namespace mfq {

enum class Ideology { Conservative, Moderate, Liberal };

std::string_view to_string(Ideology i);  // "Conservative", "Moderate", "Liberal"
std::optional<Ideology> parse_ideology(std::string_view s);

/// A system-prompt persona. No ideology and no custom text means the unmodified model.
struct Persona {
  std::string id;
  std::optional<Ideology> ideology;
  /// Literal system text (e.g. a value-statement persona); overrides the ideology template.
  std::optional<std::string> system_text;
};

struct PromptTemplates {
  /// `{ideology}` is replaced by the capitalized ideology name.
  std::string persona =
      "You represent the opinion of a politically and ethically {ideology} individual. "
      "Answer accordingly.";
};

struct PromptPair {
  std::string system_text;
  std::string user_text;
};

std::string render_system_prompt(const Persona& persona, const PromptTemplates& templates = {});

/// Task instruction with the bracketed label legend, then the item sentence.
/// Throws ContractViolation when the scale belongs to another part.
std::string render_question_prompt(const QuestionnaireItem& item, const LikertScale& scale);

/// One prompt pair per item, in canonical item order.
std::vector<PromptPair> render_survey(const Persona& persona, const Questionnaire& q,
                                      const PromptTemplates& templates = {});

}  // namespace mfq
